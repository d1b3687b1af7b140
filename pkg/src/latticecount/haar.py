"""Haar volumes, Haar sampling and the numerical well-roundedness probe.

One normalization is used everywhere: Haar measure on SL_2(R) is the product
of hyperbolic area (curvature -1) on G/K with the probability measure on each
K-fibre.  In Cartan coordinates this is ``dphi * sinh(s) ds * dpsi/(2 pi)``
with ``phi`` over [0, pi) and the M-quotient absorbed, so a hyperbolic ball
has volume ``2 pi (cosh t - 1)`` and SL_2(Z) has covolume ``pi / 6`` (the
modular surface has area ``pi / 3`` and -I acts trivially on the plane).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cartan import (
    TWO_PI,
    DomainSpec,
    Region,
    classify_coords,
    cartan_angles,
    expm_sl2,
    rotation,
    _SL2_BASIS,
)
from .errors import InsufficientSamplesError

NORMALIZATION_ID = "hyperbolic-area*K-probability"
COVOLUME_SL2Z = math.pi / 6.0
SAMPLE_BLOCK = 1 << 16


def xi_density(s, group: str = "SL2") -> float:
    """Radial Haar density, the product of ``e^x - e^-x`` over positive roots.

    For ``"SL2"`` ``s`` is the scalar chamber coordinate (single root value
    ``s``); for ``"SL3"`` it is the descending triple of logs ``(a1, a2, a3)``
    summing to zero, with positive roots ``a1-a2, a1-a3, a2-a3``.
    """
    if group == "SL2":
        s = float(s)
        if s < 0:
            raise ValueError("s must lie in the closed chamber (s >= 0)")
        return math.exp(s) - math.exp(-s)
    if group == "SL3":
        a1, a2, a3 = (float(x) for x in s)
        roots = (a1 - a2, a1 - a3, a2 - a3)
        if min(roots) < 0:
            raise ValueError("log a must be non-increasing")
        out = 1.0
        for r in roots:
            out *= math.exp(r) - math.exp(-r)
        return out
    raise ValueError(f"unknown group profile {group!r}")


def ball_volume(t: float) -> float:
    """Volume of the hyperbolic ball ``{s <= t}``."""
    # 2 pi (cosh t - 1) written to stay accurate for small t
    return 4.0 * math.pi * math.sinh(0.5 * t) ** 2


def volume(domain: DomainSpec) -> float:
    if domain.kind == "norm_ball":
        return math.pi * (domain.radius * domain.radius - 2.0)
    base = ball_volume(domain.radius)
    if domain.kind == "hyperbolic_ball":
        return base
    if domain.kind == "sector":
        return domain.arc2_fraction * base
    return domain.arc1_fraction * domain.arc2_fraction * base


def radial_quantile(u, lo: float, hi: float):
    """Inverse CDF of the density ``sinh(s)`` restricted to ``[lo, hi]``."""
    clo, chi = math.cosh(lo), math.cosh(hi)
    return np.arccosh(clo + np.asarray(u) * (chi - clo))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass
class HaarSample:
    phi: np.ndarray
    s: np.ndarray
    psi: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def matrices(self) -> np.ndarray:
        k1 = np.moveaxis(rotation(self.phi), -1, 0)
        k2 = np.moveaxis(rotation(self.psi), -1, 0)
        h = 0.5 * self.s
        a = np.zeros((len(self.s), 2, 2))
        a[:, 0, 0] = np.exp(h)
        a[:, 1, 1] = np.exp(-h)
        return k1 @ a @ k2


def sample_coords(domain: DomainSpec, count: int, seed: int, s_range: tuple[float, float] | None = None) -> HaarSample:
    """Haar-distributed Cartan coordinates on ``domain`` (or on a radial shell of it).

    Samples are produced in fixed blocks of ``SAMPLE_BLOCK`` from independent
    counter-based streams, so the output for a seed never depends on how the
    blocks are scheduled.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = s_range if s_range is not None else (0.0, domain.radial_limit)
    parts = []
    for b in range(-(-count // SAMPLE_BLOCK)):
        n = min(SAMPLE_BLOCK, count - b * SAMPLE_BLOCK)
        rng = _block_rng(seed, b)
        u = rng.random((n, 3)).T  # per-sample triples keep shorter streams a prefix of longer ones
        phi = domain.arc1[0] + u[0] * (domain.arc1[1] - domain.arc1[0])
        s = radial_quantile(u[1], lo, hi)
        psi = domain.arc2[0] + u[2] * (domain.arc2[1] - domain.arc2[0])
        parts.append((phi, s, psi))
    phi, s, psi = (np.concatenate(x) for x in zip(*parts))
    return HaarSample(phi, s, psi)


def sample_haar(domain: DomainSpec, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. Haar samples from ``domain`` as an ``(count, 2, 2)`` array."""
    return sample_coords(domain, count, seed).matrices()


# -- well-roundedness probe ----------------------------------------------------

@dataclass(frozen=True)
class RoundednessReport:
    eps: tuple[float, ...]
    ratios: tuple[float, ...]
    rel_std_err: tuple[float, ...]
    fitted_a: float
    intercept: float


def _inside(h: np.ndarray, domain: DomainSpec) -> np.ndarray:
    phi, s, psi, _ = cartan_angles(h[..., 0, 0], h[..., 0, 1], h[..., 1, 0], h[..., 1, 1])
    return classify_coords(phi, s, psi, domain) != int(Region.OUTSIDE)


def well_roundedness_probe(
    domain: DomainSpec,
    eps_grid,
    seed: int = 0,
    samples: int = 20000,
    pairs: int = 32,
    eps_max: float = 0.1,
    t_min: float = 1.0,
    max_rse: float = 0.10,
) -> RoundednessReport:
    """Monte Carlo estimate of ``vol(O B O) / vol(cap u B v)`` for each eps.

    Points ``g`` are drawn Haar-uniformly from the shell
    ``r(1 - 3 eps) <= s <= r(1 + 3 eps)`` (balls) or from the whole enlarged
    ball (sectors/bisectors, whose angular boundary also moves).  ``g`` is
    counted in the outer set when some sampled ``u g v`` lies in B, and in
    the inner set when all of them do.  ``u, v`` are ``exp(X)`` with X on the
    sphere of radius eps in sl_2.  The same underlying random numbers are used
    for every eps.  A least-squares line through ``log(ratio - 1)`` against
    ``log eps`` gives the Hölder exponent.
    """
    eps_grid = [float(e) for e in eps_grid]
    if len(eps_grid) < 4:
        raise ValueError("need at least 4 eps values")
    if any(not 0 < e <= eps_max for e in eps_grid):
        raise ValueError(f"eps values must lie in (0, {eps_max}]")
    r = domain.radial_limit
    if r < t_min:
        raise ValueError(f"radial size {r:.3g} below t_min = {t_min}")
    rng = _block_rng(seed, 0)
    base_u = rng.random((3, samples))
    dirs = rng.standard_normal((2, samples, pairs, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    shell_only = domain.kind in ("norm_ball", "hyperbolic_ball")
    ratios, rses = [], []
    for eps in eps_grid:
        hi = r * (1 + 3 * eps)
        lo = r * (1 - 3 * eps) if shell_only else 0.0
        phi = domain.arc1[0] + base_u[0] * (domain.arc1[1] - domain.arc1[0]) if shell_only else base_u[0] * math.pi
        psi = domain.arc2[0] + base_u[2] * (domain.arc2[1] - domain.arc2[0]) if shell_only else base_u[2] * TWO_PI
        s = radial_quantile(base_u[1], lo, hi)
        g = HaarSample(phi, s, psi).matrices()
        u = expm_sl2(np.einsum("npi,ijk->npjk", eps * dirs[0], _SL2_BASIS))
        v = expm_sl2(np.einsum("npi,ijk->npjk", eps * dirs[1], _SL2_BASIS))
        inside = _inside(u @ g[:, None] @ v, domain)
        inside = inside | _inside(g, domain)[:, None]  # u = v = I is always allowed
        outer = inside.any(axis=1)
        inner = inside.all(axis=1) & _inside(g, domain)
        v_inner = ball_volume(lo) * (domain.arc1_fraction * domain.arc2_fraction if shell_only else 0.0)
        v_sampled = ball_volume(hi) - ball_volume(lo)
        if shell_only:
            v_sampled *= domain.arc1_fraction * domain.arc2_fraction
        diff = outer.astype(float) - inner.astype(float)
        dmean = diff.mean()
        if dmean <= 0:
            raise InsufficientSamplesError(f"no boundary samples at eps = {eps}")
        rse = diff.std(ddof=1) / math.sqrt(samples) / dmean
        if rse > max_rse:
            raise InsufficientSamplesError(f"relative standard error {rse:.3f} at eps = {eps}")
        plus = v_inner + v_sampled * outer.mean()
        minus = v_inner + v_sampled * inner.mean()
        ratios.append(plus / minus)
        rses.append(rse)
    x = np.log(eps_grid)
    y = np.log(np.array(ratios) - 1.0)
    slope, intercept = np.polyfit(x, y, 1)
    return RoundednessReport(tuple(eps_grid), tuple(ratios), tuple(rses), float(slope), float(intercept))
