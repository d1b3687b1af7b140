"""Cartan coordinates ``g = k(phi) a_s k(psi)`` for SL_2(R), and SVD-based ones for SL_3(R).

Conventions used throughout the package:

* ``k(theta) = [[cos, -sin], [sin, cos]]``;
* ``a_s = diag(e^{s/2}, e^{-s/2})`` with ``s >= 0``, so ``cosh s = ||g||_F^2 / 2``
  and ``s`` is the hyperbolic distance ``d(g.i, i)``;
* the M = {+-I} ambiguity is fixed by putting ``phi`` in ``[0, pi)`` and
  ``psi`` in ``[0, 2 pi)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotUnimodularError, RegularityError
from .exact import IntMat, frobenius_sq

TWO_PI = 2.0 * math.pi
DET_TOL = 1e-8
# relative slack when comparing a float radius against an exact Frobenius bound
RADIUS_RTOL = 1e-12
SL3_TIE_TOL = 1e-10


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _as_float_matrix(g) -> np.ndarray:
    if isinstance(g, IntMat):
        return np.array(g.rows(), dtype=float)
    return np.asarray(g, dtype=float)


@dataclass(frozen=True)
class CartanCoords:
    """Cartan data ``(k1, a, k2)``.

    For n = 2, ``k1`` and ``k2`` are the rotation angles ``phi`` and ``psi``;
    for n = 3 they are orthogonal matrices.  ``a`` always holds the descending
    logs of the singular values (summing to zero).
    """

    n: int
    k1: object
    a: tuple[float, ...]
    k2: object
    sign_flipped: bool = False
    tied: bool = field(default=False, compare=False)

    @property
    def s(self) -> float:
        # SL_2 radial coordinate; for SL_3 the largest root value a_1 - a_3
        return self.a[0] - self.a[-1]

    @property
    def phi(self) -> float:
        return self.k1

    @property
    def psi(self) -> float:
        return self.k2

    def matrix(self) -> np.ndarray:
        if self.n == 2:
            return rotation(self.k1) @ np.diag(np.exp(self.a)) @ rotation(self.k2)
        return self.k1 @ np.diag(np.exp(self.a)) @ self.k2


def cartan_angles(a, b, c, d):
    """Vectorised SL_2 Cartan decomposition of ``[[a, b], [c, d]]``.

    Returns ``(phi, s, psi)`` arrays.  Uses the split of a 2x2 matrix into a
    rotation-scaling part and a reflection-scaling part, whose norms sum and
    subtract to give the singular values.
    """
    a, b, c, d = (np.asarray(x, dtype=float) for x in (a, b, c, d))
    p, q = 0.5 * (a + d), 0.5 * (c - b)
    r, t = 0.5 * (a - d), 0.5 * (c + b)
    e_norm = np.hypot(p, q)
    f_norm = np.hypot(r, t)
    sigma1 = e_norm + f_norm
    det = a * d - b * c
    s = np.log(sigma1 * sigma1 / det)
    alpha = np.arctan2(q, p)
    flat = (r == 0.0) & (t == 0.0)
    beta = np.where(flat, alpha, np.arctan2(t, r))
    # wall convention (s == 0): k2 = identity up to the sign pushed by M
    th1 = 0.5 * (alpha + beta)
    th2 = 0.5 * (alpha - beta)
    shift = np.floor(th1 / math.pi)
    th1 = th1 - shift * math.pi
    th2 = th2 + shift * math.pi
    over = th1 >= math.pi
    th1 = np.where(over, th1 - math.pi, th1)
    th2 = np.where(over, th2 + math.pi, th2)
    th2 = np.mod(th2, TWO_PI)
    th2 = np.where(th2 >= TWO_PI, th2 - TWO_PI, th2)
    s = np.maximum(s, 0.0)
    return th1, s, th2, (shift + over) % 2 == 1


def cartan_decompose(g) -> CartanCoords:
    """Cartan decomposition of an SL_2 or SL_3 element (integer or real)."""
    m = _as_float_matrix(g)
    n = m.shape[0]
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > DET_TOL:
        raise NotUnimodularError(f"|det - 1| = {abs(det - 1.0):.3g} exceeds {DET_TOL}")
    if n == 2:
        phi, s, psi, flipped = cartan_angles(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
        s = float(s)
        return CartanCoords(2, float(phi), (0.5 * s, -0.5 * s), float(psi), bool(flipped))
    if n == 3:
        return _cartan_sl3(m)
    raise ValueError(f"unsupported dimension {n}")


def _cartan_sl3(m: np.ndarray) -> CartanCoords:
    u, sigma, vh = np.linalg.svd(m)
    flipped = False
    if np.linalg.det(u) < 0:
        u[:, -1] *= -1
        vh[-1, :] *= -1
        flipped = True
    logs = np.log(sigma)
    logs -= logs.mean()
    tied = bool(np.min(np.abs(np.diff(sigma)) / sigma[0]) < SL3_TIE_TOL)
    return CartanCoords(3, u, tuple(float(x) for x in logs), vh, flipped, tied)


def hyperbolic_distance(g) -> float:
    """``d(g.i, i) = arccosh(||g||_F^2 / 2)`` for g in SL_2."""
    if isinstance(g, IntMat):
        half = frobenius_sq(g) / 2.0
    else:
        m = np.asarray(g, dtype=float)
        half = float(np.sum(m * m)) / 2.0
    if half < 1.0:
        if half < 1.0 - 1e-12:
            raise NotUnimodularError("Frobenius norm below that of SO(2); not in SL_2")
        half = 1.0
    return math.acosh(half)


class Region(enum.IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    SINGULAR = 2


@dataclass(frozen=True)
class DomainSpec:
    """One of the counting domains in G = SL_2(R).

    kind is ``"norm_ball"`` (uses ``T``), ``"hyperbolic_ball"``, ``"sector"`` or
    ``"bisector"`` (use ``t``).  ``arc1`` restricts ``phi`` in [0, pi) and
    ``arc2`` restricts ``psi`` in [0, 2 pi); both are half-open intervals.
    Elements with ``s < delta`` are reported as singular.
    """

    kind: str
    radius: float
    arc1: tuple[float, float] = (0.0, math.pi)
    arc2: tuple[float, float] = (0.0, TWO_PI)
    delta: float = 0.0

    KINDS = ("norm_ball", "hyperbolic_ball", "sector", "bisector")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "norm_ball":
            if self.radius * self.radius < 2.0 * (1 - RADIUS_RTOL):
                raise ValueError("norm ball needs T >= sqrt(2)")
        elif self.radius < 0:
            raise ValueError("hyperbolic radius must be >= 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        for (lo, hi), top in ((self.arc1, math.pi), (self.arc2, TWO_PI)):
            if not (0.0 <= lo < hi <= top + 1e-15):
                raise ValueError(f"arc ({lo}, {hi}) must satisfy 0 <= lo < hi <= {top}")
        if self.kind in ("norm_ball", "hyperbolic_ball", "sector") and self.arc1 != (0.0, math.pi):
            raise ValueError(f"{self.kind} does not restrict k1")
        if self.kind in ("norm_ball", "hyperbolic_ball") and self.arc2 != (0.0, TWO_PI):
            raise ValueError(f"{self.kind} does not restrict k2")

    @classmethod
    def norm_ball(cls, T: float, delta: float = 0.0) -> "DomainSpec":
        return cls("norm_ball", float(T), delta=delta)

    @classmethod
    def hyperbolic_ball(cls, t: float, delta: float = 0.0) -> "DomainSpec":
        return cls("hyperbolic_ball", float(t), delta=delta)

    @classmethod
    def sector(cls, t: float, arc2, delta: float = 0.0) -> "DomainSpec":
        return cls("sector", float(t), arc2=tuple(map(float, arc2)), delta=delta)

    @classmethod
    def bisector(cls, t: float, arc1, arc2, delta: float = 0.0) -> "DomainSpec":
        return cls("bisector", float(t), tuple(map(float, arc1)), tuple(map(float, arc2)), delta)

    @property
    def radial_limit(self) -> float:
        """Bound on the hyperbolic radius s."""
        if self.kind == "norm_ball":
            return math.acosh(self.radius * self.radius / 2.0)
        return self.radius

    @property
    def frobenius_limit(self) -> float:
        """Bound on ``||g||_F^2`` equivalent to the radial bound."""
        if self.kind == "norm_ball":
            return self.radius * self.radius
        return 2.0 * math.cosh(self.radius)

    def integer_bound(self) -> int:
        """Largest integer R with ``||g||^2 <= R`` equivalent to membership of the radial ball."""
        return int(math.floor(self.frobenius_limit * (1.0 + RADIUS_RTOL)))

    @property
    def arc1_fraction(self) -> float:
        return (self.arc1[1] - self.arc1[0]) / math.pi

    @property
    def arc2_fraction(self) -> float:
        return (self.arc2[1] - self.arc2[0]) / TWO_PI

    def with_radius(self, radius: float) -> "DomainSpec":
        return DomainSpec(self.kind, float(radius), self.arc1, self.arc2, self.delta)


def classify_coords(phi, s, psi, domain: DomainSpec, frob=None):
    """Vectorised classification; returns an int array of ``Region`` codes.

    When ``frob`` (exact squared norms) is given the radial test is done on
    integers, otherwise on ``s`` with a relative slack of ``RADIUS_RTOL``.
    """
    phi, s, psi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (phi, s, psi)))
    if frob is not None:
        radial = np.asarray(frob) <= domain.integer_bound()
    else:
        radial = s <= domain.radial_limit * (1.0 + RADIUS_RTOL) + 1e-300
    ok = radial.copy()
    if domain.kind in ("sector", "bisector"):
        ok &= (psi >= domain.arc2[0]) & (psi < domain.arc2[1])
    if domain.kind == "bisector":
        ok &= (phi >= domain.arc1[0]) & (phi < domain.arc1[1])
    out = np.where(ok, int(Region.INSIDE), int(Region.OUTSIDE))
    out = np.where(radial & (s < domain.delta), int(Region.SINGULAR), out)
    return out


def classify(g, domain: DomainSpec) -> Region:
    cc = cartan_decompose(g)
    frob = frobenius_sq(g) if isinstance(g, IntMat) else None
    return Region(int(classify_coords(cc.phi, cc.s, cc.psi, domain, frob)))


# -- effective Cartan decomposition ----------------------------------------------

_SL2_BASIS = np.array(
    [
        [[1.0, 0.0], [0.0, -1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, 1.0], [-1.0, 0.0]],
    ]
) / math.sqrt(2.0)


def expm_sl2(X: np.ndarray) -> np.ndarray:
    """Matrix exponential of traceless 2x2 matrices (batched, closed form).

    For traceless X, X^2 = -det(X) I, so exp(X) = C I + S X.
    """
    X = np.asarray(X, dtype=float)
    lam = -(X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0])
    root = np.sqrt(np.abs(lam))
    pos = lam >= 0
    safe = np.where(root > 0, root, 1.0)
    C = np.where(pos, np.cosh(root), np.cos(root))
    S = np.where(root > 0, np.where(pos, np.sinh(root), np.sin(root)) / safe, 1.0)
    eye = np.broadcast_to(np.eye(2), X.shape)
    return C[..., None, None] * eye + S[..., None, None] * X


def sample_sl2_ball(rng: np.random.Generator, count: int, eps: float) -> np.ndarray:
    """``exp(X)`` for X uniform in the Frobenius ball of radius ``eps`` in sl_2."""
    v = rng.standard_normal((count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = eps * rng.random(count) ** (1.0 / 3.0)
    X = np.einsum("ni,ijk->njk", v * r[:, None], _SL2_BASIS)
    return expm_sl2(X)


def _wrap(x):
    return (x + math.pi) % TWO_PI - math.pi


def cartan_displacement(g, u, v) -> np.ndarray:
    """Largest change of ``(phi, s, psi)`` between g and ``u g v``, modulo M.

    ``u`` and ``v`` may be single matrices or stacks of matrices.
    """
    m = _as_float_matrix(g)
    base_phi, base_s, base_psi, _ = cartan_angles(m[0, 0], m[0, 1], m[1, 0], m[1, 1])
    h = np.asarray(u) @ m @ np.asarray(v)
    phi, s, psi, _ = cartan_angles(h[..., 0, 0], h[..., 0, 1], h[..., 1, 0], h[..., 1, 1])
    ds = np.abs(s - base_s)
    best = None
    for shift in (0.0, math.pi):
        dk = np.maximum(np.abs(_wrap(phi - base_phi - shift)), np.abs(_wrap(psi - base_psi - shift)))
        best = dk if best is None else np.minimum(best, dk)
    return np.maximum(ds, best)


@dataclass(frozen=True)
class EffectiveCartanReport:
    eps: float
    delta: float
    samples: int
    max_displacement: float
    ell_observed: float


def effective_cartan_check(g, eps: float, delta: float, samples: int = 4096, seed: int = 0) -> EffectiveCartanReport:
    """Empirical Lipschitz constant of the Cartan components under ``g -> u g v``.

    ``u``, ``v`` are drawn from the ``eps``-ball ``{||u - I||_F <= eps}``; the
    report gives ``max displacement / eps``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0 < eps < delta / 2:
        raise ValueError("need 0 < eps < delta / 2")
    s = cartan_decompose(g).s
    if s < delta:
        raise RegularityError(f"element has s = {s:.3g} < delta = {delta}")
    rng = np.random.default_rng(seed)
    pert = []
    for _ in range(2):
        # rejection keeps exp(X) inside the Frobenius ball around I
        out = np.empty((0, 2, 2))
        while len(out) < samples:
            cand = sample_sl2_ball(rng, samples, eps)
            keep = np.linalg.norm(cand - np.eye(2), axis=(1, 2)) <= eps
            out = np.concatenate([out, cand[keep]])
        pert.append(out[:samples])
    disp = cartan_displacement(g, pert[0], pert[1])
    worst = float(disp.max())
    return EffectiveCartanReport(eps, delta, samples, worst, worst / eps)
