"""Predicted exponents and constants, Harish-Chandra functions, adelic products.

Exponent formulas use exact ``Fraction`` arithmetic whenever their inputs are
integers or fractions, and return plain floats otherwise.  No formula carries
the ``+eta`` slack: callers add it when forming a testable bound.

``sharp=True`` replaces ``2 n_e(p)`` by ``p``, which is valid when the
``L^{p+}`` spectrum is uniformly bounded and the sets are bi-K-invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, LatticeCountError, LocalDivergenceError
from .haar import COVOLUME_SL2Z

HC_TOL = 1e-10
PRIME_BOUND_MAX = 10**6


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return x


def n_e(p) -> int:
    """1 for p = 2, otherwise the least even integer >= p/2."""
    p = _exact(p)
    if p < 2:
        raise ValueError(f"integrability exponent must be >= 2, got {p}")
    if p == 2:
        return 1
    k = math.ceil(Fraction(p) / 2) if isinstance(p, Fraction) else math.ceil(p / 2)
    return k + (k % 2)


def kappa(p, sharp: bool = False):
    """Norm-decay exponent ``(2 n_e(p))^-1``, or ``1/p`` when sharp."""
    if sharp:
        n_e(p)  # validates p
        return 1 / _exact(p)
    return Fraction(1, 2 * n_e(p))


def _inv_ne(p, sharp: bool):
    # n_e(p)^-1, the same quantity as 2 * kappa
    return 2 * kappa(p, sharp)


@dataclass(frozen=True)
class SpectralProfile:
    p: object
    sharp: bool = False

    def __post_init__(self):
        n_e(self.p)

    @property
    def n_e(self) -> int:
        return n_e(self.p)

    @property
    def kappa(self):
        return kappa(self.p, self.sharp)


@dataclass(frozen=True)
class GroupProfile:
    """Geometric data entering the error-term formulas.

    ``rho`` is the local dimension actually used: ``dim_G`` for general
    families, ``dim_G - dim_K`` for bi-K-invariant ones.
    """

    name: str
    dim_G: int
    dim_K: int
    rho: int
    a: float
    c: float
    alpha: float
    alpha0: float
    covolume: float
    eps0: float

    def __post_init__(self):
        if not 0 < self.a <= 1:
            raise ValueError("Hölder exponent a must lie in (0, 1]")
        if not 0 <= self.alpha0 < self.alpha:
            raise ValueError("need 0 <= alpha0 < alpha")
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")

    @classmethod
    def builtin(cls, name: str, bi_invariant: bool = True) -> "GroupProfile":
        if name != "SL2":
            raise LatticeCountError(f"no built-in profile for {name!r}: alpha and alpha0 are unsupported")
        # s = 0 is the only wall in rank one, so the singular part has alpha0 = 0.
        # eps0: the closest non-central element of SL_2(Z) to I is unipotent at
        # Frobenius distance 1; a product of four eps-balls stays within 4 eps.
        return cls("SL2", 3, 1, 2 if bi_invariant else 3, 1.0, 1.0, 1.0, 0.0, COVOLUME_SL2Z, 0.25)


def error_constant_A(m0, rho, a, c, vol_O_eps0) -> float:
    """``(4/m0)^(a/(rho+a)) * (c/vol)^(rho/(rho+a))``."""
    if min(m0, rho, a, c, vol_O_eps0) <= 0:
        raise ValueError("all inputs must be positive")
    w = a / (rho + a)
    return (4.0 / m0) ** w * (c / vol_O_eps0) ** (rho / (rho + a))


def counting_exponent(kappa_, a, rho):
    """Relative-error decay exponent in volume, ``kappa * a / (rho + a)``."""
    if a == math.inf:
        return kappa_
    kappa_, a, rho = _exact(kappa_), _exact(a), _exact(rho)
    return kappa_ * a / (rho + a)


def thm41_exponent(p, a, d, sharp: bool = False):
    """Exponent of ``vol(B_T)`` in the error term for S-arithmetic counting."""
    a, d = _exact(a), _exact(d)
    return 1 - kappa(p, sharp) * a / (a + d)


@dataclass(frozen=True)
class SLmProfile:
    m: int
    p: int
    d: int
    a: int
    exponent: Fraction


def slm_profile(m: int, sharp: bool = True) -> SLmProfile:
    """Data for unimodular integer matrices in Hilbert-Schmidt balls.

    Uses the bi-K-invariant dimension ``d = dim SL_m(R)/SO_m`` and the sharp
    spectral exponent by default; with ``sharp=False`` the predicted
    ``1 - 1/(m^3 - m)`` is only recovered for m = 2 and odd m.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    p, d = 2 * (m - 1), m * (m + 1) // 2 - 1
    e = thm41_exponent(p, 1, d, sharp)
    if sharp and e != 1 - Fraction(1, m**3 - m):
        raise ArithmeticError(f"exponent identity fails at m = {m}")
    return SLmProfile(m, p, d, 1, e)


@dataclass(frozen=True)
class SectorExponent:
    main_coeff_rule: str
    error_exponent: Fraction
    relative_exponent: Fraction


def thm32_sector(m: int, p, psi: float = 2 * math.pi, sharp: bool = False) -> SectorExponent:
    """Growth exponent (in t) of the error for lattice points in a spherical cap of H^m."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if not 0 < psi <= 2 * math.pi + 1e-15:
        raise ValueError("psi must lie in (0, 2 pi]")
    rel = _inv_ne(p, sharp) / (m * (m + 1) + 2)
    rule = f"(v_{m} / vol(Gamma\\H^{m})) * psi * exp({m - 1} t), linear in psi"
    return SectorExponent(rule, (m - 1) * (1 - rel), rel)


def thm43_exponent(p, d, r, sharp: bool = False):
    """Exponent for well-balanced families with relative growth ``r`` in [0, 1)."""
    r = _exact(r)
    if not 0 <= r < 1:
        raise ValueError("r must lie in [0, 1)")
    root = 3 * r * r + 1
    if isinstance(root, Fraction):
        s = math.isqrt(root.numerator), math.isqrt(root.denominator)
        sq = Fraction(*s) if Fraction(*s) ** 2 == root else math.sqrt(root)
    else:
        sq = math.sqrt(root)
    return 1 - (1 - sq / 2) * _inv_ne(p, sharp) / (1 + _exact(d))


def thm61_exponent(p, a, d, sharp: bool = False):
    a, d = _exact(a), _exact(d)
    return 1 - kappa(p, sharp) * a / (2 * d + 2 * a)


def cor53_theta(p, dim_sym, sharp: bool = False):
    return kappa(p, sharp) / (1 + _exact(dim_sym))


def bisector_zeta(p, dim_G, alpha0, alpha, sharp: bool = False):
    """``min(1 - alpha0/alpha, kappa / (1 + dim G))``."""
    alpha0, alpha = _exact(alpha0), _exact(alpha)
    if not 0 <= alpha0 < alpha:
        raise ValueError("need 0 <= alpha0 < alpha")
    return min(1 - alpha0 / alpha, kappa(p, sharp) / (1 + _exact(dim_G)))


def affine_zeta(p, dim_G, sharp: bool = False):
    return kappa(p, sharp) / (1 + 3 * _exact(dim_G))


# -- Harish-Chandra function of SL_2(R) -------------------------------------------

def _hc_integrand(v: float, s: float) -> float:
    # theta = atan(e^v) turns the K-average into an integral over the real line
    return math.exp(v - 0.5 * (np.logaddexp(0.0, 2 * v) + np.logaddexp(s, 2 * v - s)))


def harish_chandra_real(s: float) -> float:
    """``Xi(a_s)`` for SL_2(R), where ``s`` is the hyperbolic displacement.

    The K-average of ``Delta(p(a_s k))^(-1/2)`` reduces to
    ``(2/pi) * int_0^{pi/2} (e^s cos^2 + e^-s sin^2)^(-1/2) dtheta``; after the
    substitution ``tan theta = e^v`` the integrand is smooth with its mass
    on ``[0, s]``, which is integrated adaptively on three pieces.
    """
    s = float(s)
    if s < 0:
        raise ValueError("s must be >= 0")
    total = 0.0
    for lo, hi in ((-math.inf, 0.0), (0.0, s), (s, math.inf)):
        if lo == hi:
            continue
        val, err = integrate.quad(_hc_integrand, lo, hi, args=(s,), epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
        if err > HC_TOL * max(val, 1e-300) and err > 1e-300:
            raise ConvergenceError(f"quadrature error {err:.2e} at s = {s}")
    return 2.0 / math.pi * total


def hc_decay_threshold(eta: float = 0.05, t_max: float = 600.0, step: float = 0.5) -> float:
    """Smallest T with ``Xi(t) <= exp(-(1/2 - eta) t)`` for all grid t in [T, t_max]."""
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")

    def excess(t):
        return math.log(harish_chandra_real(t)) + (0.5 - eta) * t

    grid = np.arange(0.0, t_max + step / 2, step)
    vals = np.array([excess(t) for t in grid])
    bad = np.flatnonzero(vals > 0)
    if not len(bad):
        return 0.0
    last = bad[-1]
    if last == len(grid) - 1:
        raise ConvergenceError(f"bound not reached before t_max = {t_max}")
    return float(optimize.brentq(excess, grid[last], grid[last + 1], xtol=1e-10))


# -- Bruhat-Tits tree ---------------------------------------------------------------

def _check_prime(q: int) -> None:
    if q < 2 or any(q % k == 0 for k in range(2, math.isqrt(q) + 1)):
        raise ValueError(f"{q} is not prime")


@lru_cache(maxsize=None)
def tree_spherical_scaled(q: int, n: int) -> Fraction:
    """``q^(n/2) * Xi_q(a^n)`` as an exact rational.

    Averages ``Delta^(-1/2) = q^(h/2)`` over the radius-n sphere of the
    (q+1)-regular tree, ``h`` being the horocycle height relative to a fixed
    end.  The walk from the origin tracks whether it still follows the ray to
    that end: on the ray one branch goes up (h + 1), the others go down.
    """
    _check_prime(q)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Fraction(1)
    # states: (on_ray, k) with k = (h + step) / 2 counting upward steps
    dist = {(True, 1): Fraction(1, q + 1), (False, 0): Fraction(q, q + 1)}
    for _ in range(n - 1):
        nxt: dict = {}
        for (on_ray, k), w in dist.items():
            if on_ray:
                nxt[(True, k + 1)] = nxt.get((True, k + 1), 0) + w / q
                nxt[(False, k)] = nxt.get((False, k), 0) + w * (q - 1) / q
            else:
                nxt[(False, k)] = nxt.get((False, k), 0) + w
        dist = nxt
    return sum((w * Fraction(q) ** k for (_, k), w in dist.items()), Fraction(0))


def tree_spherical(q: int, n: int) -> float:
    return float(tree_spherical_scaled(q, n)) * q ** (-n / 2)


def double_coset_volume(q: int, n: int) -> int:
    """Size of the radius-n sphere in the (q+1)-regular tree (``m(K) = 1``)."""
    _check_prime(q)
    if n < 0:
        raise ValueError("n must be >= 0")
    return 1 if n == 0 else (q + 1) * q ** (n - 1)


# -- adelic products -------------------------------------------------------------------

def primes_up_to(bound: int) -> np.ndarray:
    if bound < 2:
        return np.empty(0, dtype=np.int64)
    sieve = np.ones(bound + 1, dtype=bool)
    sieve[:2] = False
    for k in range(2, math.isqrt(bound) + 1):
        if sieve[k]:
            sieve[k * k::k] = False
    return np.flatnonzero(sieve)


def local_factor(q: int, p_exp: float, rtol: float = 1e-15, max_terms: int = 100000) -> float:
    """``1 + sum_n Xi_q(n)^p * vol(K a^n K)``, truncated once the tail is negligible.

    Uses ``q^(n/2) Xi_q(n) = 1 + n (q-1)/(q+1)``, the closed form of the tree
    recursion (checked against it in the test suite).
    """
    if p_exp <= 2:
        raise LocalDivergenceError(f"local factor at q = {q} diverges for p_exp = {p_exp} <= 2")
    lq = math.log(q)
    total, prev = 1.0, None
    for n in range(1, max_terms):
        log_xi = math.log1p(n * (q - 1) / (q + 1)) - 0.5 * n * lq
        term = math.exp(p_exp * log_xi + math.log(q + 1) + (n - 1) * lq)
        total += term
        if prev is not None and term < prev:
            r = term / prev
            if r < 1 and term * r / (1 - r) < rtol * total:
                return total
        prev = term
    raise ConvergenceError(f"local factor at q = {q} did not converge in {max_terms} terms")


@dataclass(frozen=True)
class AdelicProduct:
    p_exp: float
    primes: np.ndarray
    log_partial_products: np.ndarray

    def log_product_at(self, bound: float) -> float:
        i = np.searchsorted(self.primes, bound, side="right")
        return float(self.log_partial_products[i - 1]) if i else 0.0

    def increment(self, lo: float, hi: float) -> float:
        return self.log_product_at(hi) - self.log_product_at(lo)

    def loglog_slope(self, x_min: float = 100.0) -> float:
        """Least-squares slope of the log partial product against ``log log X``."""
        keep = self.primes >= x_min
        x = np.log(np.log(self.primes[keep].astype(float)))
        return float(np.polyfit(x, self.log_partial_products[keep], 1)[0])


def adelic_hc_partial_product(p_exp: float, prime_bound: int) -> AdelicProduct:
    """Cumulative ``log prod_{q <= X} L_q(p_exp)`` over primes ``q <= prime_bound``."""
    if prime_bound > PRIME_BOUND_MAX:
        raise ValueError(f"prime_bound must be <= {PRIME_BOUND_MAX}")
    if p_exp <= 2:
        raise LocalDivergenceError(f"every local factor diverges for p_exp = {p_exp} <= 2")
    primes = primes_up_to(int(prime_bound))
    logs = np.array([math.log(local_factor(int(q), p_exp)) for q in primes])
    return AdelicProduct(float(p_exp), primes, np.cumsum(logs))
