"""Exhaustive enumeration of SL_2(Z) (and small SL_3(Z)) points in norm balls.

Every SL_2 domain reduces to a Frobenius bound ``a^2 + b^2 + c^2 + d^2 <= R``.
For each primitive bottom row ``(c, d)`` the solutions of ``ad - bc = 1`` form
the line ``(a0 + t c, b0 + t d)``.  By Lagrange's identity the quadratic in
``t`` has discriminant ``n (R - n) - 1`` with ``n = c^2 + d^2``, independent of
the particular solution, so the admissible ``t`` form an integer interval
whose ends need one integer square root.  Work is split into fixed blocks of
``c`` values; blocks are independent and merged in block order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numba
import numpy as np

from .cartan import DomainSpec, Region, cartan_angles, classify_coords
from .errors import LatticeCountError
from .exact import CongruenceSpec, group_order_mod
from .haar import COVOLUME_SL2Z, NORMALIZATION_ID, volume

FAST_LIMIT = 2**31  # n * (R - n) stays inside int64 below this
HARD_LIMIT = 2**60
C_BLOCK = 32
SL3_LIMIT = 200


# -- numba kernels ---------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _isqrt(x):
    r = np.int64(math.sqrt(x))
    while r * r > x:
        r -= 1
    while (r + 1) * (r + 1) <= x:
        r += 1
    return r


@numba.njit(cache=True, nogil=True)
def _egcd(a, b):
    # returns (g, x, y) with a x + b y = g
    x0, y0, x1, y1 = np.int64(1), np.int64(0), np.int64(0), np.int64(1)
    while b != 0:
        q = a // b
        a, b = b, a - q * b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


@numba.njit(cache=True, nogil=True)
def _count_block(R, c_lo, c_hi):
    total = np.int64(0)
    for c in range(c_lo, c_hi):
        cc = c * c
        if cc > R - 1:
            continue
        dm = _isqrt(R - 1 - cc)
        for d in range(-dm, dm + 1):
            n = cc + d * d
            if n == 0:
                continue
            g, x, y = _egcd(d, -c)
            if g != 1 and g != -1:
                continue
            if g == -1:
                x, y = -x, -y
            D = n * (R - n) - 1
            if D < 0:
                continue
            s = _isqrt(D)
            B = x * c + y * d
            k = (s - B) // n + (B + s) // n + 1
            if k > 0:
                total += k
    return total


@numba.njit(cache=True, nogil=True)
def _list_block(R, c_lo, c_hi, out):
    m = 0
    for c in range(c_lo, c_hi):
        cc = c * c
        if cc > R - 1:
            continue
        dm = _isqrt(R - 1 - cc)
        for d in range(-dm, dm + 1):
            n = cc + d * d
            if n == 0:
                continue
            g, x, y = _egcd(d, -c)
            if g != 1 and g != -1:
                continue
            if g == -1:
                x, y = -x, -y
            D = n * (R - n) - 1
            if D < 0:
                continue
            s = _isqrt(D)
            B = x * c + y * d
            t_lo = -((B + s) // n)
            t_hi = (s - B) // n
            for t in range(t_lo, t_hi + 1):
                out[m, 0] = x + t * c
                out[m, 1] = y + t * d
                out[m, 2] = c
                out[m, 3] = d
                m += 1
    return m


# -- pure Python path for very large R ----------------------------------------------

def _count_block_py(R: int, c_lo: int, c_hi: int) -> int:
    total = 0
    for c in range(c_lo, c_hi):
        if c * c > R - 1:
            continue
        dm = math.isqrt(R - 1 - c * c)
        for d in range(-dm, dm + 1):
            n = c * c + d * d
            if n == 0 or math.gcd(c, d) != 1:
                continue
            x, y = _py_solve(c, d)
            s = math.isqrt(n * (R - n) - 1)
            B = x * c + y * d
            total += max(0, (s - B) // n + (B + s) // n + 1)
    return total


def _py_solve(c: int, d: int) -> tuple[int, int]:
    """(x, y) with x d - y c = 1 for coprime (c, d)."""
    old_r, r = d, -c
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r == -1:
        old_s, old_t = -old_s, -old_t
    return old_s, old_t


# -- public API ------------------------------------------------------------------

def _check_R(R: int) -> int:
    R = int(R)
    if R > HARD_LIMIT:
        raise OverflowError(f"R = {R} exceeds 2**60")
    return R


def _blocks(R: int) -> list[tuple[int, int]]:
    cm = math.isqrt(max(R - 1, 0))
    return [(lo, min(lo + C_BLOCK, cm + 1)) for lo in range(-cm, cm + 1, C_BLOCK)]


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def count_norm_ball(R: int, workers: int = 1) -> int:
    """``|{g in SL_2(Z) : ||g||_F^2 <= R}|`` without listing."""
    R = _check_R(R)
    if R < 2:
        return 0
    kernel = _count_block if R <= FAST_LIMIT else _count_block_py
    parts = _map(lambda lo, hi: int(kernel(R, lo, hi)), _blocks(R), workers)
    return int(sum(parts))


def _list_chunk(R: int, lo: int, hi: int) -> np.ndarray:
    if R > FAST_LIMIT:
        raise OverflowError("listing is limited to R <= 2**31")
    need = int(_count_block(R, lo, hi))
    out = np.empty((need, 4), dtype=np.int64)
    got = _list_block(R, lo, hi, out)
    assert got == need
    return out


def iter_norm_ball(R: int, workers: int = 1) -> Iterator[np.ndarray]:
    """Stream the points of the norm ball as ``(k, 4)`` arrays ``[a, b, c, d]``.

    Chunks are always emitted in the same order whatever the worker count.
    """
    R = _check_R(R)
    if R < 2:
        return
    blocks = _blocks(R)
    if workers <= 1:
        for lo, hi in blocks:
            yield _list_chunk(R, lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        step = 4 * workers
        for i in range(0, len(blocks), step):
            yield from pool.map(lambda b: _list_chunk(R, *b), blocks[i:i + step])


def enumerate_norm_ball(R: int, mode: str = "count", workers: int = 1):
    """Exact count (``mode="count"``) or full ``(n, 4)`` array (``mode="list"``)."""
    if mode == "count":
        return count_norm_ball(R, workers)
    if mode == "list":
        chunks = list(iter_norm_ball(R, workers))
        return np.concatenate(chunks) if chunks else np.empty((0, 4), dtype=np.int64)
    raise ValueError(f"unknown mode {mode!r}")


def brute_force_norm_ball(R: int) -> np.ndarray:
    """Naive search over every entry with ``|x| <= sqrt(R)``; the reference oracle."""
    m = math.isqrt(max(int(R), 0))
    r = np.arange(-m, m + 1, dtype=np.int64)
    c, d = np.meshgrid(r, r, indexing="ij")
    c, d = c.ravel(), d.ravel()
    found = []
    for a in r:
        for b in r:
            ok = (a * d - b * c == 1) & (a * a + b * b + c * c + d * d <= R)
            k = int(ok.sum())
            if k:
                found.append(np.column_stack([np.full(k, a), np.full(k, b), c[ok], d[ok]]))
    return np.concatenate(found) if found else np.empty((0, 4), dtype=np.int64)


# -- domains -----------------------------------------------------------------------

@dataclass(frozen=True)
class EnumerationTask:
    domain: DomainSpec
    congruence: CongruenceSpec | None = None
    mode: str = "count"
    bins: tuple[int, ...] | None = None


@dataclass
class CountRecord:
    param: float
    count: int
    singular_count: int
    volume: float
    covolume: float
    relative_error: float
    normalization: str = NORMALIZATION_ID
    histogram: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, param, count, singular, vol, covol, histogram=None) -> "CountRecord":
        rel = count * covol / vol - 1.0 if vol > 0 else math.nan
        return cls(float(param), int(count), int(singular), float(vol), float(covol), float(rel), histogram=histogram)

    def as_row(self) -> dict:
        return {
            "param": self.param,
            "count": self.count,
            "singular_count": self.singular_count,
            "volume": self.volume,
            "covolume": self.covolume,
            "relative_error": self.relative_error,
        }


def singular_count(R: int, delta: float) -> int:
    """Points with ``s < delta`` inside the ball ``||g||^2 <= R``; counted exactly."""
    if delta <= 0:
        return 0
    limit = 2.0 * math.cosh(delta)
    # strict inequality ||g||^2 < 2 cosh(delta) on integers
    r = math.ceil(limit) - 1
    return count_norm_ball(min(R, r)) if r >= 2 else 0


def _congruence_mask(mats: np.ndarray, cong: CongruenceSpec | None) -> np.ndarray:
    if cong is None or cong.modulus == 1:
        return np.ones(len(mats), dtype=bool)
    return np.all(mats % cong.modulus == np.array(cong.coset), axis=1)


def _bins_shape(task: EnumerationTask) -> tuple[int, int]:
    if task.bins is None:
        return (1, 1)
    if len(task.bins) == 1:
        return (1, int(task.bins[0]))
    return (int(task.bins[0]), int(task.bins[1]))


def enumerate_domain(task: EnumerationTask, workers: int = 1) -> CountRecord:
    """Count lattice points of ``task.domain`` (optionally in a congruence coset).

    Balls without a congruence condition use the counting kernel directly;
    everything else streams the points through the Cartan classifier.  With
    ``bins = (n1, n2)`` (or ``(n2,)``) an angular histogram of the regular
    points over equal arcs of ``phi`` and ``psi`` is attached.
    """
    dom = task.domain
    R = dom.integer_bound()
    index = group_order_mod(task.congruence.modulus) if task.congruence else 1
    covol = COVOLUME_SL2Z * index
    vol = volume(dom)
    ball = dom.kind in ("norm_ball", "hyperbolic_ball")
    if ball and task.congruence is None and task.bins is None:
        total = count_norm_ball(R, workers)
        return CountRecord.build(dom.radius, total, singular_count(R, dom.delta), vol, covol)
    n1, n2 = _bins_shape(task)
    hist = np.zeros((n1, n2), dtype=np.int64)
    inside = sing = 0
    for chunk in iter_norm_ball(R, workers):
        chunk = chunk[_congruence_mask(chunk, task.congruence)]
        if not len(chunk):
            continue
        a, b, c, d = chunk.T
        phi, s, psi, _ = cartan_angles(a, b, c, d)
        frob = np.einsum("ij,ij->i", chunk, chunk)
        region = classify_coords(phi, s, psi, dom, frob)
        sing += int(np.count_nonzero(region == Region.SINGULAR))
        hit = region == Region.INSIDE
        inside += int(np.count_nonzero(hit))
        if task.bins is not None:
            i = np.minimum((phi[hit] / math.pi * n1).astype(np.int64), n1 - 1)
            j = np.minimum((psi[hit] / (2 * math.pi) * n2).astype(np.int64), n2 - 1)
            np.add.at(hist, (i, j), 1)
    count = inside + sing if ball else inside
    return CountRecord.build(dom.radius, count, sing, vol, covol, hist if task.bins is not None else None)


def congruence_count(task: EnumerationTask, workers: int = 1) -> CountRecord:
    if task.congruence is None:
        raise ValueError("task has no congruence condition")
    return enumerate_domain(task, workers)


def coset_counts(R: int, N: int, workers: int = 1) -> dict[tuple[int, int, int, int], int]:
    """Counts of ``||g||^2 <= R`` points in every coset of Gamma(N), keyed by residue."""
    if N < 1:
        raise ValueError("modulus must be >= 1")
    acc = np.zeros(N**4, dtype=np.int64)
    weights = np.array([N**3, N**2, N, 1], dtype=np.int64)
    for chunk in iter_norm_ball(R, workers):
        acc += np.bincount((chunk % N) @ weights, minlength=N**4)
    out = {}
    for key in np.flatnonzero(acc):
        k = int(key)
        out[(k // N**3, (k // N**2) % N, (k // N) % N, k % N)] = int(acc[key])
    return out


# -- SL_3 -------------------------------------------------------------------------

def _short_vectors(R: int, descending: bool = False) -> np.ndarray:
    m = math.isqrt(R)
    r = np.arange(-m, m + 1)
    v = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    n = (v * v).sum(1)
    v, n = v[(n > 0) & (n <= R)], n[(n > 0) & (n <= R)]
    order = np.lexsort((v[:, 2], v[:, 1], v[:, 0], n))
    if descending:
        order = order[::-1]
    return np.ascontiguousarray(v[order]).astype(np.int64)


@numba.njit(cache=True, nogil=True)
def _solve_row(w0, w1, w2, rem):
    # integer (x, y, z) with x w0 + y w1 + z w2 = 1 and x^2 + y^2 + z^2 <= rem;
    # loops over the two coordinates not used for division
    cnt = 0
    m = _isqrt(rem)
    if w2 != 0:
        p, q, piv = w0, w1, w2
    elif w1 != 0:
        p, q, piv = w0, w2, w1
    else:
        p, q, piv = w1, w2, w0
    for x in range(-m, m + 1):
        r2 = rem - x * x
        ym = _isqrt(r2)
        for y in range(-ym, ym + 1):
            num = 1 - x * p - y * q
            if num % piv == 0:
                z = num // piv
                if x * x + y * y + z * z <= rem:
                    cnt += 1
    return cnt


@numba.njit(cache=True, nogil=True)
def _sl3_kernel(R, vecs):
    total = 0
    nv = vecs.shape[0]
    for i in range(nv):
        a0, a1, a2 = vecs[i, 0], vecs[i, 1], vecs[i, 2]
        n1 = a0 * a0 + a1 * a1 + a2 * a2
        if n1 > R - 2:
            continue
        for j in range(nv):
            b0, b1, b2 = vecs[j, 0], vecs[j, 1], vecs[j, 2]
            n2 = b0 * b0 + b1 * b1 + b2 * b2
            rem = R - n1 - n2
            if rem < 1:
                continue
            w0 = a1 * b2 - a2 * b1
            w1 = a2 * b0 - a0 * b2
            w2 = a0 * b1 - a1 * b0
            if w0 == 0 and w1 == 0 and w2 == 0:
                continue
            total += _solve_row(w0, w1, w2, rem)
    return total


def enumerate_sl3_ball(R: int, order: str = "rows") -> int:
    """``|{g in SL_3(Z) : ||g||_F^2 <= R}|`` by exhaustive row-by-row search.

    The first two rows run over all short vectors with norm pruning and the
    third row is solved from ``det = 1``.  ``order="reversed"`` walks the
    vector list in the opposite order, giving an independent traversal.
    """
    R = int(R)
    if R > SL3_LIMIT:
        raise LatticeCountError(f"SL_3 search is capped at R <= {SL3_LIMIT}")
    if order not in ("rows", "reversed"):
        raise ValueError(f"unknown order {order!r}")
    if R < 3:
        return 0
    return int(_sl3_kernel(R, _short_vectors(R, descending=order == "reversed")))


def brute_force_sl3(R: int) -> int:
    """All 3x3 integer matrices with entries bounded by sqrt(R); only for tiny R."""
    m = math.isqrt(R)
    r = np.arange(-m, m + 1)
    rows = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    rows = rows[(rows * rows).sum(1) <= R]
    norms = (rows * rows).sum(1)
    total = 0
    for i, r1 in enumerate(rows):
        ok2 = norms + norms[i] <= R
        for r2 in rows[ok2]:
            rem = R - norms[i] - (r2 * r2).sum()
            w = np.cross(r1, r2)
            total += int(np.count_nonzero((rows @ w == 1) & (norms <= rem)))
    return total
