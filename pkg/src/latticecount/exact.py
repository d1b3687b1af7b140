"""Exact integer matrix arithmetic for SL_2(Z) and SL_3(Z).

Python integers never wrap, so overflow is enforced as a range check: an
``IntMat`` whose squared Frobenius norm exceeds ``FROBENIUS_LIMIT`` cannot be
constructed, and every product is re-validated through the constructor.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .errors import ClosureCapError, NotUnimodularError

FROBENIUS_LIMIT = 2**62
CLOSURE_CAP = 10**8


def _det(n: int, e: Sequence[int]) -> int:
    if n == 2:
        return e[0] * e[3] - e[1] * e[2]
    a, b, c, d, f, g, h, i, j = e
    return a * (f * j - g * i) - b * (d * j - g * h) + c * (d * i - f * h)


@dataclass(frozen=True)
class IntMat:
    """Immutable unimodular integer matrix, entries stored row-major."""

    n: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"only 2x2 and 3x3 matrices are supported, got n={self.n}")
        entries = tuple(int(x) for x in self.entries)
        if len(entries) != self.n * self.n:
            raise ValueError(f"expected {self.n * self.n} entries, got {len(entries)}")
        object.__setattr__(self, "entries", entries)
        if sum(x * x for x in entries) > FROBENIUS_LIMIT:
            raise OverflowError("squared Frobenius norm exceeds 2**62")
        if _det(self.n, entries) != 1:
            raise NotUnimodularError(f"determinant {_det(self.n, entries)} != 1")

    @classmethod
    def of(cls, rows: Sequence[Sequence[int]]) -> "IntMat":
        return cls(len(rows), tuple(x for row in rows for x in row))

    @classmethod
    def identity(cls, n: int = 2) -> "IntMat":
        return cls(n, tuple(int(i == j) for i in range(n) for j in range(n)))

    def rows(self) -> list[list[int]]:
        n = self.n
        return [list(self.entries[i * n:(i + 1) * n]) for i in range(n)]

    def to_array(self) -> np.ndarray:
        return np.array(self.rows(), dtype=np.int64)

    def __matmul__(self, other: "IntMat") -> "IntMat":
        return multiply(self, other)

    def __neg__(self) -> "IntMat":
        if self.n != 2:
            raise ValueError("-A has determinant -1 for odd n")
        return IntMat(2, tuple(-x for x in self.entries))

    def __repr__(self) -> str:
        return f"IntMat({self.rows()})"


@dataclass(frozen=True)
class CongruenceSpec:
    """Coset ``coset * Gamma(N)`` of the principal congruence subgroup of level N."""

    modulus: int
    coset: tuple[int, int, int, int] = (1, 0, 0, 1)

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be >= 1")
        N = self.modulus
        c = tuple(int(x) % N for x in self.coset)
        if len(c) != 4:
            raise ValueError("coset must have 4 entries")
        if (c[0] * c[3] - c[1] * c[2] - 1) % N:
            raise NotUnimodularError(f"coset {c} has determinant != 1 mod {N}")
        object.__setattr__(self, "coset", c)

    def contains(self, g: IntMat) -> bool:
        return reduce_entries(g.entries, self.modulus) == self.coset


def multiply(A: IntMat, B: IntMat) -> IntMat:
    if A.n != B.n:
        raise ValueError("dimension mismatch")
    n = A.n
    a, b = A.entries, B.entries
    out = tuple(
        sum(a[i * n + k] * b[k * n + j] for k in range(n))
        for i in range(n)
        for j in range(n)
    )
    return IntMat(n, out)


def inverse(A: IntMat) -> IntMat:
    """Adjugate, which is the exact inverse when det = 1."""
    e = A.entries
    if A.n == 2:
        a, b, c, d = e
        return IntMat(2, (d, -b, -c, a))
    a, b, c, d, f, g, h, i, j = e
    adj = (
        f * j - g * i, c * i - b * j, b * g - c * f,
        g * h - d * j, a * j - c * h, c * d - a * g,
        d * i - f * h, b * h - a * i, a * f - b * d,
    )
    return IntMat(3, adj)


def frobenius_sq(A: IntMat) -> int:
    return sum(x * x for x in A.entries)


@dataclass(frozen=True)
class ModMat:
    """Matrix over Z/N with entries in [0, N); determinant is only 1 mod N."""

    n: int
    modulus: int
    entries: tuple[int, ...]

    def __matmul__(self, other: "ModMat") -> "ModMat":
        if (self.n, self.modulus) != (other.n, other.modulus):
            raise ValueError("dimension or modulus mismatch")
        n, N, a, b = self.n, self.modulus, self.entries, other.entries
        out = tuple(
            sum(a[i * n + k] * b[k * n + j] for k in range(n)) % N
            for i in range(n)
            for j in range(n)
        )
        return ModMat(n, N, out)


def reduce_mod(A: IntMat, N: int) -> ModMat:
    """Entrywise reduction into [0, N)."""
    return ModMat(A.n, N, reduce_entries(A.entries, N))


def reduce_entries(entries: Iterable[int], N: int) -> tuple[int, ...]:
    if N <= 0:
        raise ValueError("modulus must be positive")
    return tuple(int(x) % N for x in entries)


STANDARD_GENERATORS = (IntMat.of([[1, 1], [0, 1]]), IntMat.of([[0, -1], [1, 0]]))


def group_order_mod(N: int, generators: Sequence[IntMat] | None = None, cap: int = CLOSURE_CAP) -> int:
    """Order of the subgroup of SL_2(Z/N) generated by ``generators`` (BFS closure)."""
    if N < 1:
        raise ValueError("modulus must be >= 1")
    gens = [reduce_entries(g.entries, N) for g in (generators or STANDARD_GENERATORS)]
    start = reduce_entries((1, 0, 0, 1), N)
    seen = {start}
    queue = deque([start])
    while queue:
        a, b, c, d = queue.popleft()
        for p, q, r, s in gens:
            nxt = ((a * p + b * r) % N, (a * q + b * s) % N, (c * p + d * r) % N, (c * q + d * s) % N)
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise ClosureCapError(f"closure mod {N} exceeded cap {cap}")
                queue.append(nxt)
    return len(seen)


def sl2_order_exhaustive(N: int) -> int:
    """|SL_2(Z/N)| by direct enumeration of all N**4 residue tuples."""
    if N < 1:
        raise ValueError("modulus must be >= 1")
    if N == 1:
        return 1
    r = np.arange(N, dtype=np.int64)
    a, b, c, d = np.meshgrid(r, r, r, r, indexing="ij")
    return int(np.count_nonzero((a * d - b * c) % N == 1))


def sl2_residues(N: int) -> list[tuple[int, int, int, int]]:
    """All residue tuples of SL_2(Z/N), sorted."""
    return sorted(
        t for t in product(range(N), repeat=4) if (t[0] * t[3] - t[1] * t[2]) % N == 1 % N
    )
