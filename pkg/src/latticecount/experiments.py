"""Experiment harness: sweeps, exponent fits, angular and congruence reports, sandwich probe."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import linalg

from . import __version__
from .cartan import TWO_PI, DomainSpec, _SL2_BASIS, expm_sl2
from .enumeration import (
    CountRecord,
    EnumerationTask,
    count_norm_ball,
    enumerate_domain,
    iter_norm_ball,
)
from .errors import ConfigError, DegenerateFitError, InsufficientSamplesError
from .exact import CongruenceSpec, group_order_mod, sl2_residues
from .haar import COVOLUME_SL2Z, NORMALIZATION_ID, _block_rng, volume

EPS0_SL2Z = 0.1
PRE_ASYMPTOTIC_T = 50.0
ANGULAR_DELTA = 1e-6  # any value below arccosh(3/2) isolates exactly the s = 0 elements


# -- configuration -----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Flat experiment description; every field has a default.

    ``grid`` holds the domain parameter (T for norm balls, t otherwise).
    """

    kind: str = "sweep"
    domain: str = "norm_ball"
    grid: tuple[float, ...] = ()
    modulus: int = 1
    coset: tuple[int, int, int, int] = (1, 0, 0, 1)
    arc1: tuple[float, float] = (0.0, math.pi)
    arc2: tuple[float, float] = (0.0, TWO_PI)
    delta: float = 0.0
    seed: int = 0
    eta: float = 0.02
    workers: int = 1
    out: str = ""
    format: str = "csv"
    sharp_spectrum: bool = False
    target_exponent: float = 1.0 / 6.0

    def __post_init__(self):
        self.grid = tuple(float(x) for x in self.grid)
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid must be strictly increasing")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.domain not in DomainSpec.KINDS:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.modulus < 1:
            raise ConfigError("modulus must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def domain_at(self, param: float) -> DomainSpec:
        if self.domain in ("norm_ball", "hyperbolic_ball"):
            return DomainSpec(self.domain, param, delta=self.delta)
        if self.domain == "sector":
            return DomainSpec.sector(param, self.arc2, self.delta)
        return DomainSpec.bisector(param, self.arc1, self.arc2, self.delta)

    def congruence(self) -> CongruenceSpec | None:
        return None if self.modulus == 1 else CongruenceSpec(self.modulus, self.coset)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(max(n, 0)))
    return tuple(float(x) for x in text.replace(",", " ").split())


_CONVERTERS: dict[str, Callable[[str], object]] = {
    "kind": str,
    "domain": str,
    "grid": parse_floats,
    "modulus": int,
    "coset": lambda v: tuple(int(x) for x in v.replace(",", " ").split()),
    "arc1": parse_floats,
    "arc2": parse_floats,
    "delta": float,
    "seed": int,
    "eta": float,
    "workers": int,
    "out": str,
    "format": str,
    "sharp_spectrum": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
    "target_exponent": lambda v: float(eval_fraction(v)),
}


def eval_fraction(text: str) -> float:
    """Parse ``"1/6"`` or ``"0.1667"``."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def load_config(path: str, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


# -- sweeps and fits -----------------------------------------------------------------

def sweep(config: ExperimentConfig, sink: Callable[[CountRecord], None] | None = None) -> list[CountRecord]:
    """One record per grid point, in grid order.

    ``sink`` sees each record as soon as it exists, so a caller writing to disk
    keeps everything computed before an abort.
    """
    out = []
    for param in config.grid:
        task = EnumerationTask(config.domain_at(param), config.congruence())
        rec = enumerate_domain(task, config.workers)
        out.append(rec)
        if sink is not None:
            sink(rec)
    return out


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    envelope_C: float
    head_envelope: float
    tail_envelope: float
    target_exponent: float
    n_points: int
    zero_points: int
    verdict: bool


MIN_FIT_POINTS = 8


def fit_exponent(records: Sequence[CountRecord], target_exponent: float) -> FitResult:
    """Log-log fit of ``|relative_error|`` against volume plus an envelope verdict.

    ``envelope_C = max |err| V^target``.  The verdict passes when the envelope
    is finite, the largest value over the last quarter of the points (by
    volume) is at most twice the largest over the rest, and the envelope is
    not still growing at the end (maximum at the largest volume together with
    a fitted slope above ``-target``).  The last rule makes a non-decaying
    error fail at any positive target.
    """
    if len(records) < MIN_FIT_POINTS:
        raise DegenerateFitError(f"need at least {MIN_FIT_POINTS} records, got {len(records)}")
    norms = {getattr(r, "normalization", NORMALIZATION_ID) for r in records}
    if len(norms) > 1:
        raise ValueError(f"records mix Haar normalizations: {sorted(norms)}")
    recs = sorted(records, key=lambda r: r.volume)
    vol = np.array([r.volume for r in recs], dtype=float)
    err = np.abs(np.array([r.relative_error for r in recs], dtype=float))
    nz = err > 0
    if nz.sum() < 2:
        raise DegenerateFitError("fewer than two nonzero errors")
    x, y = np.log(vol[nz]), np.log(err[nz])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    env = err * vol**target_exponent
    q = max(1, len(env) // 4)
    head, tail = float(env[:-q].max()), float(env[-q:].max())
    C = float(env.max())
    growing = int(np.argmax(env)) == len(env) - 1 and slope > -target_exponent
    verdict = bool(np.isfinite(C) and tail <= 2.0 * head and not growing)
    return FitResult(float(slope), float(intercept), r2, C, head, tail, float(target_exponent),
                     int(nz.sum()), int((~nz).sum()), verdict)


def tail_envelope(records: Sequence[CountRecord]) -> np.ndarray:
    """``max_{j >= i} |relative_error_j|`` for each grid index i."""
    err = np.abs([r.relative_error for r in records])
    return np.maximum.accumulate(err[::-1])[::-1]


# -- angular equidistribution --------------------------------------------------------

@dataclass
class AngularReport:
    t: float
    total: int
    singular: int
    histogram: np.ndarray
    discrepancy: float
    product_residual: float

    def rows(self) -> list[dict]:
        n1, n2 = self.histogram.shape
        return [
            {"bin_phi": i, "bin_psi": j, "count": int(self.histogram[i, j]),
             "fraction": self.histogram[i, j] / self.total if self.total else 0.0}
            for i in range(n1) for j in range(n2)
        ]


def angular_report(t: float, num_bins, congruence: CongruenceSpec | None = None, workers: int = 1) -> AngularReport:
    """Histogram of regular lattice points of the hyperbolic ball of radius t.

    ``num_bins = n`` bins the k2-angle; ``num_bins = (n1, n2)`` bins the
    (k1, k2) pair.  Discrepancy compares each cell with its arc fraction; the
    product residual compares each cell with the product of its marginals.
    """
    bins = (1, int(num_bins)) if np.isscalar(num_bins) else tuple(int(b) for b in num_bins)
    if min(bins) < 1:
        raise ValueError("need at least one bin")
    dom = DomainSpec.bisector(t, (0.0, math.pi), (0.0, TWO_PI), ANGULAR_DELTA)
    rec = enumerate_domain(EnumerationTask(dom, congruence, "list", bins), workers)
    hist = rec.histogram
    total = int(hist.sum())
    if total == 0:
        return AngularReport(t, 0, rec.singular_count, hist, 0.0, 0.0)
    frac = hist / total
    disc = float(np.abs(frac - 1.0 / hist.size).max())
    prod = float(np.abs(frac - np.outer(frac.sum(1), frac.sum(0))).max())
    return AngularReport(float(t), total, rec.singular_count, hist, disc, prod)


# -- congruence uniformity --------------------------------------------------------------

@dataclass
class UniformityRow:
    modulus: int
    index: int
    cosets: int
    max_error: float
    mean_error: float
    total: int


@dataclass
class UniformityReport:
    R: int
    rows: list[UniformityRow]
    errors: dict = field(repr=False, default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(r.max_error for r in self.rows)

    @property
    def spread(self) -> float:
        m = [r.max_error for r in self.rows]
        return max(m) - min(m)


def uniformity_report(N_list: Iterable[int], R: int, workers: int = 1) -> UniformityReport:
    """Normalized coset errors ``|count * index * covolume / volume - 1|`` for each level N.

    All levels are filled from one pass over the norm ball.  Cosets that
    receive no points are included with error 1.
    """
    N_list = sorted({int(N) for N in N_list})
    if not N_list or N_list[0] < 1:
        raise ValueError("moduli must be >= 1")
    R = int(R)
    weights = {N: np.array([N**3, N**2, N, 1], dtype=np.int64) for N in N_list}
    acc = {N: np.zeros(N**4, dtype=np.int64) for N in N_list}
    for chunk in iter_norm_ball(R, workers):
        for N in N_list:
            acc[N] += np.bincount((chunk % N) @ weights[N], minlength=N**4)
    vol = math.pi * (R - 2.0)
    rows, errors = [], {}
    for N in N_list:
        index = group_order_mod(N)
        residues = sl2_residues(N) if N > 1 else [(0, 0, 0, 0)]
        if len(residues) != index:
            raise ArithmeticError(f"closure index {index} disagrees with |SL_2(Z/{N})| = {len(residues)}")
        errs = {}
        for res in residues:
            k = int(np.dot(res, weights[N]))
            errs[res] = abs(acc[N][k] * index * COVOLUME_SL2Z / vol - 1.0)
        e = np.array(list(errs.values()))
        rows.append(UniformityRow(N, index, len(residues), float(e.max()), float(e.mean()), int(acc[N].sum())))
        errors[N] = errs
    return UniformityReport(R, rows, errors)


# -- sandwich probe ----------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichResult:
    R: int
    eps: float
    samples: int
    lower: float
    count: int
    upper: float
    sigma_lower: float
    sigma_upper: float

    @property
    def holds(self) -> bool:
        return self.lower - 3 * self.sigma_lower <= self.count <= self.upper + 3 * self.sigma_upper


def _bump_samples(rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
    """Exact draws from chi_eps: ``exp(X)`` with X uniform in the Frobenius eps-ball of sl_2."""
    x = rng.standard_normal((n, 3))
    x *= (eps * rng.random(n) ** (1 / 3) / np.linalg.norm(x, axis=1))[:, None]
    return expm_sl2(np.einsum("ni,ijk->njk", x, _SL2_BASIS))


def _norm_multiplicities(R: int) -> dict[int, int]:
    out, prev = {}, 0
    for n in range(2, R + 1):
        c = count_norm_ball(n)
        if c > prev:
            out[n] = c - prev
        prev = c
    return out


def sandwich_probe(R: int, eps: float, seed: int = 0, samples: int = 10**6, eps0: float = EPS0_SL2Z) -> SandwichResult:
    """Monte Carlo bracket of ``|Gamma cap B|`` for the norm ball ``||g||^2 <= R``.

    Both integrals equal ``sum_gamma P_u[gamma u^-1 in B^pm]`` with ``u ~ chi_eps``.
    ``B^+`` and ``B^-`` are replaced by the radial balls of radius ``r +- 2 sqrt(2) eps``,
    which contain (resp. lie inside) the exact eps-thickenings because an
    element of the eps-ball moves the base point by at most ``sqrt(2) eps``.
    Since ``chi_eps`` is conjugation invariant the probability depends on gamma
    only through ``||gamma||^2``.
    """
    if not 0 < eps <= eps0:
        raise ValueError(f"eps must lie in (0, {eps0}]")
    if samples < 100:
        raise InsufficientSamplesError("need at least 100 samples")
    R = int(R)
    r = math.acosh(R / 2.0)
    shift = 2 * math.sqrt(2) * eps
    reach = math.sqrt(2) * eps
    u = _bump_samples(_block_rng(seed, 0), samples, eps)
    top = u[:, 0, 0] ** 2 + u[:, 0, 1] ** 2
    bot = u[:, 1, 0] ** 2 + u[:, 1, 1] ** 2
    rmax = int(math.floor(2 * math.cosh(r + shift + reach))) + 1
    mult = _norm_multiplicities(rmax)
    est = {}
    for sign in (-1, 1):
        rad = max(r + sign * shift, 0.0)
        limit = 2 * math.cosh(rad)
        fixed = 0.0
        per_sample = np.zeros(samples)
        for n, m in mult.items():
            s = math.acosh(n / 2.0)
            if s <= rad - reach:
                fixed += m
            elif s < rad + reach:
                per_sample += m * (math.exp(s) * top + math.exp(-s) * bot <= limit)
        est[sign] = (fixed + per_sample.mean(), per_sample.std(ddof=1) / math.sqrt(samples))
    count = count_norm_ball(R)
    return SandwichResult(R, float(eps), samples, float(est[-1][0]), count, float(est[1][0]), float(est[-1][1]), float(est[1][1]))


def bump_support_count(h: np.ndarray, eps: float) -> int:
    """Number of gamma with ``chi_eps(h^-1 gamma) != 0``, i.e. terms of ``phi_eps(h)``."""
    h = np.asarray(h, dtype=float)
    bound = int(math.floor((np.linalg.norm(h) * math.exp(eps)) ** 2)) + 1
    hinv = np.linalg.inv(h)
    hits = 0
    for chunk in iter_norm_ball(bound):
        u = hinv @ chunk.reshape(-1, 2, 2).astype(float)
        near = np.linalg.norm(u - np.eye(2), axis=(1, 2)) <= 2 * eps
        for m in u[near]:
            if np.linalg.norm(np.real(linalg.logm(m))) <= eps:
                hits += 1
    return hits


# -- output ------------------------------------------------------------------------------

SWEEP_COLUMNS = ("param", "count", "singular_count", "volume", "covolume", "relative_error")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def to_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    columns = list(columns or (rows[0].keys() if rows else SWEEP_COLUMNS))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def to_json(rows: Sequence[dict], config: ExperimentConfig) -> str:
    meta = {
        "version": __version__,
        "config_hash": config.hash(),
        "seed": config.seed,
        "normalization": NORMALIZATION_ID,
    }
    body = {"meta": meta, "rows": [{k: _jsonable(v) for k, v in r.items()} for r in rows]}
    return json.dumps(body, indent=2) + "\n"


def read_records_csv(text: str) -> list[CountRecord]:
    """Inverse of the sweep CSV; an optional ``normalization`` column is honoured."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        missing = set(SWEEP_COLUMNS) - set(row)
        if missing:
            raise ConfigError(f"missing columns {sorted(missing)}")
        out.append(CountRecord(
            float(row["param"]), int(row["count"]), int(row["singular_count"]), float(row["volume"]),
            float(row["covolume"]), float(row["relative_error"]), row.get("normalization") or NORMALIZATION_ID,
        ))
    return out
