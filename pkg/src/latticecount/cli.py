"""Command line entry point ``latticecount``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed ``--check``.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import rates
from .cartan import TWO_PI, DomainSpec
from .enumeration import CountRecord, EnumerationTask, brute_force_norm_ball, enumerate_domain, enumerate_sl3_ball
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateFitError,
    InsufficientSamplesError,
    LatticeCountError,
    LocalDivergenceError,
)
from .exact import CongruenceSpec
from .experiments import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    angular_report,
    eval_fraction,
    fit_exponent,
    load_config,
    parse_floats,
    read_records_csv,
    sandwich_probe,
    sweep,
    to_csv,
    to_json,
    uniformity_report,
)
from .haar import NORMALIZATION_ID, volume, well_roundedness_probe

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3

# thresholds used by --check
CHECK_DISCREPANCY = 0.03
CHECK_PRODUCT = 0.05
CHECK_COSET_ERROR = 0.05
CHECK_SPREAD = 0.03
CHECK_HOLDER = 0.9
CHECK_TAIL_INCREMENT = 1e-2
BRUTE_FORCE_MAX_R = 400


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class CheckFailed(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--eta", type=float, help="slack added to target exponents (default 0.02)")
    p.add_argument("--sharp-spectrum", action="store_true", default=None,
                   help="use kappa = 1/p instead of 1/(2 n_e(p))")
    p.add_argument("--check", action="store_true", help="exit 3 if the run fails its acceptance test")


def _domain_args(p: argparse.ArgumentParser, default: str = "norm_ball") -> None:
    p.add_argument("--domain", choices=DomainSpec.KINDS, default=default)
    p.add_argument("--radius", type=float, help="T for norm balls, t otherwise")
    p.add_argument("--arc1", type=float, nargs=2, metavar=("LO", "HI"), default=(0.0, math.pi))
    p.add_argument("--arc2", type=float, nargs=2, metavar=("LO", "HI"), default=(0.0, TWO_PI))
    p.add_argument("--delta", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="latticecount", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("count", help="exact lattice point count in one domain")
    _common(p)
    _domain_args(p)
    p.add_argument("--R", type=int, help="Frobenius bound, overrides --radius for norm balls")
    p.add_argument("--modulus", type=int, default=1)
    p.add_argument("--coset", type=int, nargs=4, default=(1, 0, 0, 1))
    p.add_argument("--group", choices=("SL2", "SL3"), default="SL2")

    p = sub.add_parser("sweep", help="count-vs-volume sweep over a parameter grid")
    _common(p)
    p.add_argument("--domain", choices=DomainSpec.KINDS)
    p.add_argument("--grid", help="start:stop:step or comma list")
    p.add_argument("--modulus", type=int)
    p.add_argument("--target", help="target exponent for --check (default 1/6)")

    for name, help_ in (("sectors", "k2-angle histogram"), ("bisectors", "(k1, k2) histogram")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--t", type=float, required=True, help="hyperbolic radius")
        p.add_argument("--bins", type=int, nargs="+", default=[8] if name == "sectors" else [4, 8])
        p.add_argument("--modulus", type=int, default=1)

    p = sub.add_parser("congruence", help="coset uniformity over principal congruence levels")
    _common(p)
    p.add_argument("--N", type=int, nargs="+", default=[2, 3, 4, 5])
    p.add_argument("--R", type=int, default=400000)

    p = sub.add_parser("volume", help="Haar volume of a domain")
    _common(p)
    _domain_args(p)

    p = sub.add_parser("exponent", help="fit the error exponent of a sweep, or print predicted exponents")
    _common(p)
    p.add_argument("--input", help="sweep CSV to fit (otherwise the config grid is swept)")
    p.add_argument("--target", help="target exponent before slack (default 1/6)")
    p.add_argument("--predict", choices=("slm", "thm41", "thm32", "thm43", "thm61", "cor53", "bisector", "affine"))
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--p", type=Fraction, default=Fraction(2))
    p.add_argument("--a", type=Fraction, default=Fraction(1))
    p.add_argument("--d", type=Fraction, default=Fraction(1))
    p.add_argument("--r", type=Fraction, default=Fraction(0))
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--alpha0", type=Fraction, default=Fraction(0))
    p.add_argument("--alpha", type=Fraction, default=Fraction(1))

    p = sub.add_parser("probe-roundedness", help="Monte Carlo Hölder well-roundedness exponent")
    _common(p)
    _domain_args(p)
    p.add_argument("--eps", type=float, nargs="+", default=[0.08, 0.04, 0.02, 0.01])
    p.add_argument("--samples", type=int, default=20000)

    p = sub.add_parser("sandwich", help="Monte Carlo bracket of a norm ball count")
    _common(p)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.05])
    p.add_argument("--samples", type=int, default=10**6)

    p = sub.add_parser("adelic-hc", help="partial products of local Harish-Chandra integrals")
    _common(p)
    p.add_argument("--p-exp", type=float, nargs="+", default=[4.5, 4.0])
    p.add_argument("--prime-bound", type=int, default=10**5)
    return parser


def _config(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "format": args.format,
        "eta": args.eta,
        "sharp_spectrum": args.sharp_spectrum,
    }
    for key in ("domain", "modulus"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "grid", None):
        overrides["grid"] = parse_floats(args.grid)
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _emit(rows, cfg: ExperimentConfig, columns=None) -> None:
    text = to_json(rows, cfg) if cfg.format == "json" else to_csv(rows, columns)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _domain(args) -> DomainSpec:
    if args.radius is None:
        raise UsageError("--radius is required")
    return DomainSpec(args.domain, args.radius, tuple(args.arc1), tuple(args.arc2), args.delta)


def _record_row(rec: CountRecord, cfg: ExperimentConfig) -> dict:
    row = rec.as_row()
    row["normalization"] = NORMALIZATION_ID
    row["config_hash"] = cfg.hash()
    return row


def _check(ok: bool, what: str) -> None:
    if not ok:
        raise CheckFailed(what)


def cmd_count(args, cfg):
    if args.group == "SL3":
        if args.R is None:
            raise UsageError("--R is required for SL3")
        n = enumerate_sl3_ball(args.R)
        _emit([{"R": args.R, "count": n}], cfg)
        return
    if args.R is not None:
        dom = DomainSpec.norm_ball(math.sqrt(args.R), args.delta)
    else:
        dom = _domain(args)
    cong = None if args.modulus == 1 else CongruenceSpec(args.modulus, tuple(args.coset))
    rec = enumerate_domain(EnumerationTask(dom, cong), cfg.workers)
    row = _record_row(rec, cfg)
    row["orbit_count"] = rec.count // 2  # -I fixes every point of the plane
    _emit([row], cfg)
    if args.check and args.R is not None and args.R <= BRUTE_FORCE_MAX_R and cong is None:
        _check(rec.count == len(brute_force_norm_ball(args.R)), "count disagrees with brute force")


def cmd_sweep(args, cfg):
    sink_rows = []

    def sink(rec):
        sink_rows.append(_record_row(rec, cfg))

    try:
        records = sweep(cfg, sink)
    finally:
        if sink_rows or not cfg.grid:
            _emit(sink_rows, cfg, list(SWEEP_COLUMNS) + ["normalization", "config_hash"])
    if args.check and sink_rows:
        target = eval_fraction(args.target) if args.target else cfg.target_exponent
        fit = fit_exponent(records, target - cfg.eta)
        _check(fit.verdict, f"envelope verdict failed: {fit}")


def cmd_angular(args, cfg):
    bins = args.bins[0] if args.command == "sectors" else tuple(args.bins)
    if args.command == "bisectors" and len(args.bins) != 2:
        raise UsageError("--bins needs two values for bisectors")
    cong = None if args.modulus == 1 else CongruenceSpec(args.modulus)
    rep = angular_report(args.t, bins, cong, cfg.workers)
    rows = rep.rows()
    for r in rows:
        r.update(discrepancy=rep.discrepancy, product_residual=rep.product_residual, singular=rep.singular)
    _emit(rows, cfg)
    if args.check:
        _check(rep.discrepancy <= CHECK_DISCREPANCY, f"discrepancy {rep.discrepancy}")
        if args.command == "bisectors":
            _check(rep.product_residual <= CHECK_PRODUCT, f"product residual {rep.product_residual}")


def cmd_congruence(args, cfg):
    rep = uniformity_report(args.N, args.R, cfg.workers)
    rows = [dict(vars(r), spread=rep.spread) for r in rep.rows]
    _emit(rows, cfg)
    if args.check:
        _check(rep.max_error <= CHECK_COSET_ERROR, f"max coset error {rep.max_error}")
        _check(rep.spread <= CHECK_SPREAD, f"spread {rep.spread}")


def cmd_volume(args, cfg):
    dom = _domain(args)
    _emit([{"domain": dom.kind, "param": dom.radius, "volume": volume(dom)}], cfg)


def _predict(args):
    sharp = bool(args.sharp_spectrum)
    k = args.predict
    if k == "slm":
        return rates.slm_profile(args.m, sharp=True).exponent
    if k == "thm41":
        return rates.thm41_exponent(args.p, args.a, args.d, sharp)
    if k == "thm32":
        return rates.thm32_sector(args.m, args.p, sharp=sharp).error_exponent
    if k == "thm43":
        return rates.thm43_exponent(args.p, args.d, args.r, sharp)
    if k == "thm61":
        return rates.thm61_exponent(args.p, args.a, args.d, sharp)
    if k == "cor53":
        return rates.cor53_theta(args.p, args.d, sharp)
    if k == "bisector":
        return rates.bisector_zeta(args.p, args.dim, args.alpha0, args.alpha, sharp)
    return rates.affine_zeta(args.p, args.dim, sharp)


def cmd_exponent(args, cfg):
    if args.predict:
        value = _predict(args)
        _emit([{"formula": args.predict, "value": float(value), "exact": str(value)}], cfg)
        return
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            records = read_records_csv(fh.read())
    else:
        records = sweep(cfg)
    target = eval_fraction(args.target) if args.target else cfg.target_exponent
    fit = fit_exponent(records, target - cfg.eta)
    _emit([dataclasses.asdict(fit)], cfg)
    if args.check:
        _check(fit.verdict, "envelope verdict failed")


def cmd_probe(args, cfg):
    rep = well_roundedness_probe(_domain(args), args.eps, seed=cfg.seed, samples=args.samples)
    rows = [{"eps": e, "ratio": r, "rel_std_err": s, "fitted_a": rep.fitted_a}
            for e, r, s in zip(rep.eps, rep.ratios, rep.rel_std_err)]
    _emit(rows, cfg)
    if args.check:
        _check(rep.fitted_a >= CHECK_HOLDER, f"fitted exponent {rep.fitted_a}")


def cmd_sandwich(args, cfg):
    rows, ok = [], True
    for eps in args.eps:
        res = sandwich_probe(args.R, eps, cfg.seed, args.samples)
        row = {k: getattr(res, k) for k in ("R", "eps", "samples", "lower", "count", "upper", "sigma_lower", "sigma_upper")}
        row["holds"] = res.holds
        rows.append(row)
        ok &= res.holds
    _emit(rows, cfg)
    if args.check:
        _check(ok, "sandwich violated")


def cmd_adelic(args, cfg):
    rows, ok = [], True
    for p in args.p_exp:
        res = rates.adelic_hc_partial_product(p, args.prime_bound)
        lo = args.prime_bound / 10
        inc = res.increment(lo, args.prime_bound)
        slope = res.loglog_slope()
        rows.append({"p_exp": p, "prime_bound": args.prime_bound, "log_product": float(res.log_partial_products[-1]),
                     "tail_increment": inc, "loglog_slope": slope})
        ok &= inc < CHECK_TAIL_INCREMENT if p > 4 else slope > 0
    _emit(rows, cfg)
    if args.check:
        _check(ok, "adelic dichotomy not observed")


COMMANDS = {
    "count": cmd_count,
    "sweep": cmd_sweep,
    "sectors": cmd_angular,
    "bisectors": cmd_angular,
    "congruence": cmd_congruence,
    "volume": cmd_volume,
    "exponent": cmd_exponent,
    "probe-roundedness": cmd_probe,
    "sandwich": cmd_sandwich,
    "adelic-hc": cmd_adelic,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"latticecount: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckFailed as exc:
        print(f"latticecount: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ConvergenceError, LocalDivergenceError, InsufficientSamplesError, DegenerateFitError,
            OverflowError, ArithmeticError) as exc:
        print(f"latticecount: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, LatticeCountError) as exc:
        print(f"latticecount: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
