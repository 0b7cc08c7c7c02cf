"""Command-line interface.

JSON goes to stdout, human-readable summaries to stderr.  Exit codes:
0 success, 1 verdict or golden check failed, 2 malformed input or bad
configuration, 3 invalid model or matrix, 4 effect-scale domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .attenuation import (
    Generator,
    HuntConfig,
    verify_att_attenuation,
    verify_theorem1,
    write_findings,
)
from .dependence import kernel_profile
from .estimands import DomainError, Scale, compute_estimands
from .families import (
    GabrielConfig,
    GabrielSetting,
    RejectionBudgetError,
    gabriel_outcome_slopes,
    gabriel_propensity_curve,
)
from .fixtures import check_all
from .io import ParseError, dumps_json, load_spec, read_matrix_csv, stochastic_violations
from .model import CMP_TOL, InvalidModelError, classify_monotone
from .sweep import run_sweep

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_DOMAIN = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _emit(obj) -> None:
    sys.stdout.write(dumps_json(obj))


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _tolerance(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not (np.isfinite(value) and value >= 0):
        raise argparse.ArgumentTypeError(f"tolerance must be finite and >= 0, got {value}")
    return value


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _load_prior(path: Path, k_u: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot read prior JSON {path}: {exc}")
    if not isinstance(data, dict) or "pi_u" not in data:
        raise CliError(EXIT_PARSE, "prior JSON must be an object with a 'pi_u' field")
    try:
        pi = np.array(data["pi_u"], dtype=float)
        e = np.array(data["propensity"], dtype=float) if "propensity" in data else None
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"malformed prior JSON: {exc}")
    for name, arr in (("pi_u", pi), ("propensity", e)):
        if arr is not None and arr.shape != (k_u,):
            raise CliError(EXIT_PARSE, f"{name} must have length {k_u} (one per matrix column)")
    if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
        raise CliError(EXIT_INVALID, "pi_u is not a probability vector")
    if e is not None and np.any((e < 0) | (e > 1)):
        raise CliError(EXIT_INVALID, "propensity entries must lie in [0, 1]")
    return pi, e


def cmd_check(args) -> int:
    try:
        mat = read_matrix_csv(args.matrix)
    except ParseError as exc:
        raise CliError(EXIT_PARSE, str(exc))
    bad = stochastic_violations(mat)
    if bad:
        raise CliError(EXIT_INVALID, "; ".join(v.message for v in bad))
    pi = e = None
    if args.prior is not None:
        pi, e = _load_prior(Path(args.prior), mat.shape[1])
    prof = kernel_profile(mat, pi, e, tol=args.tol)
    _emit(prof.to_dict())
    _note(f"region: {prof.region()}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        spec = load_spec(args.model)
    except ParseError as exc:
        raise CliError(EXIT_PARSE, str(exc))
    except InvalidModelError as exc:
        raise CliError(EXIT_INVALID, str(exc))
    try:
        verdict = verify_theorem1(spec, Scale(args.scale), tol=args.tol)
    except DomainError as exc:
        raise CliError(EXIT_DOMAIN, str(exc))
    out = {
        "estimands": compute_estimands(spec).to_dict(),
        "verdict": verdict.to_dict(),
        "att_verdict": verify_att_attenuation(spec, tol=args.tol).to_dict(),
    }
    _emit(out)
    eff = verdict.effects
    _note(
        f"{verdict.scale.value} effects: unadjusted {eff.effect_unadj:.6g}, "
        f"adjusted {eff.effect_adj:.6g}, true {eff.effect_true:.6g}; "
        f"chain {verdict.chain_direction.value}, "
        f"attenuation {'holds' if verdict.sandwich_holds else 'FAILS'}"
    )
    return EXIT_OK if verdict.sandwich_holds else EXIT_FAIL


def cmd_scan(args) -> int:
    config = HuntConfig(generator=Generator(args.generator), scale=Scale(args.scale))
    try:
        summary = run_sweep(config, args.trials, args.seed, workers=args.workers, tol=args.tol)
    except RejectionBudgetError as exc:
        raise CliError(EXIT_PARSE, str(exc))
    if args.out is not None:
        write_findings(list(summary.findings), args.out)
    _emit(summary.to_dict())
    _note(
        f"{summary.trials} trials ({summary.generator}): "
        f"{summary.assumption_satisfying} satisfy the assumptions, "
        f"{summary.chain_failures} chain failures, "
        f"{summary.implication_failures} implication failures"
    )
    constrained_broken = config.generator.constrained and (
        summary.chain_failures or summary.implication_failures
        or summary.observed_monotone_failures or summary.att_failures
    )
    return EXIT_FAIL if constrained_broken else EXIT_OK


def _repro_gabriel(args) -> int:
    setting = GabrielSetting(args.gabriel)
    config = GabrielConfig(setting, p_treated=args.p_treated)
    if setting in (GabrielSetting.S4, GabrielSetting.S5):
        slopes = gabriel_outcome_slopes(config)
        _emit({"setting": setting.value, **slopes.to_dict()})
        _note(
            f"{setting.value}: slope in u is {slopes.slope_a0:g} for a=0 and "
            f"{slopes.slope_a1:g} for a=1; outcome monotonicity "
            f"{'holds' if slopes.assumption_2i_holds else 'violated'}"
        )
        return EXIT_OK
    curve = gabriel_propensity_curve(config)
    classes = {
        ("all" if x is None else str(x)): classify_monotone(p).to_dict()
        for x, p in curve.by_x().items()
    }
    if args.out is None:
        sys.stdout.write(curve.to_csv())
    else:
        Path(args.out).write_text(curve.to_csv())
        _emit(
            {
                "setting": setting.value,
                "csv": str(args.out),
                "points": int(len(curve.u)),
                "dropped": len(curve.dropped),
                "monotone_class": classes,
            }
        )
    for x, c in classes.items():
        _note(f"{setting.value} propensity curve (x={x}): {c['direction']}")
    return EXIT_OK


def _repro_golden(args) -> int:
    checks = check_all()
    _emit([c.to_dict() for c in checks])
    for c in checks:
        status = "ok" if c.ok else "MISMATCH: " + "; ".join(c.mismatches)
        _note(f"{c.name}: {status}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_FAIL


def cmd_repro(args) -> int:
    if args.appendix_f:
        return _repro_golden(args)
    return _repro_gabriel(args)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxybias",
        description="Exact checks of bias attenuation under a mismeasured confounder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="dependence profile of a P(C|U) matrix")
    p.add_argument("matrix", help="CSV, one row per C level, no header")
    p.add_argument("prior", nargs="?", help="JSON with pi_u and optional propensity")
    p.add_argument("--tol", type=_tolerance, default=CMP_TOL)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify", help="estimands and attenuation verdict for a model")
    p.add_argument("model", help="ModelSpec JSON")
    p.add_argument("--scale", choices=[s.value for s in Scale], default=Scale.DIFFERENCE.value)
    p.add_argument("--tol", type=_tolerance, default=CMP_TOL)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scan", help="seeded sweep and counterexample hunt")
    p.add_argument("--generator", choices=[g.value for g in Generator], default="exp-family")
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", help="directory for counterexample ModelSpec files")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--scale", choices=[s.value for s in Scale], default=Scale.DIFFERENCE.value)
    p.add_argument("--tol", type=_tolerance, default=CMP_TOL)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("repro", help="reproduce counterexample settings or golden fixtures")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--gabriel", choices=[s.value for s in GabrielSetting])
    which.add_argument("--appendix-f", action="store_true", help="re-derive the golden 3x3 examples")
    p.add_argument("--out", help="CSV path for propensity curves (default: stdout)")
    p.add_argument("--p-treated", type=_probability, default=0.5)
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _note(f"error: {exc}")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
