"""Seeded sweeps over random models.

Each trial draws its model from ``default_rng([seed, index])`` and runs a
selectable set of checks.  Counts are aggregated into a
:class:`SweepSummary`; sandwich violations are kept as hunter findings.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .attenuation import (
    ChainDirection,
    Finding,
    HuntConfig,
    chain_direction,
    diagnose_assumptions,
    draw_trial_spec,
    testable_implications,
    verdict_from_report,
    verify_att_attenuation,
)
from .dependence import verify_implications
from .estimands import Scale, compute_estimands, domain_ok
from .model import CMP_TOL, Direction, classify_monotone, outcome_given_ac, propensity_given_c

CHECKS = ("attenuation", "implications", "observed_monotone", "att")

_NONDECREASING = (Direction.NON_DECREASING, Direction.CONSTANT)


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    assumption_satisfying: bool
    chain_failure: bool = False
    sandwich_failures: dict = field(default_factory=dict)
    domain_skips: dict = field(default_factory=dict)
    implication_failures: int = 0
    implication_failure_names: tuple = ()
    observed_monotone_failure: bool = False
    att_failure: bool = False
    finding: Optional[Finding] = None


@dataclass(frozen=True)
class SweepSummary:
    """Aggregate counts.

    ``chain_failures`` counts trials where the adjusted difference-scale
    effect leaves the sandwich, plus trials that satisfy the assumptions yet
    fail the detected chain.  For a constrained generator it must be zero.
    """

    generator: str
    seed: int
    trials: int
    assumption_satisfying: int
    chain_failures: int
    implication_failures: int
    sandwich_failures: dict
    domain_skips: dict
    observed_monotone_failures: int
    att_failures: int
    findings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "seed": self.seed,
            "trials": self.trials,
            "assumption_satisfying": self.assumption_satisfying,
            "chain_failures": self.chain_failures,
            "implication_failures": self.implication_failures,
            "sandwich_failures": dict(self.sandwich_failures),
            "domain_skips": dict(self.domain_skips),
            "observed_monotone_failures": self.observed_monotone_failures,
            "att_failures": self.att_failures,
            "findings": [
                {"trial": f.trial, "failed_assumptions": list(f.failed_assumptions)}
                for f in self.findings
            ],
        }


def _observed_regressions_monotone(spec, tol: float) -> bool:
    """Observed propensity and outcome regressions move with the latent ones.

    Only meaningful for models built with non-decreasing e, m0, m1 and a
    positively dependent kernel.
    """
    series = [propensity_given_c(spec), outcome_given_ac(spec, 0), outcome_given_ac(spec, 1)]
    return all(classify_monotone(s, tol).direction in _NONDECREASING for s in series)


def evaluate_trial(
    config: HuntConfig, seed: int, index: int, checks=CHECKS, tol: float = CMP_TOL
) -> TrialOutcome:
    spec = draw_trial_spec(config, seed, index)
    failed = tuple(diagnose_assumptions(spec, tol))
    satisfied = not failed
    out: dict = {"index": index, "assumption_satisfying": satisfied}

    if "attenuation" in checks:
        report = compute_estimands(spec)
        direction = chain_direction(spec, tol)
        sandwich, skips = {}, {}
        diff_verdict = None
        for scale in Scale:
            if not domain_ok(report, scale):
                skips[scale.value] = 1
                continue
            v = verdict_from_report(report, direction, scale)
            if scale is Scale.DIFFERENCE:
                diff_verdict = v
            if not v.sandwich_holds:
                sandwich[scale.value] = 1
        certified_chain_break = (
            satisfied
            and direction is not ChainDirection.INAPPLICABLE
            and not diff_verdict.chain_holds
        )
        out["chain_failure"] = (not diff_verdict.sandwich_holds) or certified_chain_break
        out["sandwich_failures"] = sandwich
        out["domain_skips"] = skips
        if not diff_verdict.sandwich_holds:
            out["finding"] = Finding(index, spec, diff_verdict, failed)

    if "implications" in checks:
        bad = tuple(r.name for r in verify_implications(spec, tol) if not r.passed)
        out["implication_failures"] = len(bad)
        out["implication_failure_names"] = bad
        if satisfied:
            ti = testable_implications(spec, tol)
            if not ti.consistent:
                out["implication_failures"] += 1
                out["implication_failure_names"] = bad + ("testable implications",)

    # the remaining checks only bind when the assumptions are certified
    if "observed_monotone" in checks and satisfied and config.generator.constrained:
        out["observed_monotone_failure"] = not _observed_regressions_monotone(spec, tol)

    if "att" in checks and satisfied:
        out["att_failure"] = not verify_att_attenuation(spec, tol=tol).chain_holds

    return TrialOutcome(**out)


def _evaluate(args) -> TrialOutcome:
    return evaluate_trial(*args)


def run_sweep(
    config: HuntConfig,
    n_trials: int,
    seed: int,
    checks=CHECKS,
    workers: int = 1,
    tol: float = CMP_TOL,
) -> SweepSummary:
    """Run ``n_trials`` seeded trials; the result depends only on
    (config, n_trials, seed, checks, tol)."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    checks = tuple(c for c in CHECKS if c in set(checks))
    jobs = [(config, seed, i, checks, tol) for i in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_evaluate, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        outcomes = [_evaluate(j) for j in jobs]

    def tally(key):
        counts = {s.value: 0 for s in Scale}
        for o in outcomes:
            for k, v in getattr(o, key).items():
                counts[k] += v
        return counts

    return SweepSummary(
        generator=config.generator.value,
        seed=seed,
        trials=n_trials,
        assumption_satisfying=sum(o.assumption_satisfying for o in outcomes),
        chain_failures=sum(o.chain_failure for o in outcomes),
        implication_failures=sum(o.implication_failures for o in outcomes),
        sandwich_failures=tally("sandwich_failures"),
        domain_skips=tally("domain_skips"),
        observed_monotone_failures=sum(o.observed_monotone_failure for o in outcomes),
        att_failures=sum(o.att_failure for o in outcomes),
        findings=tuple(o.finding for o in outcomes if o.finding is not None),
    )
