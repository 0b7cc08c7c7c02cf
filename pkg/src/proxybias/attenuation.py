"""Attenuation verdicts: does adjusting for the proxy move the effect toward
the truth?

The sign convention is detected from the monotonicity of the propensity
and outcome means.  When both point the same way the unadjusted mean of the
treated arm sits above the adjusted one, which sits above the truth (and the
reverse for the control arm); when they point opposite ways every
inequality flips.  "Attenuation" itself is the direction-free sandwich:
the adjusted effect lies between the unadjusted and the true effect.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dependence import check_prd
from .estimands import (
    EffectTriple,
    EstimandReport,
    Scale,
    compute_att,
    compute_estimands,
    effects,
)
from .model import (
    CMP_TOL,
    Direction,
    ModelSpec,
    MonotoneClass,
    classify_monotone,
    marginal_c,
    outcome_given_ac,
    posterior_u_given_ac,
    posterior_u_given_c,
    propensity_given_c,
    require_valid,
)

SLACK = 1e-12


class ChainDirection(str, Enum):
    AS_STATED = "as_stated"
    FLIPPED = "flipped"
    INAPPLICABLE = "inapplicable"


def _common_sign(*classes: MonotoneClass) -> Optional[int]:
    """+1 / -1 if all classes share a direction (Constant fits both), else None.

    Prefers +1 when both fit.
    """
    signs = frozenset((1, -1))
    for c in classes:
        signs &= c.signs
    if not signs:
        return None
    return 1 if 1 in signs else -1


def chain_direction(spec: ModelSpec, tol: float = CMP_TOL) -> ChainDirection:
    e_cls = classify_monotone(spec.propensity, tol)
    y_sign = _common_sign(classify_monotone(spec.m1, tol), classify_monotone(spec.m0, tol))
    e_sign = _common_sign(e_cls)
    if y_sign is None or e_sign is None:
        return ChainDirection.INAPPLICABLE
    if e_cls.direction is Direction.CONSTANT:
        return ChainDirection.AS_STATED
    return ChainDirection.AS_STATED if y_sign == e_sign else ChainDirection.FLIPPED


@dataclass(frozen=True)
class AttenuationVerdict:
    """Outcome of an attenuation check.

    ``margins`` holds the slack of every inequality in the detected
    direction (non-negative means satisfied); ``lemma4_holds`` covers
    adjusted-vs-true and ``lemma5_holds`` unadjusted-vs-adjusted, per arm.
    """

    scale: Scale
    chain_direction: ChainDirection
    lemma4_holds: dict
    lemma5_holds: dict
    chain_holds: bool
    sandwich_holds: bool
    margins: dict
    effects: EffectTriple
    target: str = "ate"

    @property
    def attenuates(self) -> bool:
        return self.sandwich_holds

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "scale": self.scale.value,
            "chain_direction": self.chain_direction.value,
            "lemma4_holds": {str(a): v for a, v in self.lemma4_holds.items()},
            "lemma5_holds": {str(a): v for a, v in self.lemma5_holds.items()},
            "chain_holds": self.chain_holds,
            "sandwich_holds": self.sandwich_holds,
            "margins": self.margins,
            "effects": self.effects.to_dict(),
        }


def _sandwich(eff: EffectTriple, slack: float) -> tuple[bool, float]:
    lo = min(eff.effect_unadj, eff.effect_true)
    hi = max(eff.effect_unadj, eff.effect_true)
    margin = min(eff.effect_adj - lo, hi - eff.effect_adj)
    return margin >= -slack, margin


def _mean_margins(report: EstimandReport, sign: int) -> dict:
    """Slack of each per-arm inequality, oriented by ``sign`` (+1 as stated)."""
    u, a, t = report.mu_unadj, report.mu_adj, report.mu_true
    return {
        "unadj_vs_adj_arm1": sign * (u[1] - a[1]),
        "adj_vs_true_arm1": sign * (a[1] - t[1]),
        "unadj_vs_adj_arm0": sign * (a[0] - u[0]),
        "adj_vs_true_arm0": sign * (t[0] - a[0]),
    }


def verdict_from_report(
    report: EstimandReport,
    direction: ChainDirection,
    scale: Scale = Scale.DIFFERENCE,
    slack: float = SLACK,
) -> AttenuationVerdict:
    """Build a verdict from precomputed means; all margins derive from ``report``."""
    scale = Scale(scale)
    eff = effects(report, scale)
    sandwich, sandwich_margin = _sandwich(eff, slack)
    margins = {"sandwich": sandwich_margin}
    if direction is ChainDirection.INAPPLICABLE:
        return AttenuationVerdict(scale, direction, {}, {}, False, sandwich, margins, eff)
    sign = 1 if direction is ChainDirection.AS_STATED else -1
    margins.update(_mean_margins(report, sign))
    margins["effect_unadj_vs_adj"] = sign * (eff.effect_unadj - eff.effect_adj)
    margins["effect_adj_vs_true"] = sign * (eff.effect_adj - eff.effect_true)
    ok = {k: v >= -slack for k, v in margins.items()}
    adj_true = {1: ok["adj_vs_true_arm1"], 0: ok["adj_vs_true_arm0"]}
    unadj_adj = {1: ok["unadj_vs_adj_arm1"], 0: ok["unadj_vs_adj_arm0"]}
    chain = (
        all(adj_true.values())
        and all(unadj_adj.values())
        and ok["effect_unadj_vs_adj"]
        and ok["effect_adj_vs_true"]
    )
    return AttenuationVerdict(scale, direction, adj_true, unadj_adj, chain, sandwich, margins, eff)


def verify_theorem1(
    spec: ModelSpec, scale: Scale = Scale.DIFFERENCE, slack: float = SLACK, tol: float = CMP_TOL
) -> AttenuationVerdict:
    """Check the attenuation chain for the average treatment effect."""
    require_valid(spec)
    return verdict_from_report(compute_estimands(spec), chain_direction(spec, tol), scale, slack)


def verify_att_attenuation(
    spec: ModelSpec, slack: float = SLACK, tol: float = CMP_TOL
) -> AttenuationVerdict:
    """Attenuation for the effect on the treated (difference scale).

    Only the control-arm mean differs across the three versions; the chain
    is y0_unadj <= y0_adj <= y0_true when m0 and e move together and flips
    when they move apart.
    """
    require_valid(spec)
    att = compute_att(spec)
    eff = EffectTriple(Scale.DIFFERENCE, att.effect("unadj"), att.effect("adj"), att.effect("true"))
    sandwich, sandwich_margin = _sandwich(eff, slack)
    margins = {"sandwich": sandwich_margin}
    y_sign = _common_sign(classify_monotone(spec.m0, tol))
    e_cls = classify_monotone(spec.propensity, tol)
    e_sign = _common_sign(e_cls)
    if y_sign is None or e_sign is None:
        direction = ChainDirection.INAPPLICABLE
        return AttenuationVerdict(
            Scale.DIFFERENCE, direction, {}, {}, False, sandwich, margins, eff, target="att"
        )
    same = e_cls.direction is Direction.CONSTANT or y_sign == e_sign
    direction = ChainDirection.AS_STATED if same else ChainDirection.FLIPPED
    sign = 1 if same else -1
    margins["unadj_vs_adj_arm0"] = sign * (att.y0_adj - att.y0_unadj)
    margins["adj_vs_true_arm0"] = sign * (att.y0_true - att.y0_adj)
    adj_true = {0: margins["adj_vs_true_arm0"] >= -slack}
    unadj_adj = {0: margins["unadj_vs_adj_arm0"] >= -slack}
    chain = adj_true[0] and unadj_adj[0]
    return AttenuationVerdict(
        Scale.DIFFERENCE, direction, adj_true, unadj_adj, chain, sandwich, margins, eff, target="att"
    )


# ---------------------------------------------------------------------------
# testable implications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservedData:
    """Observable functionals of the proxy: P(A=1 | c), E(Y | a, c), f(c).

    Levels with f(c) = 0 may carry NaN in the conditional arrays.
    """

    propensity_c: np.ndarray
    outcome0_c: np.ndarray
    outcome1_c: np.ndarray
    f_c: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, n), dtype=float) for n in
                ("propensity_c", "outcome0_c", "outcome1_c", "f_c")]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValueError("observed arrays must be 1-d with matching lengths")
        f = arrs[3]
        if np.any(f < 0) or abs(f.sum() - 1) > 1e-9:
            raise ValueError("f_c must be a probability vector")
        for n, a in zip(("propensity_c", "outcome0_c", "outcome1_c", "f_c"), arrs):
            object.__setattr__(self, n, a)

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> "ObservedData":
        return cls(
            propensity_given_c(spec),
            outcome_given_ac(spec, 0),
            outcome_given_ac(spec, 1),
            marginal_c(spec).probs,
        )

    def means(self) -> tuple[tuple, tuple]:
        """(mu_unadj, mu_adj) per arm, from observables only."""
        keep = self.f_c > 0
        f = self.f_c[keep]
        e = self.propensity_c[keep]
        p1 = float(e @ f)
        w = {1: e * f / p1, 0: (1 - e) * f / (1 - p1)}
        y = {0: self.outcome0_c[keep], 1: self.outcome1_c[keep]}
        unadj = tuple(float(y[a] @ w[a]) for a in (0, 1))
        adj = tuple(float(y[a] @ f) for a in (0, 1))
        return unadj, adj


@dataclass(frozen=True)
class ImplicationsReport:
    propensity_monotone: MonotoneClass
    outcome_monotone: dict
    ordering_mu1: bool
    ordering_mu0: bool
    consistent: bool
    convention: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "propensity_monotone": self.propensity_monotone.to_dict(),
            "outcome_monotone": {str(a): c.to_dict() for a, c in self.outcome_monotone.items()},
            "ordering_mu1": self.ordering_mu1,
            "ordering_mu0": self.ordering_mu0,
            "consistent": self.consistent,
            "convention": self.convention,
        }


def testable_implications(
    source: Union[ModelSpec, ObservedData], tol: float = CMP_TOL, slack: float = SLACK
) -> ImplicationsReport:
    """Evaluate the observable consequences of the monotonicity and
    regression-dependence assumptions.

    ``ordering_mu1``/``ordering_mu0`` are the positive-convention orderings
    (adjusted treated mean at most the unadjusted one; unadjusted control
    mean at most the adjusted one).  ``consistent`` asks whether some single
    sign convention explains all observed monotone directions and the
    orderings: the orderings flip exactly when the propensity and outcome
    directions disagree.
    """
    obs = ObservedData.from_spec(source) if isinstance(source, ModelSpec) else source
    e_cls = classify_monotone(obs.propensity_c, tol)
    y_cls = {0: classify_monotone(obs.outcome0_c, tol), 1: classify_monotone(obs.outcome1_c, tol)}
    unadj, adj = obs.means()
    d1 = unadj[1] - adj[1]
    d0 = adj[0] - unadj[0]
    ord1, ord0 = d1 >= -slack, d0 >= -slack

    convention = None
    for e_sign in (1, -1):
        for y_sign in (1, -1):
            if not (e_cls.allows(e_sign) and y_cls[0].allows(y_sign) and y_cls[1].allows(y_sign)):
                continue
            s = e_sign * y_sign
            if s * d1 >= -slack and s * d0 >= -slack:
                convention = {"propensity": e_sign, "outcome": y_sign}
                break
        if convention:
            break
    return ImplicationsReport(e_cls, y_cls, bool(ord1), bool(ord0), convention is not None, convention)


# ---------------------------------------------------------------------------
# assumption diagnosis and counterexample hunting
# ---------------------------------------------------------------------------


def diagnose_assumptions(spec: ModelSpec, tol: float = CMP_TOL) -> list[str]:
    """Names of the failed assumptions, allowing either sign convention.

    "2(i)": outcome means not monotone in a common direction.
    "2(ii)": propensity not monotone.
    "4(i)": U neither positively nor negatively regression dependent on C.
    "4(ii)": no sign under which U is regression dependent on C within both
    arms (and, when 4(i) holds, agreeing with it).
    """
    failed = []
    if _common_sign(classify_monotone(spec.m1, tol), classify_monotone(spec.m0, tol)) is None:
        failed.append("2(i)")
    if _common_sign(classify_monotone(spec.propensity, tol)) is None:
        failed.append("2(ii)")
    post = posterior_u_given_c(spec)
    post_a = [posterior_u_given_ac(spec, a) for a in (0, 1)]
    s_i = {s for s in (1, -1) if check_prd(post, tol, s).holds}
    s_ii = {s for s in (1, -1) if all(check_prd(p, tol, s).holds for p in post_a)}
    if not s_i:
        failed.append("4(i)")
    if not (s_ii & s_i if s_i else s_ii):
        failed.append("4(ii)")
    return failed


class Generator(str, Enum):
    EXP_FAMILY = "exp-family"
    REJECTION_MLR = "rejection-mlr"
    REJECTION_TAPER = "rejection-taper"
    UNCONSTRAINED = "unconstrained"

    @property
    def constrained(self) -> bool:
        return self is not Generator.UNCONSTRAINED


@dataclass(frozen=True)
class HuntConfig:
    generator: Generator = Generator.UNCONSTRAINED
    k_min: int = 2
    k_max: int = 5
    epsilon: float = 0.01
    scale: Scale = Scale.DIFFERENCE

    def __post_init__(self):
        object.__setattr__(self, "generator", Generator(self.generator))
        object.__setattr__(self, "scale", Scale(self.scale))
        if not 2 <= self.k_min <= self.k_max <= 6:
            raise ValueError("need 2 <= k_min <= k_max <= 6")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Per-trial stream; depends only on (seed, index)."""
    return np.random.default_rng([seed, index])


def draw_trial_spec(config: HuntConfig, seed: int, index: int) -> ModelSpec:
    from .families import (
        KernelMode,
        random_assumption_satisfying_spec,
        random_unconstrained_spec,
    )

    rng = trial_rng(seed, index)
    k_u = int(rng.integers(config.k_min, config.k_max + 1))
    gen = config.generator
    if gen is Generator.REJECTION_TAPER:
        k_c = k_u
    else:
        k_c = int(rng.integers(config.k_min, config.k_max + 1))
    if gen is Generator.UNCONSTRAINED:
        return random_unconstrained_spec(k_u, k_c, rng, config.epsilon)
    mode = {
        Generator.EXP_FAMILY: KernelMode.EXP_FAMILY,
        Generator.REJECTION_MLR: KernelMode.REJECTION_MLR,
        Generator.REJECTION_TAPER: KernelMode.REJECTION_TAPER,
    }[gen]
    return random_assumption_satisfying_spec(k_u, k_c, rng, mode, config.epsilon)


@dataclass(frozen=True)
class Finding:
    trial: int
    spec: ModelSpec
    verdict: AttenuationVerdict
    failed_assumptions: tuple

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "spec": self.spec.to_dict(),
            "verdict": self.verdict.to_dict(),
            "failed_assumptions": list(self.failed_assumptions),
        }


def _hunt_one(args) -> Optional[Finding]:
    config, seed, index = args
    spec = draw_trial_spec(config, seed, index)
    verdict = verify_theorem1(spec, config.scale)
    if verdict.sandwich_holds:
        return None
    return Finding(index, spec, verdict, tuple(diagnose_assumptions(spec)))


def hunt_counterexamples(
    config: HuntConfig,
    n_trials: int,
    seed: int,
    workers: int = 1,
    findings_dir: Optional[Union[str, Path]] = None,
) -> list[Finding]:
    """Sample models and keep those where the adjusted effect escapes the
    sandwich, each with its failed assumptions.

    The result depends only on (config, n_trials, seed); ``workers`` > 1
    evaluates trials in parallel processes.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    jobs = [(config, seed, i) for i in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_hunt_one, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        results = [_hunt_one(j) for j in jobs]
    hits = [r for r in results if r is not None]
    if findings_dir is not None:
        write_findings(hits, findings_dir)
    return hits


def write_findings(hits: list[Finding], findings_dir: Union[str, Path]) -> None:
    out = Path(findings_dir)
    out.mkdir(parents=True, exist_ok=True)
    for hit in hits:
        path = out / f"trial_{hit.trial:06d}.json"
        path.write_text(json.dumps(hit.spec.to_dict(), indent=2) + "\n")
