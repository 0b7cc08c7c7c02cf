"""Exact unadjusted, proxy-adjusted and true counterfactual means.

All quantities are population functionals of a :class:`ModelSpec`; nothing
here samples or estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    ModelSpec,
    c_given_a,
    marginal_c,
    outcome_given_ac,
    p_treated,
    require_valid,
    u_given_a,
)


class DomainError(ValueError):
    """A mean falls outside the domain of the requested effect scale."""


class Scale(str, Enum):
    DIFFERENCE = "difference"
    RATIO = "ratio"
    ODDS_RATIO = "odds-ratio"


ESTIMANDS = ("unadj", "adj", "true")


@dataclass(frozen=True)
class EstimandReport:
    """Counterfactual means indexed by arm: ``mu_adj[a]`` for a in {0, 1}."""

    mu_unadj: tuple
    mu_adj: tuple
    mu_true: tuple
    p_a1: float

    def means(self, kind: str) -> tuple:
        return getattr(self, f"mu_{kind}")

    def to_dict(self) -> dict:
        return {
            "mu_unadj": list(self.mu_unadj),
            "mu_adj": list(self.mu_adj),
            "mu_true": list(self.mu_true),
            "p_a1": self.p_a1,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimandReport":
        return cls(
            tuple(d["mu_unadj"]), tuple(d["mu_adj"]), tuple(d["mu_true"]), float(d["p_a1"])
        )


@dataclass(frozen=True)
class EffectTriple:
    scale: Scale
    effect_unadj: float
    effect_adj: float
    effect_true: float

    def to_dict(self) -> dict:
        return {
            "scale": self.scale.value,
            "effect_unadj": self.effect_unadj,
            "effect_adj": self.effect_adj,
            "effect_true": self.effect_true,
        }


@dataclass(frozen=True)
class AttReport:
    """Effect-on-the-treated pieces.

    E[Y(1) | A=1] is the same observed mean ``y1`` for all three versions,
    so only the Y(0) component differs.
    """

    y1: float
    y0_unadj: float
    y0_adj: float
    y0_true: float
    f_c_given_a1: np.ndarray
    f_u_given_a1: np.ndarray

    def effect(self, kind: str) -> float:
        return self.y1 - getattr(self, f"y0_{kind}")

    def to_dict(self) -> dict:
        return {
            "y1": self.y1,
            "y0_unadj": self.y0_unadj,
            "y0_adj": self.y0_adj,
            "y0_true": self.y0_true,
            "f_c_given_a1": self.f_c_given_a1.tolist(),
            "f_u_given_a1": self.f_u_given_a1.tolist(),
        }


def _weighted(values: np.ndarray, weights: np.ndarray) -> float:
    # undefined levels carry NaN values but zero weight
    keep = weights > 0
    return float(values[keep] @ weights[keep])


def compute_estimands(spec: ModelSpec) -> EstimandReport:
    require_valid(spec)
    f_c = marginal_c(spec).probs
    unadj, adj, true = [], [], []
    for a in (0, 1):
        m = spec.outcome(a)
        unadj.append(float(m @ u_given_a(spec, a).probs))
        adj.append(_weighted(outcome_given_ac(spec, a), f_c))
        true.append(float(m @ spec.pi_u))
    return EstimandReport(tuple(unadj), tuple(adj), tuple(true), p_treated(spec))


def _odds(p: float) -> float:
    return p / (1.0 - p)


def _check_domain(report: EstimandReport, scale: Scale) -> None:
    for kind in ESTIMANDS:
        for a in (0, 1):
            mu = report.means(kind)[a]
            if scale is Scale.RATIO and not mu > 0:
                raise DomainError(f"ratio scale needs positive means; mu_{kind}[{a}] = {mu}")
            if scale is Scale.ODDS_RATIO and not 0 < mu < 1:
                raise DomainError(f"odds-ratio scale needs means in (0, 1); mu_{kind}[{a}] = {mu}")


def contrast(mu1: float, mu0: float, scale: Scale) -> float:
    scale = Scale(scale)
    if scale is Scale.DIFFERENCE:
        return mu1 - mu0
    if scale is Scale.RATIO:
        return mu1 / mu0
    return _odds(mu1) / _odds(mu0)


def domain_ok(report: EstimandReport, scale: Scale) -> bool:
    try:
        _check_domain(report, Scale(scale))
    except DomainError:
        return False
    return True


def effects(report: EstimandReport, scale: Scale = Scale.DIFFERENCE) -> EffectTriple:
    """Treatment effect on the chosen scale for each of the three estimands."""
    scale = Scale(scale)
    _check_domain(report, scale)
    vals = [contrast(report.means(k)[1], report.means(k)[0], scale) for k in ESTIMANDS]
    return EffectTriple(scale, *vals)


def compute_att(spec: ModelSpec) -> AttReport:
    require_valid(spec)
    f_c1 = c_given_a(spec, 1).probs
    f_u1 = u_given_a(spec, 1).probs
    y1 = float(spec.m1 @ f_u1)
    y0_unadj = float(spec.m0 @ u_given_a(spec, 0).probs)
    y0_adj = _weighted(outcome_given_ac(spec, 0), f_c1)
    y0_true = float(spec.m0 @ f_u1)
    return AttReport(y1, y0_unadj, y0_adj, y0_true, f_c1, f_u1)
