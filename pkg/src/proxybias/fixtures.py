"""Golden 3x3 kernels with their known posteriors and classifications.

Matrices are P(C=i | U=j) with rows indexing C.  ``claims`` lists only the
classifications that are asserted for each kernel (True = holds); a
posterior claim refers to the Bayes inverse under ``pi_u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dependence import TaperMode, check_mlr, check_prd, check_tapered
from .model import bayes_invert

GOLDEN_TOL = 1e-6

NOTIONS = ("PRD", "Tapered", "MLR")


@dataclass(frozen=True)
class GoldenFixture:
    name: str
    kernel: np.ndarray
    claims: dict
    pi_u: Optional[np.ndarray] = None
    posterior: Optional[np.ndarray] = None
    posterior_claims: dict = field(default_factory=dict)

    @property
    def region(self) -> Optional[str]:
        """Venn label when all three notions are claimed."""
        if set(self.claims) != set(NOTIONS):
            return None
        pos = [n for n in NOTIONS if self.claims[n]]
        neg = ["¬" + n for n in NOTIONS if not self.claims[n]]
        return " ∧ ".join(pos + neg)


def _m(rows) -> np.ndarray:
    return np.array(rows, dtype=float)


GOLDEN_KERNELS = (
    GoldenFixture(
        "ex1",
        _m([[0.4, 0.3, 0.30], [0.5, 0.5, 0.25], [0.1, 0.2, 0.45]]),
        claims={"PRD": True},
        pi_u=_m([0.2, 0.5, 0.3]),
        posterior=_m(
            [
                [0.25000, 0.2352941, 0.07843137],
                [0.46875, 0.5882353, 0.39215686],
                [0.28125, 0.1764706, 0.52941176],
            ]
        ),
        posterior_claims={"PRD": False},
    ),
    GoldenFixture(
        "ex2",
        _m([[0.39, 0.32, 0.3], [0.31, 0.37, 0.31], [0.3, 0.31, 0.39]]),
        claims={"Tapered": True},
        pi_u=_m([0.25, 0.4, 0.35]),
        posterior=_m(
            [
                [0.2950076, 0.2320359, 0.2235469],
                [0.3872920, 0.4431138, 0.3695976],
                [0.3177005, 0.3248503, 0.4068554],
            ]
        ),
        posterior_claims={"Tapered": False},
    ),
    GoldenFixture(
        "ex3",
        _m([[0.7, 0.25, 0.05], [0.25, 0.5, 0.25], [0.05, 0.25, 0.7]]),
        claims={"PRD": True, "Tapered": True, "MLR": True},
    ),
    GoldenFixture(
        "ex4",
        _m([[1 / 4, 1 / 6, 1 / 7], [1 / 4, 1 / 3, 1 / 7], [1 / 2, 1 / 2, 5 / 7]]),
        claims={"PRD": True, "Tapered": False, "MLR": False},
    ),
    GoldenFixture(
        "ex5",
        _m([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]]),
        claims={"PRD": True, "Tapered": True, "MLR": False},
    ),
    GoldenFixture(
        "ex6a",
        _m([[1 / 6, 1 / 6, 1 / 6], [1 / 3, 1 / 3, 1 / 3], [1 / 2, 1 / 2, 1 / 2]]),
        claims={"PRD": True, "Tapered": False, "MLR": True},
    ),
    GoldenFixture(
        "ex6b",
        _m([[1 / 3, 0, 0], [1 / 6, 1 / 4, 1 / 4], [1 / 2, 3 / 4, 3 / 4]]),
        claims={"PRD": True, "Tapered": False, "MLR": True},
    ),
)


def fixture(name: str) -> GoldenFixture:
    for f in GOLDEN_KERNELS:
        if f.name == name:
            return f
    raise KeyError(name)


def classify(kernel) -> dict:
    return {
        "PRD": check_prd(kernel).holds,
        "Tapered": check_tapered(kernel, TaperMode.FULL).holds,
        "MLR": check_mlr(kernel).holds,
    }


@dataclass(frozen=True)
class FixtureCheck:
    name: str
    classifications: dict
    posterior_classifications: dict
    posterior_max_diff: Optional[float]
    mismatches: tuple

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "classifications": self.classifications,
            "posterior_classifications": self.posterior_classifications,
            "posterior_max_diff": self.posterior_max_diff,
            "mismatches": list(self.mismatches),
            "ok": self.ok,
        }


def check_fixture(fx: GoldenFixture, tol: float = GOLDEN_TOL) -> FixtureCheck:
    """Re-derive one fixture and list every disagreement with its golden data."""
    mismatches = []
    got = classify(fx.kernel)
    for notion, expected in fx.claims.items():
        if got[notion] != expected:
            mismatches.append(f"{notion}: expected {expected}, got {got[notion]}")
    post_got: dict = {}
    diff = None
    if fx.pi_u is not None:
        post = bayes_invert(fx.kernel, fx.pi_u).entries
        post_got = classify(post)
        for notion, expected in fx.posterior_claims.items():
            if post_got[notion] != expected:
                mismatches.append(f"posterior {notion}: expected {expected}, got {post_got[notion]}")
        if fx.posterior is not None:
            diff = float(np.max(np.abs(post - fx.posterior)))
            if diff > tol:
                mismatches.append(f"posterior differs by {diff:.3g}")
    return FixtureCheck(fx.name, got, post_got, diff, tuple(mismatches))


def check_all(tol: float = GOLDEN_TOL) -> list[FixtureCheck]:
    return [check_fixture(fx, tol) for fx in GOLDEN_KERNELS]
