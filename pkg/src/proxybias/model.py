"""Discrete causal models over (U, C, A, Y) and their derived conditionals.

A model is fully described by the marginal of the unmeasured confounder U,
the misclassification kernel P(C | U), the propensity e(u) = P(A=1 | U=u)
and the outcome means m_a(u) = E(Y | A=a, U=u).  C enters only through
P(C | U), so nondifferential mismeasurement holds by construction.

Kernel orientation: rows index C levels, columns index U levels, columns sum
to one.  Levels are ordinal and ascending; nothing here ever reorders them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

STOCH_TOL = 1e-9
CMP_TOL = 1e-12


class InvalidModelError(ValueError):
    """Raised when an operation that needs a valid model gets an invalid one."""

    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        msg = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid model: {msg}")


def _frozen(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability vector over ordered levels."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs, 1))

    def __len__(self) -> int:
        return len(self.probs)

    def is_valid(self, tol: float = STOCH_TOL) -> bool:
        p = self.probs
        return (
            len(p) >= 1
            and bool(np.all(np.isfinite(p)))
            and bool(np.all((p >= 0) & (p <= 1)))
            and abs(p.sum() - 1.0) <= tol
        )


@dataclass(frozen=True)
class CondMatrix:
    """Column-stochastic matrix; entry (i, j) = P(row level i | column level j).

    Columns whose conditioning event has probability zero are flagged in
    ``undefined`` and hold NaN.
    """

    entries: np.ndarray
    undefined: tuple = ()

    def __post_init__(self):
        entries = _frozen(self.entries, 2)
        object.__setattr__(self, "entries", entries)
        undefined = tuple(bool(x) for x in self.undefined) or (False,) * entries.shape[1]
        if len(undefined) != entries.shape[1]:
            raise ValueError("undefined mask must have one flag per column")
        object.__setattr__(self, "undefined", undefined)

    @property
    def shape(self) -> tuple:
        return self.entries.shape

    @property
    def defined_columns(self) -> np.ndarray:
        return np.flatnonzero(~np.array(self.undefined, dtype=bool))

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def is_stochastic(self, tol: float = STOCH_TOL) -> bool:
        e = self.entries[:, self.defined_columns]
        return (
            bool(np.all(np.isfinite(e)))
            and bool(np.all((e >= 0) & (e <= 1)))
            and bool(np.all(np.abs(e.sum(axis=0) - 1.0) <= tol))
        )


def as_cond_matrix(kernel) -> CondMatrix:
    if isinstance(kernel, CondMatrix):
        return kernel
    return CondMatrix(np.asarray(kernel, dtype=float))


@dataclass(frozen=True)
class ModelSpec:
    """Full discrete causal model.

    ``c_given_u`` is K_C x K_U with columns summing to one.  Construction only
    checks array dimensionality; use :func:`validate_model` for the rest.
    """

    pi_u: np.ndarray
    c_given_u: np.ndarray
    propensity: np.ndarray
    m1: np.ndarray
    m0: np.ndarray
    epsilon: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "pi_u", _frozen(self.pi_u, 1))
        object.__setattr__(self, "c_given_u", _frozen(self.c_given_u, 2))
        object.__setattr__(self, "propensity", _frozen(self.propensity, 1))
        object.__setattr__(self, "m1", _frozen(self.m1, 1))
        object.__setattr__(self, "m0", _frozen(self.m0, 1))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def k_u(self) -> int:
        return len(self.pi_u)

    @property
    def k_c(self) -> int:
        return self.c_given_u.shape[0]

    @property
    def kernel(self) -> CondMatrix:
        return CondMatrix(self.c_given_u)

    def arm_propensity(self, a: int) -> np.ndarray:
        """P(A=a | U=u) for each u."""
        _check_arm(a)
        return self.propensity if a == 1 else 1.0 - self.propensity

    def outcome(self, a: int) -> np.ndarray:
        _check_arm(a)
        return self.m1 if a == 1 else self.m0

    def replace(self, **changes) -> "ModelSpec":
        fields = dict(
            pi_u=self.pi_u,
            c_given_u=self.c_given_u,
            propensity=self.propensity,
            m1=self.m1,
            m0=self.m0,
            epsilon=self.epsilon,
        )
        fields.update(changes)
        return ModelSpec(**fields)

    def to_dict(self) -> dict:
        return {
            "pi_u": self.pi_u.tolist(),
            "c_given_u": self.c_given_u.tolist(),
            "propensity": self.propensity.tolist(),
            "m1": self.m1.tolist(),
            "m0": self.m0.tolist(),
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        missing = {"pi_u", "c_given_u", "propensity", "m1", "m0", "epsilon"} - set(d)
        if missing:
            raise KeyError(f"model JSON missing fields: {sorted(missing)}")
        return cls(
            pi_u=d["pi_u"],
            c_given_u=d["c_given_u"],
            propensity=d["propensity"],
            m1=d["m1"],
            m0=d["m0"],
            epsilon=d["epsilon"],
        )


def _check_arm(a: int) -> None:
    if a not in (0, 1):
        raise ValueError(f"treatment arm must be 0 or 1, got {a!r}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: Optional[int]
    message: str


def validate_model(spec: ModelSpec, tol: float = STOCH_TOL) -> list[Violation]:
    """Return every violated model invariant; an empty list means valid.

    Indices in messages are 1-based, matching level labels.
    """
    out: list[Violation] = []
    k = spec.k_u
    eps = spec.epsilon

    if not (0.0 < eps <= 0.5):
        out.append(Violation("epsilon", None, f"epsilon {eps} not in (0, 0.5]"))

    if k < 1:
        out.append(Violation("pi_u", None, "pi_u is empty"))
    for name in ("propensity", "m1", "m0"):
        n = len(getattr(spec, name))
        if n != k:
            out.append(Violation("dimensions", None, f"{name} has length {n}, expected {k}"))
    if spec.c_given_u.shape[1] != k:
        out.append(
            Violation(
                "dimensions",
                None,
                f"c_given_u has {spec.c_given_u.shape[1]} columns, expected {k}",
            )
        )
    if spec.c_given_u.shape[0] < 1:
        out.append(Violation("dimensions", None, "c_given_u has no rows"))

    pi = spec.pi_u
    for j, p in enumerate(pi, start=1):
        if not (np.isfinite(p) and 0.0 <= p <= 1.0):
            out.append(Violation("pi_u", j, f"pi_u entry {j} = {p} not in [0, 1]"))
    if k and abs(pi.sum() - 1.0) > tol:
        out.append(Violation("pi_u", None, f"pi_u sums to {pi.sum():.12g}, not 1"))

    kern = spec.c_given_u
    for j in range(kern.shape[1]):
        col = kern[:, j]
        if not np.all(np.isfinite(col)) or np.any((col < 0) | (col > 1)):
            out.append(
                Violation("c_given_u", j + 1, f"column {j + 1} has entries outside [0, 1]")
            )
        elif abs(col.sum() - 1.0) > tol:
            out.append(
                Violation(
                    "c_given_u",
                    j + 1,
                    f"column {j + 1} not stochastic (sums to {col.sum():.12g})",
                )
            )

    for j, e in enumerate(spec.propensity, start=1):
        if not np.isfinite(e) or e < eps or e > 1.0 - eps:
            out.append(
                Violation("positivity", j, f"positivity at u={j}: e={e} outside [{eps}, {1 - eps}]")
            )
    for name in ("m1", "m0"):
        vals = getattr(spec, name)
        for j, v in enumerate(vals, start=1):
            if not np.isfinite(v):
                out.append(Violation(name, j, f"{name} entry {j} is not finite"))
    return out


def require_valid(spec: ModelSpec) -> None:
    violations = validate_model(spec)
    if violations:
        raise InvalidModelError(violations)


# ---------------------------------------------------------------------------
# derived distributions
# ---------------------------------------------------------------------------


def _normalize_columns(weights: np.ndarray) -> CondMatrix:
    totals = weights.sum(axis=0)
    undefined = totals <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        post = weights / np.where(undefined, 1.0, totals)
    post[:, undefined] = np.nan
    return CondMatrix(post, tuple(undefined))


def marginal_c(spec: ModelSpec) -> Pmf:
    """f(c) = sum_u P(C=c | U=u) pi(u)."""
    require_valid(spec)
    return Pmf(spec.c_given_u @ spec.pi_u)


def bayes_invert(c_given_u, weights) -> CondMatrix:
    """Invert a kernel P(C | U) against (unnormalized) weights on U.

    Returns the K_U x K_C matrix proportional to P(C=c | U=u) w(u) in each
    column c.
    """
    kern = np.asarray(c_given_u, dtype=float)
    joint = kern.T * np.asarray(weights, dtype=float)[:, None]  # (u, c)
    return _normalize_columns(joint)


def posterior_u_given_c(spec: ModelSpec) -> CondMatrix:
    """Bayes inversion of the kernel: K_U x K_C matrix of P(U=u | C=c)."""
    require_valid(spec)
    return bayes_invert(spec.c_given_u, spec.pi_u)


def posterior_u_given_ac(spec: ModelSpec, a: int) -> CondMatrix:
    """P(U=u | A=a, C=c) as a K_U x K_C matrix."""
    require_valid(spec)
    return bayes_invert(spec.c_given_u, spec.arm_propensity(a) * spec.pi_u)


def propensity_given_c(spec: ModelSpec) -> np.ndarray:
    """P(A=1 | C=c); NaN at levels with f(c) = 0."""
    post = posterior_u_given_c(spec)
    return spec.propensity @ post.entries


def outcome_given_ac(spec: ModelSpec, a: int) -> np.ndarray:
    """E(Y | A=a, C=c); NaN at levels with f(c) = 0."""
    post = posterior_u_given_ac(spec, a)
    return spec.outcome(a) @ post.entries


def u_given_a(spec: ModelSpec, a: int) -> Pmf:
    """f(u | A=a), proportional to P(A=a | u) pi(u)."""
    require_valid(spec)
    w = spec.arm_propensity(a) * spec.pi_u
    return Pmf(w / w.sum())


def c_given_a(spec: ModelSpec, a: int) -> Pmf:
    """f(c | A=a) = sum_u P(C=c | u) f(u | A=a)."""
    return Pmf(spec.c_given_u @ u_given_a(spec, a).probs)


def p_treated(spec: ModelSpec) -> float:
    require_valid(spec)
    return float(spec.propensity @ spec.pi_u)


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


class Direction(str, Enum):
    NON_DECREASING = "NonDecreasing"
    NON_INCREASING = "NonIncreasing"
    CONSTANT = "Constant"
    NON_MONOTONE = "NonMonotone"


@dataclass(frozen=True)
class MonotoneClass:
    direction: Direction
    witness: Optional[tuple] = None

    def allows(self, sign: int) -> bool:
        """True if compatible with non-decreasing (+1) or non-increasing (-1)."""
        if self.direction is Direction.CONSTANT:
            return True
        if sign > 0:
            return self.direction is Direction.NON_DECREASING
        return self.direction is Direction.NON_INCREASING

    @property
    def signs(self) -> frozenset:
        return frozenset(s for s in (1, -1) if self.allows(s))

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "witness": list(self.witness) if self.witness else None,
        }


def classify_monotone(values, tol: float = CMP_TOL) -> MonotoneClass:
    """Classify a sequence as non-decreasing, non-increasing, constant or neither.

    NaN entries (undefined levels) are skipped.  The witness for a
    non-monotone sequence is the first 1-based index pair whose step
    contradicts the direction set by the earliest strict step.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or len(vals) < 1:
        raise ValueError("classify_monotone needs a non-empty 1-d sequence")
    idx = np.flatnonzero(~np.isnan(vals))
    v = vals[idx]
    d = np.diff(v)
    up = bool(np.all(d >= -tol))
    down = bool(np.all(d <= tol))
    if up and down:
        return MonotoneClass(Direction.CONSTANT)
    if up:
        return MonotoneClass(Direction.NON_DECREASING)
    if down:
        return MonotoneClass(Direction.NON_INCREASING)
    first = np.flatnonzero(np.abs(d) > tol)[0]
    sign = np.sign(d[first])
    bad = np.flatnonzero(sign * d < -tol)[0]
    return MonotoneClass(Direction.NON_MONOTONE, (int(idx[bad]) + 1, int(idx[bad + 1]) + 1))
