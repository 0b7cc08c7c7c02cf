"""Positive dependence checkers for ordinal kernels.

Three notions are covered, all evaluated on a column-stochastic matrix whose
columns are the conditioning ("parent") levels and whose rows are the
"child" levels:

* PRD  -- P(child >= x | parent = z) non-decreasing in z for every x.
* MLR  -- every concordant 2x2 cross product is non-negative (TP2).
* taper -- entries decay moving away from the diagonal, horizontally and
  (in full mode) vertically.

Negative dependence is reported by running the positive check on the
row-reversed kernel.  All comparisons are weak, with a shared tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import (
    CMP_TOL,
    CondMatrix,
    ModelSpec,
    as_cond_matrix,
    bayes_invert,
    marginal_c,
    posterior_u_given_ac,
    posterior_u_given_c,
    require_valid,
)


class Status(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    UNDEFINED = "undefined"


@dataclass(frozen=True)
class CheckResult:
    status: Status
    witness: Optional[dict] = None

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def fails(self) -> bool:
        return self.status is Status.FAILS

    def to_dict(self) -> dict:
        return {"status": self.status.value, "witness": self.witness}

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(Status(d["status"]), d.get("witness"))


HOLDS = CheckResult(Status.HOLDS)
UNDEFINED = CheckResult(Status.UNDEFINED)


class TaperMode(str, Enum):
    FULL = "full"
    HORIZONTAL = "horizontal"


def _defined_entries(kernel) -> tuple[np.ndarray, np.ndarray]:
    """Kernel entries restricted to defined columns, plus their 1-based labels."""
    km = as_cond_matrix(kernel)
    cols = km.defined_columns
    return km.entries[:, cols], cols + 1


def _oriented(entries: np.ndarray, sign: int) -> np.ndarray:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return entries if sign > 0 else entries[::-1, :]


def _row_label(r: int, n_rows: int, sign: int) -> int:
    """Map a 0-based row of the oriented kernel back to its 1-based label."""
    return r + 1 if sign > 0 else n_rows - r


def check_prd(kernel, tol: float = CMP_TOL, sign: int = 1) -> CheckResult:
    """Is the row variable regression dependent on the column variable?

    Undefined columns (zero-probability conditioning events) are skipped.
    The witness names the threshold row ``x`` and the two consecutive
    columns at which P(row >= x | column) drops by more than ``tol``.
    """
    entries, labels = _defined_entries(kernel)
    if entries.shape[1] == 0:
        return UNDEFINED
    n_rows = entries.shape[0]
    m = _oriented(entries, sign)
    # survival[x] = P(row >= x+1 | column)
    survival = np.cumsum(m[::-1, :], axis=0)[::-1, :]
    steps = np.diff(survival, axis=1)
    bad = steps < -tol
    # threshold row 1 is identically one; skip it
    bad[0, :] = False
    if not bad.any():
        return HOLDS
    x, z = np.argwhere(bad)[0]
    lo, hi = float(survival[x, z]), float(survival[x, z + 1])
    thr = _row_label(x, n_rows, sign)
    rel = ">=" if sign > 0 else "<="
    witness = {
        "threshold": int(thr),
        "columns": [int(labels[z]), int(labels[z + 1])],
        "values": [lo, hi],
        "inequality": (
            f"P(row {rel} {thr} | col={labels[z]}) = {lo:.7g} > "
            f"P(row {rel} {thr} | col={labels[z + 1]}) = {hi:.7g}"
        ),
    }
    return CheckResult(Status.FAILS, witness)


def mlr_cross_products(entries: np.ndarray) -> np.ndarray:
    """D[r, r', s, s'] = M[r', s'] M[r, s] - M[r, s'] M[r', s].

    Only entries with r < r' and s < s' are meaningful.
    """
    m = np.asarray(entries, dtype=float)
    return (
        m[None, :, None, :] * m[:, None, :, None]
        - m[:, None, None, :] * m[None, :, :, None]
    )


def check_mlr(kernel, tol: float = CMP_TOL, sign: int = 1) -> CheckResult:
    """Monotone likelihood ratio (TP2) check over all index pairs.

    Uses the product form, so zero entries need no special casing.  The
    witness is the lexicographically first violating quadruple
    (row, row', col, col').
    """
    entries, labels = _defined_entries(kernel)
    if entries.shape[1] == 0:
        return UNDEFINED
    n_rows, n_cols = entries.shape
    m = _oriented(entries, sign)
    d = mlr_cross_products(m)
    r_lt = np.triu(np.ones((n_rows, n_rows), dtype=bool), k=1)
    s_lt = np.triu(np.ones((n_cols, n_cols), dtype=bool), k=1)
    mask = r_lt[:, :, None, None] & s_lt[None, None, :, :]
    bad = mask & (d < -tol)
    if not bad.any():
        return HOLDS
    r, rp, s, sp = np.argwhere(bad)[0]
    rows = sorted([_row_label(r, n_rows, sign), _row_label(rp, n_rows, sign)])
    cols = [int(labels[s]), int(labels[sp])]
    lhs = float(m[rp, sp] * m[r, s])
    rhs = float(m[r, sp] * m[rp, s])
    witness = {
        "rows": [int(x) for x in rows],
        "cols": cols,
        "values": [lhs, rhs],
        "inequality": (
            f"f({rows[1]}|{cols[1]}) f({rows[0]}|{cols[0]}) = {lhs:.7g} < "
            f"f({rows[0]}|{cols[1]}) f({rows[1]}|{cols[0]}) = {rhs:.7g}"
            if sign > 0
            else f"negative-orientation cross product {lhs:.7g} < {rhs:.7g}"
        ),
    }
    return CheckResult(Status.FAILS, witness)


@lru_cache(maxsize=64)
def _taper_pairs(k_levels: int, mode: TaperMode) -> tuple:
    """Index arrays of every (should-dominate, dominated) entry pair.

    For row (or column) i and levels j < k on the same side of the
    diagonal, the entry nearer the diagonal must be at least the farther
    one.  Returns (big_rows, big_cols, small_rows, small_cols, clause).
    """
    big, small, clause = [], [], []
    for i in range(k_levels):
        for j in range(k_levels):
            for k in range(j + 1, k_levels):
                if k <= i:
                    big.append((i, k)); small.append((i, j)); clause.append(0)
                if j >= i:
                    big.append((i, j)); small.append((i, k)); clause.append(0)
                if mode is TaperMode.FULL:
                    if k <= i:
                        big.append((k, i)); small.append((j, i)); clause.append(1)
                    if j >= i:
                        big.append((j, i)); small.append((k, i)); clause.append(1)
    big_a = np.array(big, dtype=int).reshape(-1, 2)
    small_a = np.array(small, dtype=int).reshape(-1, 2)
    return big_a[:, 0], big_a[:, 1], small_a[:, 0], small_a[:, 1], np.array(clause, dtype=int)


def check_tapered(kernel, mode: TaperMode = TaperMode.FULL, tol: float = CMP_TOL) -> CheckResult:
    """Tapered misclassification on a square kernel, p_ij = P(C=i | U=j).

    In full mode every entry must be non-increasing moving away from the
    diagonal along its row and along its column; horizontal mode only
    checks rows.  The witness is the largest violation, preferring a
    comparison against a diagonal entry on ties.
    """
    mode = TaperMode(mode)
    km = as_cond_matrix(kernel)
    p = km.entries
    if p.shape[0] != p.shape[1]:
        raise ValueError(f"taper check needs a square kernel, got shape {p.shape}")
    if any(km.undefined):
        return UNDEFINED
    br, bc, sr, sc, clause = _taper_pairs(p.shape[0], mode)
    amount = p[sr, sc] - p[br, bc]
    bad = np.flatnonzero(amount > tol)
    if len(bad) == 0:
        return HOLDS
    on_diag = br[bad] == bc[bad]
    # max amount first, then diagonal comparisons, then enumeration order
    order = np.lexsort((bad, ~on_diag, -amount[bad]))
    w = bad[order[0]]
    big, small = (br[w], bc[w]), (sr[w], sc[w])
    bi, bj = big[0] + 1, big[1] + 1
    si, sj = small[0] + 1, small[1] + 1
    witness = {
        "clause": "horizontal" if clause[w] == 0 else "vertical",
        "should_dominate": [int(bi), int(bj)],
        "dominated": [int(si), int(sj)],
        "values": [float(p[big]), float(p[small])],
        "inequality": f"p_{si}{sj} = {p[small]:.7g} > p_{bi}{bj} = {p[big]:.7g}",
    }
    return CheckResult(Status.FAILS, witness)


# ---------------------------------------------------------------------------
# model-level profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DependenceProfile:
    prd_forward: CheckResult
    prd_reverse: CheckResult
    prd_given_a0: CheckResult
    prd_given_a1: CheckResult
    mlr: CheckResult
    taper_full: CheckResult
    taper_horizontal: CheckResult
    sign: int = 1

    FLAGS = (
        "prd_forward",
        "prd_reverse",
        "prd_given_a0",
        "prd_given_a1",
        "mlr",
        "taper_full",
        "taper_horizontal",
    )

    @property
    def assumption4(self) -> bool:
        return self.prd_reverse.holds and self.prd_given_a0.holds and self.prd_given_a1.holds

    def region(self) -> str:
        """Venn region label over (PRD, Tapered, MLR) for the kernel C | U."""
        parts = {"PRD": self.prd_forward, "Tapered": self.taper_full, "MLR": self.mlr}
        pos = [n for n, r in parts.items() if r.holds]
        neg = ["¬" + n for n, r in parts.items() if r.fails]
        label = " ∧ ".join(pos + neg)
        undef = [n for n, r in parts.items() if r.status is Status.UNDEFINED]
        if undef:
            label += f" ({', '.join(undef)} undefined)"
        return label

    def to_dict(self) -> dict:
        d = {name: getattr(self, name).to_dict() for name in self.FLAGS}
        d["sign"] = self.sign
        d["region"] = self.region()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DependenceProfile":
        return cls(
            **{name: CheckResult.from_dict(d[name]) for name in cls.FLAGS},
            sign=d.get("sign", 1),
        )


def kernel_profile(
    kernel,
    pi_u=None,
    propensity=None,
    tol: float = CMP_TOL,
    sign: int = 1,
) -> DependenceProfile:
    """Profile a bare kernel.

    Flags about U given C need ``pi_u``; flags given A also need
    ``propensity``.  Missing inputs leave those flags Undefined.
    """
    km = as_cond_matrix(kernel)
    square = km.shape[0] == km.shape[1]
    prd_reverse = prd_a0 = prd_a1 = UNDEFINED
    if pi_u is not None:
        pi = np.asarray(pi_u, dtype=float)
        prd_reverse = check_prd(bayes_invert(km.entries, pi), tol, sign)
        if propensity is not None:
            e = np.asarray(propensity, dtype=float)
            prd_a0 = check_prd(bayes_invert(km.entries, (1 - e) * pi), tol, sign)
            prd_a1 = check_prd(bayes_invert(km.entries, e * pi), tol, sign)
    return DependenceProfile(
        prd_forward=check_prd(km, tol, sign),
        prd_reverse=prd_reverse,
        prd_given_a0=prd_a0,
        prd_given_a1=prd_a1,
        mlr=check_mlr(km, tol, sign),
        taper_full=check_tapered(km, TaperMode.FULL, tol) if square and sign > 0 else UNDEFINED,
        taper_horizontal=(
            check_tapered(km, TaperMode.HORIZONTAL, tol) if square and sign > 0 else UNDEFINED
        ),
        sign=sign,
    )


def profile(spec: ModelSpec, tol: float = CMP_TOL, sign: int = 1) -> DependenceProfile:
    """Run every dependence check on a model.

    ``prd_reverse`` is U on C (the regression-dependence assumption, part i),
    ``prd_given_a*`` are U on C within each arm (part ii), ``prd_forward`` is
    C on U.  Taper flags are Undefined unless the kernel is square, and are
    only evaluated for the positive orientation.
    """
    require_valid(spec)
    kern = spec.kernel
    square = spec.k_c == spec.k_u
    return DependenceProfile(
        prd_forward=check_prd(kern, tol, sign),
        prd_reverse=check_prd(posterior_u_given_c(spec), tol, sign),
        prd_given_a0=check_prd(posterior_u_given_ac(spec, 0), tol, sign),
        prd_given_a1=check_prd(posterior_u_given_ac(spec, 1), tol, sign),
        mlr=check_mlr(kern, tol, sign),
        taper_full=check_tapered(kern, TaperMode.FULL, tol) if square and sign > 0 else UNDEFINED,
        taper_horizontal=(
            check_tapered(kern, TaperMode.HORIZONTAL, tol) if square and sign > 0 else UNDEFINED
        ),
        sign=sign,
    )


# ---------------------------------------------------------------------------
# implications between the notions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImplicationResult:
    name: str
    applicable: bool
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "applicable": self.applicable,
            "passed": self.passed,
            "detail": self.detail,
        }


def essential_sup(post: CondMatrix, tol: float = CMP_TOL) -> np.ndarray:
    """Largest 1-based row level with mass above ``tol`` in each defined column;
    NaN for undefined columns."""
    out = np.full(post.shape[1], np.nan)
    for c in post.defined_columns:
        support = np.flatnonzero(post.entries[:, c] > tol)
        out[c] = support[-1] + 1 if len(support) else np.nan
    return out


def _nondecreasing(values: np.ndarray) -> bool:
    v = values[~np.isnan(values)]
    return bool(np.all(np.diff(v) >= 0))


def verify_implications(spec: ModelSpec, tol: float = CMP_TOL) -> list[ImplicationResult]:
    """Check every proven implication among the dependence notions on ``spec``.

    Premises are evaluated exactly (zero tolerance) and conclusions with
    ``tol``: an absolute tolerance is not preserved by Bayes inversion, so a
    premise that only holds up to ``tol`` proves nothing.  An implication
    whose premise does not hold is reported as not applicable (and passed).
    A failed applicable implication means a bug in the checkers, never a
    property of the model.
    """
    require_valid(spec)
    prof = profile(spec, tol)
    exact = profile(spec, 0.0)
    post = posterior_u_given_c(spec)
    post_a = {a: posterior_u_given_ac(spec, a) for a in (0, 1)}
    results: list[ImplicationResult] = []

    def add(name, premise, conclusion, detail=""):
        results.append(
            ImplicationResult(name, bool(premise), (not premise) or bool(conclusion), detail)
        )

    mlr = exact.mlr.holds
    add("mlr => prd_forward", mlr, prof.prd_forward.holds)
    add("mlr => prd_reverse", mlr, prof.prd_reverse.holds)
    add(
        "mlr => prd_given_a (both arms)",
        mlr,
        prof.prd_given_a0.holds and prof.prd_given_a1.holds,
    )
    add(
        "mlr => mlr given a (both arms)",
        mlr,
        check_mlr(post_a[0], tol).holds and check_mlr(post_a[1], tol).holds,
    )

    # symmetry under inversion needs full support on both sides
    full_support = bool(np.all(spec.pi_u > 0) and np.all(marginal_c(spec).probs > 0))
    inv_mlr = check_mlr(post, tol)
    inv_mlr_exact = check_mlr(post, 0.0).holds
    add("mlr => inverse mlr", full_support and mlr, inv_mlr.holds)
    add("inverse mlr => mlr", full_support and inv_mlr_exact, prof.mlr.holds)
    add("inverse mlr => prd_reverse", inv_mlr_exact, prof.prd_reverse.holds)

    add(
        "binary U: prd_reverse => prd_given_a",
        spec.k_u == 2 and exact.prd_reverse.holds,
        prof.prd_given_a0.holds and prof.prd_given_a1.holds,
    )

    if spec.k_c == spec.k_u:
        add(
            "horizontal taper => prd_forward",
            exact.taper_horizontal.holds,
            prof.prd_forward.holds,
        )
        add("full taper => horizontal taper", exact.taper_full.holds, prof.taper_horizontal.holds)

    add(
        "prd_reverse => essential sup of U|C non-decreasing",
        exact.prd_reverse.holds,
        _nondecreasing(essential_sup(post, tol)),
    )
    for a, flag in ((0, exact.prd_given_a0), (1, exact.prd_given_a1)):
        add(
            f"prd_given_a{a} => essential sup of U|A={a},C non-decreasing",
            flag.holds,
            _nondecreasing(essential_sup(post_a[a], tol)),
        )
    return results
