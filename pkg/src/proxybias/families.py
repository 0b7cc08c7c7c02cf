"""Constructive model generators.

* discretized continuous families for C | U (normal-normal, additive noise,
  binary regression, coarsening, tabulated exponential family),
* random models that satisfy the attenuation assumptions by construction,
  plus an unconstrained sampler for counterexample hunting,
* propensity curves and outcome slopes for the dichotomization
  counterexample settings S4-S7.

Continuous densities are evaluated at grid points and each column is
renormalized; likelihood ratios, and therefore TP2, survive this exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special, stats

from .dependence import TaperMode, check_mlr, check_tapered
from .model import ModelSpec, classify_monotone, MonotoneClass

MAX_ATTEMPTS = 100_000


class FamilyConfigError(ValueError):
    pass


class RejectionBudgetError(RuntimeError):
    def __init__(self, mode: str, attempts: int):
        self.attempts = attempts
        super().__init__(f"{mode} rejection sampler gave up after {attempts} attempts")


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


class GridScheme(str, Enum):
    EQUAL_WIDTH = "equal_width"
    QUANTILE = "quantile"


@dataclass(frozen=True)
class GridSpec:
    """``n`` cells over [lo, hi]; points are cell midpoints.

    With the quantile scheme the cells have equal probability under a
    reference distribution and points are the quantiles at the midpoint
    probabilities.
    """

    lo: float
    hi: float
    n: int
    scheme: GridScheme = GridScheme.EQUAL_WIDTH

    def __post_init__(self):
        if not self.lo < self.hi:
            raise FamilyConfigError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 2:
            raise FamilyConfigError(f"grid needs at least 2 points, got {self.n}")
        object.__setattr__(self, "scheme", GridScheme(self.scheme))

    def points(self, dist=None) -> np.ndarray:
        mids = (np.arange(self.n) + 0.5) / self.n
        if self.scheme is GridScheme.EQUAL_WIDTH:
            return self.lo + (self.hi - self.lo) * mids
        if dist is None:
            raise FamilyConfigError("quantile grid needs a reference distribution")
        p_lo, p_hi = dist.cdf(self.lo), dist.cdf(self.hi)
        return dist.ppf(p_lo + (p_hi - p_lo) * mids)


def discretize_prior(dist, points: np.ndarray) -> np.ndarray:
    """Prior mass at grid points, proportional to the density."""
    logp = dist.logpdf(points)
    w = np.exp(logp - np.max(logp))
    return w / w.sum()


# ---------------------------------------------------------------------------
# family configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalNormal:
    """(U, C) standard bivariate normal with correlation rho."""

    rho: float

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise FamilyConfigError(f"rho must be in (0, 1), got {self.rho}")


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0


@dataclass(frozen=True)
class Laplace:
    b: float = 1.0


@dataclass(frozen=True)
class AdditiveNoise:
    """C = U + noise.  ``u_prior`` is a scipy.stats distribution name and its
    keyword parameters; it only affects the prior, never the kernel."""

    noise: Union[Gaussian, Laplace]
    u_prior: tuple = ("norm", ())

    def __post_init__(self):
        scale = self.noise.sigma if isinstance(self.noise, Gaussian) else self.noise.b
        if not scale > 0:
            raise FamilyConfigError("noise scale must be positive")

    def prior(self):
        name, params = self.u_prior
        return getattr(stats, name)(**dict(params))


class Link(str, Enum):
    PROBIT = "probit"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class BinaryRegression:
    """Binary C with P(C=1 | u) = link(tau0 + tau1 u); rows are (C=0, C=1)."""

    link: Link
    tau0: float
    tau1: float

    def __post_init__(self):
        object.__setattr__(self, "link", Link(self.link))
        if self.tau1 < 0:
            raise FamilyConfigError("tau1 must be non-negative for a non-decreasing link")

    def p(self, u: np.ndarray) -> np.ndarray:
        z = self.tau0 + self.tau1 * np.asarray(u, dtype=float)
        return special.ndtr(z) if self.link is Link.PROBIT else special.expit(z)

    def log_odds(self, u: np.ndarray) -> np.ndarray:
        z = self.tau0 + self.tau1 * np.asarray(u, dtype=float)
        if self.link is Link.LOGISTIC:
            return z
        return special.log_ndtr(z) - special.log_ndtr(-z)


@dataclass(frozen=True)
class Coarsening:
    """C = k when U lies in the k-th bin cut by strictly increasing thresholds;
    a value equal to a threshold goes to the lower bin."""

    thresholds: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.thresholds)
        if len(t) < 1 or np.any(np.diff(t) <= 0):
            raise FamilyConfigError("thresholds must be non-empty and strictly increasing")
        object.__setattr__(self, "thresholds", t)

    def bins(self, values: np.ndarray) -> np.ndarray:
        """0-based bin index of each value."""
        return np.searchsorted(np.array(self.thresholds), values, side="left")


@dataclass(frozen=True)
class ExponentialFamily:
    """f(c | u) proportional to h(c) exp(eta(u) T(c)), tabulated on the levels."""

    eta: tuple
    T: tuple
    h: tuple

    def __post_init__(self):
        eta, T, h = (np.asarray(x, dtype=float) for x in (self.eta, self.T, self.h))
        if np.any(np.diff(eta) < 0):
            raise FamilyConfigError("eta must be non-decreasing")
        if np.any(np.diff(T) <= 0):
            raise FamilyConfigError("T must be strictly increasing")
        if len(h) != len(T) or np.any(h <= 0):
            raise FamilyConfigError("h must be positive with one value per C level")
        for name, arr in (("eta", eta), ("T", T), ("h", h)):
            object.__setattr__(self, name, tuple(arr.tolist()))


FamilyConfig = Union[NormalNormal, AdditiveNoise, BinaryRegression, Coarsening, ExponentialFamily]


def _normalize_log_columns(logk: np.ndarray) -> np.ndarray:
    """Exponentiate a log-kernel (rows C, columns U) and normalize columns."""
    shifted = logk - np.max(logk, axis=0, keepdims=True)
    k = np.exp(shifted)
    return k / k.sum(axis=0, keepdims=True)


def exp_family_kernel(eta, T, h) -> np.ndarray:
    eta, T, h = (np.asarray(x, dtype=float) for x in (eta, T, h))
    return _normalize_log_columns(np.log(h)[:, None] + np.outer(T, eta))


def build_family_kernel(
    config: FamilyConfig,
    u_grid: Optional[GridSpec] = None,
    c_grid: Optional[GridSpec] = None,
    u_dist=None,
) -> np.ndarray:
    """Column-stochastic kernel P(C = c_i | U = u_j) for a family.

    Grid-free families (binary regression rows, coarsening bins, tabulated
    exponential family) ignore the grids they do not need.
    """
    if isinstance(config, ExponentialFamily):
        kern = exp_family_kernel(config.eta, config.T, config.h)
        if u_grid is not None and u_grid.n != len(config.eta):
            raise FamilyConfigError("eta tabulation does not match the U grid")
        if c_grid is not None and c_grid.n != len(config.T):
            raise FamilyConfigError("T tabulation does not match the C grid")
        return kern

    if u_grid is None:
        raise FamilyConfigError(f"{type(config).__name__} needs a U grid")
    u = u_grid.points(u_dist)

    if isinstance(config, BinaryRegression):
        p1 = config.p(u)
        return np.vstack([1.0 - p1, p1])

    if isinstance(config, Coarsening):
        bins = config.bins(u)
        kern = np.zeros((len(config.thresholds) + 1, len(u)))
        kern[bins, np.arange(len(u))] = 1.0
        return kern

    if c_grid is None:
        raise FamilyConfigError(f"{type(config).__name__} needs a C grid")
    c = c_grid.points()

    if isinstance(config, NormalNormal):
        rho = config.rho
        logk = stats.norm.logpdf(c[:, None], loc=rho * u[None, :], scale=np.sqrt(1 - rho**2))
        return _normalize_log_columns(logk)

    if isinstance(config, AdditiveNoise):
        diff = c[:, None] - u[None, :]
        if isinstance(config.noise, Gaussian):
            logk = stats.norm.logpdf(diff, scale=config.noise.sigma)
        else:
            logk = stats.laplace.logpdf(diff, scale=config.noise.b)
        return _normalize_log_columns(logk)

    raise FamilyConfigError(f"unknown family config {config!r}")


def binary_regression_as_exp_family(config: BinaryRegression, u_grid: GridSpec) -> np.ndarray:
    """The same kernel via eta(u) = log-odds, T(c) = c, h = 1."""
    eta = config.log_odds(u_grid.points())
    return exp_family_kernel(eta, [0.0, 1.0], [1.0, 1.0])


def coarsen_rows(kernel: np.ndarray, row_values: Sequence[float], coarsening: Coarsening) -> np.ndarray:
    """Bin the rows of a kernel: C* = chi(C) with chi the coarsening map."""
    bins = coarsening.bins(np.asarray(row_values, dtype=float))
    out = np.zeros((len(coarsening.thresholds) + 1, kernel.shape[1]))
    np.add.at(out, bins, kernel)
    return out


def normal_normal_log_gap(rho: float, u: float, u2: float, c: float, c2: float) -> float:
    """log f(c2|u2) + log f(c|u) - log f(c|u2) - log f(c2|u) for the
    normal-normal family, computed from the densities."""
    s = np.sqrt(1 - rho**2)
    lp = lambda cc, uu: stats.norm.logpdf(cc, loc=rho * uu, scale=s)
    return float(lp(c2, u2) + lp(c, u) - lp(c, u2) - lp(c2, u))


def build_family_spec(
    config: FamilyConfig,
    u_grid: GridSpec,
    c_grid: Optional[GridSpec] = None,
    *,
    u_dist=None,
    propensity: Callable[[np.ndarray], np.ndarray],
    m1: Callable[[np.ndarray], np.ndarray],
    m0: Callable[[np.ndarray], np.ndarray],
    epsilon: float = 0.01,
) -> ModelSpec:
    """Full model on a grid: prior from ``u_dist`` (or the family's own prior),
    propensity and outcome means evaluated at the U grid points."""
    if u_dist is None:
        u_dist = config.prior() if isinstance(config, AdditiveNoise) else stats.norm()
    u = u_grid.points(u_dist)
    kern = build_family_kernel(config, u_grid, c_grid, u_dist)
    e = np.clip(propensity(u), epsilon, 1 - epsilon)
    return ModelSpec(discretize_prior(u_dist, u), kern, e, m1(u), m0(u), epsilon)


# ---------------------------------------------------------------------------
# random models
# ---------------------------------------------------------------------------


class KernelMode(str, Enum):
    EXP_FAMILY = "exp_family"
    REJECTION_MLR = "rejection_mlr"
    REJECTION_TAPER = "rejection_taper"


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _dirichlet_columns(rng, alpha: np.ndarray) -> np.ndarray:
    g = rng.gamma(alpha)
    return g / g.sum(axis=0, keepdims=True)


def _diagonal_alpha(k_c: int, k_u: int, concentration: float, width: float, shape: str) -> np.ndarray:
    """Dirichlet concentrations peaked along the (rescaled) diagonal.

    The Gaussian shape is TP2 and the Laplace shape is tapered, so the
    proposal mean already satisfies the target notion.
    """
    target = np.linspace(0, k_c - 1, k_u)
    dist = np.arange(k_c)[:, None] - target[None, :]
    if shape == "gaussian":
        w = np.exp(-0.5 * (dist / width) ** 2)
    else:
        w = np.exp(-np.abs(dist) / width)
    w = w / w.sum(axis=0, keepdims=True)
    return concentration * w + 1e-3


_PROPOSALS = {
    KernelMode.REJECTION_MLR: ("gaussian", 60.0),
    KernelMode.REJECTION_TAPER: ("laplace", 20.0),
}


def sample_kernel(
    k_u: int, k_c: int, seed, mode: KernelMode = KernelMode.EXP_FAMILY
) -> tuple[np.ndarray, int]:
    """Draw a kernel satisfying the mode's dependence notion.

    Returns the kernel and the number of proposals it took (1 for the
    exponential-family construction, which is TP2 by design).
    """
    mode = KernelMode(mode)
    rng = _rng(seed)
    if mode is KernelMode.EXP_FAMILY:
        eta = np.sort(rng.uniform(-2.0, 2.0, k_u))
        T = np.cumsum(rng.uniform(0.1, 1.5, k_c))
        h = rng.uniform(0.2, 2.0, k_c)
        return exp_family_kernel(eta, T - T.mean(), h), 1

    if mode is KernelMode.REJECTION_TAPER and k_u != k_c:
        raise FamilyConfigError("taper sampling needs k_u == k_c")
    shape, concentration = _PROPOSALS[mode]
    for attempt in range(1, MAX_ATTEMPTS + 1):
        width = rng.uniform(0.4, 2.0)
        kern = _dirichlet_columns(rng, _diagonal_alpha(k_c, k_u, concentration, width, shape))
        # accept on exact inequalities: near-zero entries could otherwise pass
        # inside the absolute tolerance without truly satisfying the notion
        if mode is KernelMode.REJECTION_MLR:
            ok = check_mlr(kern, tol=0.0).holds
        else:
            ok = check_tapered(kern, TaperMode.FULL, tol=0.0).holds
        if ok:
            return kern, attempt
    raise RejectionBudgetError(mode.value, MAX_ATTEMPTS)


def _check_sizes(k_u: int, k_c: int) -> None:
    for name, k in (("k_u", k_u), ("k_c", k_c)):
        if not 2 <= k <= 6:
            raise FamilyConfigError(f"{name} must be in [2, 6], got {k}")


def random_assumption_satisfying_spec(
    k_u: int,
    k_c: int,
    seed,
    kernel_mode: KernelMode = KernelMode.EXP_FAMILY,
    epsilon: float = 0.01,
) -> ModelSpec:
    """Random model with a positively dependent kernel and non-decreasing
    propensity and outcome means.  Deterministic given ``seed``."""
    _check_sizes(k_u, k_c)
    rng = _rng(seed)
    kern, _ = sample_kernel(k_u, k_c, rng, kernel_mode)
    pi = rng.dirichlet(np.ones(k_u))
    e = np.clip(np.sort(rng.uniform(0.0, 1.0, k_u)), epsilon, 1 - epsilon)
    m1 = np.sort(rng.uniform(0.0, 1.0, k_u))
    m0 = np.sort(rng.uniform(0.0, 1.0, k_u))
    return ModelSpec(pi, kern, e, m1, m0, epsilon)


def random_unconstrained_spec(k_u: int, k_c: int, seed, epsilon: float = 0.01) -> ModelSpec:
    """Random model with no monotonicity or dependence structure imposed."""
    _check_sizes(k_u, k_c)
    rng = _rng(seed)
    kern = _dirichlet_columns(rng, np.ones((k_c, k_u)))
    pi = rng.dirichlet(np.ones(k_u))
    e = rng.uniform(epsilon, 1 - epsilon, k_u)
    m1 = rng.uniform(0.0, 1.0, k_u)
    m0 = rng.uniform(0.0, 1.0, k_u)
    return ModelSpec(pi, kern, e, m1, m0, epsilon)


# ---------------------------------------------------------------------------
# dichotomization counterexample settings
# ---------------------------------------------------------------------------


class GabrielSetting(str, Enum):
    S4 = "S4"
    S5 = "S5"
    S6 = "S6"
    S7 = "S7"


_DEFAULT_DELTA = {"S4": -2.2, "S5": -1.8, "S6": 0.0, "S7": 0.0}


@dataclass(frozen=True)
class GabrielConfig:
    """Outcome model alpha + beta a + gamma u + delta a u (+ rho x in S7).

    S6: U | A=a ~ Gamma(shape_a, scale_a) with marginal P(A=1) = ``p_treated``.
    S7: X ~ Bern(d), A | X=x ~ Bern(p_x[x]), U | A=a, X=x ~ N(mu[a][x], 1).
    The S6 treatment marginal and all S7 numbers are illustrative defaults.
    """

    setting: GabrielSetting
    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: Optional[float] = None
    shape0: float = 1.1
    scale0: float = 2.0
    shape1: float = 3.0
    scale1: float = 0.8
    p_treated: float = 0.5
    d: float = 0.5
    p_x: tuple = (0.4, 0.6)
    mu: tuple = ((0.0, 1.0), (1.0, 0.0))
    rho: float = 0.0

    def __post_init__(self):
        setting = GabrielSetting(self.setting)
        object.__setattr__(self, "setting", setting)
        if self.delta is None:
            object.__setattr__(self, "delta", _DEFAULT_DELTA[setting.value])
        for name in ("shape0", "scale0", "shape1", "scale1"):
            if not getattr(self, name) > 0:
                raise FamilyConfigError(f"{name} must be positive")
        probs = [self.p_treated, self.d, *self.p_x]
        if not all(0 < p < 1 for p in probs):
            raise FamilyConfigError("probabilities must lie in (0, 1)")

    def outcome(self, a: int, u, x=0):
        u = np.asarray(u, dtype=float)
        return self.alpha + self.beta * a + (self.gamma + self.delta * a) * u + self.rho * x


@dataclass(frozen=True)
class PropensityCurve:
    u: np.ndarray
    p: np.ndarray
    x: Optional[np.ndarray] = None
    dropped: tuple = ()

    def by_x(self) -> dict:
        if self.x is None:
            return {None: self.p}
        return {int(v): self.p[self.x == v] for v in np.unique(self.x)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.x is None:
            w.writerow(["u", "p"])
            for u, p in zip(self.u, self.p):
                w.writerow([repr(float(u)), repr(float(p))])
        else:
            w.writerow(["u", "x", "p"])
            for u, x, p in zip(self.u, self.x, self.p):
                w.writerow([repr(float(u)), int(x), repr(float(p))])
        return buf.getvalue()


def default_gabriel_grid(setting: GabrielSetting) -> GridSpec:
    if GabrielSetting(setting) is GabrielSetting.S6:
        return GridSpec(0.0, 12.0, 240)
    return GridSpec(-4.0, 5.0, 181)


def _bayes_curve(log_w1: np.ndarray, log_w0: np.ndarray, u: np.ndarray):
    ok = np.isfinite(log_w1) | np.isfinite(log_w0)
    with np.errstate(invalid="ignore"):
        p = special.expit(log_w1 - log_w0)
    return u[ok], p[ok], tuple(float(v) for v in u[~ok])


def gabriel_propensity_curve(config: GabrielConfig, u_grid: Optional[GridSpec] = None) -> PropensityCurve:
    """P(A=1 | U=u) (and per x in S7) by Bayes rule from the class densities.

    Points where both class densities underflow are dropped and listed in
    ``dropped``.
    """
    setting = config.setting
    if setting not in (GabrielSetting.S6, GabrielSetting.S7):
        raise FamilyConfigError("propensity curves exist for S6 and S7 only")
    grid = u_grid or default_gabriel_grid(setting)
    u = grid.points()
    if setting is GabrielSetting.S6:
        lw1 = np.log(config.p_treated) + stats.gamma.logpdf(u, config.shape1, scale=config.scale1)
        lw0 = np.log1p(-config.p_treated) + stats.gamma.logpdf(u, config.shape0, scale=config.scale0)
        uu, p, dropped = _bayes_curve(lw1, lw0, u)
        return PropensityCurve(uu, p, None, dropped)

    us, xs, ps, dropped = [], [], [], []
    for x in (0, 1):
        px = config.p_x[x]
        # X ~ Bern(d) scales both classes equally and cancels
        lw1 = np.log(px) + stats.norm.logpdf(u, loc=config.mu[1][x])
        lw0 = np.log1p(-px) + stats.norm.logpdf(u, loc=config.mu[0][x])
        uu, p, dr = _bayes_curve(lw1, lw0, u)
        us.append(uu); ps.append(p); xs.append(np.full(len(uu), x)); dropped.extend(dr)
    return PropensityCurve(np.concatenate(us), np.concatenate(ps), np.concatenate(xs), tuple(dropped))


@dataclass(frozen=True)
class OutcomeSlopes:
    slope_a0: float
    slope_a1: float
    direction_a0: MonotoneClass
    direction_a1: MonotoneClass
    assumption_2i_holds: bool

    def to_dict(self) -> dict:
        return {
            "slope_a0": self.slope_a0,
            "slope_a1": self.slope_a1,
            "direction_a0": self.direction_a0.direction.value,
            "direction_a1": self.direction_a1.direction.value,
            "assumption_2i_holds": self.assumption_2i_holds,
        }


def _slope_class(slope: float) -> MonotoneClass:
    return classify_monotone([0.0, slope])


def gabriel_outcome_slopes(config: GabrielConfig) -> OutcomeSlopes:
    """Slopes in u of E(Y | A=a, U=u) under the linear interaction model.

    Decimal arithmetic keeps gamma + delta exact for decimal inputs.
    """
    g = Fraction(str(config.gamma))
    s0 = float(g)
    s1 = float(g + Fraction(str(config.delta)))
    c0, c1 = _slope_class(s0), _slope_class(s1)
    return OutcomeSlopes(s0, s1, c0, c1, bool(c0.signs & c1.signs))


def gabriel_discrete_spec(
    config: GabrielConfig,
    thresholds: Sequence[float],
    u_grid: GridSpec,
    u_dist=None,
    propensity_slope: float = 1.0,
    propensity_shift: float = 0.0,
    epsilon: float = 0.01,
) -> ModelSpec:
    """Discretized S4/S5-style model: the interaction outcome model, a
    logistic propensity in u, and C a coarsening of U."""
    u_dist = u_dist if u_dist is not None else stats.norm()
    return build_family_spec(
        Coarsening(tuple(thresholds)),
        u_grid,
        u_dist=u_dist,
        propensity=lambda u: special.expit(propensity_shift + propensity_slope * u),
        m1=lambda u: config.outcome(1, u),
        m0=lambda u: config.outcome(0, u),
        epsilon=epsilon,
    )
