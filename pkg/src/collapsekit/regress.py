"""Collapsibility audits for stratified linear-regression summaries.

A summary holds per-stratum moments of (Y, X) over a discrete background
variable: stratum weight pi, intercept alpha, slope beta, mean and variance
of X, and the conditional variance of Y.  The conditional mean of Y and
the conditional covariance are always derived (mu_y = alpha + beta mu_x,
s_yx = beta s_xx), never supplied, so summaries cannot be internally
inconsistent.

The marginal slope is the law-of-total-covariance value

    beta_marg = (E[s_yx] + Cov(mu_y, mu_x)) / (E[s_xx] + Var(mu_x)),

with all expectations over the stratum weights.  Collapsibility verdicts
are computed by two algebraically equivalent routes that must agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assoc import FiniteJoint
from .errors import DistributionError, RouteDisagreementError
from .tables import ci_deviation

PROB_SUM_TOL = 1e-12
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class RegressionStratum:
    """Moments of one background level: weight, line, and X/Y spread."""

    pi: float
    alpha: float
    beta: float
    mu_x: float
    s_xx: float
    s_yy: float
    label: str | None = None

    @property
    def mu_y(self) -> float:
        return self.alpha + self.beta * self.mu_x

    @property
    def s_yx(self) -> float:
        return self.beta * self.s_xx


@dataclass(frozen=True, eq=False)
class StratifiedRegressionSummary:
    """Validated tuple of strata; weights sum to one, variances positive."""

    strata: tuple[RegressionStratum, ...]

    def __post_init__(self) -> None:
        strata = tuple(self.strata)
        object.__setattr__(self, "strata", strata)
        if not strata:
            raise DistributionError("summary needs at least one stratum")
        pis = np.array([s.pi for s in strata])
        if np.any(pis <= 0.0):
            raise DistributionError("stratum weights must be positive")
        if abs(float(pis.sum()) - 1.0) > PROB_SUM_TOL:
            raise DistributionError("stratum weights must sum to 1")
        for s in strata:
            if s.s_xx <= 0.0 or s.s_yy <= 0.0:
                raise DistributionError("variances must be positive")
            # realizability: conditional correlation must not exceed 1
            if s.beta * s.beta * s.s_xx > s.s_yy * (1.0 + 1e-12):
                raise DistributionError(
                    "s_yy smaller than beta^2 s_xx: no joint distribution has these moments"
                )

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "pi": np.array([s.pi for s in self.strata]),
            "alpha": np.array([s.alpha for s in self.strata]),
            "beta": np.array([s.beta for s in self.strata]),
            "mu_x": np.array([s.mu_x for s in self.strata]),
            "mu_y": np.array([s.mu_y for s in self.strata]),
            "s_xx": np.array([s.s_xx for s in self.strata]),
            "s_yy": np.array([s.s_yy for s in self.strata]),
            "s_yx": np.array([s.s_yx for s in self.strata]),
        }

    def to_json_dict(self) -> dict:
        return {
            "levels": [
                {
                    "pi": s.pi,
                    "alpha": s.alpha,
                    "beta": s.beta,
                    "mu_x": s.mu_x,
                    "s_xx": s.s_xx,
                    "s_yy": s.s_yy,
                    **({"label": s.label} if s.label is not None else {}),
                }
                for s in self.strata
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "StratifiedRegressionSummary":
        try:
            strata = tuple(
                RegressionStratum(
                    pi=float(lv["pi"]),
                    alpha=float(lv["alpha"]),
                    beta=float(lv["beta"]),
                    mu_x=float(lv["mu_x"]),
                    s_xx=float(lv["s_xx"]),
                    s_yy=float(lv["s_yy"]),
                    label=lv.get("label"),
                )
                for lv in payload["levels"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DistributionError(f"malformed summary payload: {exc}") from exc
        return cls(strata)

    @classmethod
    def from_json(cls, text: str) -> "StratifiedRegressionSummary":
        return cls.from_json_dict(json.loads(text))


def _wmean(pi: np.ndarray, v: np.ndarray) -> float:
    return float((pi * v).sum())


def _wcov(pi: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return _wmean(pi, u * v) - _wmean(pi, u) * _wmean(pi, v)


def marginal_beta(summary: StratifiedRegressionSummary) -> float:
    """Marginal least-squares slope implied by the per-stratum moments."""
    a = summary.arrays()
    num = _wmean(a["pi"], a["s_yx"]) + _wcov(a["pi"], a["mu_y"], a["mu_x"])
    den = _wmean(a["pi"], a["s_xx"]) + _wcov(a["pi"], a["mu_x"], a["mu_x"])
    if den <= 0.0:
        raise DistributionError("marginal variance of X is not positive")
    return num / den


def marginal_alpha(summary: StratifiedRegressionSummary) -> float:
    """Marginal intercept: overall mean of Y minus marginal slope times mean of X."""
    a = summary.arrays()
    return _wmean(a["pi"], a["mu_y"]) - marginal_beta(summary) * _wmean(a["pi"], a["mu_x"])


@dataclass(frozen=True)
class RegressVerdict:
    """Outcome of a collapsibility or average-collapsibility check.

    ``lhs``/``rhs`` are the two sides of the deciding identity (the
    intercept/mean covariance against zero in the parallel case; the
    slope-mean times Var(mu_x) against the two covariances in the
    random-coefficient case).  ``beta_gap`` is the direct route
    |beta_marg - reference|.
    """

    mode: str  # "parallel" | "average"
    beta_marginal: float
    alpha_marginal: float
    beta_reference: float
    collapsible: bool | None
    a_collapsible: bool
    lhs: float
    rhs: float
    identity_gap: float
    beta_gap: float
    tol: float

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "beta_marginal": self.beta_marginal,
            "alpha_marginal": self.alpha_marginal,
            "beta_reference": self.beta_reference,
            "collapsible": self.collapsible,
            "a_collapsible": self.a_collapsible,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "identity_gap": self.identity_gap,
            "beta_gap": self.beta_gap,
            "tol": self.tol,
        }


def check_parallel_collapsibility(
    summary: StratifiedRegressionSummary, tol: float = DEFAULT_TOL
) -> RegressVerdict:
    """Collapsibility of the common slope of a parallel summary.

    All strata must share one slope.  Route one tests
    Cov(alpha, mu_x) = 0 over the strata; route two compares the marginal
    slope with the common slope directly.  A disagreement raises
    RouteDisagreementError.
    """
    a = summary.arrays()
    beta = float(a["beta"][0])
    if np.max(np.abs(a["beta"] - beta)) > 1e-12:
        raise DistributionError("strata have different slopes; not a parallel summary")

    lhs = _wcov(a["pi"], a["alpha"], a["mu_x"])
    beta_marg = marginal_beta(summary)
    by_identity = abs(lhs) <= tol
    by_direct = abs(beta_marg - beta) <= tol
    if by_identity != by_direct:
        raise RouteDisagreementError(
            f"Cov(alpha, mu_x)={lhs!r} and beta gap={beta_marg - beta!r} disagree at tol {tol!r}"
        )
    return RegressVerdict(
        mode="parallel",
        beta_marginal=beta_marg,
        alpha_marginal=marginal_alpha(summary),
        beta_reference=beta,
        collapsible=by_identity,
        a_collapsible=by_identity,
        lhs=lhs,
        rhs=0.0,
        identity_gap=abs(lhs),
        beta_gap=abs(beta_marg - beta),
        tol=tol,
    )


def check_a_collapsibility(
    summary: StratifiedRegressionSummary, tol: float = DEFAULT_TOL
) -> RegressVerdict:
    """Average collapsibility of a (possibly non-parallel) summary.

    Route one tests the identity
    E[beta] Var(mu_x) = Cov(beta, s_xx) + Cov(mu_y, mu_x); route two
    compares the marginal slope against E[beta] directly.
    """
    a = summary.arrays()
    e_beta = _wmean(a["pi"], a["beta"])
    lhs = e_beta * _wcov(a["pi"], a["mu_x"], a["mu_x"])
    rhs = _wcov(a["pi"], a["beta"], a["s_xx"]) + _wcov(a["pi"], a["mu_y"], a["mu_x"])
    beta_marg = marginal_beta(summary)
    by_identity = abs(lhs - rhs) <= tol
    by_direct = abs(beta_marg - e_beta) <= tol
    if by_identity != by_direct:
        raise RouteDisagreementError(
            f"identity gap {lhs - rhs!r} and beta gap {beta_marg - e_beta!r} disagree at tol {tol!r}"
        )
    return RegressVerdict(
        mode="average",
        beta_marginal=beta_marg,
        alpha_marginal=marginal_alpha(summary),
        beta_reference=e_beta,
        collapsible=None,
        a_collapsible=by_identity,
        lhs=lhs,
        rhs=rhs,
        identity_gap=abs(lhs - rhs),
        beta_gap=abs(beta_marg - e_beta),
        tol=tol,
    )


@dataclass(frozen=True)
class SufficientConditionFlags:
    """Independence/moment conditions that imply collapsibility conclusions.

    The CI flags are exact factorization checks on a finite joint of
    (Y, X, A).  ``variance_identity`` tests
    Var(mu_y) E[s_yy] = Var(mu_x) E[s_xx]; ``mean_independent`` tests
    E(Y | X, A) = E(Y | X) at every cell.  The implied flags spell out the
    conclusions these conditions license: ``collapsible_implied`` for the
    parallel slope, ``a_collapsible_implied`` for both random coefficients,
    and the two logistic flags for the log-odds model with the same
    background variable.
    """

    y_indep_a_given_x: bool
    x_indep_a_given_y: bool
    variance_identity: bool
    variance_identity_gap: float
    mean_independent: bool
    mean_independence_gap: float
    collapsible_implied: bool
    a_collapsible_implied: bool
    logistic_both_implied: bool
    logistic_beta_implied: bool
    tol: float

    def to_json_dict(self) -> dict:
        return {
            "y_indep_a_given_x": self.y_indep_a_given_x,
            "x_indep_a_given_y": self.x_indep_a_given_y,
            "variance_identity": self.variance_identity,
            "variance_identity_gap": self.variance_identity_gap,
            "mean_independent": self.mean_independent,
            "mean_independence_gap": self.mean_independence_gap,
            "collapsible_implied": self.collapsible_implied,
            "a_collapsible_implied": self.a_collapsible_implied,
            "logistic_both_implied": self.logistic_both_implied,
            "logistic_beta_implied": self.logistic_beta_implied,
            "tol": self.tol,
        }


def check_sufficient_conditions(
    joint: FiniteJoint, tol: float = DEFAULT_TOL
) -> SufficientConditionFlags:
    """Evaluate the sufficient conditions on an exact joint of (Y, X, A).

    The third axis of the joint plays the background variable.  Only the
    full stated conditions imply a conclusion; the variance identity alone
    is reported but licenses nothing.
    """
    p = joint.p  # axes: y=0, x=1, a=2
    yv = np.asarray(joint.y_levels)[:, None, None]
    xv = np.asarray(joint.x_levels)[None, :, None]

    dev_ya_x, _ = ci_deviation(p, (0,), (2,), (1,))
    dev_xa_y, _ = ci_deviation(p, (1,), (2,), (0,))

    # per-level moments over a
    p_a = p.sum(axis=(0, 1))
    mu_y = (yv * p).sum(axis=(0, 1)) / p_a
    mu_x = (xv * p).sum(axis=(0, 1)) / p_a
    s_yy = (yv * yv * p).sum(axis=(0, 1)) / p_a - mu_y**2
    s_xx = (xv * xv * p).sum(axis=(0, 1)) / p_a - mu_x**2
    var_mu_y = _wcov(p_a, mu_y, mu_y)
    var_mu_x = _wcov(p_a, mu_x, mu_x)
    vgap = abs(var_mu_y * _wmean(p_a, s_yy) - var_mu_x * _wmean(p_a, s_xx))

    # E(Y | X, A) versus E(Y | X)
    p_xa = p.sum(axis=0)
    e_y_xa = (yv * p).sum(axis=0) / p_xa
    p_x = p.sum(axis=(0, 2))
    e_y_x = (yv[:, :, 0] * p.sum(axis=2)).sum(axis=0) / p_x
    mgap = float(np.max(np.abs(e_y_xa - e_y_x[:, None])))

    y_ci = dev_ya_x <= tol
    x_ci = dev_xa_y <= tol
    v_ok = vgap <= tol
    m_ok = mgap <= tol
    return SufficientConditionFlags(
        y_indep_a_given_x=y_ci,
        x_indep_a_given_y=x_ci,
        variance_identity=v_ok,
        variance_identity_gap=float(vgap),
        mean_independent=m_ok,
        mean_independence_gap=mgap,
        collapsible_implied=y_ci or (x_ci and v_ok),
        a_collapsible_implied=m_ok,
        logistic_both_implied=y_ci,
        logistic_beta_implied=x_ci,
        tol=tol,
    )


def summary_from_records(
    y: Sequence[float], x: Sequence[float], a: Sequence
) -> StratifiedRegressionSummary:
    """Per-stratum sample moments from raw (y, x, a) records.

    Uses the population-variance convention (divisor N) so the moments are
    exactly those of the empirical distribution.  Stratum labels keep their
    first-appearance order; each stratum needs at least two distinct x
    values.
    """
    ya = np.asarray(list(y), dtype=float)
    xa = np.asarray(list(x), dtype=float)
    la = list(a)
    if not (len(ya) == len(xa) == len(la)) or len(ya) == 0:
        raise DistributionError("records must be nonempty and aligned")
    order: list = []
    for lbl in la:
        if lbl not in order:
            order.append(lbl)
    strata = []
    n_total = len(ya)
    for lbl in order:
        sel = np.array([v == lbl for v in la])
        ys, xs = ya[sel], xa[sel]
        s_xx = float(xs.var())
        if s_xx <= 0.0:
            raise DistributionError(
                f"stratum {lbl!r} needs at least two distinct x values"
            )
        s_yx = float(((ys - ys.mean()) * (xs - xs.mean())).mean())
        beta = s_yx / s_xx
        mu_x = float(xs.mean())
        alpha = float(ys.mean()) - beta * mu_x
        strata.append(
            RegressionStratum(
                pi=float(sel.sum()) / n_total,
                alpha=alpha,
                beta=beta,
                mu_x=mu_x,
                s_xx=s_xx,
                s_yy=float(ys.var()),
                label=str(lbl),
            )
        )
    return StratifiedRegressionSummary(tuple(strata))
