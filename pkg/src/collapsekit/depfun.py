"""Distribution-dependence functions and their collapsibility over a covariate.

The dependence function of a parametric family is the partial derivative of
the conditional distribution function F(y | x, w) with respect to x; its
sign expresses stochastic monotonicity of Y in X.  Two families are
registered:

* ``gaussian-linear-interaction``: Y = a1 X + a2 W + a3 X W + eps with
  eps ~ N(0, sigma^2) and (W | X = x) ~ N(rho x, 1); rho = 0 makes W
  independent of X.
* ``uniform-quadratic``: (Y | x, w) ~ U(0, 1 / (x^2 + (w - x)^2)) with
  (W | X = x) ~ N(x, 1).

Average collapsibility over W asks whether averaging the conditional
dependence function against f(w | x) reproduces the marginal dependence
function; equivalently, whether the integral of F(y | x, w) against the
x-derivative of f(w | x) vanishes.  Both quantities are evaluated on a
grid, with adaptive quadrature falling back to a fixed 201-point Simpson
rule if the adaptive routine fails to converge.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import ModelError

SQRT2PI = math.sqrt(2.0 * math.pi)

DEFAULT_TOL = 1e-6
QUAD_TOL = 1e-10
W_SPAN = 8.0  # integration half-width in mixing standard deviations

DEFAULT_GRID_VALUES = (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)
DEFAULT_W_PROBES = (-1.5, -0.5, 0.5, 1.5)


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / SQRT2PI


def _ndtr(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _integrate(f, lo: float, hi: float, points: Sequence[float] = ()) -> tuple[float, bool]:
    """Adaptive quadrature with a fixed-grid fallback; returns (value, converged)."""
    pts = sorted(p for p in points if lo < p < hi)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(
                f, lo, hi, points=pts or None, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400
            )
            return val, True
        except integrate.IntegrationWarning:
            pass
    grid = np.linspace(lo, hi, 201)
    vals = np.array([f(t) for t in grid])
    return float(integrate.simpson(vals, x=grid)), False


class DependenceModel:
    """Base class for registered parametric families.

    Subclasses provide the conditional distribution function, its
    x-derivative (the dependence function), the mixing law of W given x,
    and optionally a closed-form marginal dependence function.
    """

    family: str = ""

    # conditional pieces -----------------------------------------------------
    def cdf(self, y: float, x: float, w: float) -> float:
        raise NotImplementedError

    def dep(self, y: float, x: float, w: float) -> float:
        raise NotImplementedError

    def w_density(self, w: float, x: float) -> float:
        raise NotImplementedError

    def w_density_dx(self, w: float, x: float) -> float:
        raise NotImplementedError

    def w_interval(self, x: float) -> tuple[float, float]:
        raise NotImplementedError

    def w_breakpoints(self, y: float, x: float) -> tuple[float, ...]:
        return ()

    # independence structure -------------------------------------------------
    @property
    def x_w_independent(self) -> bool:
        raise NotImplementedError

    @property
    def y_w_cond_independent(self) -> bool:
        raise NotImplementedError

    # marginal pieces ---------------------------------------------------------
    @property
    def has_closed_marginal(self) -> bool:
        return False

    def marginal_cdf(self, y: float, x: float) -> float:
        val, _ = _integrate(
            lambda w: self.cdf(y, x, w) * self.w_density(w, x),
            *self.w_interval(x),
            points=self.w_breakpoints(y, x),
        )
        return val

    def numerical_marginal_dep(self, y: float, x: float, h: float = 1e-2) -> float:
        """Richardson-extrapolated central differencing of the marginal CDF.

        Accurate at points where the marginal CDF is smooth in x; families
        whose CDF has support kinks should override marginal_dep with a
        closed form instead.
        """
        d1 = (self.marginal_cdf(y, x + h) - self.marginal_cdf(y, x - h)) / (2.0 * h)
        d2 = (self.marginal_cdf(y, x + h / 2.0) - self.marginal_cdf(y, x - h / 2.0)) / h
        return (4.0 * d2 - d1) / 3.0

    def marginal_dep(self, y: float, x: float) -> float:
        """Closed form when the family provides one, else numerical differencing."""
        return self.numerical_marginal_dep(y, x)

    def grid_domain(self, ys: Iterable[float], xs: Iterable[float]) -> list[tuple[float, float]]:
        """Filter a candidate (y, x) grid to the family's domain."""
        return [(y, x) for y in ys for x in xs]

    def to_json_dict(self) -> dict:
        raise NotImplementedError


class GaussianLinearInteraction(DependenceModel):
    """Normal response with linear main effects and an interaction term.

    F(y | x, w) is the normal distribution function with mean
    m(x, w) = a1 x + a2 w + a3 x w and standard deviation sigma, so

        dF/dx (y | x, w) = -((a1 + a3 w) / sigma) phi((y - m) / sigma).

    The mixing law (W | X = x) ~ N(rho x, 1) keeps the marginal normal:
    (Y | x) ~ N(a1 x + rho x (a2 + a3 x), (a2 + a3 x)^2 + sigma^2), so the
    marginal dependence function has a closed form for every rho.
    """

    family = "gaussian-linear-interaction"

    def __init__(self, alpha1: float, alpha2: float, alpha3: float, sigma: float, rho: float = 0.0):
        if sigma <= 0.0:
            raise ModelError("sigma must be positive")
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        self.alpha3 = float(alpha3)
        self.sigma = float(sigma)
        self.rho = float(rho)

    def _m(self, x: float, w: float) -> float:
        return self.alpha1 * x + self.alpha2 * w + self.alpha3 * x * w

    def cdf(self, y: float, x: float, w: float) -> float:
        return _ndtr((y - self._m(x, w)) / self.sigma)

    def dep(self, y: float, x: float, w: float) -> float:
        return -((self.alpha1 + self.alpha3 * w) / self.sigma) * _phi(
            (y - self._m(x, w)) / self.sigma
        )

    def w_density(self, w: float, x: float) -> float:
        return _phi(w - self.rho * x)

    def w_density_dx(self, w: float, x: float) -> float:
        u = w - self.rho * x
        return self.rho * u * _phi(u)

    def w_interval(self, x: float) -> tuple[float, float]:
        c = self.rho * x
        return (c - W_SPAN, c + W_SPAN)

    @property
    def x_w_independent(self) -> bool:
        return self.rho == 0.0

    @property
    def y_w_cond_independent(self) -> bool:
        return self.alpha2 == 0.0 and self.alpha3 == 0.0

    @property
    def has_closed_marginal(self) -> bool:
        return True

    def _marginal_params(self, x: float) -> tuple[float, float, float, float]:
        """mean, d(mean)/dx, sd, d(sd)/dx of (Y | x)."""
        g = self.alpha2 + self.alpha3 * x
        mu = self.alpha1 * x + self.rho * x * g
        dmu = self.alpha1 + self.rho * (self.alpha2 + 2.0 * self.alpha3 * x)
        v = math.sqrt(g * g + self.sigma * self.sigma)
        dv = self.alpha3 * g / v
        return mu, dmu, v, dv

    def marginal_cdf(self, y: float, x: float) -> float:
        mu, _, v, _ = self._marginal_params(x)
        return _ndtr((y - mu) / v)

    def marginal_dep(self, y: float, x: float) -> float:
        mu, dmu, v, dv = self._marginal_params(x)
        z = (y - mu) / v
        return -_phi(z) * (dmu / v + z * dv / v)

    def to_json_dict(self) -> dict:
        return {
            "family": self.family,
            "alpha": [self.alpha1, self.alpha2, self.alpha3],
            "sigma": self.sigma,
            "w_law": {"type": "normal", "mean_slope": self.rho},
        }


class UniformQuadratic(DependenceModel):
    """Uniform response whose support length is a quadratic in (x, w).

    (Y | x, w) ~ U(0, 1 / s(x, w)) with s(x, w) = x^2 + (w - x)^2, so
    inside the support F(y | x, w) = y s(x, w) and

        dF/dx = y (4 x - 2 w).

    F is 0 below the support and 1 above it; those flats count as part of
    the (piecewise) distribution function rather than a domain error, so
    integrals over all w are well defined.  The mixing law is
    (W | X = x) ~ N(x, 1).
    """

    family = "uniform-quadratic"

    @staticmethod
    def _s(x: float, w: float) -> float:
        return x * x + (w - x) * (w - x)

    def cdf(self, y: float, x: float, w: float) -> float:
        if y <= 0.0:
            return 0.0
        v = y * self._s(x, w)
        return v if v < 1.0 else 1.0

    def dep(self, y: float, x: float, w: float) -> float:
        if y <= 0.0:
            return 0.0
        if y * self._s(x, w) >= 1.0:
            return 0.0
        return y * (4.0 * x - 2.0 * w)

    def w_density(self, w: float, x: float) -> float:
        return _phi(w - x)

    def w_density_dx(self, w: float, x: float) -> float:
        u = w - x
        return u * _phi(u)

    def w_interval(self, x: float) -> tuple[float, float]:
        return (x - W_SPAN, x + W_SPAN)

    def w_breakpoints(self, y: float, x: float) -> tuple[float, ...]:
        # kinks of min(1, y s(x, w)): y (x^2 + (w - x)^2) = 1
        if y <= 0.0:
            return ()
        r2 = 1.0 / y - x * x
        if r2 <= 0.0:
            return ()
        r = math.sqrt(r2)
        return (x - r, x + r)

    @property
    def x_w_independent(self) -> bool:
        return False

    @property
    def y_w_cond_independent(self) -> bool:
        return False

    @property
    def has_closed_marginal(self) -> bool:
        return True

    def marginal_dep(self, y: float, x: float) -> float:
        # F(y | x) = E[min(1, y (x^2 + U^2))] with U ~ N(0, 1), so the
        # x-derivative is 2 x y P(U^2 < 1/y - x^2); zero once y x^2 >= 1,
        # where the marginal CDF saturates at 1.
        if y <= 0.0:
            return 0.0
        r2 = 1.0 / y - x * x
        if r2 <= 0.0:
            return 0.0
        r = math.sqrt(r2)
        return 2.0 * x * y * (_ndtr(r) - _ndtr(-r))

    def grid_domain(self, ys, xs) -> list[tuple[float, float]]:
        return [(y, x) for y in ys for x in xs if y > 0.0]

    def to_json_dict(self) -> dict:
        return {"family": self.family}


def model_from_json_dict(payload: Mapping) -> DependenceModel:
    try:
        family = payload["family"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model payload: {exc}") from exc
    if family == GaussianLinearInteraction.family:
        try:
            a1, a2, a3 = payload["alpha"]
            sigma = float(payload["sigma"])
            w_law = payload.get("w_law", {"type": "normal", "mean_slope": 0.0})
            if w_law.get("type") != "normal":
                raise ModelError(f"unsupported w_law {w_law!r}")
            rho = float(w_law.get("mean_slope", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed gaussian model payload: {exc}") from exc
        return GaussianLinearInteraction(a1, a2, a3, sigma, rho)
    if family == UniformQuadratic.family:
        return UniformQuadratic()
    raise ModelError(f"unknown family {family!r}")


def model_from_json(text: str) -> DependenceModel:
    return model_from_json_dict(json.loads(text))


def dep_fn(model: DependenceModel, y: float, x: float, w: float) -> float:
    """The dependence function dF(y | x, w)/dx of a registered family."""
    return model.dep(y, x, w)


@dataclass(frozen=True)
class HomogeneityVerdict:
    homogeneous: bool
    max_gap: float
    worst: tuple[float, float, float, float] | None  # (y, x, w, w')
    tol: float


def check_homogeneity(
    model: DependenceModel,
    grid: Sequence[tuple[float, float]] | None = None,
    w_probes: Sequence[float] = DEFAULT_W_PROBES,
    tol: float = DEFAULT_TOL,
) -> HomogeneityVerdict:
    """Is the dependence function the same at every w, on the probe grid?"""
    if grid is None:
        grid = model.grid_domain(DEFAULT_GRID_VALUES, DEFAULT_GRID_VALUES)
    if not grid or len(w_probes) < 2:
        raise ModelError("homogeneity needs a nonempty grid and at least two w probes")
    worst = None
    max_gap = -1.0
    for y, x in grid:
        vals = [model.dep(y, x, w) for w in w_probes]
        for i in range(len(w_probes)):
            for j in range(i + 1, len(w_probes)):
                gap = abs(vals[i] - vals[j])
                if gap > max_gap:
                    max_gap = gap
                    worst = (y, x, w_probes[i], w_probes[j])
    return HomogeneityVerdict(
        homogeneous=max_gap <= tol, max_gap=max_gap, worst=worst, tol=tol
    )


@dataclass(frozen=True)
class DepVerdict:
    """Average-collapsibility verdict over a (y, x) grid.

    ``max_residual`` is the worst |E_{W|x}[dF/dx] - dF(y|x)/dx|;
    ``integral_residual`` the worst |∫ F(y|x,w) df(w|x)/dx dw|.  The
    marginal route records whether the marginal dependence function came
    from a closed form or from numerical differentiation.
    """

    avg_collapsible: bool
    max_residual: float
    integral_residual: float
    worst_point: tuple[float, float] | None
    marginal_route: str  # "closed-form" | "numerical"
    quadrature_ok: bool
    tol: float

    def to_json_dict(self) -> dict:
        return {
            "avg_collapsible": self.avg_collapsible,
            "max_residual": self.max_residual,
            "integral_residual": self.integral_residual,
            "worst_point": list(self.worst_point) if self.worst_point else None,
            "marginal_route": self.marginal_route,
            "quadrature_ok": self.quadrature_ok,
            "tol": self.tol,
        }


def expected_dep(model: DependenceModel, y: float, x: float) -> tuple[float, bool]:
    """Quadrature of the conditional dependence function against f(w | x)."""
    return _integrate(
        lambda w: model.dep(y, x, w) * model.w_density(w, x),
        *model.w_interval(x),
        points=model.w_breakpoints(y, x),
    )


def mixing_correction(model: DependenceModel, y: float, x: float) -> tuple[float, bool]:
    """Quadrature of F(y | x, w) against the x-derivative of f(w | x)."""
    return _integrate(
        lambda w: model.cdf(y, x, w) * model.w_density_dx(w, x),
        *model.w_interval(x),
        points=model.w_breakpoints(y, x),
    )


def check_avg_collapsibility(
    model: DependenceModel,
    grid: Sequence[tuple[float, float]] | None = None,
    tol: float = DEFAULT_TOL,
) -> DepVerdict:
    """Compare E_{W|x}[dF/dx] with the marginal dependence function on a grid."""
    if grid is None:
        grid = model.grid_domain(DEFAULT_GRID_VALUES, DEFAULT_GRID_VALUES)
    if not grid:
        raise ModelError("average collapsibility needs a nonempty grid")
    max_residual = -1.0
    integral_residual = -1.0
    worst = None
    quad_ok = True
    for y, x in grid:
        lhs, ok1 = expected_dep(model, y, x)
        rhs = model.marginal_dep(y, x)
        corr, ok2 = mixing_correction(model, y, x)
        quad_ok = quad_ok and ok1 and ok2
        res = abs(lhs - rhs)
        if res > max_residual:
            max_residual = res
            worst = (y, x)
        integral_residual = max(integral_residual, abs(corr))
    return DepVerdict(
        avg_collapsible=max_residual <= tol,
        max_residual=max_residual,
        integral_residual=integral_residual,
        worst_point=worst,
        marginal_route="closed-form" if model.has_closed_marginal else "numerical",
        quadrature_ok=quad_ok,
        tol=tol,
    )
