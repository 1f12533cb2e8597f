"""Least-squares fits of degree distributions and path-length growth curves.

Four model families are provided, each as a scikit-learn style regressor:

==================  =====================================  ====================
estimator           curve                                  solver
==================  =====================================  ====================
GaussianModel       ``a * exp(-((k - b) / c)**2)``, k >= 0  Levenberg-Marquardt
PowerModel          ``a * x**b + c``                        Levenberg-Marquardt
LogModel            ``a * log(x) + c``                      linear least squares
PowerLawModel       ``a * k**(-gamma)``                     log-log linear LS
==================  =====================================  ====================

``fit_gaussian``, ``fit_power``, ``fit_log`` and ``fit_powerlaw`` wrap the
estimators and return a :class:`FitResult`.  Goodness of fit (R², SSE) is
always measured in the original data space so that families can be
compared with each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_x, check_xy
from .exceptions import FitError

MODELS = ("gaussian", "power", "log", "powerlaw")


def gaussian_curve(k, a, b, c):
    k = np.asarray(k, dtype=float)
    return a * np.exp(-(((k - b) / c) ** 2))


def power_curve(x, a, b, c):
    return a * np.power(np.asarray(x, dtype=float), b) + c


def log_curve(x, a, c):
    return a * np.log(np.asarray(x, dtype=float)) + c


def powerlaw_curve(k, a, gamma):
    return a * np.power(np.asarray(k, dtype=float), -gamma)


def goodness(y, y_hat):
    """Return ``(r_square, sse)``; R² is NaN when ``y`` has no variance."""
    y = np.asarray(y, dtype=float)
    resid = y - y_hat
    sse = float(resid @ resid)
    dev = y - y.mean()
    sst = float(dev @ dev)
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    return r2, sse


@dataclass(frozen=True)
class FitResult:
    model: str
    params: tuple  # (a, b or gamma, c)
    r_square: float
    sse: float
    converged: bool = True

    CSV_HEADER = "model,a,b_or_gamma,c,r_square,sse,converged"

    @property
    def a(self):
        return self.params[0]

    @property
    def b(self):
        return self.params[1]

    @property
    def c(self):
        return self.params[2]

    gamma = b

    def predict(self, x):
        a, b, c = self.params
        if self.model == "gaussian":
            return gaussian_curve(x, a, b, c)
        if self.model == "power":
            return power_curve(x, a, b, c)
        if self.model == "log":
            return log_curve(x, a, c)
        return powerlaw_curve(x, a, b)

    def to_csv_row(self) -> str:
        vals = list(self.params) + [self.r_square, self.sse]
        return ",".join([self.model] + [repr(float(v)) for v in vals]
                        + [str(int(self.converged))])


@dataclass(frozen=True)
class XYSeries:
    xs: np.ndarray
    ys: np.ndarray

    def __init__(self, xs, ys):
        xs, ys = check_xy(xs, ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def require_increasing(self):
        if np.any(np.diff(self.xs) <= 0):
            raise FitError("xs must be strictly increasing")
        return self


@dataclass(frozen=True)
class TopologyVerdict:
    scale_free: bool
    small_world_indicated: bool | None


def _lm(residual, jac, starts, x_tol):
    """Run Levenberg-Marquardt from each start; keep the lowest SSE."""
    best, converged = None, False
    for p0 in starts:
        p0 = np.asarray(p0, dtype=float)
        if not np.all(np.isfinite(residual(p0))):
            continue
        try:
            res = least_squares(residual, p0, jac=jac, method="lm",
                                xtol=x_tol, ftol=x_tol, gtol=x_tol, max_nfev=2000)
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.fun)):
            continue
        sse = float(res.fun @ res.fun)
        converged = converged or res.status > 0
        if best is None or sse < best[1]:
            best = (res.x, sse)
    return best, converged


class _CurveModel(RegressorMixin, BaseEstimator):
    model_name = ""

    def predict(self, X):
        check_is_fitted(self, "result_")
        return self.result_.predict(check_x(X))

    def _finish(self, x, y, params, converged):
        r2, sse = goodness(y, self.result_predict(x, params))
        self.result_ = FitResult(self.model_name, tuple(float(p) for p in params),
                                 r2, sse, bool(converged))
        self.a_, self.b_, self.c_ = self.result_.params
        self.r_square_, self.sse_, self.converged_ = r2, sse, bool(converged)
        self.n_features_in_ = 1
        return self


class GaussianModel(_CurveModel):
    """Gaussian-shaped curve for degree distributions, fitted on ``k >= 0``.

    Parameters
    ----------
    init : tuple of float, optional
        Single starting point ``(a, b, c)``.  When omitted, the fit starts
        from a fixed 3 x 3 x 3 grid built from the data and keeps the best.
    tol : float, default 1e-15
        Tolerance handed to the solver for x, f and gradient.

    Attributes
    ----------
    a_, b_, c_ : float
        Height, centre and width (``c_`` is reported positive).
    r_square_, sse_ : float
    converged_ : bool
    result_ : FitResult
    """

    model_name = "gaussian"

    def __init__(self, init=None, tol=1e-15):
        self.init = init
        self.tol = tol

    @staticmethod
    def result_predict(x, params):
        return gaussian_curve(x, *params)

    @staticmethod
    def start_grid(x, y):
        ymax = float(np.max(y)) or 1.0
        spread = float(np.ptp(x)) or 1.0
        return list(itertools.product(
            (ymax / 2, ymax, 2 * ymax),
            (float(np.min(x)), float(np.mean(x)), float(np.max(x))),
            (spread / 4, spread / 2, spread),
        ))

    def fit(self, X, y):
        x, y = check_xy(X, y)
        keep = x >= 0
        x, y = x[keep], y[keep]
        if np.unique(x).size < 3:
            raise FitError("need at least 3 distinct non-negative x values")

        def residual(p):
            return gaussian_curve(x, *p) - y

        def jac(p):
            a, b, c = p
            u = (x - b) / c
            e = np.exp(-u * u)
            return np.column_stack([e, a * e * 2 * u / c, a * e * 2 * u * u / c])

        starts = [self.init] if self.init is not None else self.start_grid(x, y)
        best, converged = _lm(residual, jac, starts, self.tol)
        if best is None:
            raise FitError("no start produced a finite fit")
        params = best[0].copy()
        params[2] = abs(params[2])
        return self._finish(x, y, params, converged)


class PowerModel(_CurveModel):
    """``y = a * x**b + c`` for positive ``x``.

    Starting points come from a grid of exponents; for each one, ``a`` and
    ``c`` are solved exactly by linear least squares, and the 27 resulting
    triples seed the Levenberg-Marquardt refinement.
    """

    model_name = "power"
    EXPONENT_GRID = np.linspace(-3.0, 3.0, 27)

    def __init__(self, init=None, tol=1e-15):
        self.init = init
        self.tol = tol

    @staticmethod
    def result_predict(x, params):
        return power_curve(x, *params)

    def fit(self, X, y):
        x, y = check_xy(X, y)
        if np.any(x <= 0):
            raise FitError("power fit needs x > 0")

        def residual(p):
            return power_curve(x, *p) - y

        def jac(p):
            a, b, _ = p
            xb = np.power(x, b)
            return np.column_stack([xb, a * xb * np.log(x), np.ones_like(x)])

        if self.init is not None:
            starts = [self.init]
        else:
            starts = []
            for b in self.EXPONENT_GRID:
                design = np.column_stack([np.power(x, b), np.ones_like(x)])
                (a, c), *_ = np.linalg.lstsq(design, y, rcond=None)
                starts.append((a, b, c))
        best, converged = _lm(residual, jac, starts, self.tol)
        if best is None:
            raise FitError("no start produced a finite fit")
        return self._finish(x, y, best[0], converged)


class LogModel(_CurveModel):
    """``y = a * log(x) + c`` (natural log), solved in closed form."""

    model_name = "log"

    @staticmethod
    def result_predict(x, params):
        return log_curve(x, params[0], params[2])

    def fit(self, X, y):
        x, y = check_xy(X, y, min_samples=2)
        if np.any(x <= 0):
            raise FitError("log fit needs x > 0")
        design = np.column_stack([np.log(x), np.ones_like(x)])
        (a, c), *_ = np.linalg.lstsq(design, y, rcond=None)
        return self._finish(x, y, (a, 0.0, c), True)


class PowerLawModel(_CurveModel):
    """``P(k) = a * k**(-gamma)`` fitted as a line in log-log space.

    Only points with ``k >= 1`` and ``P > 0`` are used; R² and SSE are
    reported on those points in the original (not logarithmic) space.
    ``b_`` holds gamma.
    """

    model_name = "powerlaw"

    @staticmethod
    def result_predict(x, params):
        return powerlaw_curve(x, params[0], params[1])

    def fit(self, X, y):
        x, y = check_xy(X, y, min_samples=1)
        keep = (x >= 1) & (y > 0)
        x, y = x[keep], y[keep]
        if np.unique(x).size < 3:
            raise FitError("power-law fit needs 3 distinct degrees with k >= 1 and P > 0")
        design = np.column_stack([np.log(x), np.ones_like(x)])
        (slope, intercept), *_ = np.linalg.lstsq(design, np.log(y), rcond=None)
        return self._finish(x, y, (np.exp(intercept), -slope, 0.0), True)

    @property
    def gamma_(self):
        check_is_fitted(self, "result_")
        return self.b_


def _as_xy(data, probs=None):
    if probs is not None:
        return np.asarray(data, dtype=float), np.asarray(probs, dtype=float)
    if hasattr(data, "probabilities"):
        return data.degrees, data.probabilities
    if isinstance(data, XYSeries):
        return data.xs, data.ys
    xs, ys = data
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)


def fit_gaussian(hist, probs=None, **kwargs) -> FitResult:
    """Gaussian fit of a :class:`~vanetsci.metrics.DegreeHistogram` or ``(k, P)``."""
    return GaussianModel(**kwargs).fit(*_as_xy(hist, probs)).result_


def fit_power(series, ys=None, **kwargs) -> FitResult:
    return PowerModel(**kwargs).fit(*_as_xy(series, ys)).result_


def fit_log(series, ys=None) -> FitResult:
    return LogModel().fit(*_as_xy(series, ys)).result_


def fit_powerlaw(hist, probs=None) -> FitResult:
    return PowerLawModel().fit(*_as_xy(hist, probs)).result_


def classify_topology(degree_fit_gauss: FitResult, degree_fit_pl: FitResult,
                      aspl_log_fit: FitResult | None = None,
                      aspl_pow_fit: FitResult | None = None) -> TopologyVerdict:
    """Compare model families by R².

    Scale-free when the power law beats the Gaussian on the degree
    distribution; small-world indicated when the logarithmic curve fits
    path length versus size at least as well as the power curve (ties go
    to the logarithm).  Without path-length fits the second field is None.
    Connectivity is not considered here.
    """
    scale_free = bool(degree_fit_pl.r_square > degree_fit_gauss.r_square)
    small_world = None
    if aspl_log_fit is not None and aspl_pow_fit is not None:
        small_world = bool(aspl_log_fit.r_square >= aspl_pow_fit.r_square)
    return TopologyVerdict(scale_free, small_world)
