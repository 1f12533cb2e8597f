"""Closed-form and quadrature results for geometric-graph clustering.

For a node with neighbours spread uniformly over its radio range, the
clustering coefficient equals the probability that two such neighbours are
within range of each other.  In 2-D this is the mean overlap of two discs
whose centres are a uniform-in-disc distance apart; in 1-D it is the mean
overlap of two intervals.  Both values are independent of the radius.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from ._validation import check_random_state
from .exceptions import ConfigError

QUAD_TOL = 1e-9


def lens_fraction(x, r=1.0):
    """Fraction of a radius-``r`` disc covered by a second disc ``x`` away."""
    x = np.asarray(x, dtype=float)
    lens = 2 * r * r * np.arccos(x / (2 * r)) - (x / 2) * np.sqrt(4 * r * r - x * x)
    return lens / (math.pi * r * r)


def clustering_2d_integrand(x, r=1.0):
    # 2x/r^2 is the density of the distance of a uniform point in the disc
    return (2 * x / (r * r)) * lens_fraction(x, r)


def clustering_2d(r=1.0) -> float:
    value, err = quad(clustering_2d_integrand, 0.0, r, args=(r,),
                      epsabs=QUAD_TOL, epsrel=QUAD_TOL)
    if err > 1e-6:
        raise ArithmeticError(f"quadrature error estimate {err} too large")
    return float(value)


def clustering_1d_integrand(x, r=1.0):
    return (1.0 / r) * (2 * r - x) / (2 * r)


def clustering_1d() -> float:
    """Exact value 3/4."""
    return 0.75


def clustering_1d_quadrature(r=1.0) -> float:
    value, _ = quad(clustering_1d_integrand, 0.0, r, args=(r,),
                    epsabs=QUAD_TOL, epsrel=QUAD_TOL)
    return float(value)


def clustering_1d_antiderivative(r=1.0) -> float:
    # integral of (2r - x) / (2 r^2) from 0 to r
    def F(x):
        return (2 * r * x - x * x / 2) / (2 * r * r)
    return F(r) - F(0.0)


def _uniform_disc(rng, n):
    rho = np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2 * math.pi, n)
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])


def monte_carlo_clustering(dim, samples, seed=0):
    """Estimate the closure probability by sampling neighbour pairs.

    Returns ``(estimate, standard_error)``.
    """
    if samples <= 0:
        raise ConfigError("samples must be positive")
    rng = check_random_state(seed)
    samples = int(samples)
    if dim == 2:
        a, b = _uniform_disc(rng, samples), _uniform_disc(rng, samples)
        hit = np.hypot(*(a - b).T) <= 1.0
    elif dim == 1:
        a, b = rng.uniform(-1, 1, samples), rng.uniform(-1, 1, samples)
        hit = np.abs(a - b) <= 1.0
    else:
        raise ConfigError("dim must be 1 or 2")
    p = hit.mean()
    return float(p), float(math.sqrt(p * (1 - p) / samples))


def gaussian_model_eval(k, a, b, c) -> float:
    """Raw ``a * exp(-((k - b) / c)**2)``, defined for ``k >= 0`` only."""
    if np.any(np.asarray(k) < 0):
        raise ValueError("the degree model is only defined for k >= 0")
    if c == 0:
        raise ValueError("c must be non-zero")
    return a * np.exp(-(((np.asarray(k, dtype=float) - b) / c) ** 2))


def _gaussian_params(fit):
    if hasattr(fit, "params"):
        if getattr(fit, "model", "gaussian") != "gaussian":
            raise ValueError("prob_degree_above needs a gaussian fit")
        return fit.params
    return tuple(fit)


def prob_degree_above(threshold, fit) -> float:
    """P(degree > threshold) under the fitted curve renormalised over k = 0, 1, ...

    ``fit`` is a gaussian :class:`~vanetsci.fitting.FitResult` or an
    ``(a, b, c)`` tuple.  The sum runs until the tail mass drops below 1e-12.
    """
    a, b, c = _gaussian_params(fit)
    c = abs(c)
    # past b + 6c the un-normalised tail is < exp(-36) relative to the peak
    k_max = int(math.ceil(max(b, 0.0) + 6.5 * c)) + 1
    k = np.arange(k_max + 1, dtype=float)
    w = gaussian_model_eval(k, a, b, c)
    total = w.sum()
    if total <= 0:
        raise ValueError("fitted curve has no mass on k >= 0")
    return float(w[k > threshold].sum() / total)
