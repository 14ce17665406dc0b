"""GARCH(1,1) quasi-maximum-likelihood fitting and residual filtering.

Log-return series are devolatilised with the one-lag recursion
sigma_t^2 = omega + alpha (x_{t-1} - mu)^2 + beta sigma_{t-1}^2 under a
Gaussian quasi-likelihood, then the standardized residuals are mapped to
pseudo-observations with the empirical probability integral transform
(ranks over T + 1, strictly interior), ready for copula fitting.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _opt
from scipy import signal as _sg
from scipy import stats as _st

__all__ = [
    "GarchFit",
    "fit_garch11",
    "filter_residuals",
    "empirical_pit",
    "simulate_garch11",
]

MIN_LENGTH = 30


@dataclass(frozen=True)
class GarchFit:
    """Fitted GARCH(1,1) parameters under the stationarity constraint."""

    mu: float
    omega: float
    alpha: float
    beta: float
    loglik: float
    sigma0: float  # initial volatility used by the recursion

    def __post_init__(self):
        if self.omega < 0.0 or self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("omega, alpha and beta must be non-negative")
        if self.alpha + self.beta >= 1.0:
            raise ValueError("stationarity requires alpha + beta < 1")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu, "omega": self.omega, "alpha": self.alpha,
            "beta": self.beta, "loglik": self.loglik, "sigma0": self.sigma0,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _validate_series(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(x) < MIN_LENGTH:
        raise ValueError(f"need at least {MIN_LENGTH} observations, got {len(x)}")
    if not np.isfinite(x).all():
        raise ValueError("series contains non-finite entries")
    if np.ptp(x) == 0.0:
        raise ValueError("series is constant; volatility model is degenerate")
    return x


def _variance_path(x: np.ndarray, mu: float, omega: float, alpha: float, beta: float,
                   sigma0_sq: float) -> np.ndarray:
    """sigma_t^2 along the series; sigma_1^2 is the supplied start value."""
    e2 = (x - mu) ** 2
    drive = omega + alpha * e2[:-1]
    # one-pole recursion sig2[t] = drive[t] + beta sig2[t-1], seeded at sigma0_sq
    tail, _ = _sg.lfilter([1.0], [1.0, -beta], drive, zi=np.array([beta * sigma0_sq]))
    return np.concatenate([[sigma0_sq], tail])


def _gaussian_loglik(x: np.ndarray, mu: float, sig2: np.ndarray) -> float:
    return float(-0.5 * (math.log(2.0 * math.pi) * len(x) + np.log(sig2).sum()
                         + ((x - mu) ** 2 / sig2).sum()))


def fit_garch11(series) -> GarchFit:
    """Quasi-ML GARCH(1,1) fit with a Gaussian residual likelihood.

    The optimiser works on (mu, log omega, softmax pair) so omega > 0,
    alpha, beta > 0 and alpha + beta < 1 hold by construction. The
    constant-volatility solution is always evaluated as a candidate, so
    the returned likelihood can only improve on it.
    """
    x = _validate_series(series)
    sigma0_sq = float(x.var())
    scale = max(sigma0_sq, 1e-300)

    def unpack(vec):
        mu, logw, a, b = vec
        ea, eb = math.exp(min(a, 35.0)), math.exp(min(b, 35.0))
        den = 1.0 + ea + eb
        return mu, math.exp(logw) * scale, ea / den, eb / den

    def objective(vec):
        mu, omega, alpha, beta = unpack(vec)
        sig2 = _variance_path(x, mu, omega, alpha, beta, sigma0_sq)
        if (sig2 <= 0.0).any() or not np.isfinite(sig2).all():
            return np.inf
        return -_gaussian_loglik(x, mu, sig2) / len(x)

    mean = float(x.mean())
    starts = [
        np.array([mean, math.log(0.05), math.log(0.08 / 0.02), math.log(0.90 / 0.02)]),
        np.array([mean, math.log(0.2), math.log(0.10 / 0.40), math.log(0.50 / 0.40)]),
        np.array([mean, math.log(1.0), -12.0, -12.0]),  # constant-volatility candidate
    ]
    best = None
    for x0 in starts:
        res = _opt.minimize(
            objective, x0, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-12, "maxfev": 5000},
        )
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise RuntimeError("GARCH optimisation failed to find a finite likelihood")
    if not best.success:
        warnings.warn("GARCH optimizer did not fully converge; best iterate returned",
                      RuntimeWarning)
    mu, omega, alpha, beta = unpack(best.x)
    return GarchFit(
        mu=mu, omega=omega, alpha=alpha, beta=beta,
        loglik=-best.fun * len(x), sigma0=math.sqrt(sigma0_sq),
    )


def filter_residuals(series, fit: GarchFit) -> np.ndarray:
    """Standardized residuals (x_t - mu) / sigma_t; same length as input."""
    x = _validate_series(series)
    sig2 = _variance_path(x, fit.mu, fit.omega, fit.alpha, fit.beta, fit.sigma0**2)
    if (sig2 < 1e-300).any():
        t = int(np.flatnonzero(sig2 < 1e-300)[0])
        raise FloatingPointError(f"volatility underflow at index {t}")
    return (x - fit.mu) / np.sqrt(sig2)


def empirical_pit(residuals) -> np.ndarray:
    """Empirical probability integral transform, ranks over T + 1.

    Ties share their average rank; output lies strictly inside (0, 1) and
    preserves the ordering of distinct residuals.
    """
    eps = np.asarray(residuals, dtype=float).reshape(-1)
    if len(eps) < 2:
        raise ValueError("need at least 2 residuals")
    return _st.rankdata(eps, method="average") / (len(eps) + 1.0)


def simulate_garch11(mu: float, omega: float, alpha: float, beta: float,
                     length: int, seed: int = 0, burn: int = 500) -> np.ndarray:
    """Simulate a Gaussian GARCH(1,1) path (burn-in discarded)."""
    if alpha < 0 or beta < 0 or omega <= 0 or alpha + beta >= 1:
        raise ValueError("require omega > 0, alpha, beta >= 0, alpha + beta < 1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(length + burn)
    x = np.empty(length + burn)
    sig2 = omega / (1.0 - alpha - beta)
    prev = mu
    for t in range(length + burn):
        if t > 0:
            sig2 = omega + alpha * (prev - mu) ** 2 + beta * sig2
        prev = mu + math.sqrt(sig2) * eps[t]
        x[t] = prev
    return x[burn:]
