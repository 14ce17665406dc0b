"""Scalar distributions, bivariate normal CDF and adaptive quadrature.

Everything else in the package is built on the functions in this module:
Student-t and chi-square distribution functions, the mixing scale
w(s) = sqrt(nu / chi2inv(s)), a high-accuracy bivariate normal CDF and a
globally adaptive one-dimensional integrator. All functions are pure;
scalars in, scalars out, with numpy broadcasting where noted.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _sx_integrate
from scipy import special as _sp

__all__ = [
    "DEFAULT_REL_TOL",
    "DEFAULT_ABS_TOL",
    "DEFAULT_EVAL_BUDGET",
    "QuadratureResult",
    "QuadratureError",
    "student_t_cdf",
    "student_t_quantile",
    "student_t_pdf",
    "student_t_logpdf",
    "chisq_quantile",
    "chisq_pdf",
    "w_mixing",
    "bvn_cdf",
    "mvn_pdf",
    "mvn_logpdf",
    "integrate",
]

# Default quadrature tolerances; copula-density integrals relax rel_tol to
# 1e-8 inside likelihood loops (see tcopula.copula).
DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-12
DEFAULT_EVAL_BUDGET = 100_000


@dataclass(frozen=True)
class QuadratureResult:
    """Outcome of an adaptive integration."""

    value: float
    abs_error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.abs_error_estimate < 0:
            raise ValueError("abs_error_estimate must be >= 0")
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")


class QuadratureError(RuntimeError):
    """Adaptive integration failed to converge within its budget.

    The best available estimate is attached as ``.result``.
    """

    def __init__(self, message: str, result: QuadratureResult):
        super().__init__(message)
        self.result = result


def _check_dof(nu) -> float:
    nu = float(nu)
    if not math.isfinite(nu) or nu <= 0.0:
        raise ValueError(f"degrees of freedom must be finite and > 0, got {nu!r}")
    return nu


def student_t_cdf(x, nu):
    """CDF of the standard Student-t distribution with ``nu`` dof.

    ``x`` may be a scalar or array; +/-inf map to 1/0.
    """
    nu = _check_dof(nu)
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise ValueError("x must not contain NaN")
    out = _sp.stdtr(nu, x)
    return float(out) if out.ndim == 0 else out


def student_t_quantile(u, nu):
    """Inverse CDF of the standard Student-t distribution.

    Requires ``0 < u < 1`` elementwise.
    """
    nu = _check_dof(nu)
    u = np.asarray(u, dtype=float)
    if not ((u > 0.0) & (u < 1.0)).all():
        raise ValueError("quantile level u must lie strictly inside (0, 1)")
    out = _sp.stdtrit(nu, u)
    return float(out) if out.ndim == 0 else out


def student_t_logpdf(x, nu):
    nu = _check_dof(nu)
    x = np.asarray(x, dtype=float)
    lognorm = _sp.gammaln(0.5 * (nu + 1.0)) - _sp.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    out = lognorm - 0.5 * (nu + 1.0) * np.log1p(x * x / nu)
    return float(out) if out.ndim == 0 else out


def student_t_pdf(x, nu):
    """Density of the standard Student-t distribution with ``nu`` dof."""
    return np.exp(student_t_logpdf(x, nu))


def chisq_quantile(s, nu):
    """Inverse CDF of the chi-square distribution with ``nu`` dof.

    Defined on ``0 <= s < 1`` with ``chisq_quantile(0, nu) = 0``.
    """
    nu = _check_dof(nu)
    s = np.asarray(s, dtype=float)
    if not ((s >= 0.0) & (s < 1.0)).all():
        raise ValueError("probability s must lie in [0, 1)")
    out = 2.0 * _sp.gammaincinv(0.5 * nu, s)
    return float(out) if out.ndim == 0 else out


def chisq_pdf(t, nu):
    """Chi-square density with ``nu`` dof, supported on [0, inf)."""
    nu = _check_dof(nu)
    t = np.asarray(t, dtype=float)
    if (t < 0.0).any():
        raise ValueError("chi-square density requires t >= 0")
    if nu < 2.0 and (t == 0.0).any():
        raise ValueError("chi-square density diverges at t = 0 for nu < 2")
    with np.errstate(divide="ignore"):
        logpdf = (
            -0.5 * nu * math.log(2.0)
            - _sp.gammaln(0.5 * nu)
            - 0.5 * t
            + _sp.xlogy(0.5 * nu - 1.0, t)
        )
    out = np.exp(logpdf)
    return float(out) if out.ndim == 0 else out


def w_mixing(s, nu):
    """Mixing scale w(s) = sqrt(nu / chi2inv(s; nu)).

    Strictly decreasing on (0, 1), diverging at 0 and vanishing at 1.
    Endpoints are rejected because the scale is infinite/zero there.
    """
    nu = _check_dof(nu)
    s = np.asarray(s, dtype=float)
    if not ((s > 0.0) & (s < 1.0)).all():
        raise ValueError("mixing variable s must lie strictly inside (0, 1)")
    out = np.sqrt(nu / (2.0 * _sp.gammaincinv(0.5 * nu, s)))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Bivariate normal CDF (Genz's BVND scheme: Gauss-Legendre in the angle for
# moderate correlation, the singular expansion for |rho| close to one).
# Absolute accuracy is of the order 1e-15.
# ---------------------------------------------------------------------------

_GL_NODES = {n: np.polynomial.legendre.leggauss(n) for n in (6, 12, 20)}


def _phid(x):
    return _sp.ndtr(x)


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for standard bivariate normal with correlation r.

    h and k are arrays of equal shape, r a scalar with |r| < 1.
    """
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    out = np.empty(np.broadcast(h, k).shape)
    h, k = np.broadcast_arrays(h, k)

    # infinities first: they short-circuit the quadrature
    inf_mask = np.isinf(h) | np.isinf(k)
    if inf_mask.any():
        hi, ki = h[inf_mask], k[inf_mask]
        res = np.where(
            (hi == np.inf) | (ki == np.inf),
            0.0,
            np.where(hi == -np.inf, np.where(ki == -np.inf, 1.0, _phid(-ki)), _phid(-hi)),
        )
        out[inf_mask] = res
    fin = ~inf_mask
    if not fin.any():
        return out
    h, k = h[fin], k[fin]

    if r == 0.0:
        out[fin] = _phid(-h) * _phid(-k)
        return out

    order = 6 if abs(r) < 0.3 else (12 if abs(r) < 0.75 else 20)
    gx, gw = _GL_NODES[order]
    xs = 1.0 + gx  # nodes on (0, 2)

    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * math.asin(r)
        sn = np.sin(asr * xs)  # (order,)
        expo = (np.outer(hk, sn) - hs[:, None]) / (1.0 - sn * sn)
        bvn = np.exp(expo) @ gw
        out[fin] = bvn * asr / (2.0 * math.pi) + _phid(-h) * _phid(-k)
        return out

    # |r| >= 0.925: expansion about the singular point r = +/-1
    if r < 0.0:
        k = -k
        hk = -hk
    av = (1.0 - r) * (1.0 + r)
    a = math.sqrt(av)
    bs = (h - k) ** 2
    c = (4.0 - hk) / 8.0
    d = (12.0 - hk) / 16.0
    asr0 = -0.5 * (bs / av + hk)
    bvn = np.where(
        asr0 > -100.0,
        a * np.exp(asr0) * (1.0 - c * (bs - av) * (1.0 - d * bs / 5.0) / 3.0 + c * d * av * av / 5.0),
        0.0,
    )
    b = np.sqrt(bs)
    sp = math.sqrt(2.0 * math.pi) * _phid(-b / a)
    bvn = bvn - np.where(
        -hk < 100.0,
        np.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
        0.0,
    )
    xsq = (0.5 * a * xs) ** 2  # (order,)
    rs = np.sqrt(1.0 - xsq)
    asr1 = -0.5 * (bs[:, None] / xsq + hk[:, None])
    sp1 = 1.0 + c[:, None] * xsq * (1.0 + d[:, None] * xsq)
    ep = np.exp(-hk[:, None] * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs
    terms = np.where(asr1 > -100.0, np.exp(asr1) * (ep - sp1), 0.0)
    bvn = bvn + 0.5 * a * (terms @ gw)
    bvn = -bvn / (2.0 * math.pi)
    if r > 0.0:
        bvn = bvn + _phid(-np.maximum(h, k))
    else:
        bvn = -bvn + np.maximum(0.0, _phid(-h) - _phid(-k))
    out[fin] = bvn
    return out


def bvn_cdf(a, b, rho):
    """P(X <= a, Y <= b) for a standard bivariate normal with correlation rho.

    ``a`` and ``b`` broadcast; +/-inf are allowed. Correlations within
    1e-12 of +/-1 are clamped with a warning; beyond that a ValueError
    is raised (the distribution is degenerate).
    """
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise ValueError(f"correlation must satisfy |rho| < 1, got {rho}")
    if abs(rho) > 1.0 - 1e-12:
        warnings.warn(
            "correlation within 1e-12 of +/-1; clamping", RuntimeWarning, stacklevel=2
        )
        rho = math.copysign(1.0 - 1e-12, rho)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scalar = a.ndim == 0 and b.ndim == 0
    p = _bvn_upper(-a, -b, rho)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if scalar else p


def mvn_logpdf(z, chol):
    """Log-density of N(0, Sigma) with Sigma = chol @ chol.T.

    ``z`` has shape (n,) or (m, n); ``chol`` is lower triangular with a
    strictly positive diagonal. Returns a scalar or an (m,) array.
    """
    chol = np.asarray(chol, dtype=float)
    n = chol.shape[0]
    if chol.shape != (n, n):
        raise ValueError("chol must be square")
    diag = np.diag(chol)
    if (diag <= 0.0).any():
        raise ValueError("Cholesky factor must have a strictly positive diagonal")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zm = np.atleast_2d(z)
    if zm.shape[1] != n:
        raise ValueError(f"z has dimension {zm.shape[1]}, expected {n}")
    # solve chol @ y = z row-wise
    from scipy.linalg import solve_triangular

    y = solve_triangular(chol, zm.T, lower=True).T
    quad = np.einsum("ij,ij->i", y, y)
    logdet = 2.0 * np.log(diag).sum()
    out = -0.5 * quad - 0.5 * n * math.log(2.0 * math.pi) - 0.5 * logdet
    return float(out[0]) if single else out


def mvn_pdf(z, chol):
    """Density of N(0, Sigma) with Sigma = chol @ chol.T; see mvn_logpdf."""
    return np.exp(mvn_logpdf(z, chol))


def integrate(
    f,
    a,
    b,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    eval_budget: int = DEFAULT_EVAL_BUDGET,
    points=None,
) -> QuadratureResult:
    """Globally adaptive integration of ``f`` over (a, b).

    Semi-infinite and doubly infinite intervals are supported. ``points``
    may list interior locations of known difficulty (peaks, kinks) to seed
    the subdivision; it is ignored on infinite intervals.

    Raises QuadratureError (with the best estimate attached) if the
    requested tolerance cannot be certified within the evaluation budget.
    """
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    limit = max(10, int(eval_budget) // 21)
    kwargs = dict(epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1)
    if points is not None and np.isfinite([a, b]).all():
        pts = [p for p in np.atleast_1d(points) if a < p < b]
        if pts:
            kwargs["points"] = sorted(pts)
    res = _sx_integrate.quad(f, a, b, **kwargs)
    value, abserr, info = res[0], res[1], res[2]
    result = QuadratureResult(float(value), float(abserr), int(info["neval"]))
    if len(res) > 3:  # ier != 0: quadpack warning message present
        raise QuadratureError(f"quadrature did not converge: {res[3]}", result)
    return result
