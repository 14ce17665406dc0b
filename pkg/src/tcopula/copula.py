"""The t copula with one degrees-of-freedom parameter per margin.

A correlation structure (stored as a Cholesky factor with unit row norms)
is combined with a vector of per-margin dof values; all margins share a
single uniform mixing variable, so equal dof values recover the standard
t copula, tied groups recover the grouped t copula, and ``dofs=None``
marks the Gaussian limit, handled in closed form.

The distribution function is a one-dimensional integral of a multivariate
normal CDF over the mixing variable, and the density is the matching
integral of the normal density; both are evaluated with globally adaptive
quadrature, in log space where the integrand underflows.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate as _sx_integrate
from scipy import special as _sp
from scipy.linalg import solve_triangular

from . import numerics

__all__ = [
    "CopulaSpec",
    "McEstimate",
    "as_uniform_sample",
    "copula_cdf",
    "copula_pdf",
    "copula_logpdf",
    "log_likelihood",
    "simulate",
    "standard_t_copula_cdf",
    "standard_t_copula_logpdf",
    "multivariate_t_logpdf",
]

#: distance from {0, 1} below which evaluation points are clamped inward
BOUNDARY_CLAMP = 1e-12

_PDF_REL_TOL = 1e-8  # density integrals inside likelihood-style loops
_LOGLIK_REL_TOL = 1e-10  # reference log-likelihood; keeps the K-term sum tight


@dataclass(frozen=True)
class CopulaSpec:
    """Parameter container for the copula family.

    chol
        Lower-triangular Cholesky factor of the correlation matrix; every
        row must have unit Euclidean norm and a positive diagonal entry.
    dofs
        Per-margin degrees of freedom, or ``None`` for the Gaussian limit.
    groups
        Optional group labels (one per margin). Margins sharing a label
        must share a dof value; used by grouped fits.
    """

    chol: np.ndarray
    dofs: np.ndarray | None = None
    groups: tuple[int, ...] | None = None

    def __post_init__(self):
        chol = np.atleast_2d(np.asarray(self.chol, dtype=float))
        n = chol.shape[0]
        if chol.shape != (n, n) or n < 2:
            raise ValueError("chol must be a square matrix of dimension >= 2")
        if not np.allclose(chol, np.tril(chol)):
            raise ValueError("chol must be lower triangular")
        if (np.diag(chol) <= 0.0).any():
            raise ValueError("chol must have a strictly positive diagonal")
        row_norms = np.sqrt((chol * chol).sum(axis=1))
        if np.abs(row_norms - 1.0).max() > 1e-12:
            raise ValueError("rows of chol must have unit norm (unit variances)")
        chol = chol / row_norms[:, None]  # remove residual rounding
        object.__setattr__(self, "chol", chol)
        if self.dofs is not None:
            dofs = np.asarray(self.dofs, dtype=float).reshape(-1)
            if dofs.shape != (n,):
                raise ValueError(f"expected {n} dof values, got {dofs.shape}")
            if not (np.isfinite(dofs).all() and (dofs > 0.0).all()):
                raise ValueError("all dof values must be finite and > 0")
            object.__setattr__(self, "dofs", dofs)
        if self.groups is not None:
            groups = tuple(int(g) for g in self.groups)
            if len(groups) != n:
                raise ValueError("groups must assign one label per margin")
            if self.dofs is not None:
                for g in set(groups):
                    vals = self.dofs[[i for i, gi in enumerate(groups) if gi == g]]
                    if np.ptp(vals) > 0.0:
                        raise ValueError(f"dofs differ within group {g}")
            object.__setattr__(self, "groups", groups)

    @property
    def dim(self) -> int:
        return self.chol.shape[0]

    @property
    def is_gaussian(self) -> bool:
        return self.dofs is None

    @property
    def corr(self) -> np.ndarray:
        return self.chol @ self.chol.T

    @classmethod
    def from_corr(cls, corr, dofs=None, groups=None) -> "CopulaSpec":
        """Build a spec from a full correlation matrix (Cholesky recomputed)."""
        corr = np.atleast_2d(np.asarray(corr, dtype=float))
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if np.abs(np.diag(corr) - 1.0).max() > 1e-12:
            raise ValueError("correlation matrix must have a unit diagonal")
        try:
            chol = np.linalg.cholesky(corr)
        except np.linalg.LinAlgError as exc:
            raise ValueError("correlation matrix is not positive definite") from exc
        return cls(chol=chol, dofs=dofs, groups=groups)

    @classmethod
    def bivariate(cls, rho: float, nu1=None, nu2=None, groups=None) -> "CopulaSpec":
        """Convenience constructor for the two-dimensional family."""
        rho = float(rho)
        if not -1.0 < rho < 1.0:
            raise ValueError(f"correlation must satisfy |rho| < 1, got {rho}")
        dofs = None if nu1 is None else [nu1, nu2 if nu2 is not None else nu1]
        return cls.from_corr([[1.0, rho], [rho, 1.0]], dofs=dofs, groups=groups)

    @property
    def rho(self) -> float:
        """Off-diagonal correlation; bivariate specs only."""
        if self.dim != 2:
            raise ValueError("rho is defined for bivariate specs only")
        return float(self.corr[0, 1])

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "dofs": "gaussian" if self.is_gaussian else [float(v) for v in self.dofs],
            "corr": self.corr.tolist(),
            **({"groups": list(self.groups)} if self.groups is not None else {}),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "CopulaSpec":
        dofs = doc["dofs"]
        dofs = None if (isinstance(dofs, str) and dofs.lower() == "gaussian") else dofs
        spec = cls.from_corr(doc["corr"], dofs=dofs, groups=doc.get("groups"))
        if spec.dim != int(doc["dim"]):
            raise ValueError("declared dim does not match the correlation matrix")
        return spec

    @classmethod
    def from_json(cls, text: str) -> "CopulaSpec":
        return cls.from_dict(json.loads(text))


class McEstimate(NamedTuple):
    """Monte Carlo estimate with its binomial standard error."""

    value: float
    stderr: float


def as_uniform_sample(data, dim: int | None = None) -> np.ndarray:
    """Validate a K x n matrix of pseudo-observations.

    Entries on or outside the unit-cube boundary raise a ValueError naming
    the first offending row; interior entries closer than 1e-12 to the
    boundary are clamped inward with a warning.
    """
    u = np.atleast_2d(np.asarray(data, dtype=float))
    if u.ndim != 2:
        raise ValueError("sample must be a K x n matrix")
    if dim is not None and u.shape[1] != dim:
        raise ValueError(f"sample has dimension {u.shape[1]}, expected {dim}")
    bad = ~np.isfinite(u) | (u <= 0.0) | (u >= 1.0)
    if bad.any():
        row = int(np.argwhere(bad.any(axis=1))[0][0])
        raise ValueError(f"observation in row {row} is outside the open unit hypercube")
    return _clamp_interior(u)


def _clamp_interior(u: np.ndarray) -> np.ndarray:
    near = (u < BOUNDARY_CLAMP) | (u > 1.0 - BOUNDARY_CLAMP)
    if near.any():
        warnings.warn(
            f"{int(near.sum())} pseudo-observation(s) within 1e-12 of the boundary; clamping",
            RuntimeWarning,
            stacklevel=3,
        )
        u = np.clip(u, BOUNDARY_CLAMP, 1.0 - BOUNDARY_CLAMP)
    return u


def _point_in_cube(u, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape != (dim,):
        raise ValueError(f"point has dimension {u.shape[0]}, expected {dim}")
    if not (np.isfinite(u).all() and (u >= 0.0).all() and (u <= 1.0).all()):
        raise ValueError("evaluation point must lie in the closed unit hypercube")
    return _clamp_interior(u[None, :])[0]


# ---------------------------------------------------------------------------
# mixing-integral machinery
# ---------------------------------------------------------------------------

# adaptive integrators may probe s values that round onto {0, 1}, where the
# mixing scale degenerates; evaluation is clamped just inside
_S_LO, _S_HI = 1e-300, 1.0 - 1.1e-16

# the density integrand has integrable power-law singularities at both ends
# of (0, 1); the adaptive pass runs on the epsilon-trimmed interval, whose
# truncation error is far below every tolerance used here
_S_EPS = 1e-14


def _clip_s(s: float) -> float:
    return min(max(float(s), _S_LO), _S_HI)


# scan grid used to locate and normalise the integrand peak before the
# adaptive pass; geometric spacing resolves peaks that hug either endpoint
_SCAN = np.unique(
    np.concatenate(
        [
            np.geomspace(1e-30, 0.02, 50),
            np.linspace(0.03, 0.97, 48),
            1.0 - np.geomspace(1e-16, 0.03, 40),
        ]
    )
)


def _chi2inv_margins(dofs: np.ndarray, s: np.ndarray, s_upper=None) -> np.ndarray:
    """chi2inv(s; nu_k) for every margin; shape (n, len(s)).

    ``s_upper`` optionally carries 1 - s to full precision so the upper
    tail can be routed through the complemented inverse.
    """
    out = np.empty((len(dofs), len(s)))
    cache: dict[float, np.ndarray] = {}
    for k, nu in enumerate(dofs):
        key = float(nu)
        if key not in cache:
            if s_upper is None:
                cache[key] = 2.0 * _sp.gammaincinv(0.5 * nu, s)
            else:
                lower = s <= 0.5
                vals = np.empty_like(s)
                vals[lower] = 2.0 * _sp.gammaincinv(0.5 * nu, s[lower])
                vals[~lower] = 2.0 * _sp.gammainccinv(0.5 * nu, s_upper[~lower])
                cache[key] = vals
        out[k] = cache[key]
    return out


def _log_mixing_integrand(spec: CopulaSpec, x: np.ndarray, s: np.ndarray, s_upper=None):
    """log of the s-integrand of the density integral; shape (K, len(s)).

    x holds the per-margin t quantiles of the evaluation points (K x n).
    """
    n = spec.dim
    chi2 = _chi2inv_margins(spec.dofs, s, s_upper)  # (n, M)
    with np.errstate(divide="ignore"):
        log_w = 0.5 * (np.log(spec.dofs)[:, None] - np.log(chi2))  # (n, M)
    inv_w = np.exp(-log_w)
    z = x[:, :, None] * inv_w[None, :, :]  # (K, n, M)
    if n == 2:
        rho = spec.rho
        det = 1.0 - rho * rho
        z1, z2 = z[:, 0, :], z[:, 1, :]
        quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / det
        log_phi = -0.5 * quad - math.log(2.0 * math.pi) - 0.5 * math.log(det)
    else:
        K, _, M = z.shape
        flat = z.transpose(0, 2, 1).reshape(-1, n)
        y = solve_triangular(spec.chol, flat.T, lower=True).T
        quad = (y * y).sum(axis=1).reshape(K, M)
        logdet = 2.0 * np.log(np.diag(spec.chol)).sum()
        log_phi = -0.5 * quad - 0.5 * n * math.log(2.0 * math.pi) - 0.5 * logdet
    return log_phi - log_w.sum(axis=0)[None, :]


def _t_quantiles(spec: CopulaSpec, u: np.ndarray) -> np.ndarray:
    x = np.empty_like(u)
    for k, nu in enumerate(spec.dofs):
        x[:, k] = _sp.stdtrit(nu, u[:, k])
    return x


def _scan_peaks(spec: CopulaSpec, x: np.ndarray):
    """Coarse scan of the log-integrand; returns per-row maxima and hints."""
    log_i = _log_mixing_integrand(spec, x, _SCAN)
    peak = log_i.max(axis=1)
    idx = log_i.argmax(axis=1)
    return log_i, peak, _SCAN[idx]


def _quad_points(log_row: np.ndarray, drop: float = 45.0) -> list[float]:
    """Breakpoint hints bracketing the region where the integrand matters."""
    keep = np.flatnonzero(log_row > log_row.max() - drop)
    lo, hi = _SCAN[keep[0]], _SCAN[keep[-1]]
    pts = {lo, hi, _SCAN[int(np.argmax(log_row))]}
    return sorted(p for p in pts if 0.0 < p < 1.0)


def _log_t_density_sum(spec: CopulaSpec, x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for k, nu in enumerate(spec.dofs):
        out += numerics.student_t_logpdf(x[:, k], nu)
    return out


def _gaussian_logpdf(spec: CopulaSpec, u: np.ndarray) -> np.ndarray:
    z = _sp.ndtri(u)
    log_num = numerics.mvn_logpdf(z, spec.chol)
    log_den = (-0.5 * z * z - 0.5 * math.log(2.0 * math.pi)).sum(axis=1)
    return np.atleast_1d(log_num) - log_den


def _logpdf_chunk(spec: CopulaSpec, x: np.ndarray, rel_tol: float) -> np.ndarray:
    """Log mixture density for a block of quantile rows.

    One shared adaptive subdivision serves every row: the scan supplies
    per-row peak factors (so deep-tail rows neither underflow nor lose
    relative accuracy) and breakpoint hints for all the peaks at once.
    """
    scan, peaks, peak_locs = _scan_peaks(spec, x)
    drop = scan.max(axis=1, keepdims=True) - 45.0
    keep = np.flatnonzero((scan > drop).any(axis=0))
    hints = {float(_SCAN[keep[0]]), float(_SCAN[keep[-1]])}
    hints.update(float(p) for p in np.unique(peak_locs))
    hints.update((1e-8, 1e-4, 1e-2, 0.1, 0.5, 0.9))

    def integrand(s):
        log_i = _log_mixing_integrand(spec, x, np.array([_clip_s(s)]))
        return np.exp(log_i[:, 0] - peaks)

    vals, err = _sx_integrate.quad_vec(
        integrand, _S_EPS, 1.0 - _S_EPS,
        epsabs=1e-12, epsrel=rel_tol, norm="max",
        points=sorted(p for p in hints if _S_EPS < p < 1.0 - _S_EPS), limit=4000,
    )
    if not (np.isfinite(vals).all() and (vals > 0.0).all()):
        row = int(np.flatnonzero(~np.isfinite(vals) | (vals <= 0.0))[0])
        raise numerics.QuadratureError(
            f"density quadrature degenerated at row {row}",
            numerics.QuadratureResult(float(np.nan_to_num(vals[row])), float(err), 1),
        )
    return peaks + np.log(vals)


_CHUNK_ROWS = 4096


def _logpdf_rows(spec: CopulaSpec, u: np.ndarray, rel_tol: float) -> np.ndarray:
    if spec.is_gaussian:
        return _gaussian_logpdf(spec, u)
    x = _t_quantiles(spec, u)
    out = np.empty(len(u))
    for lo in range(0, len(u), _CHUNK_ROWS):
        block = x[lo : lo + _CHUNK_ROWS]
        out[lo : lo + _CHUNK_ROWS] = _logpdf_chunk(spec, block, rel_tol) - _log_t_density_sum(
            spec, block
        )
    return out


def copula_logpdf(spec: CopulaSpec, u, rel_tol: float = _PDF_REL_TOL):
    """Natural log of the copula density at one point (or rows of points)."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    if single:
        u = _point_in_cube(u, spec.dim)[None, :]
    else:
        u = as_uniform_sample(u, spec.dim)
    out = _logpdf_rows(spec, u, rel_tol)
    return float(out[0]) if single else out


def copula_pdf(spec: CopulaSpec, u, rel_tol: float = _PDF_REL_TOL):
    """Copula density; one point (n,) or a batch (m, n)."""
    return np.exp(copula_logpdf(spec, u, rel_tol=rel_tol))


def log_likelihood(spec: CopulaSpec, sample) -> float:
    """Sum of the log copula density over the rows of ``sample``."""
    u = as_uniform_sample(sample, spec.dim)
    return float(_logpdf_rows(spec, u, _LOGLIK_REL_TOL).sum())


# ---------------------------------------------------------------------------
# fixed-rule likelihood for optimisation loops
# ---------------------------------------------------------------------------


def _tanh_sinh_rule(step: float = 1.0 / 32.0, vmax: float = 3.8):
    v = np.arange(-round(vmax / step), round(vmax / step) + 1) * step
    a = 0.5 * math.pi * np.sinh(v)
    s = _sp.expit(2.0 * a)
    s_upper = _sp.expit(-2.0 * a)
    # ds/dv = pi cosh(v) s (1 - s); the sigmoid pair keeps both tails exact
    log_w = math.log(math.pi * step) + np.log(np.cosh(v)) + np.log(s) + np.log(s_upper)
    ok = (s > 0.0) & (s_upper > 0.0)
    return s[ok], s_upper[ok], log_w[ok]


_TS_S, _TS_S_UPPER, _TS_LOGW = _tanh_sinh_rule()


def loglik_quadrature_fast(spec: CopulaSpec, u=None, x=None) -> float:
    """Log-likelihood on a fixed double-exponential rule.

    Smooth in the parameters (the node set never changes), which makes it
    the right objective for simplex optimisation and finite-difference
    curvature; the adaptive :func:`log_likelihood` remains the reference.
    Either ``u`` or the precomputed t quantiles ``x`` may be supplied.
    """
    if spec.is_gaussian:
        return float(_gaussian_logpdf(spec, as_uniform_sample(u, spec.dim)).sum())
    if x is None:
        x = _t_quantiles(spec, as_uniform_sample(u, spec.dim))
    log_i = _log_mixing_integrand(spec, x, _TS_S, _TS_S_UPPER) + _TS_LOGW[None, :]
    log_int = _sp.logsumexp(log_i, axis=1)
    return float(log_int.sum() - _log_t_density_sum(spec, x).sum())


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate(spec: CopulaSpec, size: int, seed: int) -> np.ndarray:
    """Draw ``size`` rows from the copula; deterministic for a fixed seed.

    One correlated normal vector and one shared mixing uniform per row;
    margins are mapped through their own t distribution functions.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((size, spec.dim)) @ spec.chol.T
    if spec.is_gaussian:
        u = _sp.ndtr(z)
    else:
        s = np.clip(rng.random(size), 2e-17, None)  # mixing uniform, shared across margins
        u = np.empty_like(z)
        for k, nu in enumerate(spec.dofs):
            w = np.sqrt(nu / (2.0 * _sp.gammaincinv(0.5 * nu, s)))
            u[:, k] = _sp.stdtr(nu, w * z[:, k])
    return np.clip(u, 1e-15, 1.0 - 1e-15)


# ---------------------------------------------------------------------------
# distribution function
# ---------------------------------------------------------------------------


def copula_cdf(spec: CopulaSpec, u, method: str = "exact", mc_n: int = 10**6, seed: int = 0):
    """Copula distribution function at a single point.

    The exact path covers the bivariate case (one-dimensional adaptive
    integration of the bivariate normal CDF over the mixing variable) and
    the Gaussian bivariate limit. Higher dimensions require
    ``method="mc"``, which returns a :class:`McEstimate`.
    """
    point = _point_in_cube(u, spec.dim)
    if method == "mc":
        draws = simulate(spec, mc_n, seed)
        p = float((draws <= point[None, :]).all(axis=1).mean())
        return McEstimate(p, math.sqrt(max(p * (1.0 - p), 1.0 / mc_n) / mc_n))
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    if spec.dim != 2:
        raise ValueError("exact CDF is bivariate only; pass method='mc' for dim > 2")
    rho = spec.rho
    if spec.is_gaussian:
        z = _sp.ndtri(point)
        return numerics.bvn_cdf(z[0], z[1], rho)

    x = _t_quantiles(spec, point[None, :])[0]
    nu1, nu2 = spec.dofs

    def integrand(s):
        s = _clip_s(s)
        w1 = math.sqrt(nu1 / (2.0 * _sp.gammaincinv(0.5 * nu1, s)))
        w2 = math.sqrt(nu2 / (2.0 * _sp.gammaincinv(0.5 * nu2, s)))
        return numerics.bvn_cdf(x[0] / w1, x[1] / w2, rho)

    # scan locates the region where the integrand is non-negligible, which
    # collapses toward s = 0 for joint-tail points; integrating only there
    # keeps quadpack off the flat remainder, where roundoff stalls it
    scan_vals = np.array([integrand(s) for s in _SCAN])
    top = scan_vals.max()
    if top <= 0.0:
        return 0.0
    keep = np.flatnonzero(scan_vals > top * 1e-16)
    lo = _SCAN[max(keep[0] - 1, 0)] if keep[0] > 0 else _S_EPS
    hi = _SCAN[min(keep[-1] + 1, len(_SCAN) - 1)] if keep[-1] < len(_SCAN) - 1 else 1.0 - _S_EPS
    pts = [p for p in (_SCAN[keep[0]], _SCAN[int(np.argmax(scan_vals))], _SCAN[keep[-1]]) if lo < p < hi]
    try:
        res = numerics.integrate(integrand, lo, hi, rel_tol=1e-10, abs_tol=1e-16, points=sorted(set(pts)))
    except numerics.QuadratureError:
        res = numerics.integrate(integrand, lo, hi, rel_tol=1e-8, abs_tol=1e-15, points=sorted(set(pts)))
    return min(max(res.value, 0.0), 1.0)


def multivariate_t_logpdf(x, chol, nu) -> np.ndarray:
    """Log-density of the standard multivariate t distribution.

    Correlation is given by its Cholesky factor; ``x`` is (n,) or (m, n).
    """
    nu = float(nu)
    chol = np.asarray(chol, dtype=float)
    n = chol.shape[0]
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = solve_triangular(chol, x.T, lower=True).T
    quad = (y * y).sum(axis=1)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return (
        _sp.gammaln(0.5 * (nu + n))
        - _sp.gammaln(0.5 * nu)
        - 0.5 * n * math.log(nu * math.pi)
        - 0.5 * logdet
        - 0.5 * (nu + n) * np.log1p(quad / nu)
    )


def standard_t_copula_logpdf(rho: float, nu, u) -> float | np.ndarray:
    """Closed-form log-density of the bivariate standard t copula."""
    nu = float(nu)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    single = u.shape[0] == 1
    u = as_uniform_sample(u, 2)
    x = np.column_stack([_sp.stdtrit(nu, u[:, 0]), _sp.stdtrit(nu, u[:, 1])])
    chol = np.linalg.cholesky([[1.0, rho], [rho, 1.0]])
    out = (
        multivariate_t_logpdf(x, chol, nu)
        - numerics.student_t_logpdf(x[:, 0], nu)
        - numerics.student_t_logpdf(x[:, 1], nu)
    )
    return float(out[0]) if single else out


def standard_t_copula_cdf(rho: float, nu, u) -> float:
    """Bivariate standard t copula CDF via the conditional-t reduction.

    P(X1 <= x1, X2 <= x2) is computed as a single integral of the margin
    density times the conditional CDF, where X2 | X1 = y is a rescaled t
    with nu + 1 dof. Numerically independent of the mixing-integral route
    used by :func:`copula_cdf`, which makes the two mutually checkable.
    """
    rho = float(rho)
    if not -1.0 < rho < 1.0:
        raise ValueError(f"correlation must satisfy |rho| < 1, got {rho}")
    nu = float(nu)
    point = _point_in_cube(u, 2)
    x1, x2 = _sp.stdtrit(nu, point[0]), _sp.stdtrit(nu, point[1])
    om = 1.0 - rho * rho

    def integrand(y):
        scale = math.sqrt((nu + y * y) * om / (nu + 1.0))
        return float(
            numerics.student_t_pdf(y, nu) * _sp.stdtr(nu + 1.0, (x2 - rho * y) / scale)
        )

    res = numerics.integrate(integrand, -np.inf, float(x1), rel_tol=1e-11, abs_tol=1e-15)
    return min(max(res.value, 0.0), 1.0)
