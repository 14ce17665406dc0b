"""Parameter estimation for the copula family.

Joint maximum likelihood runs a multi-start Nelder-Mead simplex over an
unconstrained parametrisation: off-diagonal Cholesky entries mapped
through a bounded transform that keeps every row norm strictly below one
(the diagonal entry is derived, so rows have unit norm by construction),
and degrees of freedom through nu = exp(eta) boxed to [0.2, 200]. The
two-stage alternative fixes correlations by the Kendall's-tau sine map
and optimises the dof parameters jointly.

Standard errors come from the observed information matrix: central finite
differences of the per-observation average log-density evaluated on the
fixed-rule likelihood, which is smooth in the parameters.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _opt
from scipy import special as _sp
from scipy import stats as _st

from .copula import (
    CopulaSpec,
    as_uniform_sample,
    log_likelihood,
    loglik_quadrature_fast,
    multivariate_t_logpdf,
    _gaussian_logpdf,
    _log_t_density_sum,
    _t_quantiles,
)

__all__ = [
    "FitResult",
    "LrtResult",
    "EstimationError",
    "kendall_tau",
    "corr_from_tau",
    "tau_corr_matrix",
    "repair_correlation",
    "fit_mle",
    "fd_gradient_hessian",
    "observed_information",
    "likelihood_ratio_test",
]

DOF_BOUNDS = (0.2, 200.0)
DOF_STARTS = (2.0, 5.0, 15.0)
MAX_EVALS = 2000
SIMPLEX_TOL = 1e-6

FAMILIES = ("gaussian", "standard-t", "grouped-t", "multidof-t")


class EstimationError(RuntimeError):
    """Estimation could not proceed (degenerate data, undefined statistic)."""


@dataclass
class FitResult:
    """Fitted copula with its diagnostics."""

    spec: CopulaSpec
    loglik: float
    stderr: np.ndarray | None
    param_order: tuple[str, ...]
    converged: bool
    iterations: int
    method: str
    information: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "loglik": self.loglik,
            "stderr": None if self.stderr is None else [float(v) for v in self.stderr],
            "param_order": list(self.param_order),
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass(frozen=True)
class LrtResult:
    statistic: float
    df: int
    p_value: float


# ---------------------------------------------------------------------------
# rank statistics
# ---------------------------------------------------------------------------


def kendall_tau(x, y) -> float:
    """Sample Kendall's tau with the tie-adjusted (tau-b) denominator."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("kendall_tau needs two equally long vectors with >= 2 points")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise EstimationError("Kendall's tau is undefined for a constant column")
    return float(_st.kendalltau(x, y).statistic)


def corr_from_tau(tau: float) -> float:
    """Map Kendall's tau to the elliptical correlation, sin(pi tau / 2)."""
    tau = float(tau)
    if not -1.0 < tau < 1.0:
        raise ValueError(f"tau must lie strictly inside (-1, 1), got {tau}")
    return math.sin(0.5 * math.pi * tau)


def tau_corr_matrix(sample) -> np.ndarray:
    """Pairwise tau-implied correlation matrix, repaired if indefinite."""
    u = np.atleast_2d(np.asarray(sample, dtype=float))
    n = u.shape[1]
    corr = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            corr[i, j] = corr[j, i] = corr_from_tau(kendall_tau(u[:, i], u[:, j]))
    return repair_correlation(corr) if n > 2 else corr


def repair_correlation(matrix, floor: float = 1e-6) -> np.ndarray:
    """Force a symmetric unit-diagonal matrix to be positive definite.

    Negative (or near-zero) eigenvalues are replaced by small positive
    values and the unit diagonal is restored; already-valid input is
    returned unchanged.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    if np.abs(np.diag(m) - 1.0).max() > 1e-12:
        raise ValueError("matrix must have a unit diagonal")
    out = m.copy()
    for _ in range(20):
        eigval, eigvec = np.linalg.eigh(out)
        if eigval.min() >= floor:
            return out
        eigval = np.maximum(eigval, floor)
        out = (eigvec * eigval) @ eigvec.T
        d = 1.0 / np.sqrt(np.diag(out))
        out = out * np.outer(d, d)
        np.fill_diagonal(out, 1.0)
    raise EstimationError("correlation repair did not converge")


# ---------------------------------------------------------------------------
# parametrisations
# ---------------------------------------------------------------------------


def _offdiag_labels(n: int) -> list[str]:
    return [f"A{i + 1}{j + 1}" if n > 2 else "rho" for i in range(1, n) for j in range(i)]


def _chol_from_offdiag(vals: np.ndarray, n: int) -> np.ndarray:
    """Lower Cholesky factor with unit rows from its free entries (row-major)."""
    chol = np.zeros((n, n))
    chol[0, 0] = 1.0
    pos = 0
    for i in range(1, n):
        row = vals[pos : pos + i]
        pos += i
        sq = (row * row).sum()
        if sq >= 1.0:
            raise ValueError("off-diagonal Cholesky row norm must be < 1")
        chol[i, :i] = row
        chol[i, i] = math.sqrt(1.0 - sq)
    return chol


def _offdiag_from_chol(chol: np.ndarray) -> np.ndarray:
    n = chol.shape[0]
    return np.concatenate([chol[i, :i] for i in range(1, n)]) if n > 1 else np.empty(0)


def _free_from_offdiag(vals: np.ndarray, n: int) -> np.ndarray:
    """Unconstrained coordinates for the off-diagonal entries, row by row."""
    out = np.empty_like(vals)
    pos = 0
    for i in range(1, n):
        row = vals[pos : pos + i]
        diag = math.sqrt(max(1.0 - (row * row).sum(), 1e-14))
        out[pos : pos + i] = row / diag
        pos += i
    return out


def _offdiag_from_free(free: np.ndarray, n: int) -> np.ndarray:
    out = np.empty_like(free)
    pos = 0
    for i in range(1, n):
        r = free[pos : pos + i]
        out[pos : pos + i] = r / math.sqrt(1.0 + (r * r).sum())
        pos += i
    return out


def _group_order(groups) -> list[int]:
    seen: list[int] = []
    for g in groups:
        if g not in seen:
            seen.append(g)
    return seen


def _expand_group_dofs(dof_values, groups, order) -> np.ndarray:
    lookup = {g: dof_values[i] for i, g in enumerate(order)}
    return np.array([lookup[g] for g in groups])


# ---------------------------------------------------------------------------
# likelihood objectives
# ---------------------------------------------------------------------------


def _standard_t_loglik(u: np.ndarray, chol: np.ndarray, nu: float) -> float:
    """Closed-form log-likelihood of the equal-dof (standard t) copula."""
    x = np.column_stack([_sp.stdtrit(nu, u[:, k]) for k in range(u.shape[1])])
    lognorm = _sp.gammaln(0.5 * (nu + 1.0)) - _sp.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    marg = lognorm * x.size - 0.5 * (nu + 1.0) * np.log1p(x * x / nu).sum()
    return float(multivariate_t_logpdf(x, chol, nu).sum() - marg)


def _objective_factory(u: np.ndarray, family: str, groups, fixed_chol=None):
    """Negative mean log-likelihood over (free corr coords, log-dofs)."""
    K, n = u.shape
    order = _group_order(groups) if groups is not None else []
    n_corr = 0 if fixed_chol is not None else n * (n - 1) // 2

    def objective(vec: np.ndarray) -> float:
        try:
            if fixed_chol is None:
                chol = _chol_from_offdiag(_offdiag_from_free(vec[:n_corr], n), n)
            else:
                chol = fixed_chol
            if family == "gaussian":
                spec = CopulaSpec(chol=chol)
                return -float(_gaussian_logpdf(spec, u).sum()) / K
            dofs = np.exp(vec[n_corr:])
            if family == "standard-t":
                return -_standard_t_loglik(u, chol, float(dofs[0])) / K
            spec = CopulaSpec(chol=chol, dofs=_expand_group_dofs(dofs, groups, order))
            return -loglik_quadrature_fast(spec, u=u) / K
        except (ValueError, FloatingPointError):
            return np.inf

    return objective, n_corr, order


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _resolve_groups(family: str, n: int, groups) -> tuple[int, ...] | None:
    if family == "gaussian":
        return None
    if family == "standard-t":
        return (0,) * n
    if family == "multidof-t":
        return tuple(range(n))
    if family == "grouped-t":
        if groups is None:
            raise ValueError("family 'grouped-t' requires a group map")
        if len(groups) != n:
            raise ValueError("group map must assign one label per margin")
        return tuple(int(g) for g in groups)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def fit_mle(
    sample,
    family: str = "multidof-t",
    method: str = "joint",
    groups=None,
    init: CopulaSpec | None = None,
    with_stderr: bool = False,
) -> FitResult:
    """Fit a copula family to pseudo-observations by maximum likelihood.

    ``method="joint"`` optimises correlations and dof parameters together;
    ``method="tau-then-dof"`` fixes the correlations at their Kendall's-tau
    estimates and optimises the dof parameters jointly. Three dof starting
    values guard against local optima; an ``init`` spec adds a fourth start.
    """
    u = as_uniform_sample(sample)
    K, n = u.shape
    if K < 10:
        warnings.warn(f"sample size {K} is below the soft floor of 10", RuntimeWarning)
    if any(np.unique(u[:, k]).size < 2 for k in range(n)):
        raise EstimationError("sample is degenerate: a margin is constant")
    if method not in ("joint", "tau-then-dof"):
        raise ValueError("method must be 'joint' or 'tau-then-dof'")
    groups = _resolve_groups(family, n, groups if groups is not None else getattr(init, "groups", None))

    tau_chol = np.linalg.cholesky(tau_corr_matrix(u))
    fixed_chol = tau_chol if method == "tau-then-dof" else None

    objective, n_corr, order = _objective_factory(u, family, groups, fixed_chol)
    n_dof = 0 if family == "gaussian" else len(order)

    corr0 = _free_from_offdiag(_offdiag_from_chol(tau_chol), n) if n_corr else np.empty(0)
    if init is not None and n_corr:
        corr0 = _free_from_offdiag(_offdiag_from_chol(np.linalg.cholesky(init.corr)), n)

    starts: list[np.ndarray] = []
    if n_dof == 0:
        starts.append(corr0)
    else:
        for nu0 in DOF_STARTS:
            starts.append(np.concatenate([corr0, np.full(n_dof, math.log(nu0))]))
        if init is not None and init.dofs is not None:
            init_dofs = np.array(
                [init.dofs[[i for i, g in enumerate(groups) if g == go][0]] for go in order]
            )
            starts.append(np.concatenate([corr0, np.log(np.clip(init_dofs, *DOF_BOUNDS))]))

    lo = np.concatenate([np.full(n_corr, -np.inf), np.full(n_dof, math.log(DOF_BOUNDS[0]))])
    hi = np.concatenate([np.full(n_corr, np.inf), np.full(n_dof, math.log(DOF_BOUNDS[1]))])
    bounds = _opt.Bounds(lo, hi) if len(lo) else None

    best = None
    total_evals = 0
    for x0 in starts:
        if len(x0) == 0:  # gaussian + tau-then-dof: nothing to optimise
            best = (objective(x0), x0, True, 0)
            break
        res = _opt.minimize(
            objective, x0, method="Nelder-Mead", bounds=bounds,
            options={"xatol": SIMPLEX_TOL, "fatol": 1e-9, "maxfev": MAX_EVALS, "adaptive": n >= 4},
        )
        total_evals += res.nfev
        if best is None or res.fun < best[0]:
            best = (res.fun, res.x, bool(res.success), total_evals)
    fun, vec, converged, _ = best

    if not np.isfinite(fun):
        raise EstimationError("likelihood optimisation failed to find a finite objective")

    chol = fixed_chol if fixed_chol is not None else _chol_from_offdiag(
        _offdiag_from_free(vec[:n_corr], n), n
    )
    if family == "gaussian":
        spec = CopulaSpec(chol=chol)
    else:
        dofs = _expand_group_dofs(np.exp(vec[n_corr:]), groups, order)
        spec = CopulaSpec(chol=chol, dofs=dofs, groups=groups)

    labels = tuple(_offdiag_labels(n) + [f"nu{i + 1}" for i in range(n_dof)])
    result = FitResult(
        spec=spec,
        loglik=log_likelihood(spec, u),
        stderr=None,
        param_order=labels,
        converged=converged,
        iterations=total_evals,
        method="joint-MLE" if method == "joint" else "tau-then-dof",
    )
    if not converged:
        warnings.warn("optimizer did not converge; returning the best iterate", RuntimeWarning)
    if with_stderr:
        info, stderr = observed_information(spec, u)
        result.information = info
        result.stderr = stderr
    return result


# ---------------------------------------------------------------------------
# observed information and the likelihood ratio test
# ---------------------------------------------------------------------------


def _pack_natural(spec: CopulaSpec) -> tuple[np.ndarray, list[int]]:
    order = _group_order(spec.groups) if spec.groups is not None else list(range(spec.dim))
    theta = _offdiag_from_chol(spec.chol)
    if not spec.is_gaussian:
        rep = [spec.dofs[[i for i, g in enumerate(spec.groups or range(spec.dim)) if g == go][0]] for go in order]
        theta = np.concatenate([theta, rep])
    return theta, order


def _unpack_natural(theta: np.ndarray, template: CopulaSpec, order) -> CopulaSpec:
    n = template.dim
    n_corr = n * (n - 1) // 2
    chol = _chol_from_offdiag(theta[:n_corr], n)
    if template.is_gaussian:
        return CopulaSpec(chol=chol)
    groups = template.groups or tuple(range(n))
    dofs = _expand_group_dofs(theta[n_corr:], groups, order)
    return CopulaSpec(chol=chol, dofs=dofs, groups=template.groups)


def fd_gradient_hessian(f, x: np.ndarray, h: np.ndarray):
    """Central-difference gradient and Hessian of a scalar function.

    The off-diagonal stencil is symmetric in (i, j), so the returned
    Hessian is exactly symmetric.
    """
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    m = len(x)
    f0 = f(x)
    grad = np.empty(m)
    hess = np.empty((m, m))
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h[i]
        fp, fm_ = f(x + ei), f(x - ei)
        grad[i] = (fp - fm_) / (2.0 * h[i])
        hess[i, i] = (fp - 2.0 * f0 + fm_) / h[i] ** 2
    for i in range(m):
        for j in range(i + 1, m):
            ei = np.zeros(m)
            ej = np.zeros(m)
            ei[i] = h[i]
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4.0 * h[i] * h[j]
            )
            hess[i, j] = hess[j, i] = val
    return grad, hess


def observed_information(spec: CopulaSpec, sample, step_scale: float = 1e-4):
    """Observed information and standard errors at a fitted spec.

    The matrix is minus the central-difference Hessian of the average
    log-density in the natural parameters (off-diagonal Cholesky entries
    row-major, then dof parameters), evaluated on the fixed-rule
    likelihood so the differenced function is smooth. Standard errors are
    sqrt(diag(inverse) / K); a non-invertible or non-PD matrix yields a
    warning and ``stderr=None``.
    """
    u = as_uniform_sample(sample, spec.dim)
    K = len(u)
    theta, order = _pack_natural(spec)
    h = np.maximum(step_scale, step_scale * np.abs(theta))

    def f(th: np.ndarray) -> float:
        return loglik_quadrature_fast(_unpack_natural(th, spec, order), u=u) / K

    grad, hess = fd_gradient_hessian(f, theta, h)
    if np.abs(grad).max() > 0.05:
        warnings.warn(
            f"gradient norm {np.abs(grad).max():.3g} is large; spec may not be an interior optimum",
            RuntimeWarning,
        )
    info = -hess
    try:
        cov = np.linalg.inv(info) / K
        diag = np.diag(cov)
        if (diag <= 0.0).any():
            raise np.linalg.LinAlgError("non-positive variance")
        stderr = np.sqrt(diag)
    except np.linalg.LinAlgError:
        warnings.warn("observed information is not positive definite; omitting stderr", RuntimeWarning)
        stderr = None
    return info, stderr


def likelihood_ratio_test(restricted, full, df: int, tol: float = 0.01) -> LrtResult:
    """Likelihood ratio test of a nested (restricted) model against a full one.

    Arguments may be FitResult objects or raw log-likelihood values. A
    marginally negative statistic (optimizer noise, within ``tol``) is
    floored at zero with a warning; beyond that the nesting is violated.
    """
    l_r = float(getattr(restricted, "loglik", restricted))
    l_f = float(getattr(full, "loglik", full))
    statistic = 2.0 * (l_f - l_r)
    if statistic < -tol:
        raise ValueError(
            f"full-model log-likelihood is below the restricted one by {-statistic / 2:.4g}; models are not nested"
        )
    if statistic < 0.0:
        warnings.warn("marginally negative LRT statistic floored at 0", RuntimeWarning)
        statistic = 0.0
    if df < 1:
        raise ValueError("df must be >= 1")
    return LrtResult(statistic=statistic, df=int(df), p_value=float(_st.chi2.sf(statistic, df)))
