import json
import math

import numpy as np
import pytest
from scipy import special as sp
from scipy.integrate import dblquad
from scipy.stats import kendalltau, kstest

from tcopula import copula as cp
from tcopula import numerics as nm

SPEC28 = cp.CopulaSpec.bivariate(0.7, 2, 8)


class TestCopulaSpec:
    def test_from_corr_roundtrip(self):
        corr = np.array([[1.0, 0.6, 0.2], [0.6, 1.0, -0.1], [0.2, -0.1, 1.0]])
        spec = cp.CopulaSpec.from_corr(corr, dofs=[2, 5, 9])
        assert np.allclose(spec.corr, corr, atol=1e-14)
        norms = np.sqrt((spec.chol**2).sum(axis=1))
        assert np.abs(norms - 1).max() < 1e-12

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            cp.CopulaSpec.from_corr([[1.0, 1.2], [1.2, 1.0]])  # not PD
        with pytest.raises(ValueError):
            cp.CopulaSpec.from_corr([[1.0, 0.2], [0.3, 1.0]])  # asymmetric
        with pytest.raises(ValueError):
            cp.CopulaSpec.bivariate(0.5, -2, 3)  # bad dof
        with pytest.raises(ValueError):
            cp.CopulaSpec.bivariate(1.0, 2, 3)  # degenerate rho
        with pytest.raises(ValueError):
            cp.CopulaSpec(chol=np.array([[1.0, 0.0], [0.5, 0.5]]), dofs=[2, 3])  # row norm

    def test_group_consistency(self):
        cp.CopulaSpec.bivariate(0.4, 5, 5, groups=(0, 0))
        with pytest.raises(ValueError):
            cp.CopulaSpec.bivariate(0.4, 5, 6, groups=(0, 0))

    def test_json_roundtrip_and_gaussian_marker(self):
        spec = cp.CopulaSpec.bivariate(0.37, 2.5, 11.0)
        again = cp.CopulaSpec.from_json(spec.to_json())
        assert np.allclose(again.corr, spec.corr) and np.allclose(again.dofs, spec.dofs)
        g = cp.CopulaSpec.bivariate(-0.2)
        assert g.is_gaussian
        doc = json.loads(g.to_json())
        assert doc["dofs"] == "gaussian"
        assert cp.CopulaSpec.from_dict(doc).is_gaussian


class TestSampleValidation:
    def test_boundary_rejected_with_row(self):
        u = np.array([[0.5, 0.5], [0.2, 1.0], [0.1, 0.1]])
        with pytest.raises(ValueError, match="row 1"):
            cp.as_uniform_sample(u)

    def test_near_boundary_clamped_with_warning(self):
        u = np.array([[0.5, 1e-14]])
        with pytest.warns(RuntimeWarning, match="clamping"):
            out = cp.as_uniform_sample(u)
        assert out[0, 1] == pytest.approx(1e-12)


class TestDensity:
    def test_equal_dof_matches_closed_form(self):
        spec = cp.CopulaSpec.bivariate(0.7, 6, 6)
        pts = [(0.3, 0.6), (0.9, 0.95), (0.01, 0.02), (0.5, 0.5), (0.999, 0.2)]
        for u in pts:
            assert cp.copula_logpdf(spec, u) == pytest.approx(
                cp.standard_t_copula_logpdf(0.7, 6, u), abs=1e-9
            )

    def test_radial_symmetry_grid(self):
        grid = np.linspace(0.12, 0.88, 5)
        pts = np.array([(a, b) for a in grid for b in grid])
        direct = cp.copula_pdf(SPEC28, pts)
        mirrored = cp.copula_pdf(SPEC28, 1.0 - pts)
        assert np.abs(direct - mirrored).max() < 1e-8

    def test_non_exchangeable_when_dofs_differ(self):
        a = cp.copula_pdf(SPEC28, (0.95, 0.99))
        b = cp.copula_pdf(SPEC28, (0.99, 0.95))
        assert abs(a - b) > 1e-4

    def test_rho_reflection(self):
        neg = cp.CopulaSpec.bivariate(-0.7, 2, 8)
        for u1, u2 in [(0.2, 0.6), (0.85, 0.4), (0.97, 0.97)]:
            assert cp.copula_pdf(SPEC28, (u1, u2)) == pytest.approx(
                cp.copula_pdf(neg, (1 - u1, u2)), rel=1e-8
            )

    def test_gaussian_limit_closed_form(self):
        spec = cp.CopulaSpec.bivariate(0.6)
        rho = 0.6
        u = (0.3, 0.7)
        z = sp.ndtri(u)
        expected = math.exp(
            -(rho**2 * (z[0] ** 2 + z[1] ** 2) - 2 * rho * z[0] * z[1]) / (2 * (1 - rho**2))
        ) / math.sqrt(1 - rho**2)
        assert cp.copula_pdf(spec, u) == pytest.approx(expected, rel=1e-12)


class TestLogLikelihood:
    def test_single_point_is_logpdf(self):
        u = np.array([[0.42, 0.77]])
        assert cp.log_likelihood(SPEC28, u) == pytest.approx(
            cp.copula_logpdf(SPEC28, u[0]), abs=1e-10
        )

    def test_three_point_term_by_term(self):
        u = np.array([[0.1, 0.2], [0.65, 0.55], [0.93, 0.97]])
        spec = cp.CopulaSpec.bivariate(0.5, 3, 7)
        total = sum(cp.copula_logpdf(spec, row) for row in u)
        assert cp.log_likelihood(spec, u) == pytest.approx(total, abs=1e-8)

    def test_gaussian_limit_closed_form(self):
        spec = cp.CopulaSpec.bivariate(0.45)
        u = cp.simulate(spec, 50, seed=8)
        z = sp.ndtri(u)
        rho = 0.45
        quad = (rho**2 * (z**2).sum(axis=1) - 2 * rho * z[:, 0] * z[:, 1]) / (1 - rho**2)
        expected = float((-0.5 * quad - 0.5 * math.log(1 - rho**2)).sum())
        assert cp.log_likelihood(spec, u) == pytest.approx(expected, abs=1e-9)

    def test_domain_error_names_row(self):
        u = np.array([[0.3, 0.4], [0.3, -0.1]])
        with pytest.raises(ValueError, match="row 1"):
            cp.log_likelihood(SPEC28, u)

    def test_fast_rule_tracks_reference(self):
        u = cp.simulate(SPEC28, 300, seed=4)
        assert cp.loglik_quadrature_fast(SPEC28, u) == pytest.approx(
            cp.log_likelihood(SPEC28, u), abs=1e-8
        )


class TestSimulate:
    def test_deterministic(self):
        a = cp.simulate(SPEC28, 500, seed=42)
        b = cp.simulate(SPEC28, 500, seed=42)
        assert np.array_equal(a, b)
        c = cp.simulate(SPEC28, 500, seed=43)
        assert not np.array_equal(a, c)

    def test_margins_uniform(self):
        u = cp.simulate(cp.CopulaSpec.bivariate(0.9, 2, 10), 30_000, seed=3)
        for k in range(2):
            assert kstest(u[:, k], "uniform").pvalue > 0.01

    def test_open_interval(self):
        u = cp.simulate(SPEC28, 10_000, seed=2)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_kendall_tau_tracks_sine_map(self):
        # at moderate sample size the MC error dominates the small
        # approximation bias of the sine map for unequal dofs
        K = 5000
        u = cp.simulate(cp.CopulaSpec.bivariate(0.9, 2, 10), K, seed=11)
        tau = kendalltau(u[:, 0], u[:, 1]).statistic
        se = math.sqrt(2 * (2 * K + 5) / (9 * K * (K - 1)))
        assert abs(tau - 2 / math.pi * math.asin(0.9)) < 3 * se + 0.025

    def test_gaussian_simulation(self):
        u = cp.simulate(cp.CopulaSpec.bivariate(0.8), 20_000, seed=3)
        z = sp.ndtri(u)
        assert np.corrcoef(z.T)[0, 1] == pytest.approx(0.8, abs=0.02)


class TestCdf:
    def test_uniform_margin(self):
        assert cp.copula_cdf(SPEC28, (0.37, 1 - 1e-12)) == pytest.approx(0.37, abs=1e-7)

    def test_independence_orthant(self):
        spec = cp.CopulaSpec.bivariate(0.0, 3, 9)
        assert cp.copula_cdf(spec, (0.5, 0.5)) == pytest.approx(0.25, abs=1e-10)

    def test_equal_dof_against_conditional_route(self):
        spec = cp.CopulaSpec.bivariate(0.7, 4, 4)
        for u in [(0.3, 0.6), (0.9, 0.9), (0.05, 0.4)]:
            assert cp.copula_cdf(spec, u) == pytest.approx(
                cp.standard_t_copula_cdf(0.7, 4, u), abs=1e-7
            )

    def test_equal_dof_against_2d_density_quadrature(self):
        # oracle: planar quadrature of the equal-dof bivariate t density
        rho, nu = 0.7, 4.0
        u = (0.3, 0.6)
        x1, x2 = sp.stdtrit(nu, u[0]), sp.stdtrit(nu, u[1])
        chol = np.linalg.cholesky([[1, rho], [rho, 1]])

        def dens(y2, y1):
            return math.exp(cp.multivariate_t_logpdf(np.array([y1, y2]), chol, nu)[0])

        # infinite lower limits: the t tails are heavy enough that any
        # finite window loses more mass than the tolerance allows
        oracle, err = dblquad(dens, -np.inf, x1, -np.inf, x2, epsabs=1e-9)
        assert cp.copula_cdf(cp.CopulaSpec.bivariate(rho, nu, nu), u) == pytest.approx(
            oracle, abs=max(1e-7, 10 * err)
        )

    def test_monotone_in_each_coordinate(self):
        base = cp.copula_cdf(SPEC28, (0.4, 0.6))
        assert cp.copula_cdf(SPEC28, (0.5, 0.6)) > base
        assert cp.copula_cdf(SPEC28, (0.4, 0.7)) > base

    def test_gaussian_bivariate(self):
        spec = cp.CopulaSpec.bivariate(0.6)
        assert cp.copula_cdf(spec, (0.5, 0.5)) == pytest.approx(
            0.25 + math.asin(0.6) / (2 * math.pi), abs=1e-13
        )

    def test_dim3_requires_mc(self):
        corr = np.array([[1.0, 0.5, 0.3], [0.5, 1.0, 0.2], [0.3, 0.2, 1.0]])
        spec = cp.CopulaSpec.from_corr(corr, dofs=[2, 5, 8])
        with pytest.raises(ValueError, match="mc"):
            cp.copula_cdf(spec, (0.3, 0.5, 0.7))
        est = cp.copula_cdf(spec, (0.3, 0.5, 0.7), method="mc", mc_n=200_000, seed=9)
        assert isinstance(est, cp.McEstimate)
        est2 = cp.copula_cdf(spec, (0.3, 0.5, 0.7), method="mc", mc_n=200_000, seed=10)
        assert abs(est.value - est2.value) < 4 * math.hypot(est.stderr, est2.stderr)

    def test_dim3_density_normalizes_margins(self):
        # the density path is generic in dimension; sanity-check one point
        corr = np.array([[1.0, 0.5, 0.3], [0.5, 1.0, 0.2], [0.3, 0.2, 1.0]])
        spec = cp.CopulaSpec.from_corr(corr, dofs=[2, 5, 8])
        val = cp.copula_pdf(spec, (0.4, 0.6, 0.5))
        assert np.isfinite(val) and val > 0


class TestStandardTCopula:
    def test_orthant(self):
        assert cp.standard_t_copula_cdf(0.0, 5, (0.5, 0.5)) == pytest.approx(0.25, abs=1e-10)
        assert cp.standard_t_copula_cdf(0.7, 5, (0.5, 0.5)) == pytest.approx(
            0.25 + math.asin(0.7) / (2 * math.pi), abs=1e-9
        )

    def test_corner_ratio_approaches_tail_coefficient(self):
        from tcopula.taildep import lambda_standard_t

        lam = lambda_standard_t(0.7, 8)
        ratio = cp.standard_t_copula_cdf(0.7, 8, (1e-6, 1e-6)) / 1e-6
        assert ratio == pytest.approx(lam, abs=0.01)

    def test_logpdf_normalizes(self):
        val, err = dblquad(
            lambda b, a: math.exp(cp.standard_t_copula_logpdf(0.5, 3, (a, b))),
            0.001, 0.999, 0.001, 0.999, epsabs=1e-6,
        )
        assert val < 1.0  # open-cube truncation removes corner mass
        assert val == pytest.approx(1.0, abs=0.02)
