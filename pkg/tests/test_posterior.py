import numpy as np
import pytest

from tctvp.data import TimeSeriesPanel, period_range
from tctvp.errors import DofTooSmall, InsufficientData
from tctvp.posterior import (
    StaticDesign,
    build_design,
    conditional_posterior,
    design_from_values,
    marginal_likelihood,
    ml_decomposition,
)
from tctvp.prior import LambdaSpec, rw_prior, theory_update
from tctvp.prior import TheoryMoments

from .oracles import kalman_smoother_tvp, sequential_log_ml


def make_panel(values, pre_sample=0):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1:
        values = values.T
    t, n = values.shape
    return TimeSeriesPanel(
        dates=tuple(period_range("1980Q1", t)),
        values=values,
        names=tuple(f"v{i}" for i in range(n)),
        pre_sample=pre_sample,
    )


def random_instance(rng, T, n, p):
    values = rng.standard_normal((T + p, n))
    design = design_from_values(values, p)
    k = 1 + n * p
    lam = rng.uniform(0.4, 2.0)
    phi0 = 0.2 * rng.standard_normal((k, n))
    scale = np.diag(rng.uniform(0.5, 1.5, size=n))
    prior = rw_prior(LambdaSpec(lam), phi0, scale, n + 2.0, periods=T)
    return design, prior, lam


class TestBuildDesign:
    def test_univariate_example(self):
        panel = make_panel([1.0, 2.0, 3.0])
        design = build_design(panel, p=1)
        assert design.periods == 2
        np.testing.assert_allclose(design.x, [[1.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(design.y, [[2.0], [3.0]])

    def test_effective_length_contract(self):
        panel = make_panel(np.arange(20.0), pre_sample=8)
        design = build_design(panel, p=3)
        assert design.periods == 20 - 8 - 3

    def test_block_cross_products(self):
        rng = np.random.default_rng(0)
        design = design_from_values(rng.standard_normal((9, 2)), 2)
        blocks = design.xtx_blocks()
        for t in range(design.periods):
            np.testing.assert_allclose(blocks[t], np.outer(design.x[t], design.x[t]))

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            build_design(make_panel([1.0, 2.0]), p=2)


class TestConditionalPosterior:
    def test_no_observations_returns_prior(self):
        rng = np.random.default_rng(1)
        T, k, n = 4, 3, 2
        prior = rw_prior(
            LambdaSpec(0.9), rng.standard_normal((k, n)), np.eye(n), n + 2.0, periods=T
        )
        post = conditional_posterior(StaticDesign.empty(T, k, n), prior)
        np.testing.assert_allclose(post.location, prior.location, atol=1e-12)
        np.testing.assert_allclose(post.scale, prior.scale, atol=1e-12)
        np.testing.assert_allclose(post.precision.to_dense(), prior.precision.to_dense())
        assert post.dof == prior.dof

    def test_conjugacy_closure_and_band_structure(self):
        rng = np.random.default_rng(2)
        design, prior, _ = random_instance(rng, T=6, n=2, p=1)
        post = conditional_posterior(design, prior)
        assert post.dof == prior.dof + design.nobs
        # no fill-in: sub blocks unchanged by the data
        np.testing.assert_array_equal(post.precision.sub, prior.precision.sub)

    def test_pooled_ols_limit(self):
        rng = np.random.default_rng(3)
        n, p, T = 2, 1, 160
        phi_true = np.array([[0.1, 0.0], [0.5, 0.2], [-0.1, 0.4]])
        values = np.zeros((T + p, n))
        for t in range(p, T + p):
            x_t = np.concatenate([[1.0], values[t - 1]])
            values[t] = x_t @ phi_true + 0.3 * rng.standard_normal(n)
        design = design_from_values(values, p)
        k = 1 + n * p
        # Flat prior on the common level: zero first-block precision so the
        # large-lambda limit is pooled OLS rather than the initial location.
        spec = LambdaSpec(1e6, first_block_precision=np.zeros((k, k)))
        prior = rw_prior(spec, np.zeros((k, n)), np.eye(n), n + 2.0, periods=T)
        post = conditional_posterior(design, prior)
        blocks = post.location.reshape(T, k, n)
        increments = np.abs(np.diff(blocks, axis=0)).max()
        assert increments < 1e-6
        pooled = np.linalg.lstsq(design.x, design.y, rcond=None)[0]
        assert np.abs(blocks[0] - pooled).max() < 1e-4

    def test_kalman_smoother_oracle(self):
        rng = np.random.default_rng(4)
        T, n, p = 8, 2, 1
        design, prior, lam = random_instance(rng, T, n, p)
        k = design.k
        sigma_u = np.array([[0.8, 0.2], [0.2, 1.1]])
        post = conditional_posterior(design, prior)
        means, covs = kalman_smoother_tvp(
            design.x,
            design.y,
            sigma_u,
            state_noise_col_prec=lam**2 * np.eye(k),
            init_col_prec=lam**2 * np.eye(k),
            phi0=prior.location[:k],
        )
        np.testing.assert_allclose(post.location.reshape(T, k, n), means, atol=1e-8)
        psi_blocks = post.precision.cholesky().inverse_diag_blocks()
        for t in range(T):
            np.testing.assert_allclose(np.kron(sigma_u, psi_blocks[t]), covs[t], atol=1e-8)


class TestMarginalLikelihood:
    def test_sequential_update_oracle(self):
        rng = np.random.default_rng(5)
        T, n, p = 20, 2, 1
        design, prior, _ = random_instance(rng, T, n, p)
        value = marginal_likelihood(design, prior)
        ref = sequential_log_ml(
            design.x,
            design.y,
            prior.location,
            prior.precision.to_dense(),
            prior.scale,
            prior.dof,
        )
        assert value.total == pytest.approx(ref, abs=1e-6)

    def test_empty_block_is_noop(self):
        rng = np.random.default_rng(6)
        design, prior, _ = random_instance(rng, T=5, n=1, p=1)
        base = marginal_likelihood(design, prior).total
        # void one period then extend prior/design consistently: instead,
        # simply mark an extra period unobserved in a longer instance and
        # check against the same instance built directly.
        T2 = 6
        x2 = np.vstack([design.x, np.zeros((1, design.k))])
        y2 = np.vstack([design.y, np.zeros((1, 1))])
        obs2 = np.concatenate([design.observed, [False]])
        design2 = StaticDesign(x=x2, y=y2, observed=obs2)
        prior2 = rw_prior(
            LambdaSpec(np.sqrt(prior.precision.diag[-1][0, 0])),
            prior.location[: design.k],
            prior.scale,
            prior.dof,
            periods=T2,
        )
        val2 = marginal_likelihood(design2, prior2)
        # not bit-identical across different T, but adding the empty block to
        # the same-T design is:
        design3 = StaticDesign(
            x=design.x.copy(), y=design.y.copy(), observed=design.observed.copy()
        )
        design3.observed[2] = False
        design4 = StaticDesign(
            x=np.where(np.arange(5)[:, None] == 2, 0.0, design.x),
            y=np.where(np.arange(5)[:, None] == 2, 0.0, design.y),
            observed=design3.observed,
        )
        assert marginal_likelihood(design3, prior).total == marginal_likelihood(design4, prior).total
        assert np.isfinite(base) and np.isfinite(val2.total)

    def test_white_noise_overfitting_tradeoff(self):
        # On pure noise the marginal likelihood must not be maximized by the
        # loosest prior: some strictly positive persistence beats lambda -> 0.
        rng = np.random.default_rng(7)
        T, n, p = 60, 1, 1
        values = rng.standard_normal((T + p, n))
        design = design_from_values(values, p)
        k = design.k

        def ml_at(lam):
            prior = rw_prior(LambdaSpec(lam), np.zeros((k, n)), np.eye(n), n + 2.0, periods=T)
            return marginal_likelihood(design, prior).total

        loose = ml_at(0.05)
        grid = [ml_at(lam) for lam in (0.5, 2.0, 8.0, 32.0)]
        assert max(grid) > loose

    def test_rotation_invariance(self):
        rng = np.random.default_rng(8)
        T, n, p = 6, 3, 2
        values = rng.standard_normal((T + p, n))
        design = design_from_values(values, p)
        k = design.k
        phi0 = 0.1 * rng.standard_normal((k, n))
        s0 = np.diag(rng.uniform(0.5, 2.0, size=n))
        a = rng.standard_normal((k, k))
        gxx = a @ a.T + k * np.eye(k)
        gxy = rng.standard_normal((k, n))
        gyy = np.eye(n) + gxy.T @ np.linalg.solve(gxx, gxy)

        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        sx = np.zeros((k, k))
        sx[0, 0] = 1.0
        for lag in range(p):
            sx[1 + lag * n : 1 + (lag + 1) * n, 1 + lag * n : 1 + (lag + 1) * n] = q.T

        def logml(vals, gxx_, gxy_, gyy_, s_, phi0_):
            d = design_from_values(vals, p)
            rw = rw_prior(LambdaSpec(0.8), phi0_, s_, n + 2.0, periods=T)
            moments = TheoryMoments(
                gamma_xx=np.tile(gxx_, (T, 1, 1)),
                gamma_xy=np.tile(gxy_, (T, 1, 1)),
                gamma_yy=np.tile(gyy_, (T, 1, 1)),
                mean_y=np.zeros((T, n)),
            )
            tc = theory_update(rw, moments, 1.5)
            return marginal_likelihood(d, tc).total

        base = logml(values, gxx, gxy, gyy, s0, phi0)
        rotated = logml(
            values @ q,
            sx @ gxx @ sx.T,
            sx @ gxy @ q,
            q.T @ gyy @ q,
            q.T @ s0 @ q,
            sx @ phi0 @ q,
        )
        assert rotated == pytest.approx(base, abs=1e-8)

    def test_scale_equivariance_with_regressor_specific_lambda(self):
        rng = np.random.default_rng(9)
        T, n, p = 7, 2, 1
        values = rng.standard_normal((T + p, n)) + 1.0
        k = 1 + n * p
        lam = np.array([0.9, 1.4, 0.6])
        phi0 = 0.1 * rng.standard_normal((k, n))
        s0 = np.diag([0.8, 1.3])
        c = 3.7
        scale_y = np.diag([c, 1.0])
        scale_x = np.diag([1.0, c, 1.0])

        def logml(vals, lam_, phi0_, s_):
            d = design_from_values(vals, p)
            prior = rw_prior(LambdaSpec(lam_), phi0_, s_, n + 2.0, periods=T)
            return marginal_likelihood(d, prior).total

        base = logml(values, lam, phi0, s0)
        # consistent transform: regressor j's tightness scales with the
        # regressor itself, so the pushforward prior stays in the family
        rescaled = logml(
            values @ scale_y,
            lam * np.diag(scale_x),
            np.linalg.solve(scale_x, phi0) @ scale_y,
            scale_y @ s0 @ scale_y,
        )
        assert rescaled == pytest.approx(base - (T + 0.0) * np.log(c), abs=1e-8)


class TestMlDecomposition:
    def test_components_sum_to_total(self):
        rng = np.random.default_rng(10)
        for _ in range(8):
            design, prior, _ = random_instance(rng, T=6, n=2, p=1)
            value = ml_decomposition(design, prior)
            assert value.component_sum() == pytest.approx(value.total, abs=1e-8)

    def test_single_period_penalty(self):
        rng = np.random.default_rng(11)
        design, prior, _ = random_instance(rng, T=1, n=2, p=1)
        value = ml_decomposition(design, prior)
        n = 2
        v_prior = prior.scale / (prior.dof - n - 1)
        x = design.x[0]
        q = float(x @ np.linalg.solve(prior.precision.to_dense(), x))
        expected = -0.5 * np.log(np.linalg.det(v_prior) * (1.0 + q) ** n)
        assert value.components["log_penalty"] == pytest.approx(expected, abs=1e-10)

    def test_lambda_monotonicity(self):
        rng = np.random.default_rng(12)
        T, n, p = 40, 2, 1
        values = rng.standard_normal((T + p, n))
        design = design_from_values(values, p)
        k = design.k
        fits, pens = [], []
        for lam in (8.0, 4.0, 2.0, 1.0, 0.5):
            prior = rw_prior(LambdaSpec(lam), np.zeros((k, n)), np.eye(n), n + 2.0, periods=T)
            value = ml_decomposition(design, prior)
            fits.append(value.components["log_fit"])
            pens.append(value.components["log_penalty"])
        assert all(np.diff(fits) >= -1e-9)
        assert all(np.diff(pens) <= 1e-9)

    def test_dof_guard(self):
        rng = np.random.default_rng(13)
        design, prior, _ = random_instance(rng, T=3, n=2, p=1)
        thin = rw_prior(
            LambdaSpec(1.0), prior.location[: design.k], prior.scale, 2.5, periods=3
        )
        with pytest.raises(DofTooSmall):
            ml_decomposition(design, thin)
