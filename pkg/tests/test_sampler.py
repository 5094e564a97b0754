import numpy as np
import pytest
from scipy import stats

from tctvp.blockband import BlockTridiag
from tctvp.prior import LambdaSpec, NiwParams, TheoryMoments, rw_prior, theory_update
from tctvp.posterior import StaticDesign, conditional_posterior
from tctvp.sampler import (
    ChainConfig,
    HyperPrior,
    PriorInputs,
    ThetaPrior,
    draw_phi,
    draw_sigma,
    draw_sigma_phi,
    run_chain,
    sample_hyper,
)


def toy_moments_fn(theta):
    # fixed restriction with unit regressor moment; theta is ignored
    T = toy_moments_fn.periods
    return TheoryMoments(
        gamma_xx=np.full((T, 1, 1), 1.0),
        gamma_xy=np.full((T, 1, 1), 0.8),
        gamma_yy=np.full((T, 1, 1), 0.8**2 + 0.5),
        mean_y=np.full((T, 1), 0.8),
    )


def toy_design(T=20, seed=0):
    rng = np.random.default_rng(seed)
    phi = 0.8 + np.cumsum(0.15 * rng.standard_normal(T))
    y = phi + 0.7 * rng.standard_normal(T)
    return StaticDesign(x=np.ones((T, 1)), y=y[:, None], observed=np.ones(T, dtype=bool))


def toy_prior_inputs():
    return PriorInputs(phi0=np.zeros((1, 1)), scale=np.eye(1), dof=3.0)


class TestDraws:
    def test_identity_posterior_gives_standard_normal_phi(self):
        T, k, n = 5, 2, 2
        prec = BlockTridiag(np.tile(np.eye(k), (T, 1, 1)), np.zeros((T - 1, k, k)))
        post = NiwParams(
            location=np.zeros((T * k, n)), precision=prec, scale=np.eye(n), dof=10.0
        )
        rng = np.random.default_rng(1)
        draws = np.concatenate(
            [draw_phi(post, np.eye(n), rng).ravel() for _ in range(10_000)]
        )
        assert stats.kstest(draws, "norm").pvalue > 0.01

    def test_phi_draw_covariance_matches_kronecker(self):
        rng = np.random.default_rng(2)
        T, k, n = 2, 1, 2
        diag = np.array([[[2.0]], [[1.5]]])
        sub = np.array([[[-0.6]]])
        prec = BlockTridiag(diag, sub)
        sigma_u = np.array([[1.0, 0.4], [0.4, 0.8]])
        post = NiwParams(
            location=rng.standard_normal((T * k, n)), precision=prec, scale=np.eye(n), dof=9.0
        )
        ndraws = 40_000
        vecs = np.empty((ndraws, T * k * n))
        for i in range(ndraws):
            phi = draw_phi(post, sigma_u, rng)
            vecs[i] = (phi - post.location).ravel(order="F")
        est = np.cov(vecs.T)
        target = np.kron(sigma_u, np.linalg.inv(prec.to_dense()))
        for a in range(4):
            for b in range(4):
                se = np.sqrt((target[a, a] * target[b, b] + target[a, b] ** 2) / ndraws)
                assert abs(est[a, b] - target[a, b]) < 3.5 * se

    def test_sigma_mean_matches_inverse_wishart(self):
        rng = np.random.default_rng(3)
        n = 2
        scale = np.array([[2.0, 0.5], [0.5, 1.5]])
        post = NiwParams(
            location=np.zeros((2, n)),
            precision=BlockTridiag(np.ones((2, 1, 1)), np.zeros((1, 1, 1))),
            scale=scale,
            dof=9.0,
        )
        ndraws = 30_000
        draws = np.stack([draw_sigma(post, rng) for _ in range(ndraws)])
        target = scale / (9.0 - n - 1.0)
        est = draws.mean(axis=0)
        se = draws.std(axis=0) / np.sqrt(ndraws)
        assert np.all(np.abs(est - target) < 3.5 * se)

    def test_joint_draw_finite_and_pd(self):
        rng = np.random.default_rng(4)
        design = toy_design()
        prior = rw_prior(LambdaSpec(1.0), np.zeros((1, 1)), np.eye(1), 3.0, design.periods)
        post = conditional_posterior(design, prior)
        sigma, phi = draw_sigma_phi(post, rng)
        assert np.linalg.eigvalsh(sigma)[0] > 0.0
        assert np.all(np.isfinite(phi))


class TestSampleHyper:
    def test_degenerate_point_mass_chain_is_constant(self):
        toy_moments_fn.periods = 20
        design = toy_design()
        cfg = ChainConfig(iterations=200, burn_in=100, thinning=2, seed=0)
        chain = sample_hyper(
            design,
            toy_moments_fn,
            None,
            toy_prior_inputs(),
            cfg,
            fix_lam=1.3,
            fix_gamma=0.7,
        )
        assert np.all(chain.lam == 1.3)
        assert np.all(chain.gamma == 0.7)
        assert np.all(np.isfinite(chain.log_ml))
        assert np.all(chain.log_ml == chain.log_ml[0])

    def test_acceptance_ratio_antisymmetry(self):
        # For a symmetric proposal the log acceptance ratio flips sign when
        # the two points swap roles.
        from tctvp.sampler import _log_target

        toy_moments_fn.periods = 20
        design = toy_design()
        inputs = toy_prior_inputs()
        moments = toy_moments_fn(None)

        def logpost(lam, gamma):
            return _log_target(design, inputs, moments, lam, gamma)

        a, b = (0.9, 0.4), (1.7, 2.2)
        forward = logpost(*b) - logpost(*a)
        backward = logpost(*a) - logpost(*b)
        assert forward == pytest.approx(-backward, abs=1e-12)

    def test_grid_oracle_smoke(self):
        # Small-scale version of the acceptance-test grid comparison.  The
        # toy uses bounded flat hyper priors: with the production
        # Uniform(0, 1e10) the near-flat likelihood plateau at extreme
        # values carries almost all prior volume in a T=20 problem, which
        # is correct but useless for a histogram comparison.
        toy_moments_fn.periods = 20
        design = toy_design()
        cfg = ChainConfig(
            iterations=12_000, burn_in=2_000, thinning=1, seed=7, hyper_step=0.6
        )
        bounded = HyperPrior(lam_upper=20.0, gamma_upper=50.0)
        chain = sample_hyper(
            design, toy_moments_fn, None, toy_prior_inputs(), cfg, hyper_prior=bounded
        )
        assert 0.1 <= chain.accept_hyper <= 0.5
        assert chain.lam.size == cfg.n_saved
        assert np.all((chain.lam > 0) & (chain.lam < 20.0))
        assert np.all((chain.gamma > 0) & (chain.gamma < 50.0))

    def test_theta_block_stays_in_support(self):
        table = {
            "rho": ("beta", 0.6, 0.15),
            "sig": ("invgamma", 0.5, 0.3),
            "slope": ("normal", 0.0, 1.0),
        }
        prior = ThetaPrior(table, ("rho", "sig", "slope"))
        toy_moments_fn.periods = 12
        design = toy_design(T=12, seed=3)
        cfg = ChainConfig(iterations=400, burn_in=200, thinning=2, seed=1)
        chain = sample_hyper(design, toy_moments_fn, prior, toy_prior_inputs(), cfg)
        assert np.all((chain.theta[:, 0] > 0.0) & (chain.theta[:, 0] < 1.0))
        assert np.all(chain.theta[:, 1] > 0.0)

    def test_theta_prior_moment_matching(self):
        table = {
            "a": ("gamma", 2.0, 0.5),
            "b": ("invgamma", 0.63, 0.323),
            "c": ("beta", 0.8, 0.1),
            "d": ("normal", 0.5, 0.25),
        }
        prior = ThetaPrior(table, ("a", "b", "c", "d"))
        for i, name in enumerate(("a", "b", "c", "d")):
            _, mean, sd = table[name]
            assert prior.dists[i].mean() == pytest.approx(mean, rel=1e-9)
            assert prior.dists[i].std() == pytest.approx(sd, rel=1e-9)


class TestRunChain:
    def test_seed_determinism(self):
        toy_moments_fn.periods = 15
        design = toy_design(T=15, seed=5)
        cfg = ChainConfig(iterations=300, burn_in=100, thinning=4, seed=11)
        a = run_chain(design, toy_moments_fn, None, toy_prior_inputs(), cfg)
        b = run_chain(design, toy_moments_fn, None, toy_prior_inputs(), cfg)
        np.testing.assert_array_equal(a.phi, b.phi)
        np.testing.assert_array_equal(a.sigma_u, b.sigma_u)
        np.testing.assert_array_equal(a.lam, b.lam)
        np.testing.assert_array_equal(a.gamma, b.gamma)

    def test_thinning_invariance_in_expectation(self):
        toy_moments_fn.periods = 15
        design = toy_design(T=15, seed=6)
        bounded = HyperPrior(lam_upper=20.0, gamma_upper=50.0)
        thin = run_chain(
            design,
            toy_moments_fn,
            None,
            toy_prior_inputs(),
            ChainConfig(iterations=14_000, burn_in=2_000, thinning=10, seed=2, hyper_step=0.6),
            hyper_prior=bounded,
        )
        unthin = run_chain(
            design,
            toy_moments_fn,
            None,
            toy_prior_inputs(),
            ChainConfig(iterations=14_000, burn_in=2_000, thinning=1, seed=3, hyper_step=0.6),
            hyper_prior=bounded,
        )
        se = thin.lam.std() / np.sqrt(thin.lam.size) + unthin.lam.std() / np.sqrt(
            unthin.lam.size / 20.0
        )
        assert abs(thin.lam.mean() - unthin.lam.mean()) < 4.0 * se

    def test_store_roundtrip(self, tmp_path):
        from tctvp.drawstore import DrawStore

        toy_moments_fn.periods = 10
        design = toy_design(T=10, seed=9)
        cfg = ChainConfig(iterations=120, burn_in=40, thinning=4, seed=4)
        store = run_chain(design, toy_moments_fn, None, toy_prior_inputs(), cfg, meta={"tag": "t"})
        path = store.save(tmp_path / "run")
        loaded = DrawStore.load(path)
        np.testing.assert_array_equal(loaded.phi, store.phi)
        np.testing.assert_array_equal(loaded.sigma_u, store.sigma_u)
        assert loaded.meta["tag"] == "t"
        assert (path / "summary.csv").exists()


class TestGewekeConsistency:
    def test_prior_vs_successive_conditional_moments(self):
        # Marginal-conditional vs successive-conditional simulators agree on
        # the first two moments of the hyper-parameters when the model is
        # self-consistent.  Proper bounded priors keep both sides finite.
        T = 12
        rng = np.random.default_rng(42)
        toy_moments_fn.periods = T
        moments = toy_moments_fn(None)
        inputs = toy_prior_inputs()
        lam_lo, lam_hi = 0.5, 3.0
        gam_lo, gam_hi = 0.2, 3.0
        hyper_prior = HyperPrior(
            lam_upper=lam_hi,
            gamma_upper=gam_hi,
            lam_logpdf=lambda l: 0.0 if lam_lo < l < lam_hi else -np.inf,
            gamma_logpdf=lambda g: 0.0 if gam_lo < g < gam_hi else -np.inf,
        )

        def prior_bundle(lam, gamma):
            rw = rw_prior(inputs.lam_spec(lam), inputs.phi0, inputs.scale, inputs.dof, T)
            return theory_update(rw, moments, gamma)

        # marginal-conditional: plain prior draws
        n_mc = 4000
        mc_lam = rng.uniform(lam_lo, lam_hi, size=n_mc)
        mc_gam = rng.uniform(gam_lo, gam_hi, size=n_mc)

        # successive-conditional: alternate hyper MH step, coefficient draw,
        # and data regeneration
        n_sc, keep_every = 6000, 3
        lam, gamma = 1.0, 1.0
        y = toy_design(T=T, seed=1).y
        sc_lam, sc_gam = [], []
        step = 0.8
        for it in range(n_sc):
            design = StaticDesign(x=np.ones((T, 1)), y=y, observed=np.ones(T, dtype=bool))
            chain = sample_hyper(
                design,
                toy_moments_fn,
                None,
                inputs,
                ChainConfig(
                    iterations=2, burn_in=0, thinning=1, seed=0, hyper_step=step,
                    adapt_window=10_000,
                ),
                hyper_prior=hyper_prior,
                init_lam=lam,
                init_gamma=gamma,
                rng=rng,
            )
            lam, gamma = chain.lam[-1], chain.gamma[-1]
            post = conditional_posterior(design, prior_bundle(lam, gamma))
            sigma, phi = draw_sigma_phi(post, rng)
            y = phi + np.linalg.cholesky(sigma)[0, 0] * rng.standard_normal((T, 1))
            if it % keep_every == 0:
                sc_lam.append(lam)
                sc_gam.append(gamma)
        sc_lam = np.asarray(sc_lam)
        sc_gam = np.asarray(sc_gam)

        for mc, sc in ((mc_lam, sc_lam), (mc_gam, sc_gam)):
            for moment in (lambda v: v, lambda v: v**2):
                a, b = moment(mc), moment(sc)
                # crude inflation for residual serial correlation
                se = np.sqrt(a.var() / a.size + 4.0 * b.var() / b.size)
                assert abs(a.mean() - b.mean()) < 4.0 * se
