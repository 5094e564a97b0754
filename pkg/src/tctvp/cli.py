"""Command-line entry points: estimate, forecast, irf, simulate, ml-grid.

Every command reads one JSON config, writes into a run directory with a
``meta.json`` recording the config hash, package version, seed and wall
clock, and exits 0 on success, 1 on user error, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import irf as compute_irf
from .analysis import recursive_forecast, score
from .baselines import StdTvpSpec, fit_flat_var, fit_minnesota, fit_std_tvpvar, MinnesotaSpec
from .config import config_hash, load_config
from .data import TimeSeriesPanel, emit, ingest, period_range
from .drawstore import DrawStore
from .errors import ConfigError, NumericalError, TctvpError
from .forecasters import (
    FlatVarForecaster,
    MinnesotaForecaster,
    StdTvpForecaster,
    TcTvpForecaster,
)
from .posterior import build_design
from .prior import presample_statistics
from .sampler import ChainConfig, HyperPrior, PriorInputs, ThetaPrior, run_chain
from .statespace import AnnouncementWindow, get_model, simulate, theory_moments


def _chain_config(config: dict, seed_override: int | None = None) -> ChainConfig:
    c = config["chain"]
    return ChainConfig(
        iterations=c["iterations"],
        burn_in=c["burn_in"],
        thinning=c["thinning"],
        seed=c["seed"] if seed_override is None else seed_override,
        hyper_step=c["hyper_step"],
        theta_step=c["theta_step"],
        adapt_window=c["adapt_window"],
    )


def build_panel(config: dict, data_path: str | None = None) -> TimeSeriesPanel:
    data_cfg = config.get("data", {})
    path = data_path or data_cfg.get("path")
    if not path:
        raise ConfigError("no data path given (config data.path or --data)")
    return ingest(
        path,
        transforms=data_cfg.get("transforms", {}),
        nonstationary=data_cfg.get("nonstationary", {}),
        pre_sample=data_cfg.get("pre_sample", 0),
    )


def resolve_window(config: dict, est_dates: tuple[str, ...]) -> AnnouncementWindow | None:
    zlb = config["theory"].get("zlb")
    if not zlb:
        return None
    start = zlb["start"]
    if isinstance(start, str):
        if start not in est_dates:
            raise ConfigError(f"zlb start {start} outside the effective sample")
        start = est_dates.index(start)
    return AnnouncementWindow(
        start=int(start),
        length=int(zlb["length"]),
        expected_horizon=int(zlb.get("expected_horizon", 4)),
        meas_variance=float(zlb.get("measurement_variance", 1e-3)),
    )


def theory_pieces(config: dict, est_dates: tuple[str, ...]):
    """Theory model, fixed-theta vector, and a moments builder bound to the
    configured announcement window."""
    model = get_model(config["theory"]["name"])
    fixed = config["theory"].get("fixed_theta")
    theta0 = np.asarray(fixed, dtype=float) if fixed is not None else model.default_theta
    window = resolve_window(config, est_dates)
    p = config["model"]["lags"]

    def moments_builder(theta, periods):
        theta = theta0 if theta is None or np.size(theta) == 0 else theta
        sol = model.build(np.asarray(theta, dtype=float), periods, window)
        return theory_moments(sol, p, periods)

    return model, theta0, window, moments_builder


def _prior_inputs(config: dict, panel: TimeSeriesPanel) -> PriorInputs:
    p = config["model"]["lags"]
    scale, dof, p1, phi0 = presample_statistics(
        panel.presample_values(), p, config["prior"]["presample_ar_order"]
    )
    return PriorInputs(phi0=phi0, scale=scale, dof=dof, first_block_precision=p1)


def _estimate_store(config: dict, panel: TimeSeriesPanel, seed: int | None = None) -> DrawStore:
    p = config["model"]["lags"]
    kind = config["model"]["type"]
    design = build_design(panel, p)
    cfg = _chain_config(config, seed)
    est_dates = panel.estimation_dates(p)
    common_meta = {
        "model": kind,
        "lags": p,
        "variables": list(panel.names),
        "estimation_dates": list(est_dates),
        "pre_sample": panel.pre_sample,
    }
    if kind == "tc-tvp":
        model, theta0, _, moments_builder = theory_pieces(config, est_dates)
        prior_cfg = config["prior"]
        theta_prior = (
            ThetaPrior(model.prior_table, model.theta_names)
            if config["theory"].get("sample_theta")
            else None
        )
        store = run_chain(
            design,
            lambda theta: moments_builder(theta, design.periods),
            theta_prior,
            _prior_inputs(config, panel),
            cfg,
            hyper_prior=HyperPrior(prior_cfg["lam_upper"], prior_cfg["gamma_upper"]),
            meta={**common_meta, "theta_names": list(model.theta_names)},
            fix_lam=prior_cfg["fix_lam"],
            fix_gamma=prior_cfg["fix_gamma"],
            fixed_theta=None if config["theory"].get("sample_theta") else theta0,
            init_lam=prior_cfg["init_lam"],
            init_gamma=prior_cfg["init_gamma"],
        )
        return store
    if kind == "tvp-standard":
        spec = StdTvpSpec.from_presample(panel.presample_values(), p)
        return fit_std_tvpvar(design, spec, cfg, meta=common_meta)
    if kind in ("var-flat", "bvar-minnesota"):
        if kind == "var-flat":
            post = fit_flat_var(design)
        else:
            spec = MinnesotaSpec.from_presample(
                panel.presample_values(),
                p,
                panel.nonstationary,
                config["model"].get("tightness", 0.1),
            )
            post = fit_minnesota(design, spec, p)
        rng = np.random.default_rng(cfg.seed)
        n_saved = cfg.n_saved
        k, n = post.location.shape
        phis = np.empty((n_saved, 1, k, n))
        sigmas = np.empty((n_saved, n, n))
        for d in range(n_saved):
            sigma, pi = post.sample(rng)
            phis[d, 0] = pi
            sigmas[d] = sigma
        return DrawStore(
            phi=phis,
            sigma_u=sigmas,
            lam=np.zeros(n_saved),
            gamma=np.zeros(n_saved),
            theta=np.zeros((n_saved, 0)),
            log_ml=np.full(n_saved, np.nan),
            meta=common_meta,
        )
    raise ConfigError(f"unknown model type {kind!r}")


def _merge_stores(stores: list[DrawStore]) -> DrawStore:
    meta = dict(stores[0].meta)
    meta["chains"] = [s.meta for s in stores]
    return DrawStore(
        phi=np.concatenate([s.phi for s in stores]),
        sigma_u=np.concatenate([s.sigma_u for s in stores]),
        lam=np.concatenate([s.lam for s in stores]),
        gamma=np.concatenate([s.gamma for s in stores]),
        theta=np.concatenate([s.theta for s in stores]),
        log_ml=np.concatenate([s.log_ml for s in stores]),
        meta=meta,
    )


def _estimate_one(args):
    config, data_path, seed = args
    panel = build_panel(config, data_path)
    return _estimate_store(config, panel, seed)


def cmd_estimate(config, out_dir: Path, data_path=None, chains=1, threads=1) -> Path:
    seeds = [config["chain"]["seed"] + 1000 * i for i in range(chains)]
    jobs = [(config, data_path, s) for s in seeds]
    if threads > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, chains)) as pool:
            stores = list(pool.map(_estimate_one, jobs))
    else:
        stores = [_estimate_one(job) for job in jobs]
    store = stores[0] if chains == 1 else _merge_stores(stores)
    store.save(out_dir / "draws")
    return out_dir


def _forecaster(config, moments_builder=None, theta_prior=None):
    kind = config["model"]["type"]
    p = config["model"]["lags"]
    fcfg = config["forecast"]
    cfg = _chain_config(config)
    if kind == "var-flat":
        return FlatVarForecaster(p=p, ndraws=fcfg["ndraws"])
    if kind == "bvar-minnesota":
        return MinnesotaForecaster(
            p=p, tightness=config["model"].get("tightness", 0.1), ndraws=fcfg["ndraws"]
        )
    if kind == "tvp-standard":
        return StdTvpForecaster(p=p, cfg=cfg, freeze=fcfg["freeze_coefficients"])
    if kind == "tc-tvp":
        prior_cfg = config["prior"]
        return TcTvpForecaster(
            p=p,
            cfg=cfg,
            moments_builder=moments_builder,
            theta_prior=theta_prior,
            hyper_prior=HyperPrior(prior_cfg["lam_upper"], prior_cfg["gamma_upper"]),
            fix_lam=prior_cfg["fix_lam"],
            fix_gamma=prior_cfg["fix_gamma"],
            fixed_theta=None,
            freeze=fcfg["freeze_coefficients"],
            presample_ar_order=prior_cfg["presample_ar_order"],
        )
    raise ConfigError(f"unknown model type {kind!r}")


def _resolve_origins(config, panel) -> list[str]:
    fcfg = config["forecast"]
    origins = fcfg.get("origins")
    if origins is None:
        raise ConfigError("forecast.origins missing")
    if isinstance(origins, dict):
        origins = period_range(origins["start"], origins["count"])
    for o in origins:
        if o not in panel.dates:
            raise ConfigError(f"forecast origin {o} not in the panel")
    return list(origins)


def cmd_forecast(config, out_dir: Path, data_path=None, run_dir: Path | None = None) -> Path:
    panel = build_panel(config, data_path)
    fcfg = config["forecast"]
    horizons = tuple(fcfg["horizons"])
    if run_dir is not None:
        store = DrawStore.load(Path(run_dir) / "draws")
        draws = forecast_from_store(
            store,
            panel,
            horizons=max(horizons),
            freeze=fcfg["freeze_coefficients"],
            seed=config["chain"]["seed"],
        )
        _write_forecast_draws_csv(out_dir / "forecast.csv", panel, horizons, draws, fcfg["mode"])
        return out_dir
    p = config["model"]["lags"]
    est_dates_full = panel.estimation_dates(p)
    moments_builder = None
    theta_prior = None
    if config["model"]["type"] == "tc-tvp":
        # the builder itself defaults an empty theta to the configured one,
        # so pinned deep parameters need no extra plumbing here
        model, _, _, moments_builder = theory_pieces(config, est_dates_full)
        if config["theory"].get("sample_theta"):
            theta_prior = ThetaPrior(model.prior_table, model.theta_names)
    forecaster = _forecaster(config, moments_builder, theta_prior)
    run = recursive_forecast(
        forecaster,
        panel,
        _resolve_origins(config, panel),
        horizons,
        seed=config["chain"]["seed"],
        horizon_mode=fcfg["mode"],
    )
    rows = score(run)
    with open(out_dir / "forecast_scores.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["model", "variable", "horizon", "rmse", "crps", "n_origins"]
        )
        writer.writeheader()
        writer.writerows(rows)
    return out_dir


def forecast_from_store(
    store: DrawStore, panel: TimeSeriesPanel, horizons: int, freeze: bool, seed: int
) -> np.ndarray:
    """Predictive draws from a persisted fit, no refitting.

    Coefficients start at the final stored period and evolve under the
    stored law of motion (theory-weighted chains carry their persistence
    draw; the standard model carries its per-coefficient variances;
    constant models stay put).
    """
    from scipy.linalg import cholesky as dense_chol

    rng = np.random.default_rng(seed)
    kind = store.meta.get("model", "tc-tvp")
    p = int(store.meta.get("lags", 1))
    n = store.phi.shape[3]
    k = store.phi.shape[2]
    history = panel.values[-p:]
    out = np.empty((store.ndraws, horizons, n))
    for d in range(store.ndraws):
        phi = store.phi[d, -1].copy()
        sigma = store.sigma_u[d]
        chol = dense_chol(sigma, lower=True)
        hist = history.copy()
        for h in range(horizons):
            if not freeze and kind == "tc-tvp" and store.lam[d] > 0:
                phi = phi + (rng.standard_normal((k, n)) @ chol.T) / store.lam[d]
            elif not freeze and kind == "std-tvp-var":
                sd = np.sqrt(store.theta[d]).reshape(n, k).T
                phi = phi + sd * rng.standard_normal((k, n))
            x = np.concatenate([[1.0], hist[::-1].ravel()])
            y_next = x @ phi + chol @ rng.standard_normal(n)
            out[d, h] = y_next
            hist = np.vstack([hist[1:], y_next]) if p > 1 else y_next[None, :]
    return out


def _write_forecast_draws_csv(path, panel, horizons, draws, mode):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin", "horizon", "variable", "mean", "q10", "q50", "q90"])
        for h in horizons:
            block = draws[:, :h].mean(axis=1) if mode == "average" else draws[:, h - 1]
            for j, name in enumerate(panel.names):
                q10, q50, q90 = np.quantile(block[:, j], [0.1, 0.5, 0.9])
                writer.writerow(
                    [panel.dates[-1], h, name]
                    + [repr(float(v)) for v in (block[:, j].mean(), q10, q50, q90)]
                )


def cmd_irf(config, out_dir: Path, run_dir: Path, data_path=None) -> Path:
    store = DrawStore.load(Path(run_dir) / "draws")
    est_dates = tuple(store.meta.get("estimation_dates", ()))
    icfg = config["irf"]
    model, theta0, window, _ = theory_pieces(config, est_dates)
    p = int(store.meta.get("lags", config["model"]["lags"]))
    periods = store.phi.shape[1]

    date_idx = []
    for d in icfg.get("dates", []):
        if isinstance(d, str):
            if d not in est_dates:
                raise ConfigError(f"irf date {d} outside the effective sample")
            date_idx.append(est_dates.index(d))
        else:
            date_idx.append(int(d))
    if not date_idx:
        raise ConfigError("irf.dates missing")

    theta_draws = store.theta if store.theta.shape[1] else None
    impact_cache: dict[bytes, np.ndarray] = {}

    def impact_provider(draw: int, t: int) -> np.ndarray:
        theta = theta_draws[draw] if theta_draws is not None else theta0
        key = np.ascontiguousarray(theta).tobytes()
        paths = impact_cache.get(key)
        if paths is None:
            sol = model.build(theta, periods, window)
            paths = np.stack([sol.impact_matrix(s) for s in range(periods)])
            impact_cache[key] = paths
        return paths[t]

    variables = tuple(store.meta.get("variables", model.obs_names))
    cumulative = tuple(bool(icfg["cumulative"].get(v, False)) for v in variables)
    result = compute_irf(
        store,
        impact_provider,
        dates=date_idx,
        horizons=icfg["horizons"],
        shocks=tuple(icfg["shocks"]),
        cumulative=cumulative,
        variables=variables,
    )
    with open(out_dir / "irf.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "shock", "variable", "horizon", "q10", "q50", "q90"])
        for di, t in enumerate(result.dates):
            label = est_dates[t] if t < len(est_dates) else str(t)
            for si, s in enumerate(result.shocks):
                shock_name = (
                    model.shock_names[s] if s < len(model.shock_names) else f"shock_{s}"
                )
                for h in range(result.horizons + 1):
                    for j, v in enumerate(variables):
                        q10, q50, q90 = result.bands[di, si, :, h, j]
                        writer.writerow(
                            [label, shock_name, v, h]
                            + [repr(float(x)) for x in (q10, q50, q90)]
                        )
    return out_dir


def cmd_simulate(config, out_dir: Path, seed: int | None = None) -> Path:
    scfg = config["simulate"]
    model = get_model(config["theory"]["name"])
    theta = np.asarray(
        scfg.get("theta") or config["theory"].get("fixed_theta") or model.default_theta,
        dtype=float,
    )
    periods = scfg["periods"]
    dates = period_range(scfg["start"], periods)
    window = resolve_window(config, tuple(dates))
    sol = model.build(theta, periods, window)
    rng = np.random.default_rng(config["chain"]["seed"] if seed is None else seed)
    y, _ = simulate(sol, rng)
    panel = TimeSeriesPanel(
        dates=tuple(dates),
        values=y,
        names=model.obs_names,
        pre_sample=0,
    )
    emit(panel, out_dir / "simulated.csv")
    return out_dir


def cmd_ml_grid(config, out_dir: Path, data_path=None) -> Path:
    from .posterior import ml_decomposition
    from .prior import rw_prior, theory_update

    panel = build_panel(config, data_path)
    p = config["model"]["lags"]
    design = build_design(panel, p)
    est_dates = panel.estimation_dates(p)
    _, theta0, _, moments_builder = theory_pieces(config, est_dates)
    moments = moments_builder(theta0, design.periods)
    inputs = _prior_inputs(config, panel)
    grid = config.get("ml_grid")
    if not grid:
        raise ConfigError("ml_grid section missing")
    with open(out_dir / "ml_grid.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lam", "gamma", "log_ml", "log_fit", "log_penalty"])
        for lam in grid["lam"]:
            for gamma in grid["gamma"]:
                rw = rw_prior(
                    inputs.lam_spec(lam), inputs.phi0, inputs.scale, inputs.dof, design.periods
                )
                bundle = rw if gamma == 0.0 else theory_update(rw, moments, gamma)
                value = ml_decomposition(design, bundle)
                writer.writerow(
                    [lam, gamma]
                    + [
                        repr(float(v))
                        for v in (
                            value.total,
                            value.components["log_fit"],
                            value.components["log_penalty"],
                        )
                    ]
                )
    return out_dir


def _run_directory(base: Path, command: str, cfg_hash: str) -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    path = base / f"{stamp}-{command}-{cfg_hash}"
    suffix = 0
    while path.exists():
        suffix += 1
        path = base / f"{stamp}-{command}-{cfg_hash}-{suffix}"
    path.mkdir(parents=True)
    return path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tctvp",
        description="Time-varying-parameter VARs with theory-based shrinkage priors",
    )
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--data", help="CSV data path (overrides config)")
    parser.add_argument("--out", help="output run directory (default: timestamped)")
    parser.add_argument("--seed", type=int, help="override chain seed")
    parser.add_argument("--chains", type=int, default=1)
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("TCTVP_THREADS", "1")),
        help="worker processes for multi-chain runs (env TCTVP_THREADS)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("estimate", "forecast", "irf", "simulate", "ml-grid"):
        cmd = sub.add_parser(name)
        if name in ("forecast", "irf"):
            cmd.add_argument("--run-dir", help="existing estimate run directory")
    args = parser.parse_args(argv)

    started = time.monotonic()
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["chain"]["seed"] = args.seed
        cfg_hash = config_hash(config)
        out_dir = (
            Path(args.out)
            if args.out
            else _run_directory(Path(config["output"]["dir"]), args.command, cfg_hash)
        )
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "estimate":
            cmd_estimate(config, out_dir, args.data, chains=args.chains, threads=args.threads)
        elif args.command == "forecast":
            run_dir = Path(args.run_dir) if getattr(args, "run_dir", None) else None
            cmd_forecast(config, out_dir, args.data, run_dir=run_dir)
        elif args.command == "irf":
            if not getattr(args, "run_dir", None):
                raise ConfigError("irf needs --run-dir with persisted draws")
            cmd_irf(config, out_dir, Path(args.run_dir), args.data)
        elif args.command == "simulate":
            cmd_simulate(config, out_dir)
        elif args.command == "ml-grid":
            cmd_ml_grid(config, out_dir, args.data)

        meta = {
            "command": args.command,
            "version": __version__,
            "config_hash": cfg_hash,
            "seed": config["chain"]["seed"],
            "wall_clock_seconds": round(time.monotonic() - started, 3),
            "created": datetime.now(timezone.utc).isoformat(),
            "config": config,
        }
        (out_dir / "meta.json").write_text(json.dumps(meta, indent=2))
        print(str(out_dir))
        return 0
    except NumericalError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (TctvpError, FileNotFoundError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
