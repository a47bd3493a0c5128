"""Command-line front end.

Every subcommand reads an optional ``--config`` file of ``key = value``
lines; ``--set key=value`` and the dedicated flags override it. Output
CSVs start with a ``# config_hash=...`` line so results can be traced back
to the settings that produced them.

Exit codes: 0 success, 1 internal error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import STREAMS, RunConfig, load_config
from .copulas import FAMILIES, CopulaSpec, gauge_oracle, sample_path
from .diagnostics import default_p_grid, qq_exponential, rl_probability_diagnostic
from .errors import ConfigError, DataError, ModelError
from .geometry import NormKind, default_phi_grid, return_level_curve, unit_point
from .margins import fit_pipeline, log_returns, rolling_laplace_check, zero_return_mask
from .model import FitOptions, eta_trajectory, fit_model, fitted_boundary
from .numerics import RngStream
from .quantile import exceedances
from .tail import estimate_covar, simulate_tail

__all__ = ["main", "build_parser"]

logger = logging.getLogger("nsgeo")

ETA_COLUMNS = ["eta_q1", "eta_q2", "eta_q3", "eta_q4"]
DIAGONALS = (np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4)


# helpers ---------------------------------------------------------------------


def _config(args, **extra) -> RunConfig:
    overrides = {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("seed", "threads", "norm", "tau", "T", "family", "alpha_tail"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return load_config(args.config, overrides)


def _fit_options(cfg: RunConfig) -> FitOptions:
    return FitOptions(
        tau=cfg.tau,
        kappa_t=cfg.kappa_t,
        kappa_phi=cfg.kappa_phi,
        norm=NormKind.parse(cfg.norm),
        lambda_lo=cfg.lambda_lo,
        lambda_hi=cfg.lambda_hi,
        lambda_n=cfg.lambda_n,
        fixed_lambda_quantile=cfg.fixed_lambda_quantile,
        fixed_lambda_gauge=cfg.fixed_lambda_gauge,
        shape=cfg.shape,
        h1=cfg.h1,
        h2=cfg.h2,
        n_jobs=cfg.threads,
        cv_rule=cfg.cv_rule,
    )


def _time_range(model):
    k = model.gauge_fit.knots_t.values
    return float(k[0]), float(k[-1])


def _check_times(model, times):
    lo, hi = _time_range(model)
    times = np.asarray(times, float)
    bad = times[(times < lo) | (times > hi)]
    if bad.size:
        raise DataError(f"time(s) {bad.tolist()} outside the model range [{lo:g}, {hi:g}]")
    return times


def _default_times(model, given):
    if given:
        return _check_times(model, given)
    lo, hi = _time_range(model)
    return np.array([lo, np.floor(0.5 * (lo + hi)), hi])


def _gp_recipe(path: Path, data: str, title: str, plots: list[str], xlabel: str, ylabel: str):
    lines = [
        f"# plotting recipe for {data}",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "plot " + ", \\\n     ".join(f"'{data}' {p}" for p in plots),
    ]
    path.write_text("\n".join(lines) + "\n")


def _eta_row(gfit, t, phi_grid):
    return eta_trajectory(gfit, [t], phi_grid)[0]


# subcommands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    try:
        spec = CopulaSpec(cfg.family, cfg.T)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    series = sample_path(spec, RngStream(cfg.seed, STREAMS["simulate"]))
    rows = zip(series.t.astype(int), series.x[:, 0], series.x[:, 1])
    io.write_csv(args.out, ["t", "x1", "x2"], rows, cfg.hash(), comments=[spec.describe() + f" seed={cfg.seed}"])
    print(f"wrote {series.T} rows to {args.out}")
    return 0


def cmd_standardize(args) -> int:
    cfg = _config(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dates, returns = [], []
    for path in args.prices:
        d, p = io.read_prices(path)
        dates.append(d[1:])
        returns.append(log_returns(p))
    if any(d != dates[0] for d in dates[1:]):
        raise DataError("price files do not share the same dates")
    zero = zero_return_mask(*returns)
    keep = ~zero
    print(f"dropping {int(zero.sum())} day(s) with a zero return in any asset")
    kept_dates = [d for d, k in zip(dates[0], keep) if k]
    pipelines, lap = [], []
    for i, (path, q) in enumerate(zip(args.prices, returns), 1):
        q = q[keep]
        pipe = fit_pipeline(q, cfg.alpha_tail)
        x = pipe.to_laplace(q)
        eps = (q - pipe.garch.mu) / pipe.garch.sigma
        pipelines.append(pipe)
        lap.append(x)
        name = Path(path).stem
        io.write_csv(
            out / f"{name}_standardized.csv",
            ["date", "q", "eps", "sigma", "laplace"],
            zip(kept_dates, q, eps, pipe.garch.sigma, x),
            cfg.hash(),
        )
        g = pipe.garch
        print(f"{name}: garch mu={g.mu:.3g} c={g.c:.3g} a={g.a:.4f} b={g.b:.4f}")
        window = min(1000, max(200, q.size // 5))
        if q.size >= 200:
            chk = rolling_laplace_check(x, window)
            print(
                f"{name}: rolling Laplace check (window {window}): location in "
                f"[{chk[:, 0].min():.3f}, {chk[:, 0].max():.3f}], scale in [{chk[:, 1].min():.3f}, {chk[:, 1].max():.3f}]"
            )
    io.save_margins(out / "margins.json", pipelines, {"config_hash": cfg.hash(), "seed": cfg.seed})
    if len(lap) == 2:
        t = np.arange(1, lap[0].size + 1)
        io.write_csv(out / "series.csv", ["t", "x1", "x2"], zip(t, lap[0], lap[1]), cfg.hash())
        print(f"wrote joint Laplace series ({t.size} rows) to {out / 'series.csv'}")
    return 0


def cmd_fit(args) -> int:
    extra = {}
    if args.fixed_lambda is not None:
        extra["fixed_lambda_quantile"] = args.fixed_lambda
        extra["fixed_lambda_gauge"] = args.fixed_lambda
    if args.fixed_lambda_gauge is not None:
        extra["fixed_lambda_gauge"] = args.fixed_lambda_gauge
    cfg = _config(args, **extra)
    series = io.read_series(args.data)
    model = fit_model(series, _fit_options(cfg))
    if args.margins:
        model.margins = io.load_margins(args.margins)
        if model.margins[0].garch.sigma.size < series.T:
            raise DataError("margins file covers fewer days than the series")
    q, g = model.quantile_fit, model.gauge_fit
    print(f"quantile surface: lambda_t={q.lambda_t:g} lambda_phi={q.lambda_phi:g}")
    print(f"gauge surface:    lambda_t={g.lambda_t:g} lambda_phi={g.lambda_phi:g}")
    print(f"angular density:  h1={model.angular.h1:g} h2={model.angular.h2:g}")
    io.save_model(args.out, model, {"config_hash": cfg.hash(), "seed": cfg.seed, "config": cfg.canonical()})
    print(f"model written to {args.out}")
    return 0


def cmd_predict_boundary(args) -> int:
    cfg = _config(args)
    model, _ = io.load_model(args.model)
    times = _default_times(model, args.t)
    phi = default_phi_grid(cfg.phi_grid)
    rows = []
    for t in times:
        curve = fitted_boundary(model.gauge_fit, t, phi)
        eta = _eta_row(model.gauge_fit, t, phi)
        excess = curve.max_abs_excess()
        if excess > 0:
            print(f"t={t:g}: boundary leaves [-1, 1]^2 by {excess:.4f} (not rescaled)")
        for j in range(phi.size):
            rows.append([t, phi[j], *curve.points[j], curve.radii[j], *eta])
    io.write_csv(args.out, ["t", "phi", "x1", "x2", "radius", *ETA_COLUMNS], rows, cfg.hash())
    return 0


def cmd_diagnose(args) -> int:
    cfg = _config(args)
    model, _ = io.load_model(args.model)
    series = io.read_series(args.data)
    _check_times(model, [series.t.min(), series.t.max()])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exc = exceedances(model.quantile_fit, series.polar(model.norm))
    qq = qq_exponential(model, exc)
    n = qq.sorted_pit.size
    io.write_csv(
        out / "qq.csv",
        ["k", "theoretical", "pit", "lower", "upper"],
        zip(range(1, n + 1), qq.theoretical, qq.sorted_pit, qq.lower_band, qq.upper_band),
        cfg.hash(),
    )
    rl = rl_probability_diagnostic(model, series, default_p_grid(model.tau))
    io.write_csv(out / "rl.csv", ["p", "nominal", "empirical"], zip(rl.p, rl.nominal, rl.empirical), cfg.hash())
    _gp_recipe(
        out / "qq.gp",
        "qq.csv",
        "exponential QQ",
        ["using 2:3 with points", "using 2:4 with lines dt 2", "using 2:5 with lines dt 2", "using 2:2 with lines"],
        "theoretical",
        "empirical",
    )
    _gp_recipe(
        out / "rl.gp",
        "rl.csv",
        "return-level probabilities",
        ["using 2:3 with points", "using 2:2 with lines"],
        "-log(1-p)",
        "-log(1-p_hat)",
    )
    print(f"QQ: {n} exceedances, {100 * qq.fraction_inside():.1f}% inside 95% bands")
    print(f"return-level probabilities: max |deviation| = {rl.max_abs_deviation():.4f}")
    return 0


def cmd_density_check(args) -> int:
    cfg = _config(args)
    model, _ = io.load_model(args.model)
    series = io.read_series(args.data)
    times = _default_times(model, args.t)
    pol = series.polar(model.norm)
    above = pol.r > model.threshold(pol.phi, pol.t)
    phi_e, t_e = pol.phi[above], pol.t[above]
    window = args.window if args.window is not None else model.angular.h2
    grid = model.angular.grid
    dens_rows, hist_rows = [], []
    edges = np.linspace(0.0, 2 * np.pi, args.bins + 1)
    for t in times:
        f = model.angular.grid_values(t)
        dens_rows += [[t, p, v] for p, v in zip(grid, f)]
        near = np.abs(t_e - t) <= window
        h, _ = np.histogram(phi_e[near], bins=edges, density=near.any())
        hist_rows += [[t, a, b, v, int(near.sum())] for a, b, v in zip(edges[:-1], edges[1:], h)]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "density.csv", ["t", "phi", "density"], dens_rows, cfg.hash())
    io.write_csv(out / "histogram.csv", ["t", "bin_lo", "bin_hi", "density", "n"], hist_rows, cfg.hash())
    return 0


def _covar_rows(model, times, p, n_sim, seed, method):
    rows, has_orig = [], model.margins is not None
    for i, t in enumerate(times):
        r = []
        for side in ("downside", "upside"):
            rng = RngStream(seed, STREAMS["risk"]).child(2 * i + (side == "upside"))
            res = estimate_covar(model, t, p, side, n_sim, rng, method)
            r.append(res)
        row = [t, r[0].var, r[0].covar, r[1].var, r[1].covar]
        if has_orig:
            row += [r[0].var_original, r[0].covar_original, r[1].var_original, r[1].covar_original]
        rows.append(row)
    header = ["t", "var_down", "covar_down", "var_up", "covar_up"]
    if has_orig:
        header += ["var_down_orig", "covar_down_orig", "var_up_orig", "covar_up_orig"]
    return header, rows


def cmd_simulate_tail(args) -> int:
    cfg = _config(args)
    model, _ = io.load_model(args.model)
    times = _default_times(model, args.t)
    rows = []
    for i, t in enumerate(times):
        s = simulate_tail(model, t, args.n, RngStream(cfg.seed, STREAMS["tail-sim"]).child(i))
        rows += [[t, a, b] for a, b in s.points]
    io.write_csv(args.out, ["t", "x1", "x2"], rows, cfg.hash())
    if args.risk_out:
        header, crow = _covar_rows(model, times, args.p_covar, args.n, cfg.seed, "empirical")
        io.write_csv(args.risk_out, header, crow, cfg.hash())
    return 0


def cmd_risk(args) -> int:
    cfg = _config(args)
    model, _ = io.load_model(args.model)
    lo, hi = _time_range(model)
    times = _default_times(model, args.t)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    phi = default_phi_grid(cfg.phi_grid)
    eta_times = np.unique(np.round(np.linspace(lo, hi, min(args.eta_points, int(hi - lo) + 1))))
    eta = eta_trajectory(model.gauge_fit, eta_times, phi)
    io.write_csv(out / "eta.csv", ["t", *ETA_COLUMNS], [[t, *e] for t, e in zip(eta_times, eta)], cfg.hash())
    rl_rows = []
    for t in times:
        c = return_level_curve(model.quantile_fit, model.gauge_fit, t, args.p_rl, phi)
        rl_rows += [[t, p, *xy, r] for p, xy, r in zip(phi, c.points, c.radii)]
    io.write_csv(
        out / "rl_curves.csv", ["t", "phi", "x1", "x2", "radius"], rl_rows, cfg.hash(), comments=[f"p={args.p_rl}"]
    )
    header, rows = _covar_rows(model, times, args.p_covar, args.n_sim, cfg.seed, args.method)
    io.write_csv(out / "covar.csv", header, rows, cfg.hash(), comments=[f"p={args.p_covar}"])
    if model.margins is None:
        print("no margins in model file: VaR/CoVaR reported on the Laplace scale only")
    return 0


def _simstudy_rep(spec, cfg, rep, slices, traj_t, phi, options):
    series = sample_path(spec, RngStream(cfg.seed, STREAMS["simstudy"]).child(rep))
    model = fit_model(series, options)
    g = model.gauge_fit
    curves = [fitted_boundary(g, t, phi) for t in slices]
    traj = np.array([fitted_boundary(g, t, np.array(DIAGONALS)).radii for t in traj_t])
    return curves, traj


def cmd_simstudy(args) -> int:
    cfg = _config(args)
    try:
        spec = CopulaSpec(cfg.family, cfg.T)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    norm = NormKind.parse(cfg.norm)
    T = cfg.T
    slices = np.array([1.0, float(T // 2), float(T)])
    traj_t = np.unique(np.round(np.linspace(1, T, min(args.traj_points, T))))
    phi = default_phi_grid(cfg.phi_grid)
    options = _fit_options(cfg)
    options.n_jobs = 1
    # oracle truth once; the data-generating law is shared by all replicates
    diag = np.array(DIAGONALS)
    true_curves = []
    for t in slices:
        m = gauge_oracle(spec, t, phi, norm)
        true_curves.append(unit_point(phi, norm) / m[:, None])
    true_traj = np.array([np.hypot(*(unit_point(diag, norm) / gauge_oracle(spec, t, diag, norm)[:, None]).T) for t in traj_t])

    def run(rep):
        return _simstudy_rep(spec, cfg, rep, slices, traj_t, phi, options)

    reps = range(1, args.reps + 1)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(run, reps))
    else:
        results = [run(r) for r in reps]
    curve_rows, traj_rows = [], []
    for rep, (curves, traj) in zip(reps, results):
        for t, c, tc in zip(slices, curves, true_curves):
            for j in range(phi.size):
                curve_rows.append([rep, t, phi[j], *c.points[j], c.radii[j], *tc[j], np.hypot(*tc[j])])
        for k, a in enumerate(DIAGONALS):
            for i, t in enumerate(traj_t):
                traj_rows.append([rep, a, t, traj[i, k], true_traj[i, k]])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comment = [spec.describe() + f" reps={args.reps} seed={cfg.seed}"]
    io.write_csv(
        out / "curves.csv",
        ["rep", "t", "phi", "x1", "x2", "radius", "true_x1", "true_x2", "true_radius"],
        curve_rows,
        cfg.hash(),
        comment,
    )
    io.write_csv(
        out / "trajectories.csv", ["rep", "phi", "t", "radius", "true_radius"], traj_rows, cfg.hash(), comment
    )
    print(f"{args.reps} replicate(s): {3 * args.reps} curves and {4 * args.reps} trajectories written to {out}")
    return 0


# parser ----------------------------------------------------------------------


def _lambda_pair(text):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lambda_t,lambda_phi', got {text!r}") from None
    if len(vals) != 2 or min(vals) < 0:
        raise argparse.ArgumentTypeError(f"expected two non-negative numbers, got {text!r}")
    return tuple(vals)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="cap on worker threads")
    common.add_argument("--norm", choices=["l1", "l2", "linf"])
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nsgeo", description="Time-varying limit sets of bivariate extremes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a copula path on Laplace margins")
    s.add_argument("--family", choices=FAMILIES)
    s.add_argument("--T", type=int)
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("standardize", parents=[common], help="GARCH filter and transform prices to Laplace")
    s.add_argument("prices", nargs="+", help="CSV files with columns date, price")
    s.add_argument("--alpha-tail", dest="alpha_tail", type=float)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_standardize)

    s = sub.add_parser("fit", parents=[common], help="fit threshold, gauge and angular density")
    s.add_argument("data", help="CSV with columns t, x1, x2 on Laplace margins")
    s.add_argument("--tau", type=float)
    s.add_argument("--fixed-lambda", type=_lambda_pair, metavar="LT,LP", help="fixed smoothing weights for both stages")
    s.add_argument("--fixed-lambda-gauge", type=_lambda_pair, metavar="LT,LP")
    s.add_argument("--margins", help="margins file from 'standardize'")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict-boundary", parents=[common], help="fitted boundary curves and eta")
    s.add_argument("model")
    s.add_argument("--t", type=float, nargs="+")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_predict_boundary)

    s = sub.add_parser("diagnose", parents=[common], help="QQ and return-level probability diagnostics")
    s.add_argument("model")
    s.add_argument("data")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("density-check", parents=[common], help="angular density against local histograms")
    s.add_argument("model")
    s.add_argument("data")
    s.add_argument("--t", type=float, nargs="+")
    s.add_argument("--bins", type=int, default=36)
    s.add_argument("--window", type=float, help="half-width of the time window (default: h2)")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_density_check)

    s = sub.add_parser("simulate-tail", parents=[common], help="draw joint-tail points from a fitted model")
    s.add_argument("model")
    s.add_argument("--t", type=float, nargs="+")
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--p-covar", type=float, default=0.01)
    s.add_argument("--risk-out", help="also write empirical VaR/CoVaR from the draws")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_simulate_tail)

    s = sub.add_parser("risk", parents=[common], help="eta trajectories, return-level curves, VaR and CoVaR")
    s.add_argument("model")
    s.add_argument("--t", type=float, nargs="+")
    s.add_argument("--p-rl", type=float, default=0.999)
    s.add_argument("--p-covar", type=float, default=0.01)
    s.add_argument("--n-sim", type=int, default=100_000)
    s.add_argument("--method", choices=["integrated", "empirical"], default="integrated")
    s.add_argument("--eta-points", type=int, default=200)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_risk)

    s = sub.add_parser("simstudy", parents=[common], help="replicated fits against oracle truth")
    s.add_argument("--family", choices=FAMILIES)
    s.add_argument("--T", type=int)
    s.add_argument("--reps", type=int, default=10)
    s.add_argument("--traj-points", type=int, default=100)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simstudy)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, ConfigError, ModelError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        logger.exception("internal error")
        print(f"internal error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
