"""Command line entry point: ``ltsmlmc <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import ConfigError, emit_defaults, parse_config
from .cost import fit_slope, graded_cost_lf, graded_cost_lts, graded_speedup_exponent, optimal_q, sweep
from .fem import AssemblyError, ConvergenceError
from .integrators import InstabilityError
from .mesh import MeshError
from .mlmc import MlmcConfig, SampleFailure, SampleRunner, run_mlmc
from .problems import make_problem
from .report import write_csv, write_svg
from .rng import DomainError
from .studies import fitted_orders, standing_wave_errors

log = logging.getLogger("ltsmlmc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (InstabilityError, ConvergenceError, AssemblyError, MeshError, DomainError, SampleFailure, FloatingPointError)


def _header(cfg, **extra):
    h = {"ltsmlmc_version": __version__, "seed": cfg.seed}
    h.update(cfg.echo())
    h.update(extra)
    return h


def _out(cfg, name):
    return os.path.join(cfg.out, name)


def run_mlmc_experiment(cfg) -> list[str]:
    try:
        problem = make_problem(cfg.experiment, **cfg.problem_overrides())
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    integrators = ["lf", "lts"] if cfg.integrator == "both" else [cfg.integrator]
    desc = {f"problem.{k}": v for k, v in problem.describe().items()}
    written, work, timing, results = [], [], [], {}
    with SampleRunner(problem, cfg.workers) as runner:
        for i, eps in enumerate(cfg.eps):
            for integ in integrators:
                mc = MlmcConfig(
                    eps=eps, alpha=cfg.alpha, initial_N=cfg.initial_N, initial_L=cfg.initial_L,
                    max_L=problem.max_L, master_seed=cfg.seed, integrator=integ, bias_window=cfg.bias_window,
                )
                res = run_mlmc(problem, mc, runner)
                results[(i, integ)] = res
                if not res.converged:
                    log.warning("eps=%g %s: bias test not met by level %d", eps, integ, res.L)
                print(
                    f"{cfg.experiment} eps={eps:g} {integ}: L={res.L} N={[s.N for s in res.levels]} "
                    f"model cost={res.total_model_cost:.4g} converged={res.converged}"
                )
                head = _header(cfg, **desc, eps_run=repr(eps), integrator_run=integ, L=res.L, converged=res.converged)
                tag = f"{integ}_eps{i}"
                written.append(write_csv(
                    _out(cfg, f"levels_{tag}.csv"),
                    ["level", "N", "V", "V_mc", "bias_proxy", "model_cost", "matvecs", "matrix_entries", "mean_norm"],
                    [[s.level, s.N, s.V, s.V_mc, s.bias, s.model_cost, s.matvecs, s.entries, s.mean_norm] for s in res.levels],
                    head,
                ))
                written.append(write_csv(
                    _out(cfg, f"estimate_{tag}.csv"),
                    ["x", "value"],
                    zip(res.estimate.points.tolist(), res.estimate.values.tolist()),
                    head,
                ))
                work.append([eps, integ, res.L, res.converged, res.total_model_cost, sum(s.matvecs for s in res.levels),
                             res.total_entries, res.total_variance, res.bias_proxy, eps**2 / 2])
                timing += [[eps, integ, s.level, s.N, s.wall] for s in res.levels]
    head = _header(cfg, **desc)
    written.append(write_csv(
        _out(cfg, "work_vs_eps.csv"),
        ["eps", "integrator", "L", "converged", "model_cost", "matvecs", "matrix_entries", "variance", "bias_proxy", "half_eps_sq"],
        work, head,
    ))
    if cfg.integrator == "both":
        rows = []
        for i, eps in enumerate(cfg.eps):
            lf, lts = results[(i, "lf")], results[(i, "lts")]
            rows.append([eps, lf.total_model_cost, lts.total_model_cost, lf.total_model_cost / lts.total_model_cost,
                         lf.total_entries / lts.total_entries])
        written.append(write_csv(
            _out(cfg, "speedup.csv"), ["eps", "model_cost_lf", "model_cost_lts", "model_speedup", "entries_speedup"], rows, head
        ))
    # wall-clock times vary run to run, so they live apart from the reproducible tables
    written.append(write_csv(_out(cfg, "timing.csv"), ["eps", "integrator", "level", "N", "wall_seconds"], timing,
                             {"ltsmlmc_version": __version__}))
    if cfg.plot:
        series = {}
        for integ in integrators:
            pts = [(eps, results[(i, integ)].total_model_cost) for i, eps in enumerate(cfg.eps)]
            series[integ] = ([p[0] for p in pts], [p[1] for p in pts])
        written.append(write_svg(_out(cfg, "work_vs_eps.svg"), series, f"{cfg.experiment}: model cost",
                                 "eps", "cost", logx=True, logy=True))
        vs = {}
        for integ in integrators:
            lv = results[(len(cfg.eps) - 1, integ)].levels
            vs[integ] = ([s.level for s in lv], [s.V for s in lv])
        written.append(write_svg(_out(cfg, "variances.svg"), vs, "level variances", "level", "V", logy=True))
    return written


def run_sweep(cfg) -> list[str]:
    rows = sweep(cfg.axis, cfg.values, d=cfg.d)
    cols = ["d", "r", "p0", "beta", "L", "speedup"]
    best = max(rows, key=lambda r: r["speedup"])
    path = write_csv(_out(cfg, f"sweep_{cfg.axis}_d{cfg.d}.csv"), cols, [[r[c] for c in cols] for r in rows],
                     _header(cfg, max_speedup=repr(best["speedup"]), argmax=repr(best[cfg.axis])))
    print(f"sweep {cfg.axis} d={cfg.d}: max speed-up {best['speedup']:.4g} at {cfg.axis}={best[cfg.axis]:g}")
    written = [path]
    if cfg.plot:
        x = [r[cfg.axis] for r in rows]
        written.append(write_svg(_out(cfg, f"sweep_{cfg.axis}_d{cfg.d}.svg"), {f"d={cfg.d}": (x, [r["speedup"] for r in rows])},
                                 "speed-up", cfg.axis, "S", logx=cfg.axis == "r"))
    return written


def run_graded(cfg) -> list[str]:
    d, s = cfg.d, cfg.s
    rows = []
    for m in cfg.m_values:
        q = optimal_q(m, s, d)
        lf, lts = graded_cost_lf(m, s, d), graded_cost_lts(m, s, d, q)
        rows.append([m, q, lf, lts, lf / lts])
    slope = fit_slope([r[0] for r in rows], [r[1] for r in rows]) if len(rows) > 1 else float("nan")
    head = _header(cfg, q_slope=repr(slope), q_slope_theory=repr(d / (d + s - 1)))
    written = [write_csv(_out(cfg, f"graded_d{d}_s{s:g}.csv"), ["m", "q_opt", "cost_lf", "cost_lts", "speedup"], rows, head)]
    ex = []
    for beta in [0.5 * k for k in range(1, 21)]:
        regime, e, power = graded_speedup_exponent(beta, s, d)
        ex.append([beta, regime, e, power])
    written.append(write_csv(_out(cfg, f"graded_exponents_d{d}_s{s:g}.csv"), ["beta", "regime", "exponent", "log_power"], ex, head))
    print(f"graded d={d} s={s:g}: q_opt slope {slope:.3f} (expected {d / (d + s - 1):.3f})")
    if cfg.plot:
        written.append(write_svg(_out(cfg, f"graded_d{d}_s{s:g}.svg"), {"q_opt": ([r[0] for r in rows], [r[1] for r in rows])},
                                 "optimal number of fine layers", "m", "q", logx=True, logy=True))
    return written


def run_convergence(cfg) -> list[str]:
    rows = standing_wave_errors(cfg.n_meshes, nu=cfg.nu, safety=cfg.safety)
    orders = fitted_orders(rows)
    cols = ["H", "h_f", "n", "err_lf", "err_lts"]
    head = _header(cfg, order_lf=repr(orders["lf"]), order_lts=repr(orders["lts"]))
    written = [write_csv(_out(cfg, "convergence.csv"), cols, [[r[c] for c in cols] for r in rows], head)]
    print(f"convergence: L2 order lf {orders['lf']:.3f}, lts {orders['lts']:.3f}")
    if cfg.plot:
        H = [r["H"] for r in rows]
        written.append(write_svg(_out(cfg, "convergence.svg"), {k: (H, [r[f"err_{k}"] for r in rows]) for k in ("lf", "lts")},
                                 "L2 error at final time", "H", "error", logx=True, logy=True))
    return written


def run_experiment(cfg) -> list[str]:
    if cfg.experiment in ("smooth1d", "jump1d", "channel2d"):
        return run_mlmc_experiment(cfg)
    return {"cost-sweep": run_sweep, "graded": run_graded, "convergence": run_convergence}[cfg.experiment](cfg)


def _eps_list(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--workers", type=int, help="worker processes (default: available cores)")
    common.add_argument("--out", help="output directory (default results)")
    common.add_argument("--plot", action="store_true", default=None, help="also write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ltsmlmc", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="MLMC experiment")
    run.add_argument("--experiment", choices=["smooth1d", "jump1d", "channel2d"])
    run.add_argument("--eps", type=_eps_list, help="comma separated tolerances")
    run.add_argument("--integrator", choices=["lf", "lts", "both"])

    sw = sub.add_parser("sweep", parents=[common], help="cost-model speed-up sweep")
    sw.add_argument("--experiment", choices=["cost-sweep"])
    sw.add_argument("--axis", choices=["r", "p0", "beta"])
    sw.add_argument("--d", type=int, choices=[1, 2, 3])

    gr = sub.add_parser("graded", parents=[common], help="graded-mesh cost analysis")
    gr.add_argument("--experiment", choices=["graded"])
    gr.add_argument("--d", type=int, choices=[1, 2, 3])
    gr.add_argument("--s", type=float)

    cv = sub.add_parser("convergence", parents=[common], help="standing-wave convergence study")
    cv.add_argument("--experiment", choices=["convergence"])

    em = sub.add_parser("emit-defaults", help="print a default config")
    em.add_argument("--experiment", default="smooth1d")
    return p


_COMMAND_EXPERIMENT = {"sweep": "cost-sweep", "graded": "graded", "convergence": "convergence"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "emit-defaults":
            sys.stdout.write(emit_defaults(args.experiment))
            return EXIT_OK
        experiment = args.experiment or _COMMAND_EXPERIMENT.get(args.command)
        overrides = {k: getattr(args, k, None) for k in ("eps", "integrator", "seed", "workers", "out", "plot", "axis", "d", "s")}
        cfg = parse_config(args.config, experiment, **overrides)
        if args.command == "run" and cfg.experiment not in ("smooth1d", "jump1d", "channel2d"):
            raise ConfigError(f"'run' needs an MLMC experiment, got {cfg.experiment!r}")
        if args.command in _COMMAND_EXPERIMENT and cfg.experiment != _COMMAND_EXPERIMENT[args.command]:
            raise ConfigError(f"'{args.command}' cannot run experiment {cfg.experiment!r}")
        for path in run_experiment(cfg):
            log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
