"""Command-line front end.

    qepi vi --grid 64x64 --gamma 0.99 --sweeps 400
    qepi soft-vi --grid 64x64 --sigma 10
    qepi qepi --grid 4x4 --nb 10 --xmin -100 --anneals 100 --duration 1280 --seed 7
    qepi accuracy --grid 4x4 --durations 16,128,1280 --anneal-counts 4,10,100 --runs 50
    qepi bench --path sparse --sizes 16x16,24x24,32x32,48x48
    qepi rollout --grid 64x64 --start=-0.5,0

Values from ``--config FILE`` (flat ``key=value``) override built-in defaults
and are overridden by flags. Exit status: 0 success, 2 configuration error,
3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .annealer import AnnealParams, RemoteSolver, RemoteSolverError
from .bench import measure_scaling
from .dp import SoftParams, count_regions, greedy_policy, soft_value_iteration, value_iteration
from .env import ContState, EnvParams, rollout
from .grid import GridSpec, build_transition_model
from .iteration import QepiConfig, accuracy_experiment, reference_policy, run_qepi
from .qubo import BinaryEncoding, CapacityError
from .sle import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
ENV_KEYS = set(EnvParams.__dataclass_fields__)
RUNTIME_KEYS = {"out", "threads", "config", "command", "func", "verbose"}

log = logging.getLogger("qepi")


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _pair(text: str) -> tuple[float, float]:
    a, b = str(text).split(",")
    return float(a), float(b)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--gamma", type=float, default=0.99)
    common.add_argument("--representative", choices=("vertex", "center"), default="vertex")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", help="positions x velocities, e.g. 64x64 (required)")

    dp = argparse.ArgumentParser(add_help=False)
    dp.add_argument("--sweeps", type=int, default=100_000)
    dp.add_argument("--tol", type=float, default=1e-8)

    qp = argparse.ArgumentParser(add_help=False)
    qp.add_argument("--nb", type=int, default=10)
    qp.add_argument("--xmin", type=float, default=-100.0)
    qp.add_argument("--anneals", type=int, default=100)
    qp.add_argument("--duration", type=int, default=1280)
    qp.add_argument("--updates", type=int, default=10)
    qp.add_argument("--solver", choices=("simulated", "brute-force", "remote"), default="simulated")
    qp.add_argument("--beta-start", type=float, default=None)
    qp.add_argument("--beta-end", type=float, default=None)
    qp.add_argument("--remote-timeout", type=float, default=30.0)
    qp.add_argument("--remote-retries", type=int, default=2)

    p = argparse.ArgumentParser(prog="qepi", description="Quantum-enhanced policy iteration on mountain car")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("vi", parents=[common, grid, dp], help="value iteration")
    s.set_defaults(func=cmd_vi)

    s = sub.add_parser("soft-vi", parents=[common, grid, dp], help="value iteration with Gaussian-blurred Q")
    s.add_argument("--sigma", type=float, default=10.0, help="blur std in grid cells")
    s.add_argument("--truncate", type=float, default=4.0)
    s.set_defaults(func=cmd_soft_vi)

    s = sub.add_parser("qepi", parents=[common, grid, qp], help="quantum-enhanced policy iteration")
    s.set_defaults(func=cmd_qepi)

    s = sub.add_parser("accuracy", parents=[common, grid, qp], help="accuracy table over solver settings")
    s.add_argument("--durations", default="16,128,1280")
    s.add_argument("--anneal-counts", default="4,10,100")
    s.add_argument("--runs", type=int, default=50)
    s.set_defaults(func=cmd_accuracy)

    s = sub.add_parser("bench", parents=[common], help="operation-count scaling")
    s.add_argument("--path", choices=("sparse", "dense"), default="sparse")
    s.add_argument("--sizes", default="16x16,24x24,32x32,48x48")
    s.add_argument("--nb", type=int, default=4)
    s.add_argument("--xmin", type=float, default=-100.0)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("rollout", parents=[common, grid, dp], help="simulate a greedy grid policy")
    s.add_argument("--policy", choices=("vi", "soft-vi"), default="vi")
    s.add_argument("--sigma", type=float, default=10.0)
    s.add_argument("--start", default="-0.5,0.0", help="position,velocity")
    s.add_argument("--max-steps", type=int, default=400)
    s.set_defaults(func=cmd_rollout)
    return p


def resolve(argv: list[str]) -> tuple[argparse.Namespace, dict]:
    """Parse flags on top of config-file values on top of defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    file_cfg = report.parse_config_file(known.config) if known.config else {}
    env_cfg = {k: file_cfg.pop(k) for k in list(file_cfg) if k in ENV_KEYS}

    parser = build_parser()
    args = parser.parse_args(argv)
    if file_cfg:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        dests = {a.dest for a in sub._actions}
        unknown = set(file_cfg) - dests
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**file_cfg)
        args = parser.parse_args(argv)
    env = EnvParams.from_dict(env_cfg)
    return args, env.to_dict()


def run_config(args: argparse.Namespace, env: dict) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in RUNTIME_KEYS}
    cfg["env"] = env
    return cfg


def _grid(args, env: dict) -> GridSpec:
    if not getattr(args, "grid", None):
        raise ConfigError("--grid is required")
    return GridSpec.parse(args.grid, EnvParams.from_dict(env), args.representative)


class Writer:
    def __init__(self, args, cfg: dict):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cfg, self.seed = cfg, args.seed
        self.files: list[str] = []

    def text(self, name: str, body: str, header: bool = True) -> str:
        if header:
            body = report.header_line(self.cfg, self.seed) + "\n" + body
        (self.out / name).write_text(body)
        self.files.append(name)
        return name

    def grid(self, name: str, values, shape) -> str:
        (self.out / name).write_text(report.grid_csv(values, shape, self.cfg, self.seed))
        self.files.append(name)
        return name

    def report(self, payload: dict) -> None:
        body = {"config": self.cfg, "config_hash": report.config_hash(self.cfg), "seed": self.seed, **payload}
        body["files"] = sorted(self.files)
        (self.out / "report.json").write_text(report.dumps(body))


def _grid_meta(g: GridSpec) -> dict:
    return {"n_pos": g.n_pos, "n_vel": g.n_vel, "positions": g.positions(), "velocities": g.velocities(),
            "layout": "rows = velocity index, columns = position index"}


def cmd_vi(args, cfg) -> int:
    g = _grid(args, cfg["env"])
    model = build_transition_model(g)
    vf = value_iteration(model, args.gamma, args.sweeps, args.tol)
    pi = greedy_policy(model, vf.values, args.gamma)
    w = Writer(args, cfg)
    w.grid("value.csv", vf.values, model.shape)
    w.grid("policy.csv", pi, model.shape)
    w.report({"command": "vi", "grid": _grid_meta(g), "converged": vf.converged, "sweeps": vf.sweeps,
              "bandwidth": model.bandwidth, "clamps": model.clamp_count,
              "regions": count_regions(pi, model.shape)})
    return EXIT_OK


def cmd_soft_vi(args, cfg) -> int:
    g = _grid(args, cfg["env"])
    model = build_transition_model(g)
    vf, pi = soft_value_iteration(model, args.gamma, SoftParams(args.sigma, args.truncate), args.sweeps, args.tol)
    w = Writer(args, cfg)
    w.grid("value.csv", vf.values, model.shape)
    w.grid("policy.csv", pi, model.shape)
    w.report({"command": "soft-vi", "grid": _grid_meta(g), "converged": vf.converged, "sweeps": vf.sweeps,
              "regions": count_regions(pi, model.shape)})
    return EXIT_OK


def _qepi_config(args) -> QepiConfig:
    anneal = AnnealParams(args.duration, args.anneals, args.seed, args.beta_start, args.beta_end)
    return QepiConfig(args.gamma, BinaryEncoding(args.nb, args.xmin), anneal, args.updates, args.solver)


def _remote(args) -> RemoteSolver | None:
    if args.solver != "remote":
        return None
    url = os.environ.get("QEPI_SOLVER_URL")
    if not url:
        raise ConfigError("--solver remote needs QEPI_SOLVER_URL")
    return RemoteSolver(url, args.remote_timeout, args.remote_retries)


def qepi_report(model, cfg: QepiConfig, pi, x, hist) -> dict:
    ref = reference_policy(model, cfg.gamma)
    return {
        "converged": hist.converged,
        "policy_updates": len(hist),
        "matches_vi": bool(np.array_equal(pi, ref)),
        "kappa": cfg.encoding.kappa,
        "duration_unit": "one sweep over all bits",
        "warnings": hist.warnings,
        "history": [
            {"policy": u.policy, "values": u.values, "objective": u.objective, "residual": u.residual,
             "changes": u.changes, "saturated": u.saturated}
            for u in hist.updates
        ],
    }


def cmd_qepi(args, cfg) -> int:
    g = _grid(args, cfg["env"])
    model = build_transition_model(g)
    qcfg = _qepi_config(args)
    pi, x, hist = run_qepi(model, qcfg, remote=_remote(args), workers=args.threads)
    w = Writer(args, cfg)
    w.grid("policy.csv", pi, model.shape)
    w.grid("value.csv", x, model.shape)
    w.report({"command": "qepi", "grid": _grid_meta(g), **qepi_report(model, qcfg, pi, x, hist)})
    timings = {"solve_time": [u.solve_time for u in hist.updates]}
    (Path(args.out) / "timings.json").write_text(report.dumps(timings))
    return EXIT_OK


def cmd_accuracy(args, cfg) -> int:
    g = _grid(args, cfg["env"])
    model = build_transition_model(g)
    table = accuracy_experiment(model, _qepi_config(args), _int_list(args.durations),
                                _int_list(args.anneal_counts), args.runs, args.seed, workers=args.threads)
    w = Writer(args, cfg)
    w.text("accuracy.csv", table.to_csv())
    w.report({"command": "accuracy", "grid": _grid_meta(g), "runs": table.runs, "durations": table.durations,
              "anneals": table.anneals, "accuracy": table.accuracy, "mean_updates": table.updates})
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    env = EnvParams.from_dict(cfg["env"])
    grids = [GridSpec.parse(s, env, args.representative) for s in args.sizes.split(",")]
    rep = measure_scaling(grids, args.nb, args.gamma, args.path, args.xmin)
    w = Writer(args, cfg)
    rows = rep.to_csv().splitlines()
    # wall time varies between runs; keep it out of the deterministic CSV
    det = [",".join(r.split(",")[:-1]) for r in rows]
    w.text("bench.csv", "\n".join(det) + "\n")
    (Path(args.out) / "bench_timing.csv").write_text(rep.to_csv())
    w.report({"command": "bench", "path": rep.path, "mu": rep.mus, "bandwidth": rep.bandwidths,
              "slopes": rep.slopes, "memory_ratio": rep.memory_ratio})
    return EXIT_OK


def cmd_rollout(args, cfg) -> int:
    g = _grid(args, cfg["env"])
    model = build_transition_model(g)
    if args.policy == "vi":
        vf = value_iteration(model, args.gamma, args.sweeps, args.tol)
        pi = greedy_policy(model, vf.values, args.gamma)
    else:
        _, pi = soft_value_iteration(model, args.gamma, SoftParams(args.sigma), args.sweeps, args.tol)
    start = ContState(*_pair(args.start))
    traj, total, reached = rollout(lambda s: pi[g.nearest(s)], start, g.env, args.max_steps)
    lines = ["step,position,velocity,action"]
    for t, s in enumerate(traj):
        a = int(pi[g.nearest(s)]) if t < len(traj) - 1 else ""
        lines.append(f"{t},{report.fmt(s.position)},{report.fmt(s.velocity)},{a}")
    w = Writer(args, cfg)
    w.text("trajectory.csv", "\n".join(lines) + "\n")
    w.report({"command": "rollout", "reached_goal": reached, "steps": len(traj) - 1, "total_reward": total})
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args, env = resolve(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"qepi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg = run_config(args, env)
    try:
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"usage: qepi {args.command} --grid NxM [options]\nqepi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, RemoteSolverError, CapacityError) as exc:
        print(f"qepi: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"qepi: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
