"""Command-line entry points.

Subcommands: ``run`` (descent from a config file), ``case`` (preset
experiments 1-5), ``gradcheck`` (adjoint-vs-finite-difference test),
``solve-once`` (state + adjoint + gradient export on one curve) and
``export-fields`` (solution fields as VTK point data).

Exit codes: 0 success, 1 invalid input or failed check, 2 solver
nonconvergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import config as configmod
from .adjoint import solve_adjoint
from .assembly import SolverError
from .config import ConfigError
from .geometry import GeometryError, build_mesh, read_curve, write_curve
from .optim import OptimizerConfig, descend, initial_curve
from .shapegrad import finite_difference_check, gradient_sample
from .state import NonconvergenceError, solve_state
from .tracefile import TraceWriter
from .vtkio import vertex_magnitude, vertex_values, write_mesh_vtk, write_vtk


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _out_dir(args) -> str:
    path = args.out_dir or os.environ.get("SHAPEOPT_OUT_DIR") or "out"
    os.makedirs(path, exist_ok=True)
    return path


def _add_common(p, with_descent=True):
    p.add_argument("--out-dir", default=None, help="output directory (or $SHAPEOPT_OUT_DIR)")
    p.add_argument("--h", type=float, default=None, help="mesh size")
    p.add_argument("--n", type=int, default=None, dest="curve_n", help="curve grid intervals")
    p.add_argument("--re", type=float, default=None)
    p.add_argument("--pr", type=float, default=None)
    p.add_argument("--gr", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--lambda2", type=float, default=None)
    p.add_argument("--lambda3", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    if with_descent:
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--stop-tol", type=float, default=None)
        p.add_argument("--snapshot-stride", type=int, default=None)


def _merge_config(args, base: OptimizerConfig | None = None) -> OptimizerConfig:
    cfg = base if base is not None else OptimizerConfig()
    phys = {}
    for key in ("re", "pr", "gr", "alpha"):
        if getattr(args, key, None) is not None:
            phys[key] = getattr(args, key)
    if phys:
        cfg = replace(cfg, physical=replace(cfg.physical, **phys))
    direct = {
        "h": "h", "curve_n": "curve_n", "lambda1": "lam1", "lambda2": "lam2",
        "lambda3": "lam3", "nu": "nu", "max_iters": "max_iters", "tau": "tau",
        "stop_tol": "stop_tol", "snapshot_stride": "snapshot_stride",
    }
    updates = {
        field: getattr(args, key)
        for key, field in direct.items()
        if getattr(args, key, None) is not None
    }
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _run_descent(gamma0, cfg: OptimizerConfig, out_dir: str) -> None:
    with TraceWriter(os.path.join(out_dir, "trace.csv")) as writer:
        curve, trace = descend(gamma0, cfg, callback=writer)
    for it, snap in trace.curve_snapshots:
        write_curve(snap, os.path.join(out_dir, f"curve_iter{it:06d}.txt"))
    write_curve(curve, os.path.join(out_dir, "curve_final.txt"))
    last = trace.records[-1]
    print(
        f"descent finished after {len(trace.records)} iterations: "
        f"J1={last.J1:.6e} total={last.total:.6e} phi_inf={last.phi_inf:.3e}"
    )
    print(f"trace and curves written under {out_dir}")


def _cmd_run(args) -> int:
    cfg_file = configmod.read(args.config)
    out_dir = args.out_dir or cfg_file["out_dir"] or os.environ.get("SHAPEOPT_OUT_DIR") or "out"
    os.makedirs(out_dir, exist_ok=True)
    cfg = cfg_file.optimizer_config()
    case = cfg_file["case"]
    gamma0 = initial_curve(case if case is not None else 1, cfg.resolved_curve_n())
    configmod.write(cfg_file, os.path.join(out_dir, "config.txt"))
    _run_descent(gamma0, cfg, out_dir)
    return 0


def _cmd_case(args) -> int:
    out_dir = _out_dir(args)
    cfg = _merge_config(args)
    gamma0 = initial_curve(args.case_id, cfg.resolved_curve_n())
    _run_descent(gamma0, cfg, out_dir)
    return 0


def _cmd_gradcheck(args) -> int:
    cfg = _merge_config(args)
    n = args.curve_n if args.curve_n is not None else cfg.resolved_curve_n()
    results = finite_difference_check(
        cfg.h, n, cfg.physical, cfg.lam1, cfg.lam2, cfg.lam3, cfg.nu,
        ndirs=args.dirs, fd_step=args.fd_step, seed=args.seed,
    )
    worst = 0.0
    for k, (dd, fd, rel) in enumerate(results):
        print(f"direction {k}: adjoint={dd:+.8e}  fd={fd:+.8e}  rel_err={rel:.4%}")
        worst = max(worst, rel)
    print(f"worst relative error: {worst:.4%} (tolerance {args.tol:.0%})")
    return 0 if worst <= args.tol else 1


def _solve_on_curve(args):
    cfg = _merge_config(args)
    if args.curve:
        curve = read_curve(args.curve)
    else:
        curve = initial_curve(args.case_id, cfg.resolved_curve_n())
    mesh = build_mesh(curve, cfg.h)
    state = solve_state(mesh, cfg.physical)
    adj = solve_adjoint(state, mesh, cfg.physical)
    return cfg, curve, mesh, state, adj


def _field_dict(mesh, state, adj) -> dict:
    return {
        "vmag": vertex_magnitude(state.v, mesh),
        "p": vertex_values(state.p, mesh),
        "That": vertex_values(state.T_hat, mesh),
        "T": vertex_values(state.T, mesh),
        "S": vertex_values(adj.S, mesh),
        "wmag": vertex_magnitude(adj.w, mesh),
        "q": vertex_values(adj.q, mesh),
    }


def _cmd_solve_once(args) -> int:
    out_dir = _out_dir(args)
    cfg, curve, mesh, state, adj = _solve_on_curve(args)
    write_mesh_vtk(mesh, os.path.join(out_dir, "mesh.vtk"))
    write_vtk(mesh, _field_dict(mesh, state, adj), os.path.join(out_dir, "fields.vtk"))
    sample = gradient_sample(
        state, adj, curve, mesh, cfg.physical, cfg.lam1, cfg.lam2, cfg.lam3, cfg.nu
    )
    sample.write_csv(os.path.join(out_dir, "gradient.csv"))
    write_curve(curve, os.path.join(out_dir, "curve.txt"))
    print(f"mesh.vtk, fields.vtk, gradient.csv, curve.txt written under {out_dir}")
    return 0


def _cmd_export_fields(args) -> int:
    out_dir = _out_dir(args)
    _, _, mesh, state, adj = _solve_on_curve(args)
    write_vtk(mesh, _field_dict(mesh, state, adj), os.path.join(out_dir, "fields.vtk"))
    print(f"fields.vtk written under {out_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="shapeopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full descent from a config file")
    p_run.add_argument("--config", required=True, help="run configuration file")
    p_run.add_argument("--out-dir", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_case = sub.add_parser("case", help="preset experiment 1-5")
    p_case.add_argument("case_id", type=int, choices=range(1, 6))
    _add_common(p_case)
    p_case.set_defaults(func=_cmd_case)

    p_grad = sub.add_parser("gradcheck", help="adjoint vs finite-difference gradient test")
    _add_common(p_grad, with_descent=False)
    p_grad.add_argument("--dirs", type=int, default=3)
    p_grad.add_argument("--fd-step", type=float, default=1e-4)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--tol", type=float, default=0.05)
    p_grad.set_defaults(func=_cmd_gradcheck)

    for name, fn in (("solve-once", _cmd_solve_once), ("export-fields", _cmd_export_fields)):
        p = sub.add_parser(name, help=f"{name} on a given curve")
        p.add_argument("--curve", default=None, help="curve file (default: preset case)")
        p.add_argument("--case", dest="case_id", type=int, choices=range(1, 6), default=1)
        _add_common(p, with_descent=False)
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, GeometryError, ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (NonconvergenceError, SolverError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
