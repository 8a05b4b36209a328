"""Command-line front end: simulate, kernel, spectrum, norms.

Every run writes a manifest JSON describing the resolved parameters, the seed
and the output files; re-running with identical inputs reproduces the CSVs
byte for byte.  Floats are written with shortest round-trip formatting.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 blow-up
detected, 4 Picard divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time as _time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import fit_operator_norm, lp_norm
from .errors import GraphKSError, ParseError
from .graph import build_graph, load_graph
from .grid import GridFunction, Mesh
from .kernel import build_plan
from .laplacian import DiscreteLaplacian, eigendecompose
from .solver import (
    BLOWUP,
    COMPLETED,
    PICARD_DIVERGED,
    LogisticPreset,
    Nonlinearity,
    SolverConfig,
    minimal_model,
    solve_mild,
    solve_reference,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_BLOWUP = 3
EXIT_PICARD = 4


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(c) for c in row])


_EXPR_NAMES = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "pi": math.pi,
    "e": math.e,
    "where": np.where,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "sign": np.sign,
}


def eval_expression(expr: str, **vars):
    """Evaluate a whitelisted arithmetic expression over numpy arrays."""
    if not isinstance(expr, str):
        raise ConfigError(f"expected expression string, got {type(expr).__name__}")
    import ast

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {expr!r}: {exc.msg}") from None
    allowed = (
        ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
        ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod,
        ast.USub, ast.UAdd, ast.Compare, ast.Lt, ast.Gt, ast.LtE, ast.GtE,
        ast.Tuple, ast.IfExp, ast.Eq, ast.NotEq,
    )
    for node in ast.walk(tree):
        if not isinstance(node, allowed):
            raise ConfigError(f"disallowed syntax in expression: {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in _EXPR_NAMES and node.id not in vars:
            raise ConfigError(f"unknown name {node.id!r} in expression")
    env = dict(_EXPR_NAMES)
    env.update(vars)
    return eval(compile(tree, "<expr>", "eval"), {"__builtins__": {}}, env)


def _initial_data(spec, mesh: Mesh, base: Path) -> GridFunction:
    """Expression in x (edge coordinate, `edge` bound to the id) or node-value JSON file."""
    if isinstance(spec, (int, float)):
        return mesh.constant(float(spec))
    if isinstance(spec, str) and spec.endswith(".json"):
        with open(base / spec) as fh:
            table = json.load(fh)
        vals = []
        for k, e in enumerate(mesh.graph.edges):
            if e.id not in table:
                raise ConfigError(f"node-value file missing edge {e.id!r}")
            arr = np.asarray(table[e.id], dtype=float)
            if len(arr) != mesh.n[k] + 1:
                raise ConfigError(
                    f"edge {e.id!r}: expected {mesh.n[k] + 1} node values, got {len(arr)}"
                )
            vals.append(arr)
        return GridFunction(mesh, vals)
    if isinstance(spec, str):
        return mesh.sample(lambda eid, x: eval_expression(spec, x=x, edge=eid) + 0.0 * x)
    raise ConfigError(f"cannot interpret initial data spec {spec!r}")


def _expression_nonlinearity(spec: dict, tau: float, sigma: float) -> Nonlinearity:
    need = {"f1", "f2", "f3"}
    missing = need - set(spec)
    if missing:
        raise ConfigError(f"nonlinearity spec missing {sorted(missing)}")
    mk = lambda key: (lambda u, v, _e=spec[key]: eval_expression(_e, u=u, v=v) + 0.0 * u)
    f_ell = None
    if "f" in spec:
        f_ell = lambda u, _e=spec["f"]: eval_expression(_e, u=u) + 0.0 * u
    elif tau == 0:
        raise ConfigError("parabolic-elliptic expression nonlinearity needs key 'f'")
    return Nonlinearity(
        f1=mk("f1"), f2=mk("f2"), f3=mk("f3"), sigma=sigma, tau=tau, f_elliptic=f_ell
    )


def _build_nonlinearity(cfg: dict) -> Nonlinearity:
    tau = float(cfg.get("tau", 0.0))
    sigma = float(cfg.get("sigma", 1.0))
    spec = cfg.get("nonlinearity", "logistic")
    if isinstance(spec, dict):
        return _expression_nonlinearity(spec, tau, sigma)
    if spec == "minimal":
        return minimal_model(chi=float(cfg.get("chi", 1.0)), tau=tau, sigma=sigma)
    if spec == "logistic":
        preset = LogisticPreset(
            chi=float(cfg.get("chi", 1.0)),
            k=float(cfg.get("k", 0.0)),
            l=float(cfg.get("l", 1.0)),
            m=float(cfg.get("m", 1.0)),
            eps=float(cfg.get("eps", 1.0)),
        )
        return preset.nonlinearity(tau=tau, sigma=sigma)
    raise ConfigError(f"unknown nonlinearity preset {spec!r}")


def apply_overrides(cfg: dict, overrides) -> dict:
    """--set key=value with dotted paths; values parsed as JSON when possible."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object")
        node[parts[-1]] = val
    return cfg


def _manifest(out_dir: Path, name: str, payload: dict):
    payload = dict(payload)
    payload["tool_version"] = __version__
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    t0 = _time.monotonic()
    cfg_path = Path(args.config)
    try:
        with open(cfg_path) as fh:
            text = fh.read()
        cfg = json.loads(text)
    except FileNotFoundError:
        print(f"config not found: {cfg_path}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(
            f"malformed config JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    cfg = apply_overrides(cfg, args.set)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(cfg_path.parent / cfg["graph"])
    nl = _build_nonlinearity(cfg)
    mode = cfg.get("mode", nl.mode)
    if mode != nl.mode:
        raise ConfigError(f"mode {mode!r} inconsistent with tau={nl.tau}")
    scfg = SolverConfig(
        dt=float(cfg.get("dt", 1e-3)),
        t_end=float(cfg.get("t_end", 1.0)),
        picard_tol=float(cfg.get("picard_tol", 1e-9)),
        nodes_per_unit_length=int(cfg.get("mesh", 40)),
        blowup_threshold=float(cfg.get("blowup_threshold", 1e6)),
        blowup_p=float(cfg.get("blowup_norm_p", 2.0)),
        n_win=int(cfg.get("n_win", 8)),
        record_interval=cfg.get("record_interval"),
    )
    mesh = Mesh(graph, scfg.nodes_per_unit_length)
    u0 = _initial_data(cfg.get("u0", 0.0), mesh, cfg_path.parent)
    v0 = _initial_data(cfg["v0"], mesh, cfg_path.parent) if "v0" in cfg else None

    solver_kind = cfg.get("solver", "reference")
    L = DiscreteLaplacian(mesh)
    if solver_kind == "mild":
        plan = build_plan(graph, T=scfg.n_win * scfg.dt, eps_tail=scfg.eps_tail)
        result = solve_mild(plan, nl, u0, v0, scfg, laplacian=L)
    elif solver_kind == "reference":
        result = solve_reference(L, nl, u0, v0, scfg)
    else:
        raise ConfigError(f"unknown solver {solver_kind!r}")

    sol_path = out_dir / "solution.csv"
    header = ["time"] + [
        f"{e.id}:{x:.10g}" for k, e in enumerate(graph.edges) for x in mesh.x[k]
    ]
    _write_csv(
        sol_path,
        header,
        ([t] + list(u.to_flat()) for t, u in zip(result.times, result.u_series)),
    )
    diag_path = out_dir / "diagnostics.csv"
    _write_csv(
        diag_path,
        [
            "time", "mass_u", "norm_p", "norm_inf", "min_u", "min_v",
            "picard_iters", "contraction_factor",
        ],
        ([d[k] for k in (
            "time", "mass_u", "norm_p", "norm_inf", "min_u", "min_v",
            "picard_iters", "contraction_factor",
        )] for d in result.diagnostics),
    )
    _manifest(
        out_dir,
        "manifest.json",
        {
            "command": "simulate",
            "config_path": str(cfg_path),
            "parameters": cfg,
            "solver": solver_kind,
            "seed": args.seed,
            "threads": args.threads,
            "status": result.status,
            "t_blowup_est": result.t_blowup_est,
            "outputs": [str(sol_path), str(diag_path)],
            "wall_time_s": _time.monotonic() - t0,
        },
    )
    if result.status == BLOWUP:
        return EXIT_BLOWUP
    if result.status == PICARD_DIVERGED:
        return EXIT_PICARD
    return EXIT_OK


def _parse_points(spec: str, graph):
    pts = []
    for item in spec.split(","):
        edge, _, xi = item.partition(":")
        edge = edge.strip()
        graph.edge_index(edge)
        pts.append((edge, float(xi)))
    return pts


def cmd_kernel(args) -> int:
    t0 = _time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(args.graph)
    times = [float(s) for s in args.t.split(",")]
    if min(times) <= 0:
        raise ConfigError("kernel times must be positive")
    pts = _parse_points(args.points, graph)
    plan = build_plan(graph, T=max(times), eps_tail=args.eps_tail)
    from .graph import EdgePoint

    rows = []
    for t in times:
        for ex, xx in pts:
            for ey, xy in pts:
                px, py = EdgePoint(ex, xx), EdgePoint(ey, xy)
                rows.append(
                    (
                        ex, xx, ey, xy, t,
                        plan.eval_kernel(t, px, py),
                        plan.eval_kernel_dy(t, px, py),
                    )
                )
    path = out_dir / "kernel.csv"
    _write_csv(path, ["edge_x", "xi_x", "edge_y", "xi_y", "t", "K", "dK_dy"], rows)
    _manifest(
        out_dir,
        "manifest.json",
        {
            "command": "kernel",
            "graph": str(args.graph),
            "times": times,
            "points": [list(p) for p in pts],
            "eps_tail": args.eps_tail,
            "truncation_radius": plan.R_len,
            "path_records": plan.record_count(),
            "seed": args.seed,
            "outputs": [str(path)],
            "wall_time_s": _time.monotonic() - t0,
        },
    )
    return EXIT_OK


def cmd_spectrum(args) -> int:
    t0 = _time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(args.graph)
    L = DiscreteLaplacian(Mesh(graph, args.mesh))
    dec = eigendecompose(L, args.k)
    res = dec.residuals()
    path = out_dir / "spectrum.csv"
    _write_csv(
        path,
        ["index", "lambda", "residual"],
        ((i, float(dec.eigenvalues[i]), float(res[i])) for i in range(dec.count)),
    )
    _manifest(
        out_dir,
        "manifest.json",
        {
            "command": "spectrum",
            "graph": str(args.graph),
            "k": args.k,
            "mesh": args.mesh,
            "seed": args.seed,
            "outputs": [str(path)],
            "wall_time_s": _time.monotonic() - t0,
        },
    )
    return EXIT_OK


def cmd_norms(args) -> int:
    t0 = _time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(args.graph)
    mesh = Mesh(graph, args.mesh)
    times = [float(s) for s in args.t.split(",")]
    plan = build_plan(graph, T=max(times))
    pairs = []
    for item in args.pairs.split(","):
        p, _, q = item.partition(":")
        pairs.append((float(p), math.inf if q.strip() == "inf" else float(q)))
    kinds = args.op.split(",")
    rows = []
    for kind in kinds:
        for p, q in pairs:
            fit = fit_operator_norm(
                plan, mesh, kind, p, q, times, seed=args.seed
            )
            for t, n in zip(fit.times, fit.empirical_norms):
                rows.append(
                    (kind, p, q, float(t), float(n), fit.fitted_slope, fit.target,
                     "pass" if fit.passed else "fail")
                )
    path = out_dir / "norms.csv"
    _write_csv(
        path,
        ["op_kind", "p", "q", "t", "empirical_norm", "fitted_slope", "target", "pass"],
        rows,
    )
    _manifest(
        out_dir,
        "manifest.json",
        {
            "command": "norms",
            "graph": str(args.graph),
            "pairs": args.pairs,
            "ops": kinds,
            "times": times,
            "mesh": args.mesh,
            "seed": args.seed,
            "outputs": [str(path)],
            "wall_time_s": _time.monotonic() - t0,
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _add_globals(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="graphks",
        description="Heat kernels and Keller-Segel dynamics on metric graphs",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a chemotaxis simulation from a config file")
    p.add_argument("config")
    _add_globals(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("kernel", help="evaluate the heat kernel at points and times")
    p.add_argument("graph")
    p.add_argument("--t", required=True, help="comma-separated times")
    p.add_argument("--points", required=True, help="comma-separated edge:xi pairs")
    p.add_argument("--eps-tail", type=float, default=1e-12)
    _add_globals(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("spectrum", help="eigenvalue table of the graph Laplacian")
    p.add_argument("graph")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--mesh", type=int, default=100)
    _add_globals(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("norms", help="empirical operator-norm exponent fits")
    p.add_argument("graph")
    p.add_argument("--pairs", default="2:2", help="comma-separated p:q pairs (q may be inf)")
    p.add_argument("--op", default="heat,heat_dx")
    p.add_argument("--t", default="0.02,0.04,0.08,0.16,0.32")
    p.add_argument("--mesh", type=int, default=60)
    _add_globals(p)
    p.set_defaults(func=cmd_norms)
    return ap


def _limit_threads(n: int):
    if n is None or n <= 0:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        loc = ""
        if exc.line is not None:
            loc = f" at line {exc.line}, column {exc.column}"
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphKSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
