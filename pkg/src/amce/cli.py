"""Command-line entry point.

Subcommands::

    amce solve    --config cfg.json   coupled solve; u.csv, w.csv, report.json
    amce ma       --config cfg.json   determinant subproblem; u.csv, report.json
    amce lma      --config cfg.json   linearized subproblem; v.csv, report.json
    amce sections --config cfg.json   section geometry scan; sections.csv, hulls
    amce verify   --config cfg.json   solve + audit battery; verify.json
    amce converge --config cfg.json   grid refinement study; converge.csv
    amce fixture  --config cfg.json   list fixtures / dump sampled fields

Every subcommand takes ``--config`` (required) plus ``--out``, ``--seed``,
and ``--threads`` overrides.  Field dumps are CSV with an ``x,y,value``
header at 17 significant digits, node rows first, then boundary hit rows.
Each run writes ``report.json`` embedding the canonical config; wall time
lives only under the ``"timing"`` key so that identical configs produce
byte-identical reports after dropping that key.

Exit codes: 0 on success, 2 when an iteration fails to converge (or the
operator degenerates mid-solve), 3 for invalid configs, domains, or data.
``--threads`` parallelizes the per-height hull fits of the sections scan;
everything else is single-threaded.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import FieldSpec, RunConfig, canonical_json, load_config
from .convergence import convergence_study
from .coupled import (
    CoupledOptions,
    ProblemData,
    problem_from_exact,
    solve_system,
)
from .errors import (
    AmceError,
    ConfigError,
    ConvexityFailureError,
    ConvexityViolationError,
    DegenerateOperatorError,
    DegenerateSectionError,
    EmptyGridError,
    IncompleteDataError,
    InvalidDomainError,
    InvalidProblemError,
    InvalidShearError,
    NonConvergenceError,
    NonConvexProfileError,
    TooCloseToBoundaryError,
)
from .fixtures import fixture_names, forcing_from_exact, get_fixture
from .geometry import build_domain
from .grid import Grid, ScalarField, build_grid
from .lma import CofactorField, LMAProblem, solve_lma
from .ma import MAProblem, MASolveOptions, solve_ma
from .operators import discrete_hessian, value_and_gradient_at
from .regularity import verify
from .sections import (
    extract_section,
    localization_scan,
    maximal_height,
    normalize_section,
)

__all__ = ["main"]

_CONVERGE_EXIT = (NonConvergenceError, ConvexityFailureError, DegenerateOperatorError)
_INVALID_EXIT = (
    ConfigError,
    InvalidProblemError,
    InvalidDomainError,
    EmptyGridError,
    InvalidShearError,
    TooCloseToBoundaryError,
    DegenerateSectionError,
    IncompleteDataError,
    ConvexityViolationError,
    NonConvexProfileError,
    ValueError,
    KeyError,
)

_DEFAULT_FIXTURE_THETA = 0.25


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_field_csv(path: str, field: ScalarField) -> None:
    """Dump a scalar field as ``x,y,value`` rows: nodes first, then hits."""
    grid = field.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,value\n")
        for p, v in zip(grid.nodes, field.values):
            fh.write(f"{p[0]:.17g},{p[1]:.17g},{v:.17g}\n")
        if field.hit_values is not None:
            for p, v in zip(grid.hit_points, field.hit_values):
                fh.write(f"{p[0]:.17g},{p[1]:.17g},{v:.17g}\n")


def read_field_csv(path: str, grid: Grid) -> ScalarField:
    """Read an ``x,y,value`` dump back onto a grid.

    Rows are matched to lattice nodes by index and to boundary hits by
    nearest point.  Missing nodes or hits raise IncompleteDataError —
    the dump must come from the same domain/spacing combination.
    """
    try:
        data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=float)
    except OSError as exc:
        raise ConfigError(f"cannot read field csv {path}: {exc}") from exc
    data = np.atleast_2d(data)
    if data.ndim != 2 or data.shape[1] != 3 or np.isnan(data).any():
        raise IncompleteDataError(f"{path} is not a valid x,y,value table")

    values = np.full(grid.n_nodes, np.nan)
    hit_values = np.full(grid.n_hits, np.nan)
    hit_tree = None
    if grid.n_hits:
        from scipy.spatial import cKDTree

        hit_tree = cKDTree(grid.hit_points)
    tol = 1e-9 * max(1.0, float(np.abs(grid.nodes).max(initial=1.0)))
    for x, y, v in data:
        node = grid.node_at((x, y), tol=tol)
        if node is not None:
            values[node] = v
            continue
        if hit_tree is not None:
            dist, hid = hit_tree.query([x, y])
            if dist <= tol:
                hit_values[hid] = v
                continue
        raise IncompleteDataError(
            f"{path}: row ({x:.17g}, {y:.17g}) matches no node or hit of the grid"
        )
    if np.isnan(values).any():
        missing = int(np.isnan(values).sum())
        raise IncompleteDataError(f"{path}: {missing} grid nodes have no value")
    if grid.n_hits and np.isnan(hit_values).any():
        missing = int(np.isnan(hit_values).sum())
        raise IncompleteDataError(f"{path}: {missing} boundary hits have no value")
    return ScalarField(
        grid=grid, values=values, hit_values=hit_values if grid.n_hits else None
    )


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(_jsonable(obj)))
        fh.write("\n")


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------


def _make_grid(cfg: RunConfig) -> Grid:
    domain = build_domain(cfg.domain_kind, cfg.domain_params)
    return build_grid(domain, cfg.h)


def _coupled_options(cfg: RunConfig) -> CoupledOptions:
    s = cfg.solver
    return CoupledOptions(
        outer_tol=s["outer_tol"],
        max_outer_iters=s["max_outer_iters"],
        relaxation=s["relaxation"],
        lma_tol=s["lma_tol"],
        ma=MASolveOptions(
            newton_tol=s["newton_tol"],
            max_iters=s["max_newton_iters"],
            eps_clamp=s["eps_clamp"],
        ),
    )


def _fixture_exact(cfg: RunConfig):
    theta = cfg.fixture.get("theta", _DEFAULT_FIXTURE_THETA)
    return get_fixture(cfg.fixture["name"], theta=theta)


def _coupled_problem(cfg: RunConfig, grid: Grid) -> ProblemData:
    if cfg.problem is not None:
        pb = cfg.problem
        return ProblemData.from_callables(
            grid,
            pb["theta"],
            f_fn=pb["f"].to_callable(),
            phi_fn=pb["phi"].to_callable(),
            psi_fn=pb["psi"].to_callable(),
            p_norm=pb["p"],
        )
    if cfg.fixture is not None:
        return problem_from_exact(grid, _fixture_exact(cfg))
    raise ConfigError("this command needs a 'problem' or 'fixture' config block")


def _ma_problem(cfg: RunConfig, grid: Grid) -> MAProblem:
    if cfg.ma is not None:
        return MAProblem.from_callables(
            grid,
            g_fn=cfg.ma["g"].to_callable(),
            phi_fn=cfg.ma["phi"].to_callable(),
        )
    if cfg.fixture is not None:
        exact = _fixture_exact(cfg)
        theta = exact.theta

        def g_fn(p):
            # w = det^(theta-1) pins down the determinant target
            return np.asarray(exact.w(p), float) ** (1.0 / (theta - 1.0))

        return MAProblem.from_callables(grid, g_fn=g_fn, phi_fn=exact.u)
    raise ConfigError("the ma command needs an 'ma' or 'fixture' config block")


def _ma_options(cfg: RunConfig) -> MASolveOptions:
    s = cfg.solver
    return MASolveOptions(
        newton_tol=s["newton_tol"],
        max_iters=s["max_newton_iters"],
        eps_clamp=s["eps_clamp"],
    )


# ---------------------------------------------------------------------------
# subcommands (each returns (results dict, exit code))
# ---------------------------------------------------------------------------


def _cmd_solve(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    grid = _make_grid(cfg)
    problem = _coupled_problem(cfg, grid)
    u, w, report = solve_system(problem, _coupled_options(cfg))
    write_field_csv(os.path.join(out_dir, "u.csv"), u)
    write_field_csv(os.path.join(out_dir, "w.csv"), w)
    results = {
        "n_nodes": grid.n_nodes,
        "n_hits": grid.n_hits,
        "solve": report.as_dict(),
        "sup_u": u.sup_norm(),
        "sup_w": w.sup_norm(),
        "outputs": ["u.csv", "w.csv"],
    }
    return results, 0


def _cmd_ma(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    grid = _make_grid(cfg)
    problem = _ma_problem(cfg, grid)
    u, report = solve_ma(problem, _ma_options(cfg))
    write_field_csv(os.path.join(out_dir, "u.csv"), u)
    results = dict(report.as_dict())
    results.update(
        {"n_nodes": grid.n_nodes, "n_hits": grid.n_hits, "outputs": ["u.csv"]}
    )
    return results, 0


def _cmd_lma(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    grid = _make_grid(cfg)
    lma_cfg = cfg.lma or {
        "g": FieldSpec("const", 0.0),
        "psi": FieldSpec("const", 1.0),
    }
    if "u_csv" in lma_cfg:
        u = read_field_csv(lma_cfg["u_csv"], grid)
        u_source = lma_cfg["u_csv"]
    elif cfg.ma is not None or cfg.fixture is not None:
        u, _ = solve_ma(_ma_problem(cfg, grid), _ma_options(cfg))
        u_source = "ma-solve"
    else:
        raise ConfigError(
            "the lma command needs coefficients: lma.u_csv, an 'ma' block, "
            "or a 'fixture' block"
        )
    coeff = CofactorField.from_hessian(discrete_hessian(u))
    g = lma_cfg["g"].to_callable()(grid.nodes)
    psi = lma_cfg["psi"].to_callable()(grid.hit_points)
    problem = LMAProblem(coeff=coeff, g=g, psi_hits=psi)
    v, report = solve_lma(problem, tol=cfg.solver["lma_tol"], report_condition=True)
    write_field_csv(os.path.join(out_dir, "v.csv"), v)
    results = dict(report.as_dict())
    results.update(
        {
            "u_source": u_source,
            "n_nodes": grid.n_nodes,
            "n_hits": grid.n_hits,
            "outputs": ["v.csv"],
        }
    )
    return results, 0


def _write_hull_csv(path: str, hull_points: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y\n")
        for p in hull_points:
            fh.write(f"{p[0]:.17g},{p[1]:.17g}\n")


def _cmd_sections(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    if cfg.sections is None:
        raise ConfigError("the sections command needs a 'sections' config block")
    sc = cfg.sections
    grid = _make_grid(cfg)
    problem = _coupled_problem(cfg, grid)
    u, _, solve_report = solve_system(problem, _coupled_options(cfg))

    results: dict = {
        "solve": solve_report.as_dict(),
        "heights": sc["heights"],
        "outputs": [],
    }

    if "boundary_point" in sc:
        x0 = np.asarray(sc["boundary_point"], float)
        scan = localization_scan(
            u, x0, sc["heights"], min_nodes=sc["min_nodes"]
        )
        csv_path = os.path.join(out_dir, "sections.csv")
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("h,tau,vol_ratio,k_inner,k_outer\n")
            for row in scan.kept_rows():
                fh.write(
                    f"{row['h']:.17g},{row['tau']:.17g},{row['vol_ratio']:.17g},"
                    f"{row['k_inner']:.17g},{row['k_outer']:.17g}\n"
                )
        results["outputs"].append("sections.csv")

        # hull polygons, one file per kept height (fits may run in parallel)
        val, grad = value_and_gradient_at(u, x0)
        kept = [row["h"] for row in scan.kept_rows()]

        def hull_for(h):
            return extract_section(
                u, x0, h, center_value=val, center_gradient=grad
            ).hull_points

        if cfg.threads > 1 and len(kept) > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                hulls = list(pool.map(hull_for, kept))
        else:
            hulls = [hull_for(h) for h in kept]
        hull_files = []
        for k, (h, hull) in enumerate(zip(kept, hulls)):
            if hull is None:
                continue
            name = f"hull_{k:03d}.csv"
            _write_hull_csv(os.path.join(out_dir, name), hull)
            hull_files.append({"h": h, "file": name, "n_vertices": len(hull)})
        results["outputs"].extend(e["file"] for e in hull_files)
        results["boundary_scan"] = {
            "x0": list(map(float, x0)),
            "normal": list(map(float, scan.normal)),
            "rows": scan.rows,
            "slide_c0": scan.slide_c0,
            "slide_c1": scan.slide_c1,
            "slide_r2": scan.slide_r2,
            "hulls": hull_files,
        }

    if "interior_points" in sc:
        interior = []
        for y in sc["interior_points"]:
            entry: dict = {"point": [float(y[0]), float(y[1])]}
            hbar, touch = maximal_height(u, y)
            entry["hbar"] = hbar
            entry["touch_point"] = list(map(float, touch))
            if sc["normalize"]:
                ns = normalize_section(u, y)
                entry["normalized"] = {
                    "c_inner": ns.c_inner,
                    "c_outer": ns.c_outer,
                    "grad_at_center": list(map(float, ns.grad_at_center)),
                    "det_range_original": list(map(float, ns.det_range_original)),
                    "det_range_normalized": list(
                        map(float, ns.det_range_normalized)
                    ),
                    "tau": ns.fit.tau,
                    "h_eff": ns.fit.h_eff,
                }
            interior.append(entry)
        results["interior_points"] = interior

    return results, 0


def _cmd_verify(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    grid = _make_grid(cfg)
    problem = _coupled_problem(cfg, grid)
    u, w, solve_report = solve_system(problem, _coupled_options(cfg))
    checks = verify(
        problem,
        u,
        w,
        boundary_alpha=cfg.verify["boundary_alpha"],
        seed=cfg.seed,
    )
    summary = {
        "checks": [c.as_dict() for c in checks],
        "n_pass": sum(c.status == "pass" for c in checks),
        "n_fail": sum(c.status == "fail" for c in checks),
        "n_skip": sum(c.status == "skip" for c in checks),
    }
    _write_json(os.path.join(out_dir, "verify.json"), summary)
    results = {
        "solve": solve_report.as_dict(),
        "verify": summary,
        "outputs": ["verify.json"],
    }
    return results, 0


def _cmd_converge(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    if cfg.converge is None:
        raise ConfigError("the converge command needs a 'converge' config block")
    if cfg.fixture is None:
        raise ConfigError("the converge command needs a 'fixture' config block")
    domain = build_domain(cfg.domain_kind, cfg.domain_params)
    theta = cfg.fixture.get("theta", _DEFAULT_FIXTURE_THETA)
    study = convergence_study(
        cfg.fixture["name"],
        cfg.converge["h_list"],
        theta=theta,
        domain=domain,
        options=_coupled_options(cfg),
    )
    csv_path = os.path.join(out_dir, "converge.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("h,n_nodes,err_u,err_w,outer_iterations\n")
        for row in study.rows:
            fh.write(
                f"{row.h:.17g},{row.n_nodes},{row.err_u:.17g},{row.err_w:.17g},"
                f"{row.outer_iterations}\n"
            )
    results = dict(study.as_dict())
    results["outputs"] = ["converge.csv"]
    return results, 2 if study.partial else 0


def _cmd_fixture(cfg: RunConfig, out_dir: str) -> tuple[dict, int]:
    results: dict = {"available": fixture_names(), "outputs": []}
    if cfg.fixture is not None:
        exact = _fixture_exact(cfg)
        grid = _make_grid(cfg)
        u = ScalarField.from_callable(grid, exact.u)
        w = ScalarField.from_callable(grid, exact.w)
        f = ScalarField.from_callable(grid, exact.f)
        for name, field in (("u_exact", u), ("w_exact", w), ("f_exact", f)):
            write_field_csv(os.path.join(out_dir, f"{name}.csv"), field)
            results["outputs"].append(f"{name}.csv")
        f_fd = forcing_from_exact(exact, method="fd8")
        route_gap = float(
            np.max(np.abs(f.values - np.asarray(f_fd(grid.nodes), float)))
        )
        results["fixture"] = {
            "name": exact.name,
            "theta": exact.theta,
            "forcing_route_gap": route_gap,
            "f_nonpositive": bool(np.all(f.values <= 1e-12)),
            "sup_u": u.sup_norm(),
            "sup_w": w.sup_norm(),
        }
    return results, 0


_DISPATCH = {
    "solve": _cmd_solve,
    "ma": _cmd_ma,
    "lma": _cmd_lma,
    "sections": _cmd_sections,
    "verify": _cmd_verify,
    "converge": _cmd_converge,
    "fixture": _cmd_fixture,
}

_COMMAND_HELP = {
    "solve": "run the coupled solver and dump u, w, and a report",
    "ma": "solve the determinant subproblem det D^2 u = g",
    "lma": "solve the frozen-coefficient linearized subproblem",
    "sections": "scan section ellipsoid geometry of a computed solution",
    "verify": "solve, then run the full audit battery into verify.json",
    "converge": "manufactured-solution refinement study over a spacing list",
    "fixture": "list fixtures and dump exact fields for one of them",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amce",
        description="Solvers and diagnostics for the fourth-order "
        "curvature system in the plane.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in _COMMAND_HELP.items():
        p = sub.add_parser(name, help=blurb, description=blurb)
        p.add_argument("--config", required=True, help="path to a JSON run config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument(
            "--threads", type=int, help="worker threads for section fits"
        )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; report bad invocations
        # with the invalid-input code and let --help keep its clean exit
        return 0 if exc.code == 0 else 3

    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg.threads = args.threads

        out_dir = cfg.output_dir
        os.makedirs(out_dir, exist_ok=True)

        t0 = time.perf_counter()
        results, code = _DISPATCH[args.command](cfg, out_dir)
        wall = time.perf_counter() - t0

        report = {
            "command": args.command,
            "config": cfg.canonical(),
            "results": results,
            "timing": {"wall_time_s": wall},
        }
        _write_json(os.path.join(out_dir, "report.json"), report)
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{args.command}: {status}, outputs in {out_dir}")
        return code
    except _CONVERGE_EXIT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _INVALID_EXIT as exc:
        detail = exc.args[0] if exc.args else exc
        print(f"error: {detail}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
