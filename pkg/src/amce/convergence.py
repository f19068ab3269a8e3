"""Grid-refinement studies against manufactured solutions.

Solves the coupled system for a named manufactured fixture on a sequence
of spacings, tabulates sup-errors of both unknowns, and reports observed
orders from successive Richardson ratios.  A failure on one grid leaves
the already-computed rows in place and marks the table partial.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .coupled import CoupledOptions, problem_from_exact, solve_system
from .errors import AmceError
from .fixtures import ExactSolution, get_fixture
from .geometry import Disk, Domain
from .grid import ScalarField, build_grid

__all__ = ["ConvergenceRow", "ConvergenceStudy", "convergence_study"]


@dataclass
class ConvergenceRow:
    h: float
    n_nodes: int = 0
    err_u: float = np.nan
    err_w: float = np.nan
    outer_iterations: int = 0
    newton_iterations_total: int = 0
    wall_time_s: float = 0.0
    failed: str | None = None

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "n_nodes": self.n_nodes,
            "err_u": self.err_u,
            "err_w": self.err_w,
            "outer_iterations": self.outer_iterations,
            "newton_iterations_total": self.newton_iterations_total,
            "failed": self.failed,
        }


@dataclass
class ConvergenceStudy:
    """Error table across spacings plus observed convergence orders.

    ``orders_u[i]`` / ``orders_w[i]`` are the Richardson orders between
    rows ``i`` and ``i+1``; ``partial`` is set when a grid failed and the
    remaining spacings were skipped.
    """

    fixture: str
    theta: float
    rows: list[ConvergenceRow] = field(default_factory=list)
    orders_u: list[float] = field(default_factory=list)
    orders_w: list[float] = field(default_factory=list)
    partial: bool = False

    def as_dict(self) -> dict:
        return {
            "fixture": self.fixture,
            "theta": self.theta,
            "rows": [r.as_dict() for r in self.rows],
            "orders_u": self.orders_u,
            "orders_w": self.orders_w,
            "partial": self.partial,
        }


def _observed_orders(rows: list[ConvergenceRow], attr: str) -> list[float]:
    orders = []
    good = [r for r in rows if r.failed is None]
    for a, b in zip(good[:-1], good[1:]):
        ea, eb = getattr(a, attr), getattr(b, attr)
        if ea > 0 and eb > 0 and a.h != b.h:
            orders.append(float(np.log(ea / eb) / np.log(a.h / b.h)))
        else:
            orders.append(np.nan)
    return orders


def convergence_study(
    fixture: str | ExactSolution,
    h_list,
    theta: float | None = None,
    domain: Domain | None = None,
    options: CoupledOptions | None = None,
) -> ConvergenceStudy:
    """Run the coupled solver against a manufactured fixture per spacing.

    Any solver error aborts the remaining grids: the row that failed
    carries the message, earlier rows stay valid, and the study is marked
    partial.
    """
    exact = fixture if isinstance(fixture, ExactSolution) else get_fixture(fixture, theta=theta)
    study = ConvergenceStudy(fixture=exact.name, theta=exact.theta)
    if domain is None:
        domain = Disk(min(1.0, exact.r_max))
    opts = options or CoupledOptions()

    for h in h_list:
        row = ConvergenceRow(h=float(h))
        study.rows.append(row)
        t0 = time.perf_counter()
        try:
            grid = build_grid(domain, float(h))
            row.n_nodes = grid.n_nodes
            prob = problem_from_exact(grid, exact)
            u, w, rep = solve_system(prob, opts)
            u_star = ScalarField.from_callable(grid, exact.u)
            w_star = ScalarField.from_callable(grid, exact.w)
            row.err_u = float(np.max(np.abs(u.values - u_star.values)))
            row.err_w = float(np.max(np.abs(w.values - w_star.values)))
            row.outer_iterations = rep.outer_iterations
            row.newton_iterations_total = rep.newton_iterations_total
        except AmceError as exc:
            row.failed = f"{type(exc).__name__}: {exc}"
            study.partial = True
            row.wall_time_s = time.perf_counter() - t0
            break
        row.wall_time_s = time.perf_counter() - t0

    study.orders_u = _observed_orders(study.rows, "err_u")
    study.orders_w = _observed_orders(study.rows, "err_w")
    return study
