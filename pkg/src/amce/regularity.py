"""Numerical regularity audits: Hölder fits, extremum principles, norm chains.

These routines *measure* qualitative properties of computed solutions —
modulus-of-continuity exponents, boundary-data extremum principles, the
sup-norm chain for the weight, and high-order difference norms — and
package them as pass/fail/skip checks with explicit margins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .coupled import ProblemData
from .errors import DegenerateOperatorError
from .grid import Grid, ScalarField
from .sections import quadratic_separation
from .operators import discrete_hessian

__all__ = [
    "HolderFit",
    "BoundaryHolderReport",
    "MinPrincipleReport",
    "AbpChainReport",
    "SobolevMonitor",
    "CheckResult",
    "fit_holder_exponent",
    "boundary_holder_check",
    "min_principle_check",
    "abp_chain_report",
    "abp_exponent",
    "sobolev_monitor",
    "cell_areas",
    "verify",
]

#: Slope cap for fitted modulus exponents: genuinely Lipschitz data can fit
#: marginally above 1 through bin quantization, anything higher is reported
#: as-is in ``raw_slope`` but capped in ``beta``.
_BETA_CAP = 1.05


# ---------------------------------------------------------------------------
# modulus-of-continuity fits
# ---------------------------------------------------------------------------


@dataclass
class HolderFit:
    """Log-log fit of the maximal oscillation against pair distance.

    Oscillations |v(x) - v(a)| over anchor/target pairs are binned by
    distance into dyadic bins spanning ``[bin_lo, bin_hi]``; ``beta`` is
    the least-squares slope of log(max oscillation) versus log(distance),
    capped at 1.05.  ``degenerate`` marks fits with too few usable bins or
    a non-increasing modulus (e.g. constant fields).
    """

    beta: float
    raw_slope: float
    constant: float
    r2: float
    n_pairs: int
    n_bins: int
    bin_centers: np.ndarray
    bin_oscillation: np.ndarray
    degenerate: bool


def _oscillation_fit(
    anchor_pts, anchor_vals, target_pts, target_vals, bin_lo, bin_hi
) -> HolderFit:
    diff = target_pts[None, :, :] - anchor_pts[:, None, :]
    dist = np.sqrt((diff**2).sum(-1)).ravel()
    osc = np.abs(target_vals[None, :] - anchor_vals[:, None]).ravel()

    edges = [bin_lo]
    while edges[-1] * 2.0 <= bin_hi * (1.0 + 1e-12):
        edges.append(edges[-1] * 2.0)
    edges = np.asarray(edges)

    centers, peaks, n_pairs = [], [], 0
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (dist >= a) & (dist < b)
        if not sel.any():
            continue
        centers.append(np.sqrt(a * b))
        peaks.append(osc[sel].max())
        n_pairs += int(sel.sum())

    centers = np.asarray(centers)
    peaks = np.asarray(peaks)
    if len(centers) < 2 or (peaks <= 0.0).any():
        return HolderFit(
            beta=np.nan,
            raw_slope=np.nan,
            constant=np.nan,
            r2=np.nan,
            n_pairs=n_pairs,
            n_bins=len(centers),
            bin_centers=centers,
            bin_oscillation=peaks,
            degenerate=True,
        )
    lx, ly = np.log(centers), np.log(peaks)
    coeffs, res = np.polyfit(lx, ly, 1, full=True)[:2]
    slope = float(coeffs[0])
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - (float(res[0]) if res.size else 0.0) / ss_tot if ss_tot > 0 else 1.0
    degenerate = slope <= 0.0
    beta = np.nan if degenerate else min(slope, _BETA_CAP)
    # seminorm estimate: smallest C with (bin oscillation) <= C * d^beta
    constant = np.nan if degenerate else float(np.max(peaks / centers**beta))
    return HolderFit(
        beta=beta,
        raw_slope=slope,
        constant=constant,
        r2=float(r2),
        n_pairs=n_pairs,
        n_bins=len(centers),
        bin_centers=centers,
        bin_oscillation=peaks,
        degenerate=degenerate,
    )


def fit_holder_exponent(
    field: ScalarField,
    seed: int = 0,
    n_random_anchors: int = 168,
    n_extreme_anchors: int = 32,
    bin_lo: float | None = None,
    bin_hi: float | None = None,
) -> HolderFit:
    """Fit an interior modulus-of-continuity exponent for a grid field.

    Anchors mix nodes at extreme field values (where oscillation peaks
    live) with a seeded random sample; targets are all nodes.  Distance
    bins default to dyadic bins spanning ``[4h, diam/4]``.
    """
    grid = field.grid
    v = field.values
    n = grid.n_nodes
    order = np.argsort(v)
    k = min(n_extreme_anchors // 2, n // 2)
    extreme = np.concatenate([order[:k], order[-k:]])
    rng = np.random.default_rng(seed)
    rest = np.setdiff1d(np.arange(n), extreme)
    n_rand = min(n_random_anchors, rest.size)
    anchors = np.concatenate(
        [extreme, rng.choice(rest, size=n_rand, replace=False)]
    )
    if bin_lo is None:
        bin_lo = 4.0 * grid.h
    if bin_hi is None:
        bin_hi = grid.domain.diameter / 4.0
    return _oscillation_fit(
        grid.nodes[anchors], v[anchors], grid.nodes, v, bin_lo, bin_hi
    )


@dataclass
class BoundaryHolderReport:
    """Boundary modulus fit of a field against the structural threshold.

    For boundary data of Hölder exponent ``alpha``, the weight inherits
    interior-to-boundary continuity with exponent at least
    ``alpha / (alpha + 2)``; the check passes when the fitted exponent
    clears that threshold minus ``slack``.
    """

    fit: HolderFit
    alpha: float
    threshold: float
    slack: float
    passed: bool


def boundary_holder_check(
    field: ScalarField,
    alpha: float,
    slack: float = 0.05,
    bin_lo: float | None = None,
    bin_hi: float | None = None,
) -> BoundaryHolderReport:
    """Fit the boundary-anchored modulus of ``field`` and test the threshold.

    All boundary hit points serve as anchors, all interior nodes as
    targets, so the fit captures the worst interior-to-boundary
    oscillation at each scale.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"boundary data exponent must be in (0, 1], got {alpha}")
    grid = field.grid
    vals = field.require_hit_values()
    if bin_lo is None:
        bin_lo = 4.0 * grid.h
    if bin_hi is None:
        bin_hi = grid.domain.diameter / 4.0
    fit = _oscillation_fit(
        grid.hit_points, vals, grid.nodes, field.values, bin_lo, bin_hi
    )
    threshold = alpha / (alpha + 2.0)
    passed = (not fit.degenerate) and fit.beta >= threshold - slack
    return BoundaryHolderReport(
        fit=fit, alpha=alpha, threshold=threshold, slack=slack, passed=passed
    )


# ---------------------------------------------------------------------------
# extremum principle and sup-norm chain
# ---------------------------------------------------------------------------


@dataclass
class MinPrincipleReport:
    """Interior minimum of the weight versus its boundary minimum.

    With nonpositive right-hand side the weight cannot dip below its
    boundary data; ``margin = min_w - min_psi`` is allowed a ``-10 h^2``
    discretization budget.  Skipped (``applicable=False``) when the
    right-hand side changes sign.
    """

    applicable: bool
    passed: bool
    margin: float
    min_w: float
    min_psi: float
    budget: float


def min_principle_check(problem: ProblemData, w: ScalarField) -> MinPrincipleReport:
    grid = problem.grid
    budget = -10.0 * grid.h**2
    min_w = float(w.values.min())
    min_psi = float(problem.psi_hits.min())
    margin = min_w - min_psi
    applicable = problem.f_nonpositive
    passed = bool(applicable and margin >= budget)
    return MinPrincipleReport(
        applicable=applicable,
        passed=passed,
        margin=margin,
        min_w=min_w,
        min_psi=min_psi,
        budget=budget,
    )


def abp_exponent(theta: float) -> float:
    """Weight power in the sup-norm chain for the planar problem.

    The chain bounds ``sup w`` by the boundary supremum plus a constant
    times the L^2 norm of ``f * w**kappa`` with
    ``kappa = (n - 1) / (n (1 - theta))`` at ``n = 2``.
    """
    return 1.0 / (2.0 * (1.0 - theta))


def cell_areas(grid: Grid) -> np.ndarray:
    """Per-node quadrature weights clipped at the boundary.

    Full interior cells weigh ``h^2``; cut cells are shrunk by the product
    of mean axis arm fractions, a separable model of the clipped cell.
    """
    fx = 0.5 * (
        np.minimum(grid.arm_frac[:, 0], 1.0) + np.minimum(grid.arm_frac[:, 1], 1.0)
    )
    fy = 0.5 * (
        np.minimum(grid.arm_frac[:, 2], 1.0) + np.minimum(grid.arm_frac[:, 3], 1.0)
    )
    return grid.h**2 * fx * fy


@dataclass
class AbpChainReport:
    """Measured pieces of the sup-norm chain for the weight.

    ``fitted_constant`` is the smallest constant making the chain
    inequality an equality: ``max(0, sup_w - sup_psi) / ||f w^kappa||_L2``,
    zero by convention for (numerically) vanishing right-hand side.
    """

    kappa: float
    sup_w: float
    sup_psi: float
    forcing_norm: float
    fitted_constant: float
    forcing_vanishes: bool

    @property
    def excess(self) -> float:
        return max(0.0, self.sup_w - self.sup_psi)


def abp_chain_report(problem: ProblemData, w: ScalarField) -> AbpChainReport:
    kappa = abp_exponent(problem.theta)
    sup_w = float(np.abs(w.values).max())
    if w.hit_values is not None:
        sup_w = max(sup_w, float(np.abs(w.hit_values).max()))
    sup_psi = float(np.abs(problem.psi_hits).max())
    areas = cell_areas(problem.grid)
    integrand = np.abs(problem.f.values) * np.abs(w.values) ** kappa
    forcing_norm = float(np.sqrt((integrand**2 * areas).sum()))
    scale = max(1.0, sup_w**kappa)
    vanishes = forcing_norm <= 1e-14 * scale
    excess = max(0.0, sup_w - sup_psi)
    fitted = 0.0 if vanishes else excess / forcing_norm
    return AbpChainReport(
        kappa=kappa,
        sup_w=sup_w,
        sup_psi=sup_psi,
        forcing_norm=forcing_norm,
        fitted_constant=fitted,
        forcing_vanishes=vanishes,
    )


# ---------------------------------------------------------------------------
# high-order difference monitor
# ---------------------------------------------------------------------------

_STENCILS_1D = {
    0: (np.array([0]), np.array([1.0])),
    1: (np.arange(-1, 2), np.array([-0.5, 0.0, 0.5])),
    2: (np.arange(-1, 2), np.array([1.0, -2.0, 1.0])),
    3: (np.arange(-2, 3), np.array([-0.5, 1.0, 0.0, -1.0, 0.5])),
    4: (np.arange(-2, 3), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


@dataclass
class SobolevMonitor:
    """Centered high-order difference norms on the full interior lattice box.

    For each order ``m <= max_order``, all mixed partials of that order
    are formed by tensor products of centered one-dimensional stencils on
    nodes whose full ``[-2, 2]^2`` lattice neighborhood exists;
    ``l2_norms[m]`` is the multinomial-weighted L2 norm of the order-m
    differential, ``sup_norms[m]`` the pointwise sup, ``coverage`` the
    covered fraction of nodes.
    """

    orders: list[int]
    l2_norms: dict[int, float]
    sup_norms: dict[int, float]
    coverage: float
    n_covered: int
    partials: dict[tuple[int, int], np.ndarray] = field(repr=False, default_factory=dict)


def _offset_table(grid: Grid, radius: int = 2):
    offs = range(-radius, radius + 1)
    table = {}
    lat = grid.lattice
    for dx in offs:
        for dy in offs:
            ids = np.fromiter(
                (
                    grid.index.get((int(i + dx), int(j + dy)), -1)
                    for i, j in lat
                ),
                dtype=np.int64,
                count=grid.n_nodes,
            )
            table[(dx, dy)] = ids
    covered = np.ones(grid.n_nodes, dtype=bool)
    for ids in table.values():
        covered &= ids >= 0
    return table, covered


def sobolev_monitor(field: ScalarField, max_order: int = 4) -> SobolevMonitor:
    if not 1 <= max_order <= 4:
        raise ValueError("max_order must be between 1 and 4")
    grid = field.grid
    table, covered = _offset_table(grid, radius=2)
    idx = np.where(covered)[0]
    if idx.size == 0:
        raise DegenerateOperatorError(
            "no node has a full [-2,2]^2 lattice neighborhood"
        )
    v = field.values
    h = grid.h

    partials: dict[tuple[int, int], np.ndarray] = {}
    for m in range(1, max_order + 1):
        for a in range(m + 1):
            b = m - a
            ox, wx = _STENCILS_1D[a]
            oy, wy = _STENCILS_1D[b]
            acc = np.zeros(idx.size)
            for i, cx in zip(ox, wx):
                if cx == 0.0:
                    continue
                for j, cy in zip(oy, wy):
                    if cy == 0.0:
                        continue
                    acc += cx * cy * v[table[(int(i), int(j))][idx]]
            partials[(a, b)] = acc / h**m

    areas = cell_areas(grid)[idx]
    l2, sup = {}, {}
    for m in range(1, max_order + 1):
        sq = np.zeros(idx.size)
        mx = 0.0
        for a in range(m + 1):
            arr = partials[(a, m - a)]
            sq += comb(m, a) * arr**2
            mx = max(mx, float(np.abs(arr).max()))
        l2[m] = float(np.sqrt((sq * areas).sum()))
        sup[m] = mx
    return SobolevMonitor(
        orders=list(range(1, max_order + 1)),
        l2_norms=l2,
        sup_norms=sup,
        coverage=float(idx.size / grid.n_nodes),
        n_covered=int(idx.size),
        partials=partials,
    )


# ---------------------------------------------------------------------------
# verification battery
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    """One verification check: name, pass/fail/skip, margin, diagnostics."""

    name: str
    status: str
    margin: float
    details: dict

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "margin": self.margin,
            "details": self.details,
        }


def verify(
    problem: ProblemData,
    u: ScalarField,
    w: ScalarField,
    boundary_alpha: float = 1.0,
    seed: int = 0,
) -> list[CheckResult]:
    """Run the full audit battery on a computed solution pair.

    Checks: weight minimum principle (skipped for sign-changing forcing),
    sup-norm chain with finite fitted constant, interior modulus fit of
    the weight, boundary modulus of the weight against the
    ``alpha/(alpha+2)`` threshold, two-sided quadratic separation of the
    convex component, discrete Hessian positivity, and weight positivity.
    """
    checks: list[CheckResult] = []
    grid = problem.grid

    mp = min_principle_check(problem, w)
    checks.append(
        CheckResult(
            name="min_principle",
            status="pass" if mp.passed else ("skip" if not mp.applicable else "fail"),
            margin=mp.margin - mp.budget,
            details={
                "min_w": mp.min_w,
                "min_psi": mp.min_psi,
                "budget": mp.budget,
                "applicable": mp.applicable,
            },
        )
    )

    abp = abp_chain_report(problem, w)
    abp_ok = np.isfinite(abp.fitted_constant)
    checks.append(
        CheckResult(
            name="abp_chain",
            status="pass" if abp_ok else "fail",
            margin=abp.fitted_constant,
            details={
                "kappa": abp.kappa,
                "sup_w": abp.sup_w,
                "sup_psi": abp.sup_psi,
                "forcing_norm": abp.forcing_norm,
                "fitted_constant": abp.fitted_constant,
                "forcing_vanishes": abp.forcing_vanishes,
            },
        )
    )

    hf = fit_holder_exponent(w, seed=seed)
    hf_ok = (not hf.degenerate) and 0.0 < hf.beta <= _BETA_CAP
    checks.append(
        CheckResult(
            name="interior_holder_w",
            status="pass" if hf_ok else "fail",
            margin=0.0 if hf.degenerate else hf.beta,
            details={
                "beta": None if np.isnan(hf.beta) else hf.beta,
                "raw_slope": None if np.isnan(hf.raw_slope) else hf.raw_slope,
                "r2": None if np.isnan(hf.r2) else hf.r2,
                "n_bins": hf.n_bins,
                "degenerate": hf.degenerate,
            },
        )
    )

    bh = boundary_holder_check(w, alpha=boundary_alpha)
    checks.append(
        CheckResult(
            name="boundary_holder_w",
            status="pass" if bh.passed else "fail",
            margin=(0.0 if bh.fit.degenerate else bh.fit.beta)
            - (bh.threshold - bh.slack),
            details={
                "alpha": bh.alpha,
                "threshold": bh.threshold,
                "beta": None if np.isnan(bh.fit.beta) else bh.fit.beta,
                "r2": None if np.isnan(bh.fit.r2) else bh.fit.r2,
            },
        )
    )

    sep = quadratic_separation(u, seed=seed)
    sep_ok = sep.rho_low > 0.0
    checks.append(
        CheckResult(
            name="quadratic_separation",
            status="pass" if sep_ok else "fail",
            margin=sep.rho_low,
            details={
                "rho_low": sep.rho_low,
                "rho_high": sep.rho_high,
                "n_pairs": sep.n_pairs,
                "worst_gap": sep.worst_gap,
            },
        )
    )

    min_eig = discrete_hessian(u).min_eigenvalue()
    checks.append(
        CheckResult(
            name="hessian_positivity",
            status="pass" if min_eig > 0.0 else "fail",
            margin=float(min_eig),
            details={"min_eigenvalue": float(min_eig)},
        )
    )

    min_w_all = float(w.values.min())
    if w.hit_values is not None:
        min_w_all = min(min_w_all, float(w.hit_values.min()))
    checks.append(
        CheckResult(
            name="w_positivity",
            status="pass" if min_w_all > 0.0 else "fail",
            margin=min_w_all,
            details={"min_w": min_w_all, "grid_h": grid.h},
        )
    )
    return checks
