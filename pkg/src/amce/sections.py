"""Convex sections of discrete solutions and their ellipsoid geometry.

A *section* of a convex function ``u`` at base point ``x`` and height ``h``
is the sublevel set of the supporting-plane gap,

    S(x, h) = { y : u(y) < u(x) + Du(x) . (y - x) + h }.

This module extracts sections from grid fields, fits minimum-volume
enclosing ellipsoids (free or with a pinned center), factors the fit into
a unimodular sliding map in boundary-normal coordinates, measures maximal
interior heights, audits quadratic separation from tangent planes, and
renormalizes maximal sections to unit scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import (
    ConvexityViolationError,
    DegenerateSectionError,
    TooCloseToBoundaryError,
)
from .grid import DIRS, ARM_INTERIOR, ARM_HIT, Grid, ScalarField
from .operators import (
    discrete_hessian,
    local_quadratic_fit,
    value_and_gradient_at,
)

__all__ = [
    "Section",
    "EllipsoidFit",
    "SeparationReport",
    "LocalizationScan",
    "NormalizedSection",
    "extract_section",
    "mvee",
    "fit_john_ellipsoid",
    "maximal_height",
    "quadratic_separation",
    "localization_scan",
    "normalize_section",
]

#: Points closer to the domain boundary than this (relative to the hull
#: scale) are treated as lying *on* the boundary when classifying hull edges.
_BOUNDARY_EDGE_TOL = 1e-7


# ---------------------------------------------------------------------------
# section extraction
# ---------------------------------------------------------------------------


@dataclass
class Section:
    """A sublevel section of a convex grid field.

    ``hull_points`` are the ordered (counter-clockwise) vertices of the
    convex hull of the section sample: member nodes, sub-grid crossing
    points where the section boundary cuts stencil arms, and domain
    boundary points swallowed by the section.  ``boundary_clipped`` is True
    when the section reaches the domain boundary.
    """

    center: np.ndarray
    height: float
    center_value: float
    center_gradient: np.ndarray
    node_ids: np.ndarray
    hull_points: np.ndarray | None
    boundary_clipped: bool
    empty: bool

    @property
    def n_nodes(self) -> int:
        return int(self.node_ids.size)


def _section_values(u: ScalarField, center, center_value, center_gradient, h):
    """Gap values s = u - tangent - h at nodes and at boundary hits."""
    g = u.grid
    sn = u.values - (center_value + (g.nodes - center) @ center_gradient) - h
    sh = (
        u.require_hit_values()
        - (center_value + (g.hit_points - center) @ center_gradient)
        - h
    )
    return sn, sh


def extract_section(
    u: ScalarField,
    x,
    h: float,
    center_value: float | None = None,
    center_gradient=None,
) -> Section:
    """Extract the section of ``u`` at base point ``x`` and height ``h > 0``.

    The base value and gradient are estimated from the grid data unless
    supplied.  The hull is refined below grid resolution: along every
    stencil arm leaving a member node, the exit point where the section
    gap changes sign is located by linear interpolation, and boundary hit
    points interior to the section are included verbatim.
    """
    if h <= 0:
        raise ValueError(f"section height must be positive, got {h}")
    x = np.asarray(x, float)
    grid = u.grid
    if center_value is None or center_gradient is None:
        cv, cg = value_and_gradient_at(u, x)
        center_value = cv if center_value is None else center_value
        center_gradient = cg if center_gradient is None else center_gradient
    center_gradient = np.asarray(center_gradient, float)

    sn, sh = _section_values(u, x, center_value, center_gradient, h)
    inside = sn < 0.0
    node_ids = np.where(inside)[0]
    pts: list[np.ndarray] = [grid.nodes[node_ids]]

    # every boundary hit interior to the section is a hull sample, whether
    # or not its source node is a member (thin boundary slivers)
    hits_in = sh < 0.0
    pts.append(grid.hit_points[hits_in])
    boundary_clipped = bool(hits_in.any())

    base = np.asarray(DIRS, float) * grid.h
    for k in range(len(DIRS)):
        ref = grid.arm_ref[node_ids, k]
        kind = grid.arm_kind[node_ids, k]
        frac = grid.arm_frac[node_ids, k]
        vec = base[k]

        m = kind == ARM_INTERIOR
        if m.any():
            i = node_ids[m]
            s_other = sn[ref[m]]
            crossing = s_other >= 0.0
            ii = i[crossing]
            if ii.size:
                t = sn[ii] / (sn[ii] - s_other[crossing])
                pts.append(grid.nodes[ii] + t[:, None] * vec)

        m = kind == ARM_HIT
        if m.any():
            i = node_ids[m]
            s_hit = sh[ref[m]]
            crossing = s_hit >= 0.0
            ii = i[crossing]
            if ii.size:
                t = sn[ii] / (sn[ii] - s_hit[crossing])
                pts.append(
                    grid.nodes[ii] + (t * frac[m][crossing])[:, None] * vec
                )

    parts = [p for p in pts if p.size]
    cloud = np.concatenate(parts, axis=0) if parts else np.empty((0, 2))
    empty = node_ids.size == 0 and not boundary_clipped
    hull_points = None
    if not empty and cloud.shape[0] >= 3:
        try:
            hull = ConvexHull(cloud)
            hull_points = cloud[hull.vertices]
        except QhullError:
            hull_points = None
    if empty:
        warnings.warn(
            f"section at {x.tolist()} with height {h:g} contains no grid "
            "nodes and touches no boundary point",
            stacklevel=2,
        )
    return Section(
        center=x,
        height=float(h),
        center_value=float(center_value),
        center_gradient=center_gradient,
        node_ids=node_ids,
        hull_points=hull_points,
        boundary_clipped=boundary_clipped,
        empty=empty,
    )


# ---------------------------------------------------------------------------
# minimum-volume enclosing ellipsoid
# ---------------------------------------------------------------------------


def mvee(points, tol: float = 1e-6, max_iters: int = 200000, center=None):
    """Minimum-volume ellipsoid { (y-c)^T M (y-c) <= 1 } enclosing ``points``.

    Frank-Wolfe iteration with away steps on the dual D-optimal design
    problem (plain Frank-Wolfe stalls at O(1/k) on hulls with many
    near-active vertices, e.g. fine polygonal approximations of a circular
    arc), followed by multiplicative weight sweeps that polish the fit to
    round-off on symmetric inputs.  With ``center`` given, the center is
    pinned and only the shape matrix is optimized.

    Returns ``(center, M, iterations, max_violation)`` where
    ``max_violation`` is the largest relative ellipsoid-membership excess
    over the input points (nonpositive means every point is enclosed).
    """
    P = np.asarray(points, float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 2:
        raise DegenerateSectionError(
            f"need at least 2 planar points for an ellipsoid fit, got shape {P.shape}"
        )
    if center is not None:
        Q = (P - np.asarray(center, float)).T  # (2, K)
        dd = 2
    else:
        Q = np.vstack([P.T, np.ones(P.shape[0])])  # (3, K)
        dd = 3
    K = P.shape[0]
    w = np.full(K, 1.0 / K)
    iterations = 0
    try:
        for iterations in range(1, max_iters + 1):
            V = Q @ (w[:, None] * Q.T)
            g = np.einsum("ik,ij,jk->k", Q, np.linalg.inv(V), Q)
            j_add = int(np.argmax(g))
            eps_add = g[j_add] / dd - 1.0
            support = np.flatnonzero(w > 0.0)
            j_drop = int(support[np.argmin(g[support])])
            eps_drop = 1.0 - g[j_drop] / dd
            if max(eps_add, eps_drop) <= tol:
                break
            if eps_add >= eps_drop:
                j, gj = j_add, g[j_add]
                step = (gj - dd) / (dd * (gj - 1.0))
            else:
                # away step: unload an interior-certified support point;
                # clipping at -w_j/(1 - w_j) zeroes its weight exactly
                j, gj = j_drop, g[j_drop]
                if gj <= 1.0:
                    step = -w[j] / (1.0 - w[j])
                else:
                    step = max(
                        (gj - dd) / (dd * (gj - 1.0)), -w[j] / (1.0 - w[j])
                    )
            w *= 1.0 - step
            w[j] += step
        # multiplicative polish: monotone for the design objective and
        # exact-symmetric in the weights, which drives spurious asymmetry
        # of the fit (e.g. a tilt of a symmetric hull) to round-off
        for _ in range(500):
            V = Q @ (w[:, None] * Q.T)
            g = np.einsum("ik,ij,jk->k", Q, np.linalg.inv(V), Q)
            if abs(g.max() / dd - 1.0) <= 1e-14:
                break
            w = w * g / dd
            w /= w.sum()
        V = Q @ (w[:, None] * Q.T)
        if center is None:
            c = P.T @ w
            M = np.linalg.inv(P.T @ (w[:, None] * P) - np.outer(c, c)) / 2.0
        else:
            c = np.asarray(center, float)
            M = np.linalg.inv(V) / 2.0
        g = np.einsum("ik,ij,jk->k", Q, np.linalg.inv(V), Q)
    except np.linalg.LinAlgError as exc:
        raise DegenerateSectionError(
            "ellipsoid fit is singular (collinear or coincident points)"
        ) from exc
    return c, M, iterations, float(g.max() / dd - 1.0)


@dataclass
class EllipsoidFit:
    """Ellipsoid fit of a section hull with its sliding-map factorization.

    The ellipsoid is ``E = { y : (y-center)^T M (y-center) <= 1 }``.  In the
    rotated frame sending ``normal`` to the second axis, the shape matrix
    factors as ``M' = (A^T A) / (h * det-scale)`` with

        A = [[sqrt(p/s), sqrt(p/s) * tau], [0, sqrt(q/s)]],   det A = 1,

    so ``A`` normalizes ``E`` to a disk of radius ``sqrt(h_eff)``; ``tau``
    is the sliding (shear) coefficient along the tangential axis.
    ``k_inner * E ⊂ hull ⊂ k_outer * E`` up to boundary-clipped edges.
    """

    center: np.ndarray
    M: np.ndarray
    volume: float
    rotation: np.ndarray
    tau: float
    A: np.ndarray
    h_eff: float
    k_inner: float
    k_outer: float
    iterations: int
    max_violation: float

    def contains(self, points, scale: float = 1.0) -> np.ndarray:
        z = np.atleast_2d(np.asarray(points, float)) - self.center
        return np.einsum("ki,ij,kj->k", z, self.M, z) <= scale**2


def _normal_rotation(normal) -> np.ndarray:
    """Proper rotation whose columns are (tangent, normal)."""
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    return np.array([[n[1], n[0]], [-n[0], n[1]]])


def _hull_dilations(hull_points, center, M, level=None):
    """Smallest/largest dilations k with k_in*E ⊂ hull ⊂ k_out*E.

    Edges generated by the domain boundary (both endpoints on the zero
    level set, when ``level`` is given) are excluded from the inner
    dilation: a boundary-clipped section legitimately cuts the ellipsoid.
    """
    z = hull_points - center
    quad = np.einsum("ki,ij,kj->k", z, M, z)
    k_outer = float(np.sqrt(quad.max()))

    Minv = np.linalg.inv(M)
    nxt = np.roll(np.arange(len(hull_points)), -1)
    on_boundary = np.zeros(len(hull_points), dtype=bool)
    if level is not None:
        scale = max(np.abs(hull_points).max(), 1.0)
        on_boundary = (
            np.abs(level(hull_points)) < _BOUNDARY_EDGE_TOL * scale
        )
    k_inner = np.inf
    for a in range(len(hull_points)):
        b = nxt[a]
        if on_boundary[a] and on_boundary[b]:
            continue
        e = hull_points[b] - hull_points[a]
        nu = np.array([e[1], -e[0]])
        nn = np.linalg.norm(nu)
        if nn == 0.0:
            continue
        nu /= nn
        dist = nu @ (hull_points[a] - center)
        if dist < 0.0:
            nu, dist = -nu, -dist
        k_edge = dist / np.sqrt(nu @ Minv @ nu)
        k_inner = min(k_inner, k_edge)
    return float(k_inner), k_outer


def fit_john_ellipsoid(
    section: Section,
    center=None,
    normal=None,
    tol: float = 1e-6,
    grid: Grid | None = None,
) -> EllipsoidFit:
    """Fit the minimum-volume enclosing ellipsoid of a section hull.

    ``center=None`` fits center and shape jointly (interior sections);
    passing a center pins it there (boundary localization, where the
    model ellipsoid is centered at the boundary base point).  ``normal``
    fixes the frame for the sliding factorization; default is the second
    coordinate axis.  ``grid`` (or the section's own clipping state) marks
    domain-boundary hull edges so they do not contaminate ``k_inner``.
    """
    if section.hull_points is None:
        raise DegenerateSectionError(
            "section has no usable hull (empty or degenerate point cloud)"
        )
    c, M, iterations, viol = mvee(section.hull_points, tol=tol, center=center)

    R = _normal_rotation(normal if normal is not None else (0.0, 1.0))
    Mr = R.T @ M @ R
    p = Mr[0, 0]
    tau = Mr[0, 1] / p
    q = Mr[1, 1] - Mr[0, 1] ** 2 / p
    if p <= 0.0 or q <= 0.0:
        raise DegenerateSectionError(
            f"ellipsoid shape matrix is not positive definite (p={p:g}, q={q:g})"
        )
    s = np.sqrt(p * q)
    A = np.array([[np.sqrt(p / s), np.sqrt(p / s) * tau], [0.0, np.sqrt(q / s)]])
    h_eff = 1.0 / s
    volume = np.pi / np.sqrt(np.linalg.det(M))

    level = None
    if grid is not None and section.boundary_clipped:
        level = grid.domain.level
    k_inner, k_outer = _hull_dilations(section.hull_points, c, M, level=level)

    return EllipsoidFit(
        center=np.asarray(c, float),
        M=M,
        volume=float(volume),
        rotation=R,
        tau=float(tau),
        A=A,
        h_eff=float(h_eff),
        k_inner=k_inner,
        k_outer=k_outer,
        iterations=iterations,
        max_violation=viol,
    )


# ---------------------------------------------------------------------------
# maximal height
# ---------------------------------------------------------------------------


def maximal_height(
    u: ScalarField,
    y,
    rel_tol: float = 1e-6,
    center_value: float | None = None,
    center_gradient=None,
):
    """Largest height h with the section of ``u`` at interior ``y`` inside the domain.

    A section escapes the domain exactly when some boundary hit point has
    negative section gap, so the escape height of each hit is its tangent
    gap; the maximal height is located by bisection between a contained
    and an escaped height, to relative tolerance ``rel_tol``.

    Returns ``(hbar, touch_point)`` where ``touch_point`` is the boundary
    hit realizing (numerically) the first contact.
    """
    y = np.asarray(y, float)
    grid = u.grid
    if grid.domain.level(y[None, :])[0] >= 0.0:
        raise TooCloseToBoundaryError(
            f"base point {y.tolist()} is not interior to the domain"
        )
    if grid.domain.distance_to_boundary(y[None, :])[0] <= grid.h:
        raise TooCloseToBoundaryError(
            f"base point {y.tolist()} is within one cell of the boundary; "
            "maximal sections are not resolved there"
        )
    if center_value is None or center_gradient is None:
        cv, cg = value_and_gradient_at(u, y)
        center_value = cv if center_value is None else center_value
        center_gradient = cg if center_gradient is None else center_gradient
    center_gradient = np.asarray(center_gradient, float)

    gaps = (
        u.require_hit_values()
        - (center_value + (grid.hit_points - y) @ center_gradient)
    )
    touch = int(np.argmin(gaps))

    def contained(h: float) -> bool:
        return bool((gaps >= h).all())

    lo = 0.0
    hi = max(float(gaps[touch]), np.finfo(float).tiny)
    for _ in range(80):
        if not contained(hi):
            break
        lo = hi
        hi *= 2.0
    for _ in range(200):
        if hi - lo <= rel_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        if contained(mid):
            lo = mid
        else:
            hi = mid
    return float(lo), grid.hit_points[touch]


# ---------------------------------------------------------------------------
# quadratic separation
# ---------------------------------------------------------------------------


@dataclass
class SeparationReport:
    """Quadratic separation of a convex field from its tangent planes.

    Over pairs of boundary anchor points (x, x0) with |x - x0| above the
    separation floor, ``rho_low`` and ``rho_high`` bound the ratio
    (u(x) - u(x0) - Du(x0).(x - x0)) / |x - x0|^2 from below and above.
    """

    rho_low: float
    rho_high: float
    n_anchors: int
    n_pairs: int
    min_separation: float
    worst_gap: float


def quadratic_separation(
    u: ScalarField,
    max_anchors: int = 128,
    min_separation: float | None = None,
    seed: int = 0,
) -> SeparationReport:
    """Audit two-sided quadratic separation over boundary anchor pairs.

    Anchors are boundary hit points (deterministically subsampled).  A
    tangent-plane gap below ``-10 h^2`` at any pair — beyond the honest
    discretization budget — raises :class:`ConvexityViolationError`.
    """
    grid = u.grid
    u.require_hit_values()
    if min_separation is None:
        min_separation = 2.0 * grid.h

    n_hits = grid.n_hits
    if n_hits < 2:
        raise DegenerateSectionError("need at least two boundary hits")
    if n_hits > max_anchors:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n_hits, size=max_anchors, replace=False))
    else:
        idx = np.arange(n_hits)

    pts = grid.hit_points[idx]
    vals = u.hit_values[idx]
    grads = np.empty((idx.size, 2))
    for k, p in enumerate(pts):
        _, grads[k], _ = local_quadratic_fit(u, p)

    diff = pts[None, :, :] - pts[:, None, :]  # x - x0, axis 0 = x0
    dist2 = (diff**2).sum(-1)
    gap = vals[None, :] - vals[:, None] - np.einsum("oxi,oi->ox", diff, grads)

    worst = float(gap.min())
    if worst < -10.0 * grid.h**2:
        bad = np.unravel_index(np.argmin(gap), gap.shape)
        raise ConvexityViolationError(
            f"tangent-plane gap {worst:.3e} at pair "
            f"(x0={pts[bad[0]].tolist()}, x={pts[bad[1]].tolist()}) is below "
            f"the -10 h^2 = {-10 * grid.h ** 2:.3e} discretization budget"
        )

    keep = dist2 >= min_separation**2
    np.fill_diagonal(keep, False)
    if not keep.any():
        raise DegenerateSectionError(
            "no anchor pair exceeds the separation floor; grid too coarse"
        )
    ratios = gap[keep] / dist2[keep]
    return SeparationReport(
        rho_low=float(ratios.min()),
        rho_high=float(ratios.max()),
        n_anchors=int(idx.size),
        n_pairs=int(keep.sum()),
        min_separation=float(min_separation),
        worst_gap=worst,
    )


# ---------------------------------------------------------------------------
# boundary localization scan
# ---------------------------------------------------------------------------


@dataclass
class LocalizationScan:
    """Sections of a convex field at a boundary point across heights.

    Each row records the pinned-center ellipsoid geometry of one section:
    sliding coefficient tau, volume ratio against the model value pi*h,
    and the hull dilation bracket.  ``slide_c0 + slide_c1 * |log h|`` is
    the least-squares fit of |tau| against |log h| over the kept rows.
    """

    x0: np.ndarray
    normal: np.ndarray
    rows: list[dict] = field(default_factory=list)
    slide_c0: float = np.nan
    slide_c1: float = np.nan
    slide_r2: float = np.nan

    def kept_rows(self) -> list[dict]:
        return [r for r in self.rows if not r["skipped"]]


def localization_scan(
    u: ScalarField,
    x0,
    heights,
    min_nodes: int = 12,
    separation_check: bool = True,
    mvee_tol: float = 1e-7,
) -> LocalizationScan:
    """Scan pinned-center section ellipsoids at boundary point ``x0``.

    ``x0`` must lie on (numerically: within round-off of) the domain
    boundary.  Sections with fewer than ``min_nodes`` member nodes are
    skipped with a warning — their hulls are grid noise.  When
    ``separation_check`` is set, a quadratic-separation audit runs first
    and its failure aborts the scan.
    """
    grid = u.grid
    x0 = np.asarray(x0, float)
    if separation_check:
        quadratic_separation(u)

    val, grad = value_and_gradient_at(u, x0)
    normal = grid.domain.inner_normal(x0[None, :])[0]

    scan = LocalizationScan(x0=x0, normal=normal)
    for h in heights:
        sec = extract_section(u, x0, h, center_value=val, center_gradient=grad)
        row = {
            "h": float(h),
            "n_nodes": sec.n_nodes,
            "skipped": False,
            "tau": np.nan,
            "vol_ratio": np.nan,
            "k_inner": np.nan,
            "k_outer": np.nan,
            "norm_A": np.nan,
        }
        if sec.n_nodes < min_nodes or sec.hull_points is None:
            warnings.warn(
                f"section at h={h:g} has {sec.n_nodes} nodes "
                f"(< {min_nodes}); skipping row",
                stacklevel=2,
            )
            row["skipped"] = True
            scan.rows.append(row)
            continue
        fit = fit_john_ellipsoid(
            sec, center=x0, normal=normal, tol=mvee_tol, grid=grid
        )
        row["tau"] = fit.tau
        row["vol_ratio"] = fit.volume / (np.pi * h)
        row["k_inner"] = fit.k_inner
        row["k_outer"] = fit.k_outer
        row["norm_A"] = float(np.linalg.norm(fit.A, 2))
        scan.rows.append(row)

    kept = scan.kept_rows()
    if len(kept) >= 2:
        logs = np.abs(np.log([r["h"] for r in kept]))
        taus = np.abs([r["tau"] for r in kept])
        coeffs, res = np.polyfit(logs, taus, 1, full=True)[:2]
        scan.slide_c1, scan.slide_c0 = float(coeffs[0]), float(coeffs[1])
        ss_tot = float(((taus - taus.mean()) ** 2).sum())
        ss_res = float(res[0]) if res.size else 0.0
        scan.slide_r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return scan


# ---------------------------------------------------------------------------
# normalization of maximal sections
# ---------------------------------------------------------------------------


@dataclass
class NormalizedSection:
    """A maximal section rescaled to unit height and round shape.

    The affine change of variables ``x = origin + T xt`` maps normalized
    coordinates ``xt`` to the original plane; ``values`` on the masked
    ``lattice`` hold  (u(x) - tangent(x)) / hbar,  so the normalized
    section is {values < 1}, contains B(0, c_inner), is contained in
    B(0, c_outer), vanishes at the origin with zero gradient, and — the
    map being unimodular up to the sqrt(hbar) dilation — has the same
    Hessian determinant range as the original section.
    """

    origin: np.ndarray
    T: np.ndarray
    hbar: float
    lattice: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    spacing: float
    c_inner: float
    c_outer: float
    grad_at_center: np.ndarray
    det_range_original: tuple[float, float]
    det_range_normalized: tuple[float, float]
    fit: EllipsoidFit


def _resample_quadratic_mls(u: ScalarField, points, radius_factor: float = 3.5):
    """Resample a grid field at arbitrary points by moving least squares.

    Each point gets the constant term of a quadratic fitted to nearby node
    and boundary values under the smooth weight ``(1 - (d/r)^2)^2``.  The
    smooth weight makes the resampled value a C^1 function of the point,
    so finite differences of the result converge; interpolating the
    scattered data piecewise instead leaves O(1) noise in the second
    differences.  Points outside the domain, or with fewer than ten
    weighted neighbours, resample to NaN.
    """
    grid = u.grid
    pts = np.asarray(points, dtype=float)
    data_pts = np.vstack([grid.nodes, grid.hit_points])
    data_val = np.concatenate([u.values, u.require_hit_values()])
    tree = cKDTree(data_pts)
    out = np.full(len(pts), np.nan)
    inside = grid.domain.contains(pts)
    where = np.flatnonzero(inside)
    r = radius_factor * grid.h
    neighbours = tree.query_ball_point(pts[inside], r)
    for k, ids in enumerate(neighbours):
        ids = np.asarray(ids, dtype=int)
        if len(ids) < 10:
            continue
        p = pts[where[k]]
        d = (data_pts[ids] - p) / grid.h
        rho2 = (d * d).sum(axis=1) / radius_factor**2
        wts = np.maximum(1.0 - rho2, 0.0) ** 2
        keep = wts > 0.0
        if keep.sum() < 10:
            continue
        d, wts, vals = d[keep], wts[keep], data_val[ids[keep]]
        basis = np.stack(
            [
                np.ones(len(d)),
                d[:, 0],
                d[:, 1],
                0.5 * d[:, 0] ** 2,
                d[:, 0] * d[:, 1],
                0.5 * d[:, 1] ** 2,
            ],
            axis=1,
        )
        sw = np.sqrt(wts)
        coef, *_ = np.linalg.lstsq(basis * sw[:, None], vals * sw, rcond=None)
        out[where[k]] = coef[0]
    return out


def _masked_fd(values2d, mask2d, spacing):
    """Centered first/second differences where the 5-point stencil is valid."""
    ok = (
        mask2d[1:-1, 1:-1]
        & mask2d[2:, 1:-1]
        & mask2d[:-2, 1:-1]
        & mask2d[1:-1, 2:]
        & mask2d[1:-1, :-2]
        & mask2d[2:, 2:]
        & mask2d[:-2, :-2]
        & mask2d[2:, :-2]
        & mask2d[:-2, 2:]
    )
    v = values2d
    uxx = (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / spacing**2
    uyy = (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / spacing**2
    uxy = (v[2:, 2:] + v[:-2, :-2] - v[2:, :-2] - v[:-2, 2:]) / (4 * spacing**2)
    det = uxx * uyy - uxy**2
    return det, ok


def normalize_section(
    u: ScalarField,
    y,
    target_n: int = 65,
    rel_tol: float = 1e-6,
) -> NormalizedSection:
    """Renormalize the maximal section of ``u`` at interior point ``y``.

    Fits the free minimum-volume ellipsoid of the maximal section, splits
    off the sqrt(hbar) dilation from the unimodular shape factor, and
    resamples  (u - tangent plane)/hbar  on a ``target_n``-squared lattice
    in normalized coordinates via smoothly weighted local quadratic fits
    of the grid data.  Reports the inner/outer ball radii of the
    normalized section and the Hessian-determinant range before and after
    (equal up to resampling error, since the shape factor has unit
    determinant).
    """
    y = np.asarray(y, float)
    grid = u.grid
    hbar, touch = maximal_height(u, y, rel_tol=rel_tol)
    val, grad = value_and_gradient_at(u, y)
    sec = extract_section(
        u, y, hbar, center_value=val, center_gradient=grad
    )
    if sec.hull_points is None:
        raise DegenerateSectionError(
            f"maximal section at {y.tolist()} has a degenerate hull"
        )
    normal = grid.domain.inner_normal(touch[None, :])[0]
    fit = fit_john_ellipsoid(sec, center=None, normal=normal, grid=grid)

    # x = y + sqrt(hbar) R A^-1 xt  maps normalized coords to the plane;
    # offsets of the fitted center from y are O(h) for maximal sections
    # and are absorbed by pinning the map at y itself
    RAinv = fit.rotation @ np.linalg.inv(fit.A)
    T = np.sqrt(hbar) * RAinv
    Tinv = np.linalg.inv(T)

    hull_n = (sec.hull_points - y) @ Tinv.T
    c_outer = float(np.linalg.norm(hull_n, axis=1).max())
    c_inner, _ = _hull_dilations(hull_n, np.zeros(2), np.eye(2))

    half = 1.02 * c_outer
    axis = np.linspace(-half, half, target_n)
    spacing = float(axis[1] - axis[0])
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    lattice = np.column_stack([X.ravel(), Y.ravel()])
    phys = y + lattice @ T.T

    raw = _resample_quadratic_mls(u, phys)

    gap = raw - (val + (phys - y) @ grad)
    values = gap / hbar
    mask = np.isfinite(values) & (values < 1.0 + 1e-9)
    values = np.where(mask, values, np.nan)

    v2 = values.reshape(target_n, target_n)
    m2 = mask.reshape(target_n, target_n)
    det_n, ok = _masked_fd(v2, m2, spacing)
    # compare determinant ranges on the well-interior sublevel: near the
    # section edge the resampling stencil straddles exterior data and its
    # second differences are interpolation noise, on both routes
    ok &= np.nan_to_num(v2[1:-1, 1:-1], nan=np.inf) < 0.9
    det_norm = (
        (float(np.nanmin(det_n[ok])), float(np.nanmax(det_n[ok])))
        if ok.any()
        else (np.nan, np.nan)
    )

    full = grid.full_stencil_mask()
    sel = np.zeros(grid.n_nodes, dtype=bool)
    sel[sec.node_ids] = True
    sel &= full
    gap_nodes = u.values - (val + (grid.nodes - y) @ grad)
    sel &= gap_nodes < 0.9 * hbar
    if sel.any():
        H = discrete_hessian(u)
        det_o = H.det()[sel]
        det_orig = (float(det_o.min()), float(det_o.max()))
    else:
        det_orig = (np.nan, np.nan)

    ic = target_n // 2
    if m2[ic - 1 : ic + 2, ic - 1 : ic + 2].all():
        gx = (v2[ic + 1, ic] - v2[ic - 1, ic]) / (2 * spacing)
        gy = (v2[ic, ic + 1] - v2[ic, ic - 1]) / (2 * spacing)
        grad0 = np.array([gx, gy])
    else:
        grad0 = np.array([np.nan, np.nan])

    return NormalizedSection(
        origin=y,
        T=T,
        hbar=hbar,
        lattice=lattice,
        values=values,
        mask=mask,
        spacing=spacing,
        c_inner=float(c_inner),
        c_outer=c_outer,
        grad_at_center=grad0,
        det_range_original=det_orig,
        det_range_normalized=det_norm,
        fit=fit,
    )
