"""Geometry diagnostics and independent 1-D reference solutions.

Level-set extraction works on the P1 interpolant exactly: per triangle the
sublevel region of a linear function is a polygon whose area and boundary
segment have closed forms.  Everything downstream (threshold searches,
interface polylines, convexity scores) shares these routines so the
numbers agree with each other by construction.

The radial oracle is a deliberately plain finite-volume solver for the
radially symmetric problems; it exists to cross-check the 2-D pipeline
and is validated against closed forms in the test suite.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateProblemError, GeometryError
from .poisson import ScalarField, gradient


def sublevel_areas(mesh, values, t):
    """Exact per-triangle area of {P1 interpolant < t}, shape (nt,)."""
    v = np.sort(np.asarray(values, dtype=float)[mesh.triangles], axis=1)
    v1, v2, v3 = v[:, 0], v[:, 1], v[:, 2]
    A = mesh.areas
    out = np.zeros(mesh.n_triangles)
    # Rising through the low vertex: a corner triangle similar to the full one.
    lo = (t > v1) & (t <= v2)
    if np.any(lo):
        num = (t - v1[lo]) ** 2
        out[lo] = A[lo] * num / ((v2[lo] - v1[lo]) * (v3[lo] - v1[lo]))
    # Above the middle vertex: complement of the corner at the high vertex.
    hi = (t > v2) & (t < v3)
    if np.any(hi):
        num = (v3[hi] - t) ** 2
        out[hi] = A[hi] * (1.0 - num / ((v3[hi] - v1[hi]) * (v3[hi] - v2[hi])))
    out[t >= v3] = A[t >= v3]
    return out


def sublevel_volume(mesh, values, t):
    """Exact area of {P1 interpolant < t} over the whole mesh."""
    return float(sublevel_areas(mesh, values, t).sum())


@dataclass
class LevelSetGeometry:
    """Interface of {field < threshold}: exact P1 segments plus measures."""

    mesh: object
    values: np.ndarray
    threshold: float
    segments: np.ndarray  # (k, 4): x1, y1, x2, y2
    segment_triangles: np.ndarray  # (k,)
    volume: float
    perimeter: float
    tri_areas: np.ndarray = field(repr=False, default=None)  # clipped area per triangle


def level_set(u, s):
    """Interface geometry of the sublevel set {u < s} of a P1 field."""
    mesh = u.mesh
    vals = u.values
    s = float(s)
    tri = mesh.triangles
    d = vals[tri] - s
    pts = mesh.vertices[tri]  # (nt, 3, 2)

    segs = []
    seg_tri = []
    nz = np.count_nonzero(d == 0.0, axis=1)
    straddle = (d.min(axis=1) < 0.0) & (d.max(axis=1) > 0.0)

    # Regular case: no vertex exactly on the level, two crossed edges.
    regular = np.nonzero((nz == 0) & straddle)[0]
    if regular.size:
        dd = d[regular]
        pp = pts[regular]
        cross_pts = np.full((regular.size, 2, 2), np.nan)
        fill = np.zeros(regular.size, dtype=int)
        for a, b in ((0, 1), (1, 2), (2, 0)):
            mask = dd[:, a] * dd[:, b] < 0.0
            tpar = dd[mask, a] / (dd[mask, a] - dd[mask, b])
            pt = pp[mask, a] + tpar[:, None] * (pp[mask, b] - pp[mask, a])
            rows = np.nonzero(mask)[0]
            for r, q in zip(rows, pt):
                cross_pts[r, fill[r]] = q
                fill[r] += 1
        segs.append(cross_pts.reshape(regular.size, 4))
        seg_tri.append(regular)

    # Degenerate cases: some vertex sits exactly on the level.
    special = np.nonzero((nz > 0) & (nz < 3))[0]
    for k in special:
        dk = d[k]
        pk = pts[k]
        zero = np.nonzero(dk == 0.0)[0]
        if zero.size == 1:
            i = zero[0]
            a, b = [j for j in range(3) if j != i]
            if dk[a] * dk[b] < 0.0:
                tpar = dk[a] / (dk[a] - dk[b])
                q = pk[a] + tpar * (pk[b] - pk[a])
                segs.append(np.array([[pk[i, 0], pk[i, 1], q[0], q[1]]]))
                seg_tri.append(np.array([k]))
        elif zero.size == 2:
            other = [j for j in range(3) if j not in zero][0]
            # Emit the on-level edge from the triangle on the positive side
            # only, so shared edges appear once in the polyline.
            if dk[other] > 0.0:
                a, b = zero
                segs.append(np.array([[pk[a, 0], pk[a, 1], pk[b, 0], pk[b, 1]]]))
                seg_tri.append(np.array([k]))

    if segs:
        segments = np.concatenate(segs)
        seg_tri = np.concatenate(seg_tri)
        order = np.argsort(seg_tri, kind="stable")
        segments = segments[order]
        seg_tri = seg_tri[order]
    else:
        segments = np.zeros((0, 4))
        seg_tri = np.zeros(0, dtype=int)

    areas = sublevel_areas(mesh, vals, s)
    per = float(np.hypot(segments[:, 2] - segments[:, 0], segments[:, 3] - segments[:, 1]).sum())
    return LevelSetGeometry(
        mesh=mesh,
        values=vals,
        threshold=s,
        segments=segments,
        segment_triangles=seg_tri,
        volume=float(areas.sum()),
        perimeter=per,
        tri_areas=areas,
    )


def segment_distances(points, segments, chunk=2048):
    """Distance from each point to the nearest of the given segments.

    ``segments`` is an (k, 4) array of (x1, y1, x2, y2) rows, as produced
    by level_set.  Points are processed in chunks to bound the memory of
    the pairwise computation.
    """
    points = np.asarray(points, dtype=float)
    segments = np.asarray(segments, dtype=float)
    if segments.size == 0:
        return np.full(points.shape[0], np.inf)
    a = segments[:, :2]
    ab = segments[:, 2:] - a
    ab_sq = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk, None, :]
        t = np.clip(np.einsum("pkj,kj->pk", p - a, ab) / ab_sq, 0.0, 1.0)
        proj = a + t[:, :, None] * ab
        diff = p - proj
        out[start:start + chunk] = np.sqrt(
            np.einsum("pkj,pkj->pk", diff, diff).min(axis=1)
        )
    return out


def _component_hull_area(points):
    try:
        return float(ConvexHull(points).volume)
    except (QhullError, ValueError):
        return 0.0


def convexity_score(geom):
    """How convex the sublevel set is: area over convex-hull area.

    Returns (overall_score, per_component_scores); components are found by
    flood fill over edge-adjacent triangles that meet the set, and scores
    are sorted by decreasing component area.  Degenerate (measure-zero
    hull) components score 1.
    """
    mesh = geom.mesh
    areas = geom.tri_areas
    if areas is None:
        areas = sublevel_areas(mesh, geom.values, geom.threshold)
    inside = np.nonzero(areas > 0.0)[0]
    if inside.size == 0:
        return 1.0, []

    # Adjacency graph of the triangles meeting the set.
    tri = mesh.triangles[inside]
    edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    key = und[:, 0] * mesh.n_vertices + und[:, 1]
    owner = np.tile(np.arange(inside.size), 3)
    order = np.argsort(key, kind="stable")
    sk, so = key[order], owner[order]
    same = sk[1:] == sk[:-1]
    rows, cols = so[:-1][same], so[1:][same]
    graph = coo_matrix(
        (np.ones(rows.size), (rows, cols)), shape=(inside.size, inside.size)
    )
    ncomp, labels = connected_components(graph, directed=False)

    # Clip-polygon vertex collection per triangle: corners below the level
    # plus interface crossing points.
    d = geom.values[mesh.triangles[inside]] - geom.threshold
    corner_pts = mesh.vertices[mesh.triangles[inside]]
    seg_by_tri = {}
    for seg, t in zip(geom.segments, geom.segment_triangles):
        seg_by_tri.setdefault(int(t), []).append(seg)

    comp_area = np.zeros(ncomp)
    comp_pts = [[] for _ in range(ncomp)]
    for local, t_global in enumerate(inside):
        lab = labels[local]
        comp_area[lab] += areas[t_global]
        below = corner_pts[local][d[local] <= 0.0]
        if below.size:
            comp_pts[lab].append(below)
        for seg in seg_by_tri.get(int(t_global), ()):
            comp_pts[lab].append(seg.reshape(2, 2))

    per_component = []
    for c in range(ncomp):
        pts = np.concatenate(comp_pts[c]) if comp_pts[c] else np.zeros((0, 2))
        hull = _component_hull_area(pts)
        score = 1.0 if hull <= comp_area[c] else comp_area[c] / hull
        per_component.append((float(comp_area[c]), float(score)))
    per_component.sort(key=lambda t: -t[0])

    all_pts = np.concatenate([np.concatenate(p) for p in comp_pts if p])
    hull_all = _component_hull_area(all_pts)
    total = float(comp_area.sum())
    overall = 1.0 if hull_all <= total else total / hull_all
    return float(overall), [s for _, s in per_component]


def regularity_integral(u, q):
    """Integral of 1 / (|grad u| * log^q(max(1/|grad u|, e))) over the mesh.

    Triangles with exactly zero gradient are excluded; their total area is
    returned alongside the value as (value, excluded_area).
    """
    mesh = u.mesh
    g = gradient(u)
    mag = np.hypot(g[:, 0], g[:, 1])
    zero = mag == 0.0
    mag_safe = np.where(zero, 1.0, mag)
    logs = np.log(np.maximum(1.0 / mag_safe, math.e))
    integrand = 1.0 / (mag_safe * logs**q)
    value = float(np.dot(mesh.areas[~zero], integrand[~zero]))
    return value, float(mesh.areas[zero].sum())


def annulus_exact_state(points):
    """Reference state on the annulus 1 < |x| < 2 with unit source.

    u(r) = (1 - r^2)/4 + 3 ln(r) / (4 ln 2); vanishes at both radii.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    u = 0.25 * (1.0 - r**2) + 3.0 * np.log(r) / (4.0 * math.log(2.0))
    return u if np.ndim(points) == 2 else float(u[0])


def annulus_exact_gradient(points):
    """Gradient of the annulus reference state; zero at r = sqrt(3/(2 ln 2))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(r == 0.0):
        raise GeometryError("gradient undefined at the origin")
    mag = 0.5 * (-r + 3.0 / (2.0 * math.log(2.0) * r))
    grad = (mag / r)[:, None] * pts
    return grad if np.ndim(points) == 2 else grad[0]


@dataclass
class RadialSolution:
    """Radial profile from the 1-D finite-volume reference solver."""

    r: np.ndarray
    u: np.ndarray
    f: np.ndarray
    interface_radii: list
    lam: float = None
    cost: float = None
    meta: dict = field(default_factory=dict)


def _piecewise_eval(breaks, levels, r):
    """Piecewise-constant f on [0, inf): levels[i] on [breaks[i], breaks[i+1])."""
    idx = np.searchsorted(breaks, r, side="right") - 1
    idx = np.clip(idx, 0, len(levels) - 1)
    return np.asarray(levels, dtype=float)[idx]


def _cum_source(breaks, levels, x):
    """Integral of f(s) * s over [0, x] for piecewise-constant f, vectorized."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    edges = list(breaks) + [np.inf]
    for p, f_p in enumerate(levels):
        lo, hi = edges[p], edges[p + 1]
        seg = np.clip(x, lo, hi)
        out += f_p * 0.5 * (seg * seg - lo * lo)
    return out


def _radial_solve(breaks, levels, r_lo, r_hi, n):
    """Solve -(r u')' = r f on (r_lo, r_hi), u = 0 at Dirichlet ends.

    With r_lo = 0 the natural condition r u' -> 0 applies at the centre.
    Finite volumes on a uniform grid; f piecewise constant with the given
    breakpoints, integrated exactly cell by cell.
    """
    r = np.linspace(r_lo, r_hi, n + 1)
    dr = (r_hi - r_lo) / n
    half = r[:-1] + 0.5 * dr  # r_{i+1/2}, i = 0..n-1

    if r_lo == 0.0:
        unknowns = np.arange(0, n)  # u_n = 0; natural r u' -> 0 at the centre
    else:
        unknowns = np.arange(1, n)  # u_0 = u_n = 0
    m = unknowns.size
    wl = np.where(unknowns > 0, half[np.maximum(unknowns - 1, 0)] / dr, 0.0)
    wr = half[unknowns] / dr
    a = np.where(unknowns > 0, r[unknowns] - 0.5 * dr, r_lo)
    b = r[unknowns] + 0.5 * dr
    rhs = _cum_source(breaks, levels, b) - _cum_source(breaks, levels, a)
    ab = np.zeros((3, m))
    ab[0, 1:] = -wr[:-1]
    ab[1] = wl + wr
    ab[2, :-1] = -wl[1:]
    sol = sla.solve_banded((1, 1), ab, rhs)
    u = np.zeros(n + 1)
    u[unknowns] = sol
    f_nodes = _piecewise_eval(breaks, levels, np.minimum(r + 1e-14, r_hi))
    return r, u, f_nodes


def _radial_cost_tracking(r, u, u0):
    return float(np.trapezoid(2.0 * np.pi * (u - u0) ** 2 * r, r))


def _radial_cost_compliance(r, u, f):
    return float(np.trapezoid(2.0 * np.pi * f * u * r, r))


def radial_oracle(kind, n=20000, **params):
    """Independent radially symmetric reference solutions.

    Kinds
    -----
    poisson-disk : radius, f (constant) -> profile
    poisson-annulus : r_inner, r_outer, f -> profile
    compliance-disk : radius, lower, upper, mass, n_candidates
        Enumerates single-interface bang-bang layouts (both orientations),
        keeps mass-feasible ones (mass >= m), returns the cost minimiser.
    tracking-disk : radius, u0, lower, upper, mass, n_candidates
        Enumerates annular bang-bang layouts f = beta on (r1, r2) with
        mass <= m, returns the tracking-cost minimiser.
    """
    if n < 10000:
        raise ValueError("the oracle is meant to be run dense (n >= 10000)")
    if kind == "poisson-disk":
        R = float(params.get("radius", 1.0))
        fval = float(params.get("f", 1.0))
        r, u, f = _radial_solve([0.0], [fval], 0.0, R, n)
        return RadialSolution(r, u, f, [])
    if kind == "poisson-annulus":
        a = float(params.get("r_inner", 1.0))
        b = float(params.get("r_outer", 2.0))
        fval = float(params.get("f", 1.0))
        r, u, f = _radial_solve([0.0], [fval], a, b, n)
        return RadialSolution(r, u, f, [])
    if kind == "compliance-disk":
        R = float(params.get("radius", 1.0))
        alpha = float(params["lower"])
        beta = float(params["upper"])
        m = float(params["mass"])
        ncand = int(params.get("n_candidates", 2000))
        area = math.pi * R * R
        if not alpha * area < m < beta * area:
            raise DegenerateProblemError("mass target incompatible with the box bounds")
        best = None
        for rc in np.linspace(0.0, R, ncand + 1)[1:-1]:
            for levels in ([beta, alpha], [alpha, beta]):
                mass = math.pi * (
                    levels[0] * rc * rc + levels[1] * (R * R - rc * rc)
                )
                if mass < m - 1e-12 * max(1.0, m):
                    continue
                r, u, f = _radial_solve([0.0, rc], levels, 0.0, R, n)
                cost = _radial_cost_compliance(r, u, f)
                if best is None or cost < best[0]:
                    lam = float(np.interp(rc, r, u))
                    best = (cost, rc, levels, r, u, f, lam)
        cost, rc, levels, r, u, f, lam = best
        return RadialSolution(
            r, u, f, [rc], lam=lam, cost=cost, meta={"levels": levels, "mass_target": m}
        )
    if kind == "tracking-disk":
        R = float(params.get("radius", 1.0))
        u0 = float(params["u0"])
        alpha = float(params["lower"])
        beta = float(params["upper"])
        m = float(params["mass"])
        ncand = int(params.get("n_candidates", 120))
        grid = np.linspace(0.0, R, ncand + 1)
        area = math.pi * R * R
        best = None
        for i, r1 in enumerate(grid[:-1]):
            for r2 in grid[i + 1 :]:
                mass = alpha * area + (beta - alpha) * math.pi * (r2 * r2 - r1 * r1)
                if mass > m + 1e-12 * max(1.0, m):
                    continue
                breaks = [0.0, r1, r2]
                levels = [alpha, beta, alpha]
                r, u, f = _radial_solve(breaks, levels, 0.0, R, n)
                cost = _radial_cost_tracking(r, u, u0)
                if best is None or cost < best[0]:
                    best = (cost, r1, r2, r, u, f)
        cost, r1, r2, r, u, f = best
        return RadialSolution(
            r, u, f, [r1, r2], cost=cost, meta={"mass_target": m}
        )
    raise ValueError(f"unknown radial oracle kind: {kind!r}")
