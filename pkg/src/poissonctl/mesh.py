"""Conforming P1 triangle meshes on disk-like domains.

Generation strategy: sample each boundary circle uniformly at the target
edge length, fill the interior with a hexagonal lattice kept clear of the
boundaries, triangulate everything with Delaunay, and discard triangles
whose centroid falls inside a hole.  The boundary is then recovered
topologically (edges incident to exactly one triangle), which makes the
validity invariants hold by construction instead of by trust in floating
point predicates.

The ASCII mesh format is::

    nv nt
    x y b          (nv lines, b = 1 on the boundary)
    i j k          (nt lines, 0-based vertex indices, counter-clockwise)

Floats are written with 17 significant digits so save -> load -> save is
byte identical.
"""

import math

import numpy as np
from scipy.spatial import Delaunay

from .errors import CapacityError, GeometryError, MeshFormatError

# Hard cap on generated points; beyond this the dense per-atom point
# location and the O(n log n) assembly stages stop being desk-scale.
_MAX_POINTS = 3_000_000

# Interior lattice points closer than this (in units of h) to a boundary
# circle are dropped, leaving a clean transition belt for Delaunay.
_BOUNDARY_CLEARANCE = 0.7


class MeshQuality:
    """Scalar quality summary of a mesh (angles in degrees)."""

    def __init__(self, min_angle, max_angle, nonobtuse_fraction, n_triangles):
        self.min_angle = min_angle
        self.max_angle = max_angle
        self.nonobtuse_fraction = nonobtuse_fraction
        self.n_triangles = n_triangles

    def __repr__(self):
        return (
            f"MeshQuality(min_angle={self.min_angle:.3f}, max_angle={self.max_angle:.3f}, "
            f"nonobtuse_fraction={self.nonobtuse_fraction:.4f}, n_triangles={self.n_triangles})"
        )


class Mesh:
    """Immutable conforming triangle mesh.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array
        Counter-clockwise vertex indices.
    boundary : (nv,) bool array
        True exactly for vertices that lie on a boundary edge.
    h : float
        Nominal edge length (generation target; median edge length for
        meshes loaded from file).
    areas : (nt,) float array
    grads : (nt, 3, 2) float array
        Gradients of the three local hat functions per triangle.
    """

    def __init__(self, vertices, triangles, boundary, h):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary = np.ascontiguousarray(boundary, dtype=bool)
        self.h = float(h)
        self._fem_cache = {}
        self._build()
        self._validate()

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def area(self):
        """Total mesh area (sum of triangle areas)."""
        return float(self.areas.sum())

    def _build(self):
        v = self.vertices
        t = self.triangles
        p1 = v[t[:, 0]]
        p2 = v[t[:, 1]]
        p3 = v[t[:, 2]]
        e1 = p2 - p1
        e2 = p3 - p1
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        self.signed_areas = signed
        self.areas = signed.copy()
        # Gradients of the barycentric hat functions: rotate the opposite
        # edge by 90 degrees and scale with twice the area.
        grads = np.empty((t.shape[0], 3, 2))
        twoA = (2.0 * signed)[:, None]
        grads[:, 0, 0] = p2[:, 1] - p3[:, 1]
        grads[:, 0, 1] = p3[:, 0] - p2[:, 0]
        grads[:, 1, 0] = p3[:, 1] - p1[:, 1]
        grads[:, 1, 1] = p1[:, 0] - p3[:, 0]
        grads[:, 2, 0] = p1[:, 1] - p2[:, 1]
        grads[:, 2, 1] = p2[:, 0] - p1[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            grads /= twoA[:, :, None]
        self.grads = grads

    def _edge_counts(self):
        """Undirected edges with incidence counts, plus directed edge keys."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und = np.sort(edges, axis=1)
        key = und[:, 0] * self.n_vertices + und[:, 1]
        uniq, counts = np.unique(key, return_counts=True)
        return edges, key, uniq, counts

    def _validate(self):
        nv = self.n_vertices
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshFormatError("vertices must be an (nv, 2) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshFormatError("triangles must be an (nt, 3) array")
        if self.boundary.shape != (nv,):
            raise MeshFormatError("boundary flags must have one entry per vertex")
        if self.n_triangles == 0:
            raise MeshFormatError("mesh has no triangles")
        t = self.triangles
        if t.min() < 0 or t.max() >= nv:
            raise MeshFormatError("triangle vertex index out of range")
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmax(self.signed_areas <= 0.0))
            raise MeshFormatError(
                f"triangle {bad} has non-positive area (orientation must be counter-clockwise)"
            )
        # No duplicated vertex coordinates (would produce zero-area fans).
        order = np.lexsort((self.vertices[:, 1], self.vertices[:, 0]))
        sv = self.vertices[order]
        dup = np.all(sv[1:] == sv[:-1], axis=1)
        if np.any(dup):
            raise MeshFormatError("duplicate vertex coordinates")
        used = np.zeros(nv, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise MeshFormatError(f"vertex {int(np.argmin(used))} belongs to no triangle")
        edges, key, uniq, counts = self._edge_counts()
        if counts.max() > 2:
            raise MeshFormatError("an edge is shared by more than two triangles")
        # Directed edges must be unique: two triangles sharing an edge
        # traverse it in opposite directions when both are CCW.
        dkey = edges[:, 0] * nv + edges[:, 1]
        if np.unique(dkey).size != dkey.size:
            raise MeshFormatError("two triangles traverse an edge in the same direction")
        boundary_edges = self._boundary_edges()
        flags = np.zeros(nv, dtype=bool)
        flags[boundary_edges.ravel()] = True
        if not np.array_equal(flags, self.boundary):
            raise MeshFormatError("boundary flags do not match the topological boundary")
        # Every boundary vertex must have exactly two incident boundary
        # edges, i.e. the boundary is a disjoint union of closed loops.
        deg = np.zeros(nv, dtype=np.int64)
        np.add.at(deg, boundary_edges.ravel(), 1)
        if np.any(deg[flags] != 2):
            bad = int(np.where(flags & (deg != 2))[0][0])
            raise MeshFormatError(f"open boundary loop at vertex {bad}")

    def _boundary_edges(self):
        """Directed boundary edges (incident to exactly one triangle)."""
        t = self.triangles
        edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        und = np.sort(edges, axis=1)
        key = und[:, 0] * self.n_vertices + und[:, 1]
        order = np.argsort(key, kind="stable")
        sk = key[order]
        is_first = np.ones(sk.size, dtype=bool)
        is_first[1:] = sk[1:] != sk[:-1]
        # count per unique key
        idx = np.cumsum(is_first) - 1
        counts = np.bincount(idx)
        single = counts[idx] == 1
        mask = np.zeros(key.size, dtype=bool)
        mask[order] = single
        return edges[mask]

    def boundary_loops(self):
        """Boundary loops as lists of vertex indices (each loop closed implicitly)."""
        edges = self._boundary_edges()
        nxt = {}
        for a, b in edges:
            nxt[int(a)] = int(b)
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt[start]
            while cur != start:
                loop.append(cur)
                seen.add(cur)
                cur = nxt[cur]
            loops.append(loop)
        return loops

    def edge_lengths(self):
        t = self.triangles
        v = self.vertices
        out = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            d = v[t[:, a]] - v[t[:, b]]
            out.append(np.hypot(d[:, 0], d[:, 1]))
        return np.concatenate(out)

    def locate(self, points, tol=1e-12):
        """Containing triangle and barycentric coordinates for each point.

        Returns (tri_index, bary) with bary of shape (n, 3).  Points on
        shared edges resolve to the lowest triangle index.  Raises
        GeometryError for points outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tri = np.empty(pts.shape[0], dtype=np.int64)
        bary = np.empty((pts.shape[0], 3))
        v = self.vertices
        t = self.triangles
        p1 = v[t[:, 0]]
        d21 = v[t[:, 1]] - p1
        d31 = v[t[:, 2]] - p1
        det = d21[:, 0] * d31[:, 1] - d21[:, 1] * d31[:, 0]
        for i, p in enumerate(pts):
            r = p - p1
            l2 = (r[:, 0] * d31[:, 1] - r[:, 1] * d31[:, 0]) / det
            l3 = (d21[:, 0] * r[:, 1] - d21[:, 1] * r[:, 0]) / det
            l1 = 1.0 - l2 - l3
            ok = (l1 >= -tol) & (l2 >= -tol) & (l3 >= -tol)
            hits = np.nonzero(ok)[0]
            if hits.size == 0:
                raise GeometryError(f"point ({p[0]:.6g}, {p[1]:.6g}) lies outside the mesh")
            k = int(hits[0])
            lam = np.array([l1[k], l2[k], l3[k]])
            lam = np.clip(lam, 0.0, None)
            lam /= lam.sum()
            tri[i] = k
            bary[i] = lam
        return tri, bary


def quality(mesh):
    """Angle statistics of a mesh."""
    v = mesh.vertices
    t = mesh.triangles
    ang = np.empty((mesh.n_triangles, 3))
    for k, (i, j, l) in enumerate(((0, 1, 2), (1, 2, 0), (2, 0, 1))):
        a = v[t[:, j]] - v[t[:, i]]
        b = v[t[:, l]] - v[t[:, i]]
        dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        ang[:, k] = np.degrees(np.arctan2(np.abs(cross), dot))
    return MeshQuality(
        min_angle=float(ang.min()),
        max_angle=float(ang.max()),
        nonobtuse_fraction=float(np.mean(ang.max(axis=1) <= 90.0 + 1e-12)),
        n_triangles=mesh.n_triangles,
    )


def _circle_points(center, radius, h):
    """Evenly spaced points on a circle; the count is a multiple of 4.

    A multiple of 4 keeps the sampled polygon symmetric under both axis
    reflections, so odd integrands cancel to rounding error.
    """
    n = max(8, 4 * int(math.ceil(0.5 * math.pi * radius / h)))
    th = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])


def _hex_lattice(extent, h):
    """Hexagonal lattice covering [-extent, extent]^2, symmetric in x and y."""
    dy = 0.5 * math.sqrt(3.0) * h
    nrow = int(math.floor(extent / dy))
    ncol = int(math.floor(extent / h)) + 1
    rows = []
    for j in range(-nrow, nrow + 1):
        if j % 2 == 0:
            xs = np.arange(-ncol, ncol + 1) * h
        else:
            xs = (np.arange(-ncol, ncol) + 0.5) * h
        rows.append(np.column_stack([xs, np.full(xs.size, j * dy)]))
    return np.concatenate(rows)


def _check_capacity(area, h):
    estimate = int(area / (0.866 * h * h)) + 1
    if estimate > _MAX_POINTS:
        raise CapacityError(
            f"target edge length {h:g} would need roughly {estimate} points "
            f"(limit {_MAX_POINTS})"
        )


def _delaunay_mesh(points, h, holes=()):
    """Triangulate points, drop triangles whose centroid is inside a hole."""
    tri = Delaunay(points)
    simplices = np.array(tri.simplices, dtype=np.int64)
    cent = points[simplices].mean(axis=1)
    keep = np.ones(simplices.shape[0], dtype=bool)
    for center, radius in holes:
        keep &= np.hypot(cent[:, 0] - center[0], cent[:, 1] - center[1]) >= radius
    simplices = simplices[keep]
    # Re-index in case a point ended up unused.
    used = np.unique(simplices)
    remap = -np.ones(points.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.size)
    simplices = remap[simplices]
    points = points[used]
    # Enforce counter-clockwise orientation.
    p1 = points[simplices[:, 0]]
    e1 = points[simplices[:, 1]] - p1
    e2 = points[simplices[:, 2]] - p1
    flip = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0.0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    # Topological boundary flags.
    edges = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    und = np.sort(edges, axis=1)
    key = und[:, 0] * points.shape[0] + und[:, 1]
    uniq, counts = np.unique(key, return_counts=True)
    single = counts[np.searchsorted(uniq, key)] == 1
    flags = np.zeros(points.shape[0], dtype=bool)
    flags[edges[single].ravel()] = True
    return Mesh(points, simplices, flags, h)


def generate_disk(radius, h):
    """Mesh of the disk of given radius centred at the origin."""
    if radius <= 0.0 or h <= 0.0:
        raise GeometryError("radius and h must be positive")
    if h > radius:
        raise GeometryError("target edge length exceeds the radius")
    _check_capacity(math.pi * radius**2, h)
    ring = _circle_points((0.0, 0.0), radius, h)
    lattice = _hex_lattice(radius, h)
    r = np.hypot(lattice[:, 0], lattice[:, 1])
    lattice = lattice[r <= radius - _BOUNDARY_CLEARANCE * h]
    return _delaunay_mesh(np.concatenate([ring, lattice]), h)


def generate_annulus(r_inner, r_outer, h):
    """Mesh of the annulus r_inner < |x| < r_outer."""
    if not 0.0 < r_inner < r_outer:
        raise GeometryError("need 0 < r_inner < r_outer")
    if h > 0.5 * (r_outer - r_inner):
        raise GeometryError("target edge length too coarse for the annular gap")
    _check_capacity(math.pi * (r_outer**2 - r_inner**2), h)
    outer = _circle_points((0.0, 0.0), r_outer, h)
    inner = _circle_points((0.0, 0.0), r_inner, h)
    lattice = _hex_lattice(r_outer, h)
    r = np.hypot(lattice[:, 0], lattice[:, 1])
    keep = (r <= r_outer - _BOUNDARY_CLEARANCE * h) & (r >= r_inner + _BOUNDARY_CLEARANCE * h)
    pts = np.concatenate([outer, inner, lattice[keep]])
    return _delaunay_mesh(pts, h, holes=[((0.0, 0.0), r_inner)])


def generate_disk_with_hole(radius, hole_center, hole_radius, h):
    """Mesh of a disk with a circular hole (need not be concentric)."""
    cx, cy = float(hole_center[0]), float(hole_center[1])
    if radius <= 0.0 or hole_radius <= 0.0:
        raise GeometryError("radii must be positive")
    gap = radius - math.hypot(cx, cy) - hole_radius
    if gap <= 0.0:
        raise GeometryError("hole is not strictly inside the disk")
    if h > 0.5 * min(hole_radius, gap):
        raise GeometryError("target edge length too coarse for the hole geometry")
    _check_capacity(math.pi * (radius**2 - hole_radius**2), h)
    outer = _circle_points((0.0, 0.0), radius, h)
    hole = _circle_points((cx, cy), hole_radius, h)
    lattice = _hex_lattice(radius, h)
    r = np.hypot(lattice[:, 0], lattice[:, 1])
    rh = np.hypot(lattice[:, 0] - cx, lattice[:, 1] - cy)
    keep = (r <= radius - _BOUNDARY_CLEARANCE * h) & (rh >= hole_radius + _BOUNDARY_CLEARANCE * h)
    pts = np.concatenate([outer, hole, lattice[keep]])
    return _delaunay_mesh(pts, h, holes=[((cx, cy), hole_radius)])


def generate_rectangle(width, height, h):
    """Structured right-triangle mesh of [0, width] x [0, height].

    Every triangle is a right isoceles triangle, so the mesh is nonobtuse;
    handy for maximum-principle checks.
    """
    if width <= 0.0 or height <= 0.0 or h <= 0.0:
        raise GeometryError("width, height and h must be positive")
    nx = max(1, int(round(width / h)))
    ny = max(1, int(round(height / h)))
    _check_capacity(width * height, h)
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = np.array(tris, dtype=np.int64)
    flags = np.zeros(pts.shape[0], dtype=bool)
    border = (X == 0.0) | (X == width) | (Y == 0.0) | (Y == height)
    flags[border.ravel()] = True
    return Mesh(pts, tris, flags, h)


def save_mesh(mesh, path):
    """Write the ASCII mesh format (17 significant digits)."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for (x, y), b in zip(mesh.vertices, mesh.boundary):
        lines.append(f"{x:.17g} {y:.17g} {1 if b else 0}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    """Read the ASCII mesh format, validating as the constructor does."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(no + 1, ln.strip()) for no, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise MeshFormatError("empty mesh file")
    no, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise MeshFormatError("header must be 'nv nt'", line=no)
    try:
        nv, nt = int(parts[0]), int(parts[1])
    except ValueError:
        raise MeshFormatError("header must contain two integers", line=no) from None
    if nv <= 0 or nt <= 0:
        raise MeshFormatError("vertex and triangle counts must be positive", line=no)
    if len(lines) != 1 + nv + nt:
        raise MeshFormatError(
            f"expected {1 + nv + nt} non-empty lines, found {len(lines)}", line=lines[-1][0]
        )
    verts = np.empty((nv, 2))
    flags = np.empty(nv, dtype=bool)
    for r in range(nv):
        no, ln = lines[1 + r]
        parts = ln.split()
        if len(parts) != 3:
            raise MeshFormatError("vertex line must be 'x y b'", line=no)
        try:
            verts[r, 0] = float(parts[0])
            verts[r, 1] = float(parts[1])
            b = int(parts[2])
        except ValueError:
            raise MeshFormatError("malformed vertex line", line=no) from None
        if b not in (0, 1):
            raise MeshFormatError("boundary flag must be 0 or 1", line=no)
        flags[r] = bool(b)
    tris = np.empty((nt, 3), dtype=np.int64)
    for r in range(nt):
        no, ln = lines[1 + nv + r]
        parts = ln.split()
        if len(parts) != 3:
            raise MeshFormatError("triangle line must be 'i j k'", line=no)
        try:
            tris[r] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError("malformed triangle line", line=no) from None
        if tris[r].min() < 0 or tris[r].max() >= nv:
            raise MeshFormatError("vertex index out of range", line=no)
    probe = Mesh.__new__(Mesh)
    probe.vertices = np.ascontiguousarray(verts)
    probe.triangles = np.ascontiguousarray(tris)
    probe.boundary = flags
    probe.h = 1.0
    probe._fem_cache = {}
    probe._build()
    probe._validate()
    probe.h = float(np.median(probe.edge_lengths()))
    return probe
