"""P1 finite elements for the Poisson problem with homogeneous Dirichlet data.

The central object is the source-to-state map: given a control (an
integrable density, point loads, or both), return the state u solving
-lap(u) = f with u = 0 on the boundary.  The map is self-adjoint in the
discrete duality pairing, which downstream optimality checks rely on, so
load assembly and pairing use the same consistent P1 mass matrix.

Field files share the mesh format conventions::

    nv
    v            (nv lines, 17 significant digits)
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GeometryError, MeshFormatError, SolverError
from .mesh import Mesh

# Iteration cap for the conjugate gradient solve, as a multiple of
# sqrt(n_free); generous for 2-D Laplacians at desk scale.
_CG_CAP_FACTOR = 20


@dataclass
class ScalarField:
    """Nodal values of a P1 function on a mesh."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_vertices,):
            raise ValueError("field needs one value per mesh vertex")

    def copy(self):
        return ScalarField(self.mesh, self.values.copy())


@dataclass
class Control:
    """Control measure: P1 density plus a list of weighted point loads.

    atoms is a list of (weight, (x, y)) pairs.  Either part may be empty.
    """

    density: ScalarField | None = None
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        self.atoms = [
            (float(w), (float(x), float(y))) for w, (x, y) in self.atoms
        ]


@dataclass
class SparseOperator:
    """Stiffness operator, both full and restricted to interior vertices."""

    matrix: sp.csr_matrix
    free: np.ndarray
    full: sp.csr_matrix


def _accumulate_csr(rows, cols, vals, n):
    """COO -> CSR with a stable, deterministic summation order.

    Duplicates are summed in emission order (lexsort is stable), which both
    pins bit-level reproducibility and keeps the assembled matrix exactly
    symmetric when the element matrices are.
    """
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    first = np.ones(r.size, dtype=bool)
    first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.nonzero(first)[0]
    summed = np.add.reduceat(v, starts)
    return sp.csr_matrix((summed, (r[starts], c[starts])), shape=(n, n))


def _fem(mesh):
    """Cached FEM structure for a mesh: stiffness, mass, lumped weights."""
    cache = mesh._fem_cache
    if "K" in cache:
        return cache
    nv = mesh.n_vertices
    t = mesh.triangles
    A = mesh.areas
    g = mesh.grads
    # Local stiffness: area * grad_i . grad_j  (exactly symmetric).
    kloc = np.einsum("tik,tjk->tij", g, g) * A[:, None, None]
    mlocal = (np.full((3, 3), 1.0 / 12.0) + np.eye(3) / 12.0)
    mloc = A[:, None, None] * mlocal[None, :, :]
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    cache["K"] = _accumulate_csr(rows, cols, kloc.ravel(), nv)
    cache["M"] = _accumulate_csr(rows, cols, mloc.ravel(), nv)
    lumped = np.zeros(nv)
    np.add.at(lumped, t.ravel(), np.repeat(A / 3.0, 3))
    cache["lumped"] = lumped
    free = np.nonzero(~mesh.boundary)[0]
    cache["free"] = free
    cache["K_free"] = cache["K"][np.ix_(free, free)].tocsr()
    return cache


def assemble_stiffness(mesh):
    """P1 stiffness matrix; `matrix` is restricted to interior vertices."""
    fem = _fem(mesh)
    return SparseOperator(matrix=fem["K_free"], free=fem["free"], full=fem["K"])


def mass_matrix(mesh):
    """Consistent P1 mass matrix over all vertices (CSR)."""
    return _fem(mesh)["M"]


def lumped_mass(mesh):
    """Row sums of the mass matrix: quadrature weights of nodal integration."""
    return _fem(mesh)["lumped"]


def load_vector(mesh, control, lumped=False):
    """Discrete load of a control: mass-weighted density plus atom scatter.

    With lumped=True the density part uses the diagonal (row-sum) mass;
    the default is consistent P1 x P1 integration.
    """
    fem = _fem(mesh)
    b = np.zeros(mesh.n_vertices)
    if control.density is not None:
        if control.density.mesh is not mesh:
            raise GeometryError("control density lives on a different mesh")
        if lumped:
            b += fem["lumped"] * control.density.values
        else:
            b += fem["M"] @ control.density.values
    if control.atoms:
        pts = np.array([loc for _, loc in control.atoms])
        tri, bary = mesh.locate(pts)
        for k, (w, _) in enumerate(control.atoms):
            b[mesh.triangles[tri[k]]] += w * bary[k]
    return b


def _cg_solve(fem, b_free, cg_tol, maxiter=None):
    K = fem["K_free"]
    n = K.shape[0]
    if maxiter is None:
        maxiter = int(_CG_CAP_FACTOR * math.sqrt(n)) + 1
    diag = K.diagonal()
    prec = sp.diags(1.0 / diag)
    x, info = spla.cg(K, b_free, rtol=cg_tol, atol=0.0, maxiter=maxiter, M=prec)
    bnorm = float(np.linalg.norm(b_free))
    res = float(np.linalg.norm(b_free - K @ x))
    if info > 0 and res > cg_tol * bnorm:
        raise SolverError(
            f"conjugate gradient stalled after {maxiter} iterations "
            f"(relative residual {res / bnorm if bnorm else res:.3e})",
            residual=res,
            iterations=maxiter,
        )
    if info < 0:
        raise SolverError("conjugate gradient failed (illegal input)", residual=res)
    return x


def resolvent(mesh, control, cg_tol=1e-10, maxiter=None):
    """State u solving -lap(u) = control, u = 0 on the boundary."""
    if not 0.0 < cg_tol <= 1e-4:
        raise ValueError("cg_tol must lie in (0, 1e-4]")
    fem = _fem(mesh)
    b = load_vector(mesh, control)
    u = np.zeros(mesh.n_vertices)
    u[fem["free"]] = _cg_solve(fem, b[fem["free"]], cg_tol, maxiter)
    return ScalarField(mesh, u)


def solve_dirichlet(mesh, rhs_values, cg_tol=1e-10, lumped=False):
    """Resolvent applied to a plain nodal density (no atoms)."""
    fem = _fem(mesh)
    if lumped:
        b = fem["lumped"] * rhs_values
    else:
        b = fem["M"] @ rhs_values
    u = np.zeros(mesh.n_vertices)
    u[fem["free"]] = _cg_solve(fem, b[fem["free"]], cg_tol)
    return ScalarField(mesh, u)


def integrate(mesh, values):
    """Integral of a P1 (per-vertex) or P0 (per-triangle) quantity."""
    values = np.asarray(values, dtype=float)
    if values.shape == (mesh.n_vertices,):
        return float(np.dot(_fem(mesh)["lumped"], values))
    if values.shape == (mesh.n_triangles,):
        return float(np.dot(mesh.areas, values))
    raise ValueError("values must be per-vertex or per-triangle")


def gradient(u):
    """Per-triangle gradient of a P1 field, shape (nt, 2)."""
    mesh = u.mesh
    vals = u.values[mesh.triangles]
    return np.einsum("ti,tik->tk", vals, mesh.grads)


def interpolate(u, points):
    """P1 interpolation of a field at arbitrary points inside the mesh."""
    tri, bary = u.mesh.locate(points)
    vals = u.values[u.mesh.triangles[tri]]
    out = np.sum(vals * bary, axis=1)
    return out if np.ndim(points) == 2 else float(out[0])


def pairing(u, control):
    """Discrete duality pairing: integral of the field against the control.

    Matches load_vector, so pairing(u, f) == pairing(resolvent(g), f) is
    symmetric in f and g up to the linear solver tolerance.
    """
    return float(np.dot(load_vector(u.mesh, control), u.values))


def control_mass(mesh, control):
    """Total mass of a control: integral of the density plus atom weights."""
    total = 0.0
    if control.density is not None:
        total += integrate(mesh, control.density.values)
    total += sum(w for w, _ in control.atoms)
    return float(total)


def save_field(u, path):
    lines = [f"{u.mesh.n_vertices}"]
    lines += [f"{v:.17g}" for v in u.values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(mesh, path):
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(no + 1, ln.strip()) for no, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise MeshFormatError("empty field file")
    no, header = lines[0]
    try:
        nv = int(header)
    except ValueError:
        raise MeshFormatError("field header must be the vertex count", line=no) from None
    if nv != mesh.n_vertices:
        raise MeshFormatError(
            f"field has {nv} values but the mesh has {mesh.n_vertices} vertices", line=no
        )
    if len(lines) != 1 + nv:
        raise MeshFormatError("wrong number of value lines", line=lines[-1][0])
    vals = np.empty(nv)
    for r in range(nv):
        no, ln = lines[1 + r]
        try:
            vals[r] = float(ln)
        except ValueError:
            raise MeshFormatError("malformed value", line=no) from None
    return ScalarField(mesh, vals)


def save_atoms(atoms, path):
    lines = [f"{len(atoms)}"]
    lines += [f"{w:.17g} {x:.17g} {y:.17g}" for w, (x, y) in atoms]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_atoms(path):
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(no + 1, ln.strip()) for no, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise MeshFormatError("empty atoms file")
    no, header = lines[0]
    try:
        count = int(header)
    except ValueError:
        raise MeshFormatError("atoms header must be the atom count", line=no) from None
    if len(lines) != 1 + count:
        raise MeshFormatError("wrong number of atom lines", line=lines[-1][0])
    atoms = []
    for r in range(count):
        no, ln = lines[1 + r]
        parts = ln.split()
        if len(parts) != 3:
            raise MeshFormatError("atom lines are 'weight x y'", line=no)
        try:
            w, x, y = (float(p) for p in parts)
        except ValueError:
            raise MeshFormatError("malformed atom line", line=no) from None
        atoms.append((w, (x, y)))
    return atoms
