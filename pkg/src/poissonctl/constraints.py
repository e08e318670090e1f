"""Admissible control classes and their linearized minimizers.

A control class is the set of sources f with integral constraint

    integral of psi(f(x)) dx  <=  level,

for a convex integrand psi chosen from a small catalog.  Each kind
carries its convex conjugate and the conjugate's subdifferential, which
drive both the descent direction (minimize a linear functional over the
class) and the optimality report.

Kinds
-----
``tv_bound``        psi(s) = |s|, level m.  Signed measures of total
                    variation at most m; minimizers are single atoms.
``nonneg_mass``     psi(s) = s on s >= 0, level m.  Nonnegative measures
                    of mass at most m.
``box_mass``        psi(s) = s on [lower, upper], level m.  Bounded
                    densities with mass at most m; minimizers are
                    bang-bang up to one transitional node.
``quadratic``       psi(s) = s^2, level m.  An energy ball; minimizers
                    are scalar multiples of the linearization.
``box_mass_lower``  psi(s) = -s on [lower, upper], level -m, i.e.
                    bounded densities with mass at least m.

Densities are nodal vectors on the mesh; integrals use the lumped
vertex weights so that psi-integrals of piecewise linear densities are
exact for the linear kinds.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .analysis import sublevel_volume
from .errors import ConstraintError, DegenerateProblemError
from .poisson import Control, ScalarField, lumped_mass, mass_matrix

KINDS = ("tv_bound", "nonneg_mass", "box_mass", "quadratic", "box_mass_lower")

_BOX_KINDS = ("box_mass", "box_mass_lower")


class Interval(NamedTuple):
    """Closed interval [lo, hi]; lo = -inf or hi = inf marks a ray."""

    lo: float
    hi: float

    def contains(self, s, tol=0.0):
        return (s >= self.lo - tol) and (s <= self.hi + tol)


@dataclass(frozen=True)
class ConstraintSpec:
    """One admissible class: a kind plus its numeric parameters.

    ``lower`` and ``upper`` are only meaningful for the box kinds and
    are ignored otherwise.
    """

    kind: str
    mass: float
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstraintError(
                "unknown constraint kind %r (expected one of %s)"
                % (self.kind, ", ".join(KINDS))
            )
        if not np.isfinite(self.mass) or self.mass <= 0.0:
            raise ConstraintError("mass must be positive, got %r" % (self.mass,))
        if self.kind in _BOX_KINDS:
            if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
                raise ConstraintError("box bounds must be finite")
            if self.lower >= self.upper:
                raise ConstraintError(
                    "box bounds need lower < upper, got [%g, %g]"
                    % (self.lower, self.upper)
                )
            if self.kind == "box_mass" and self.lower < 0.0:
                raise ConstraintError("box_mass needs lower >= 0")


def mass_level(spec):
    """Right-hand side of the psi-integral inequality."""
    if spec.kind == "box_mass_lower":
        return -spec.mass
    return spec.mass


def psi(spec, s):
    """Evaluate the constraint integrand pointwise (inf outside its domain)."""
    s = np.asarray(s, dtype=float)
    if spec.kind == "tv_bound":
        return np.abs(s)
    if spec.kind == "nonneg_mass":
        return np.where(s >= 0.0, s, np.inf)
    if spec.kind == "box_mass":
        inside = (s >= spec.lower) & (s <= spec.upper)
        return np.where(inside, s, np.inf)
    if spec.kind == "quadratic":
        return s * s
    inside = (s >= spec.lower) & (s <= spec.upper)
    return np.where(inside, -s, np.inf)


def psi_star(spec, t):
    """Convex conjugate of the integrand, sup_s (t*s - psi(s))."""
    t = np.asarray(t, dtype=float)
    if spec.kind == "tv_bound":
        return np.where(np.abs(t) <= 1.0, 0.0, np.inf)
    if spec.kind == "nonneg_mass":
        return np.where(t <= 1.0, 0.0, np.inf)
    if spec.kind == "box_mass":
        return np.where(t <= 1.0, (t - 1.0) * spec.lower, (t - 1.0) * spec.upper)
    if spec.kind == "quadratic":
        return 0.25 * t * t
    return np.where(t <= -1.0, (t + 1.0) * spec.lower, (t + 1.0) * spec.upper)


def psi_star_subdiff(spec, t):
    """Subdifferential of the conjugate at a scalar t, as an Interval.

    Raises ConstraintError when t lies outside the conjugate's domain
    (the subdifferential is empty there).
    """
    t = float(t)
    if spec.kind == "tv_bound":
        if t < -1.0 or t > 1.0:
            raise ConstraintError("conjugate of tv_bound is finite only on [-1, 1]")
        if t == -1.0:
            return Interval(-np.inf, 0.0)
        if t == 1.0:
            return Interval(0.0, np.inf)
        return Interval(0.0, 0.0)
    if spec.kind == "nonneg_mass":
        if t > 1.0:
            raise ConstraintError("conjugate of nonneg_mass is finite only on t <= 1")
        if t == 1.0:
            return Interval(0.0, np.inf)
        return Interval(0.0, 0.0)
    if spec.kind == "box_mass":
        if t < 1.0:
            return Interval(spec.lower, spec.lower)
        if t > 1.0:
            return Interval(spec.upper, spec.upper)
        return Interval(spec.lower, spec.upper)
    if spec.kind == "quadratic":
        return Interval(0.5 * t, 0.5 * t)
    if t < -1.0:
        return Interval(spec.lower, spec.lower)
    if t > -1.0:
        return Interval(spec.upper, spec.upper)
    return Interval(spec.lower, spec.upper)


def recession(spec):
    """Limits of psi(s)/s as s -> -inf and s -> +inf.

    A finite limit means point masses of that sign are admissible and
    are charged at the limiting rate; an infinite limit forbids them.
    """
    if spec.kind == "tv_bound":
        return (-1.0, 1.0)
    if spec.kind == "nonneg_mass":
        return (-np.inf, 1.0)
    return (-np.inf, np.inf)


def atom_penalty(spec, weight):
    """psi-cost of a point mass of the given weight (0 for weight 0)."""
    if weight == 0.0:
        return 0.0
    c_minus, c_plus = recession(spec)
    if weight > 0.0:
        return weight * c_plus if np.isfinite(c_plus) else np.inf
    return weight * c_minus if np.isfinite(c_minus) else np.inf


def constraint_value(mesh, control, spec):
    """Total psi-integral of a control, including its point masses.

    Returns inf when the control leaves the integrand's domain, e.g. a
    density outside the box bounds or an atom where atoms are forbidden.
    """
    total = 0.0
    if control.density is not None:
        d = lumped_mass(mesh)
        vals = psi(spec, control.density.values)
        if np.any(np.isinf(vals)):
            return np.inf
        total += float(d @ vals)
    for weight, _ in control.atoms:
        total += atom_penalty(spec, weight)
    return total


def is_admissible(mesh, control, spec, tol=1e-9):
    """Check membership in the class up to an absolute tolerance.

    Box bounds and sign constraints are checked with the same slack so
    that controls produced by floating-point arithmetic on the boundary
    of the class do not fail spuriously.
    """
    slack = tol * max(1.0, abs(spec.mass))
    d = lumped_mass(mesh)
    dens = None if control.density is None else control.density.values
    weights = np.array([w for w, _ in control.atoms], dtype=float)

    if spec.kind in _BOX_KINDS or spec.kind == "quadratic":
        if weights.size and np.max(np.abs(weights)) > slack:
            return False
        weights = np.zeros(0)
    if spec.kind == "nonneg_mass":
        if weights.size and np.min(weights) < -slack:
            return False
    if dens is not None:
        if spec.kind == "nonneg_mass" and np.min(dens) < -slack:
            return False
        if spec.kind in _BOX_KINDS:
            if np.min(dens) < spec.lower - slack or np.max(dens) > spec.upper + slack:
                return False

    if spec.kind == "tv_bound":
        total = float(np.sum(np.abs(weights)))
        if dens is not None:
            total += float(d @ np.abs(dens))
        return total <= spec.mass + slack
    if spec.kind == "quadratic":
        total = float(d @ (dens * dens)) if dens is not None else 0.0
        return total <= spec.mass + slack
    total = float(np.sum(weights))
    if dens is not None:
        total += float(d @ dens)
    if spec.kind == "box_mass_lower":
        return total >= spec.mass - slack
    return total <= spec.mass + slack


def find_threshold(mesh, values, spec):
    """Threshold t with  lower*|Omega| + (upper-lower)*vol{values < t} = mass.

    ``values`` is a nodal field; the sublevel volume is the exact one of
    its piecewise linear interpolant, so the returned threshold matches
    the geometry the rest of the package reports.  Only the box kinds
    have thresholds; the mass must be strictly achievable.
    """
    if spec.kind not in _BOX_KINDS:
        raise ConstraintError("find_threshold applies to box kinds only")
    v = np.asarray(values, dtype=float)
    area = float(np.sum(mesh.areas))
    lo_mass = spec.lower * area
    hi_mass = spec.upper * area
    if not (lo_mass < spec.mass <= hi_mass + 1e-12 * max(1.0, abs(hi_mass))):
        raise DegenerateProblemError(
            "mass %g not achievable in [%g, %g] on this mesh (area %g)"
            % (spec.mass, lo_mass, hi_mass, area)
        )
    width = spec.upper - spec.lower

    def excess(t):
        return lo_mass + width * sublevel_volume(mesh, v, t) - spec.mass

    lo = float(np.min(v)) - 1.0
    hi = float(np.max(v)) + 1.0
    # excess(lo) = lo_mass - mass < 0 and excess(hi) = hi_mass - mass >= 0,
    # possibly zero only at hi; widen hi a hair so brentq sees a bracket.
    if excess(hi) < 0.0:
        return hi
    return float(brentq(excess, lo, hi, xtol=1e-13 * max(1.0, hi - lo)))


def _box_greedy(c, d, spec):
    """Exact minimizer of sum(c*d*f) over the discrete box class.

    Nodes are raised from the lower bound in order of increasing
    marginal cost c; at most one node ends strictly between the bounds.
    """
    n = c.size
    f = np.full(n, spec.lower)
    budget = spec.mass - float(d @ f)
    if budget < 0.0:
        raise DegenerateProblemError(
            "mesh mass at the lower bound already exceeds the budget"
        )
    order = np.argsort(c, kind="stable")
    cap = d[order] * (spec.upper - spec.lower)
    used_before = np.concatenate([[0.0], np.cumsum(cap)[:-1]])
    forced = np.minimum(cap, np.maximum(budget - used_before, 0.0))
    if spec.kind == "box_mass":
        # Mass is only allowed, never required: raise while it helps.
        take = np.where(c[order] < 0.0, forced, 0.0)
    else:
        # Mass is required up to the budget, and still worthwhile past it
        # wherever the marginal cost is negative.
        take = np.maximum(forced, np.where(c[order] < 0.0, cap, 0.0))
    f[order] += take / d[order]
    return f


def linearized_oracle(mesh, w, spec):
    """Minimize the pairing <w, f> over the class; return (f, multiplier).

    ``w`` is the nodal linearization of the cost (a ScalarField or a
    plain vector).  The minimizer is exact for the discretized class, so
    the resulting gap is a true bound; the multiplier is the one the
    optimality conditions report for this linearization.
    """
    vals = w.values if isinstance(w, ScalarField) else np.asarray(w, dtype=float)
    nv = mesh.n_vertices
    if vals.shape != (nv,):
        raise ConstraintError("linearization has wrong shape for this mesh")

    if spec.kind == "tv_bound":
        k = int(np.argmax(np.abs(vals)))
        lam = abs(float(vals[k]))
        if lam == 0.0:
            return Control(density=ScalarField(mesh, np.zeros(nv))), 0.0
        weight = -spec.mass * np.sign(float(vals[k]))
        return Control(atoms=[(weight, tuple(mesh.vertices[k]))]), lam

    if spec.kind == "nonneg_mass":
        k = int(np.argmin(vals))
        lam = max(0.0, -float(vals[k]))
        if float(vals[k]) >= 0.0:
            return Control(density=ScalarField(mesh, np.zeros(nv))), lam
        return Control(atoms=[(spec.mass, tuple(mesh.vertices[k]))]), lam

    d = lumped_mass(mesh)
    if spec.kind == "quadratic":
        c = (mass_matrix(mesh) @ vals) / d
        norm = float(np.sqrt(d @ (c * c)))
        if norm == 0.0:
            return Control(density=ScalarField(mesh, np.zeros(nv))), 0.0
        f = -np.sqrt(spec.mass) * c / norm
        lam = norm / (2.0 * np.sqrt(spec.mass))
        return Control(density=ScalarField(mesh, f)), lam

    c = (mass_matrix(mesh) @ vals) / d
    f = _box_greedy(c, d, spec)
    t = find_threshold(mesh, vals, spec)
    if spec.kind == "box_mass":
        lam = max(0.0, -t)
    else:
        lam = max(0.0, t)
    return Control(density=ScalarField(mesh, f)), lam
