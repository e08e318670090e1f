"""Cost functionals on the source-to-state map and their adjoint states.

Each cost is an integral of a pointwise integrand j(x, u(x), f(x)) of the
state u = solve(-lap u = f) and the source itself.  The adjoint state is
the field w whose pairing with a source increment gives the derivative of
the cost, i.e. d/de J(f + e*g) = <w, g> at e = 0.  It is built from the
partial derivatives of the integrand: solve once with du-part as source
density, then add the df-part pointwise.

Kinds
-----
``linear``      j = g(x) * u, with coefficient g given by a selector.
``tracking``    j = (u - u0(x))^2, target u0 given by a selector.
``compliance``  j = f * u; the adjoint collapses to 2u, no extra solve.
``power_max``   j = -|u|^p, i.e. maximize the L^p norm of the state.

Quadrature choices match the cost exactly so that adjoint pairings are
the exact derivatives of the discrete cost values, not just O(h^2)
approximations; finite-difference checks then see pure step error.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError
from .poisson import (
    ScalarField,
    lumped_mass,
    mass_matrix,
    pairing,
    resolvent,
    solve_dirichlet,
)

KINDS = ("linear", "tracking", "compliance", "power_max")


@dataclass(frozen=True)
class CostSpec:
    """One cost functional: a kind plus its coefficient selector.

    ``coefficient`` names the weight g for ``linear`` or the target u0
    for ``tracking``; see ``coefficient_field`` for the accepted forms.
    ``exponent`` is the power p for ``power_max`` and is ignored
    otherwise.
    """

    kind: str
    coefficient: str = ""
    exponent: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(
                ["unknown cost kind %r (expected one of %s)"
                 % (self.kind, ", ".join(KINDS))]
            )
        if self.kind in ("linear", "tracking") and not self.coefficient:
            raise ConfigError(["cost kind %r needs a coefficient selector"
                               % self.kind])
        if self.kind == "power_max":
            if not np.isfinite(self.exponent) or self.exponent <= 1.0:
                raise ConfigError(["power_max exponent must be > 1, got %r"
                                   % (self.exponent,)])


def coefficient_field(mesh, name):
    """Evaluate a named coefficient nodally.

    Selectors: ``x2-y2`` for x^2 - y^2, ``const:<v>`` for the constant v,
    ``zero`` for the zero field.
    """
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    if name == "x2-y2":
        return x * x - y * y
    if name == "zero":
        return np.zeros(mesh.n_vertices)
    if name.startswith("const:"):
        try:
            value = float(name[len("const:"):])
        except ValueError:
            raise ConfigError(["bad constant in coefficient %r" % name]) from None
        return np.full(mesh.n_vertices, value)
    raise ConfigError(["unknown coefficient selector %r" % name])


def _density_values(mesh, control):
    if control.density is None:
        return np.zeros(mesh.n_vertices)
    return control.density.values


def dj_ds(spec, mesh, u_values, f_values):
    """Partial derivative of the integrand in the state slot, nodally."""
    if spec.kind == "linear":
        return coefficient_field(mesh, spec.coefficient)
    if spec.kind == "tracking":
        return 2.0 * (u_values - coefficient_field(mesh, spec.coefficient))
    if spec.kind == "compliance":
        return np.array(f_values, dtype=float)
    p = spec.exponent
    return -p * np.abs(u_values) ** (p - 1.0) * np.sign(u_values)


def dj_dz(spec, mesh, u_values):
    """Partial derivative of the integrand in the source slot, nodally."""
    if spec.kind == "compliance":
        return np.array(u_values, dtype=float)
    return np.zeros(mesh.n_vertices)


def cost(spec, mesh, u, control):
    """Value of the cost functional at a state/control pair.

    The state must be the solve for this control on the same mesh.
    ``compliance`` includes point loads as weight times state value;
    ``power_max`` uses the vertex-weight quadrature its adjoint assumes.
    """
    if u.mesh is not mesh:
        raise GeometryError("state field lives on a different mesh")
    m = mass_matrix(mesh)
    if spec.kind == "linear":
        g = coefficient_field(mesh, spec.coefficient)
        return float(g @ (m @ u.values))
    if spec.kind == "tracking":
        r = u.values - coefficient_field(mesh, spec.coefficient)
        return float(r @ (m @ r))
    if spec.kind == "compliance":
        return pairing(u, control)
    d = lumped_mass(mesh)
    return -float(d @ np.abs(u.values) ** spec.exponent)


def adjoint(spec, mesh, control, cg_tol=1e-10, state=None):
    """Adjoint state of the cost at a control.

    Passing a precomputed ``state`` skips the forward solve.  For
    ``compliance`` the identity w = solve(f-part) + u = 2u holds exactly
    because the f-part equals the original source, so no adjoint solve is
    made.  For ``power_max`` the state-part load uses the same vertex
    weights as the cost so the pairing is the exact discrete derivative.
    """
    u = resolvent(mesh, control, cg_tol=cg_tol) if state is None else state
    if u.mesh is not mesh:
        raise GeometryError("state field lives on a different mesh")
    if spec.kind == "compliance":
        return ScalarField(mesh, 2.0 * u.values)

    ds = dj_ds(spec, mesh, u.values, _density_values(mesh, control))
    lumped = spec.kind == "power_max"
    return solve_dirichlet(mesh, ds, cg_tol=cg_tol, lumped=lumped)
