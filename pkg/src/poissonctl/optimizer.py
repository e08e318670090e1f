"""Conditional-gradient descent over an admissible control class.

Each iteration solves for the adjoint state of the current control,
asks the constraint class for the exact minimizer of the linearized
cost, and moves along the segment toward it.  Because the solution map
is linear, the trial states along the segment are convex combinations
of two already-computed states, so a backtracking line search costs no
extra solves.

The tracked objective is the integral cost plus the psi-integral of the
control, and the stop rule is the relative change of that total; runs
from a zero-cost start fall back to an absolute change test.

For the measure-valued classes (single-atom minimizers) convex
combinations would pile up one atom per iteration, so those runs
replace the control with the oracle output outright whenever that
improves the objective.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constraints import constraint_value, is_admissible, linearized_oracle
from .errors import ConfigError, ConstraintError
from .kkt import kkt_report
from .poisson import Control, ScalarField, lumped_mass, pairing, resolvent
from .problems import adjoint, cost

STEP_RULES = ("armijo", "harmonic")

ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
ARMIJO_MAX_HALVINGS = 50

# Classes whose linearized minimizers are single atoms.
_REPLACEMENT_KINDS = ("tv_bound", "nonneg_mass")


@dataclass(frozen=True)
class OptimizerConfig:
    """Loop parameters: step rule, stop threshold, iteration and solver caps."""

    step_rule: str = "armijo"
    tol: float = 1e-6
    max_iters: int = 500
    cg_tol: float = 1e-10

    def __post_init__(self):
        if self.step_rule not in STEP_RULES:
            raise ConfigError(
                ["unknown step rule %r (expected one of %s)"
                 % (self.step_rule, ", ".join(STEP_RULES))]
            )
        if not self.tol > 0.0:
            raise ConfigError(["tol must be positive"])
        if self.max_iters < 1:
            raise ConfigError(["max_iters must be at least 1"])


@dataclass(frozen=True)
class IterationRecord:
    """One history row: total objective, gap certificate, multiplier, step."""

    n: int
    cost: float
    fw_gap: float
    lam: float
    step: float


def fw_gap(w, f, fhat, mesh):
    """Linearized-decrease certificate <w, f - fhat>; nonnegative since
    fhat minimizes the pairing over the class containing f."""
    return pairing(w, f) - pairing(w, fhat)


def stop_check(history, tol):
    """Relative-change stop rule on the total objective.

    Uses |I_n - I_{n-1}| / |I_0| < tol, falling back to the absolute
    difference when the starting value is exactly zero.
    """
    if len(history) < 2:
        return False
    i0 = history[0].cost
    delta = abs(history[-1].cost - history[-2].cost)
    if i0 != 0.0:
        return delta / abs(i0) < tol
    return delta < tol


def combine(mesh, f, fhat, eps):
    """Convex combination (1 - eps) f + eps fhat as a new control."""
    nv = mesh.n_vertices
    density = None
    if f.density is not None or fhat.density is not None:
        a = f.density.values if f.density is not None else np.zeros(nv)
        b = fhat.density.values if fhat.density is not None else np.zeros(nv)
        density = ScalarField(mesh, (1.0 - eps) * a + eps * b)
    atoms = [((1.0 - eps) * w, loc) for w, loc in f.atoms if (1.0 - eps) * w != 0.0]
    atoms += [(eps * w, loc) for w, loc in fhat.atoms if eps * w != 0.0]
    return Control(density=density, atoms=atoms)


def uniform_control(mesh, constraint_spec):
    """Constant density that exactly saturates the class budget.

    For the mass-style kinds the discrete mass equals the constraint
    mass; for the quadratic kind it is the squared integral that must
    hit the budget, hence the square root.
    """
    total = float(np.sum(lumped_mass(mesh)))
    if constraint_spec.kind == "quadratic":
        value = math.sqrt(constraint_spec.mass / total)
    else:
        value = constraint_spec.mass / total
    return Control(density=ScalarField(mesh, np.full(mesh.n_vertices, value)))


def _total(cost_spec, constraint_spec, mesh, u, f):
    return cost(cost_spec, mesh, u, f) + constraint_value(mesh, f, constraint_spec)


def run(cost_spec, constraint_spec, mesh, f0=None, config=None):
    """Minimize the cost over the admissible class from f0.

    Returns (final control, history, report).  The report is the full
    optimality audit of the final control, with ``stop_mode`` set to
    "relative", "absolute" or "max_iters" according to how the loop
    ended.  The default start is the uniform density of exactly the
    constraint mass.
    """
    cfg = config if config is not None else OptimizerConfig()
    f = f0 if f0 is not None else uniform_control(mesh, constraint_spec)
    if not is_admissible(mesh, f, constraint_spec, tol=1e-7):
        raise ConstraintError("initial control is not admissible for this class")

    replace = constraint_spec.kind in _REPLACEMENT_KINDS
    u = resolvent(mesh, f, cg_tol=cfg.cg_tol)
    history = []
    stop_mode = "max_iters"

    for n in range(cfg.max_iters + 1):
        w = adjoint(cost_spec, mesh, f, cg_tol=cfg.cg_tol, state=u)
        total = _total(cost_spec, constraint_spec, mesh, u, f)
        fhat, lam = linearized_oracle(mesh, w, constraint_spec)
        gap = fw_gap(w, f, fhat, mesh)

        probe = history + [IterationRecord(n, total, gap, lam, 0.0)]
        if stop_check(probe, cfg.tol):
            history = probe
            stop_mode = "relative" if history[0].cost != 0.0 else "absolute"
            break
        if n == cfg.max_iters:
            history = probe
            break

        scale = max(1.0, abs(history[0].cost) if history else abs(total))
        if gap <= 1e-14 * scale:
            # Already a minimizer of the linearization: standing still
            # lets the stop rule fire on the next pass.
            history.append(IterationRecord(n, total, gap, lam, 0.0))
            continue

        u_hat = resolvent(mesh, fhat, cg_tol=cfg.cg_tol)
        if replace:
            total_hat = _total(cost_spec, constraint_spec, mesh, u_hat, fhat)
            if total_hat < total:
                f, u, eps = fhat, u_hat, 1.0
            else:
                eps = 0.0
        elif cfg.step_rule == "harmonic":
            eps = 2.0 / (n + 2.0)
            f = combine(mesh, f, fhat, eps)
            u = ScalarField(mesh, (1.0 - eps) * u.values + eps * u_hat.values)
        else:
            eps = 1.0
            accepted = False
            for _ in range(ARMIJO_MAX_HALVINGS):
                f_try = combine(mesh, f, fhat, eps)
                u_try = ScalarField(
                    mesh, (1.0 - eps) * u.values + eps * u_hat.values
                )
                total_try = _total(cost_spec, constraint_spec, mesh, u_try, f_try)
                if total_try <= total - ARMIJO_SLOPE * eps * gap:
                    f, u, accepted = f_try, u_try, True
                    break
                eps *= ARMIJO_SHRINK
            if not accepted:
                eps = 0.0
        history.append(IterationRecord(n, total, gap, lam, eps))

    report = kkt_report(cost_spec, constraint_spec, mesh, f, cg_tol=cfg.cg_tol)
    report.stop_mode = stop_mode
    return f, history, report
