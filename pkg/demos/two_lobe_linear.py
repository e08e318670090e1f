"""Linear cost, box-and-mass constraints, and an exact answer to check.

Minimize integral of g * u_f with g = x^2 - y^2 over densities
0 <= f <= 1 of mass at most 1.25 on the unit disk.  The cost is linear
in f, so one oracle step lands on the exact optimizer: f = 1 on the two
lobes {w < -lambda} of the adjoint w = (x^2 - y^2)(1 - r^2)/12, f = 0
outside.  The script runs the solver, audits the result, and draws the
computed interface on top of the exact lobes.

Equivalent CLI run:  python -m poissonctl optimize --config ex62
"""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from poissonctl import (
    ConstraintSpec,
    CostSpec,
    OptimizerConfig,
    adjoint,
    control_mass,
    extract_bang_set,
    format_report,
    generate_disk,
    run,
)

H = 0.04
mesh = generate_disk(1.0, H)
cost = CostSpec(kind="linear", coefficient="x2-y2")
cons = ConstraintSpec(kind="box_mass", mass=1.25, lower=0.0, upper=1.0)

f, history, report = run(cost, cons, mesh, config=OptimizerConfig(tol=1e-8))
print("converged in %d oracle calls, stop mode %r" % (history[-1].n, report.stop_mode))
print("control mass  = %.12f" % control_mass(mesh, f))
print()
print(format_report(report))

w = adjoint(cost, mesh, f)
indicator, geom = extract_bang_set(w, report.lam)
print("bang set: volume %.6f, perimeter %.4f" % (geom.volume, geom.perimeter))

# exact interface at the quadrature threshold (see tests/test_acceptance.py)
lam_exact = 0.0025861085738820549
tha = 0.5 * np.arccos(-48.0 * lam_exact)
th = np.linspace(tha, np.pi - tha, 400)
s = np.sqrt(np.maximum(0.0, 1.0 + 48.0 * lam_exact / np.cos(2.0 * th)))

fig, ax = plt.subplots(figsize=(5, 5))
ax.tripcolor(
    mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles, f.density.values,
    cmap="Greys", vmin=0.0, vmax=1.0,
)
for sign in (1.0, -1.0):
    for r in (np.sqrt((1.0 + s) / 2.0), np.sqrt((1.0 - s) / 2.0)):
        ax.plot(sign * r * np.cos(th), sign * r * np.sin(th), "r-", lw=0.8)
segs = geom.segments
for x1, y1, x2, y2 in segs:
    ax.plot([x1, x2], [y1, y2], "b-", lw=0.5)
ax.plot([], [], "r-", label="exact interface")
ax.plot([], [], "b-", label="computed interface")
ax.set_aspect("equal")
ax.legend(loc="lower right", fontsize=8)

os.makedirs("demos/out", exist_ok=True)
fig.savefig("demos/out/two_lobe_linear.png", dpi=150)
print("wrote demos/out/two_lobe_linear.png")
