"""
Solve
   -Laplace(u) = 1   on the unit disk
            u  = 0   on the boundary
and compare against the closed form u = (1 - r^2)/4 over a ladder of
mesh sizes.  P1 elements on a quasi-uniform triangulation give O(h^2)
nodal errors, so each halving of h should shrink the max error by
about 4.
"""
import time

import numpy as np

from poissonctl import Control, ScalarField, generate_disk, resolvent

hs = [0.2, 0.1, 0.05, 0.025]
errors = []

print("      h   vertices   max |u_h - u|    ratio")
prev = None
for h in hs:
    t0 = time.time()
    mesh = generate_disk(1.0, h)
    f = Control(density=ScalarField(mesh, np.ones(mesh.n_vertices)))
    u = resolvent(mesh, f)
    r2 = np.sum(mesh.vertices**2, axis=1)
    err = np.abs(u.values - (1.0 - r2) / 4.0).max()
    ratio = "      -" if prev is None else "%7.2f" % (prev / err)
    print("%7.3f   %8d   %13.3e  %s   (%.2fs)" % (h, mesh.n_vertices, err, ratio, time.time() - t0))
    errors.append(err)
    prev = err

slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
print("\nleast-squares slope of log(err) vs log(h): %.2f (expect 2)" % slope)
