"""
Subspace alignment and the geodesic flow kernel
===============================================

Two 2-D subspaces of R^5 are compared through their principal angles.
Subspace alignment maps one basis onto the other in closed form, and the
geodesic flow kernel integrates projections along the path between them.
"""

import numpy as np

from mmdadapt.baselines import gfk_compute, sa_align, sa_objective
from mmdadapt.numerics import Subspace, principal_angles

rng = np.random.default_rng(3)
U = Subspace.from_basis(np.linalg.qr(rng.standard_normal((5, 2)))[0])
V = Subspace.from_basis(np.linalg.qr(U.basis + 0.4 * rng.standard_normal((5, 2)))[0])

print("principal angles (deg):", np.degrees(principal_angles(U, V)).round(2))

# the alignment M = U'V is the least-squares map from U's basis to V's
M = sa_align(U, V)
print("alignment matrix:\n", M.round(3))
print("misfit at M:", round(sa_objective(U, V, M), 6),
      " at identity:", round(sa_objective(U, V, np.eye(2)), 6))

# G interpolates between the two projectors; its trace is the subspace dimension
G = gfk_compute(U, V).G
print("trace of G:", round(np.trace(G), 6))
print("distance to the midpoint of the projectors:",
      round(np.linalg.norm(G - (U.basis @ U.basis.T + V.basis @ V.basis.T) / 2), 4))
