"""
Projecting onto a polyhedral convex cone.

A cone can be given by generators (nonnegative combinations of edges plus a
free linear part) or by constraints ``A theta >= 0``.  Both projections are
checked against brute-force enumeration of faces.
"""

import numpy as np

from conegam import (ConstraintCone, GeneratorCone, brute_force_projection,
                     project_constraint_cone, project_generator_cone)

rng = np.random.default_rng(1)

# nondecreasing vectors of length 6: first differences are nonnegative
n = 6
A = np.diff(np.eye(n), axis=0)
y = np.array([1.0, 3.0, 2.0, 2.5, 0.5, 4.0])
res = project_constraint_cone(y, ConstraintCone(A))
print("data      ", y)
print("projection", np.round(res.theta_hat, 4))
print("active constraints:", res.active_set)

# generator form with observation weights
edges = np.abs(rng.normal(size=(n, 3)))
cone = GeneratorCone(edges, np.ones((n, 1)))
w = rng.uniform(0.5, 2.0, n)
fast = project_generator_cone(y, cone, w).theta_hat
slow = brute_force_projection(y, cone, w)
print("max |active-set - enumeration| =", np.max(np.abs(fast - slow)))
