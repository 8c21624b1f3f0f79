"""
Unsmoothed orderings: isotonic, convex, tree and umbrella.

Ordinal components put one parameter on each distinct predictor value.
Tree order keeps every level at or above the placebo level 0; umbrella order
rises up to level 0 and falls after it.
"""

import numpy as np

from conegam import assemble_cone, build_ordinal_component, fit_gaussian

rng = np.random.default_rng(3)


def level_means(x, f):
    levels, first = np.unique(x, return_index=True)
    return dict(zip(levels.tolist(), np.round(f[first], 3).tolist()))


x = rng.integers(1, 9, 80).astype(float)
y = np.log(x) + rng.normal(scale=0.3, size=x.size)
fit = fit_gaussian(y, assemble_cone([build_ordinal_component(x, "incr", "x")]))
print("incr   ", level_means(x, fit.eta_hat))

# dose groups, 0 is placebo
dose = rng.integers(0, 4, 80).astype(float)
y = 0.4 * dose + rng.normal(scale=0.5, size=dose.size)
fit = fit_gaussian(y, assemble_cone([build_ordinal_component(dose, "tree", "dose")]))
print("tree   ", level_means(dose, fit.eta_hat))

pos = rng.integers(-3, 4, 90).astype(float)
y = -np.abs(pos) + rng.normal(scale=0.5, size=pos.size)
fit = fit_gaussian(y, assemble_cone([build_ordinal_component(pos, "umbrella", "pos")]))
print("umbrella", level_means(pos, fit.eta_hat))
