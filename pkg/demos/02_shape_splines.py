"""
Smooth shape-restricted regression with I-splines and C-splines.

Each shape symbol builds a cone component; fitting projects the data onto
the cone spanned by the component edges and an intercept.
"""

import numpy as np

from conegam import assemble_cone, build_shape_component, component_curve, fit_gaussian

rng = np.random.default_rng(2)
n = 120
x = np.sort(rng.uniform(size=n))
y = np.exp(2 * x) + rng.normal(scale=0.4, size=n)

grid = np.linspace(0, 1, 6)
for shape in ("s", "s.incr", "s.conv", "s.incr.conv"):
    fit = fit_gaussian(y, assemble_cone([build_shape_component(x, shape, "x")]))
    curve = component_curve(fit, "x", grid) + fit.alpha_hat[0]
    print(f"{shape:<12} edf = {fit.edf:5.2f}  SSR = {fit.ssr:7.3f}  curve:",
          np.round(curve, 2))
