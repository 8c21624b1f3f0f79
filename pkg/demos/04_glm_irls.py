"""
Poisson and binomial additive models with a shape-restricted component.

Iteratively reweighted cone projection with a line search; the deviance
never increases across iterations.
"""

import numpy as np

from conegam import Binomial, Poisson, assemble_cone, build_shape_component, fit_irls

rng = np.random.default_rng(4)
n = 300
x = rng.uniform(size=n)
z = rng.normal(size=n)

y = rng.poisson(np.exp(0.5 + 1.5 * x ** 2 + 0.3 * z)).astype(float)
cone = assemble_cone([build_shape_component(x, "s.incr.conv", "x")], z[:, None], ["z"])
fit = fit_irls(y, Poisson(), cone)
print("poisson : iterations", fit.irls_iterations, " deviance trace",
      np.round(fit.deviance_trace, 3))
print("          coefficient of z", round(float(fit.alpha_hat[1]), 3))

p = 1 / (1 + np.exp(-(4 * x - 2 + 0.5 * z)))
y = (rng.random(n) < p).astype(float)
fit = fit_irls(y, Binomial(), cone)
print("binomial: iterations", fit.irls_iterations, " residual deviance",
      round(fit.residual_deviance, 3), " null deviance", round(fit.null_deviance, 3))
