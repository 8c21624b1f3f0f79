from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conegam.exceptions import ConvergenceError, InvalidInputError
from conegam.family import Binomial, Poisson
from conegam.gam import (assemble_cone, component_curve, fit_gaussian, fit_irls,
                         line_search_segment)
from conegam.ordinal import build_ordinal_component
from conegam.splines import build_shape_component

from conftest import pava_with_ties


def newton_glm(X, y, family, iters=100):
    """Plain Newton-Raphson for a canonical-link GLM (oracle)."""
    beta = np.zeros(X.shape[1])
    beta[0] = family.link(np.clip(y.mean(), 0.05, 0.95 if family.name == "binomial" else np.inf))
    for _ in range(iters):
        eta = X @ beta
        mu = family.mean(eta)
        W = family.variance(mu)
        step = np.linalg.solve(X.T @ (W[:, None] * X), X.T @ (y - mu))
        beta = beta + step
        if np.max(np.abs(step)) < 1e-14:
            break
    return X @ beta


def test_single_component_cone_is_centered(rng):
    x = rng.uniform(size=30)
    cone = assemble_cone([build_ordinal_component(x, "incr", "x")])
    assert cone.d0 == 1
    np.testing.assert_allclose(cone.edges.sum(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(cone.L_basis.T @ cone.edges, 0.0, atol=1e-10)


def test_duplicate_components_drop_edges(rng):
    x = rng.uniform(size=25)
    c1 = build_shape_component(x, "s.incr", "a")
    c2 = build_shape_component(x, "s.incr", "b")
    cone = assemble_cone([c1, c2])
    assert cone.m == c1.edges.shape[1]
    assert len(cone.dropped) == c2.edges.shape[1]


def test_factor_adds_dimension(rng):
    x = rng.uniform(size=20)
    z = (np.arange(20) % 2).astype(float)
    cone = assemble_cone([build_ordinal_component(x, "incr", "x")], z[:, None], ["factor(z)1"])
    assert cone.d0 == 2


def test_collinear_covariate_named(rng):
    x = rng.uniform(size=20)
    Z = np.column_stack([x, 2 * x])
    with pytest.raises(InvalidInputError, match="'b'"):
        assemble_cone([], Z, ["a", "b"])


def test_gaussian_no_edges_is_ols(rng):
    Z = rng.normal(size=(40, 2))
    y = rng.normal(size=40)
    fit = fit_gaussian(y, assemble_cone([], Z))
    X = np.column_stack([np.ones(40), Z])
    np.testing.assert_allclose(fit.eta_hat, X @ np.linalg.lstsq(X, y, rcond=None)[0], atol=1e-10)


def test_gaussian_incr_examples():
    cone = assemble_cone([build_ordinal_component([1.0, 2.0, 3.0], "incr", "x")])
    np.testing.assert_allclose(fit_gaussian([3.0, 1.0, 2.0], cone).eta_hat, 2.0, atol=1e-12)
    np.testing.assert_allclose(fit_gaussian([1.0, 2.0, 5.0], cone).eta_hat, [1, 2, 5], atol=1e-12)


def test_gaussian_incr_with_ties_is_pava(rng):
    x = rng.integers(0, 10, 50).astype(float)
    y = rng.normal(size=50) + 0.1 * x
    fit = fit_gaussian(y, assemble_cone([build_ordinal_component(x, "incr", "x")]))
    np.testing.assert_allclose(fit.eta_hat, pava_with_ties(x, y), atol=1e-10)


def test_residuals_orthogonal_to_face(rng):
    x1, x2 = rng.uniform(size=(2, 60))
    z = rng.normal(size=60)
    y = np.exp(x1) - x2 ** 2 + z + rng.normal(scale=0.3, size=60)
    cone = assemble_cone([build_shape_component(x1, "s.incr", "x1"),
                          build_shape_component(x2, "s.decr.conc", "x2")], z[:, None], ["z"])
    fit = fit_gaussian(y, cone)
    r = y - fit.eta_hat
    np.testing.assert_allclose(cone.L_basis.T @ r, 0.0, atol=1e-8)
    np.testing.assert_allclose(cone.edges[:, fit.active_set].T @ r, 0.0, atol=1e-8)
    assert fit.residual_deviance <= fit.null_deviance + 1e-8
    assert fit.edf == fit.active_set.size + cone.d0


def test_inactive_edge_leaves_fit_unchanged(rng):
    x = np.sort(rng.uniform(size=30))
    y = 2 * x + rng.normal(scale=0.3, size=30)
    comp = build_ordinal_component(x, "incr", "x")
    fit = fit_gaussian(y, assemble_cone([comp]))
    # any direction with negative inner product with the residual stays inactive
    r = y - fit.eta_hat
    extra = replace(comp, label="extra", edges=-r[:, None], linear_part=np.ones((30, 1)),
                    evaluate=None, edge_sign=np.ones(1))
    fit2 = fit_gaussian(y, assemble_cone([comp, extra]))
    assert fit2.edge_coef[-1] == 0.0
    np.testing.assert_allclose(fit2.eta_hat, fit.eta_hat, atol=1e-9)


def test_component_curve_matches_design_values(rng):
    x = rng.uniform(size=40)
    y = np.sin(3 * x) + rng.normal(scale=0.1, size=40)
    cone = assemble_cone([build_shape_component(x, "s.conc", "x")])
    fit = fit_gaussian(y, cone)
    np.testing.assert_allclose(component_curve(fit, "x", x), fit.component_values["x"], atol=1e-10)
    with pytest.raises(InvalidInputError):
        component_curve(fit, "nope", x)


def test_irls_gaussian_equals_fit_gaussian(rng):
    x = rng.uniform(size=30)
    y = x + rng.normal(size=30)
    cone = assemble_cone([build_shape_component(x, "s.incr", "x")])
    a = fit_irls(y, "gaussian", cone)
    b = fit_gaussian(y, cone)
    np.testing.assert_allclose(a.eta_hat, b.eta_hat)
    assert a.irls_iterations == 1


def test_poisson_intercept_only(rng):
    y = rng.poisson(3.0, 50).astype(float)
    fit = fit_irls(y, Poisson(), assemble_cone([], n=50))
    np.testing.assert_allclose(fit.mu_hat, y.mean(), rtol=1e-8)


def test_binomial_two_by_two_closed_form(rng):
    g = np.repeat([0.0, 1.0], 40)
    y = np.concatenate([rng.random(40) < 0.3, rng.random(40) < 0.7]).astype(float)
    fit = fit_irls(y, Binomial(), assemble_cone([], g[:, None], ["g"]))
    p0, p1 = y[:40].mean(), y[40:].mean()
    logit = lambda p: np.log(p / (1 - p))  # noqa: E731
    assert fit.eta_hat[0] == pytest.approx(logit(p0), abs=1e-6)
    assert fit.eta_hat[-1] == pytest.approx(logit(p1), abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), fam=st.sampled_from(["poisson", "binomial"]))
def test_unconstrained_irls_matches_newton(seed, fam):
    rng = np.random.default_rng(seed)
    n = 60
    Z = rng.normal(size=(n, 2))
    X = np.column_stack([np.ones(n), Z])
    eta = X @ np.array([0.2, 0.5, -0.4])
    family = Poisson() if fam == "poisson" else Binomial()
    y = (rng.poisson(np.exp(eta)) if fam == "poisson" else rng.random(n) < family.mean(eta)).astype(float)
    fit = fit_irls(y, family, assemble_cone([], Z))
    ref = family.mean(newton_glm(X, y, family))
    np.testing.assert_allclose(fit.mu_hat, ref, rtol=1e-6)
    assert np.all(np.diff(fit.deviance_trace) <= 1e-9)


def test_constrained_poisson_monotone_and_decreasing_deviance(rng):
    x = rng.uniform(size=120)
    y = rng.poisson(np.exp(1 + x ** 2)).astype(float)
    fit = fit_irls(y, "poisson", assemble_cone([build_shape_component(x, "s.incr.conv", "x")]))
    order = np.argsort(x)
    assert np.all(np.diff(fit.eta_hat[order]) >= -1e-9)
    assert np.all(np.diff(fit.deviance_trace) <= 1e-9)


def test_binomial_separation_flag():
    x = np.arange(20, dtype=float)
    y = (x >= 10).astype(float)
    with pytest.warns(RuntimeWarning):
        fit = fit_irls(y, "binomial", assemble_cone([build_ordinal_component(x, "incr", "x")]))
    assert fit.separation


def test_max_iter_raises_with_trace(rng):
    x = rng.uniform(size=50)
    y = rng.poisson(np.exp(2 * x)).astype(float)
    with pytest.raises(ConvergenceError) as info:
        fit_irls(y, "poisson", assemble_cone([build_shape_component(x, "s.incr", "x")]),
                 tol=0.0, max_iter=3)
    assert len(info.value.trace) == 4


def test_line_search_quadratic_full_step():
    a = np.array([0.0, 0.0])
    b = np.array([1.0, 2.0])
    res = line_search_segment(a, b, lambda e: float(np.sum((e - b) ** 2)))
    assert res.t == 1.0 and not res.stalled


def test_line_search_interior_minimum_matches_grid():
    a = np.zeros(3)
    b = np.array([2.0, -1.0, 3.0])
    y = np.array([1.0, 0.0, 2.0])
    f = lambda e: float(np.sum(np.exp(e) - y * e))  # noqa: E731
    res = line_search_segment(a, b, f)
    grid = np.linspace(0, 1, 10 ** 6 + 1)
    vals = [f(a + t * (b - a)) for t in grid[::100]]
    t_grid = grid[::100][int(np.argmin(vals))]
    assert abs(res.t - t_grid) < 1e-4
    fine = np.linspace(max(0, t_grid - 1e-4), min(1, t_grid + 1e-4), 20001)
    t_fine = fine[int(np.argmin([f(a + t * (b - a)) for t in fine]))]
    assert abs(res.t - t_fine) < 1e-6
    assert f(res.eta) <= f(a)


def test_line_search_zero_length():
    a = np.ones(2)
    res = line_search_segment(a, a, lambda e: 0.0)
    assert res.t == 0.0
    np.testing.assert_array_equal(res.eta, a)


def test_line_search_stall():
    res = line_search_segment(np.zeros(2), np.ones(2), lambda e: np.inf)
    assert res.stalled and res.t == 0.0
