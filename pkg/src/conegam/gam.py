"""
Additive models under shape constraints: cone assembly and fitting.

The predictor function ``eta = phi_1 + ... + phi_L + Z alpha`` is
constrained to the composite cone

    C = {v + sum_j b_j e_j : v in L, b_j >= 0},

where ``L`` collects the intercept, each component's unconstrained
directions and the covariate columns, and the edges ``e_j`` are the
component edges made orthogonal to ``L``.  Gaussian models are fitted by a
single projection; Poisson and binomial models by iteratively re-weighted
cone projection with a line search along each step.
"""

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import inference
from .cone import GeneratorCone, _orthonormal_basis, project_generator_cone
from .exceptions import ConvergenceError, InvalidInputError
from .family import Gaussian, get_family

__all__ = [
    "CompositeCone",
    "FitResult",
    "LineSearchResult",
    "assemble_cone",
    "fit_gaussian",
    "fit_irls",
    "line_search_segment",
    "component_curve",
]

DEFAULT_C = 1.2
IRLS_TOL = 1e-8
IRLS_MAX_ITER = 200
SEPARATION_EPS = 1e-8
_DEP_TOL = 1e-9


@dataclass(frozen=True)
class CompositeCone:
    """
    Composite cone assembled from components and covariates.

    Attributes
    ----------
    edges : ndarray, shape (n, m)
        Component edges after projection onto the complement of ``L``.
    raw_edges : ndarray, shape (n, m)
        The same edges before orthogonalization.
    edge_owner : ndarray of int, shape (m,)
        Index of the component each edge came from.
    L_basis : ndarray, shape (n, d0)
        Independent columns spanning ``L``.
    L_names : tuple of str
    L_owner : ndarray of int, shape (d0,)
        Component index per column, or -1 for the intercept and covariates.
    Z_cols : ndarray of int
        Positions of the intercept and covariate columns within `L_basis`.
    components : tuple
    dropped : tuple
        ``(label, edge_index, reason)`` records for edges left out.
    """

    edges: np.ndarray
    raw_edges: np.ndarray
    edge_owner: np.ndarray
    L_basis: np.ndarray
    L_names: tuple
    L_owner: np.ndarray
    L_source: tuple
    Z_cols: np.ndarray
    components: tuple
    edge_to_L: np.ndarray
    dropped: tuple = ()

    @property
    def n(self):
        return self.L_basis.shape[0]

    @property
    def m(self):
        return self.edges.shape[1]

    @property
    def d0(self):
        return self.L_basis.shape[1]

    @property
    def Z_names(self):
        return tuple(self.L_names[i] for i in self.Z_cols)

    def generator_cone(self):
        return GeneratorCone(self.edges, self.L_basis)

    def X0_cols(self):
        mask = np.ones(self.d0, dtype=bool)
        mask[self.Z_cols] = False
        return np.flatnonzero(mask)


def _is_dependent(Q, v):
    nv = np.linalg.norm(v)
    if nv == 0:
        return True
    r = v - Q @ (Q.T @ v) if Q.shape[1] else v
    return np.linalg.norm(r) <= _DEP_TOL * nv


def assemble_cone(components, Z=None, z_names=None, intercept=True, n=None):
    """
    Build the composite cone from per-predictor components and covariates.

    Parameters
    ----------
    components : list of ConeComponent
    Z : array_like, shape (n, p), optional
        Parametrically modeled covariates (no intercept column).
    z_names : list of str, optional
        Names for the columns of `Z`.
    intercept : bool
        Add the constant column as the first covariate, reported as
        ``"(Intercept)"``.

    Returns
    -------
    CompositeCone

    Raises
    ------
    InvalidInputError
        If a covariate column is collinear with the columns before it.
    """
    components = list(components)
    if n is None:
        if components:
            n = components[0].edges.shape[0]
        elif Z is not None:
            n = np.asarray(Z).shape[0]
        else:
            raise InvalidInputError("cannot infer n: no components and no Z")
    for comp in components:
        if comp.edges.shape[0] != n or comp.linear_part.shape[0] != n:
            raise InvalidInputError(
                f"component {comp.label!r} has length {comp.edges.shape[0]}, expected {n}")
    if Z is None:
        Z = np.zeros((n, 0))
    Z = np.asarray(Z, dtype=float).reshape(n, -1)
    if z_names is None:
        z_names = [f"z{j + 1}" for j in range(Z.shape[1])]
    if len(z_names) != Z.shape[1]:
        raise InvalidInputError("z_names does not match the columns of Z")

    cols, names, owners, sources = [], [], [], []
    Q = np.zeros((n, 0))

    def push(v, name, owner, source):
        nonlocal Q
        cols.append(v)
        names.append(name)
        owners.append(owner)
        sources.append(source)
        Q = _orthonormal_basis(np.column_stack(cols))

    if intercept:
        push(np.ones(n), "(Intercept)", -1, None)
    for ci, comp in enumerate(components):
        for k in range(comp.linear_part.shape[1]):
            v = comp.linear_part[:, k]
            if not _is_dependent(Q, v):
                push(v, f"{comp.label}:{comp.linear_names[k]}", ci, k)
    z_positions = [0] if intercept else []
    for j in range(Z.shape[1]):
        v = Z[:, j]
        if _is_dependent(Q, v):
            raise InvalidInputError(
                f"covariate {z_names[j]!r} is collinear with the other model terms")
        z_positions.append(len(cols))
        push(v, z_names[j], -1, None)

    L = np.column_stack(cols) if cols else np.zeros((n, 0))
    edges, raw, owner, dropped = [], [], [], []
    kept_unit = []
    for ci, comp in enumerate(components):
        for k in range(comp.edges.shape[1]):
            e = comp.edges[:, k]
            ne = np.linalg.norm(e)
            r = e - Q @ (Q.T @ e) if Q.shape[1] else e.copy()
            nr = np.linalg.norm(r)
            if ne == 0 or nr <= _DEP_TOL * ne:
                dropped.append((comp.label, k, "lies in the linear space"))
                continue
            u = r / nr
            if any(np.linalg.norm(u - w) <= 1e-10 for w in kept_unit):
                dropped.append((comp.label, k, "duplicate of an earlier edge"))
                continue
            kept_unit.append(u)
            edges.append(r)
            raw.append(e)
            owner.append(ci)
    E = np.column_stack(edges) if edges else np.zeros((n, 0))
    R = np.column_stack(raw) if raw else np.zeros((n, 0))
    if L.shape[1] and E.shape[1]:
        edge_to_L = np.linalg.lstsq(L, R - E, rcond=None)[0]
    else:
        edge_to_L = np.zeros((L.shape[1], E.shape[1]))
    return CompositeCone(
        edges=E, raw_edges=R, edge_owner=np.array(owner, dtype=int),
        L_basis=L, L_names=tuple(names), L_owner=np.array(owners, dtype=int),
        L_source=tuple(sources), Z_cols=np.array(z_positions, dtype=int),
        components=tuple(components), edge_to_L=edge_to_L,
        dropped=tuple(dropped))


@dataclass(frozen=True)
class FitResult:
    """Fitted constrained additive model.

    ``eta_hat = cone.L_basis @ linear_coef + cone.edges @ edge_coef``.
    """

    y: np.ndarray
    eta_hat: np.ndarray
    mu_hat: np.ndarray
    alpha_hat: np.ndarray
    edge_coef: np.ndarray
    linear_coef: np.ndarray
    active_set: np.ndarray
    edf: float
    null_deviance: float
    residual_deviance: float
    sigma2_hat: float
    family: object
    weights: np.ndarray
    cone: CompositeCone
    irls_iterations: int = 1
    c: float = DEFAULT_C
    working_response: np.ndarray = None
    deviance_trace: tuple = ()
    separation: bool = False
    component_values: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.y.size

    @property
    def d0(self):
        return self.cone.d0

    @property
    def alpha_names(self):
        return self.cone.Z_names

    @property
    def ssr(self):
        return float(np.sum((self.y - self.mu_hat) ** 2))


def _component_values(cone, b, gamma):
    """Per-component fitted vectors at the design points."""
    gamma_raw = gamma - cone.edge_to_L @ b if cone.m else gamma
    out = {}
    for ci, comp in enumerate(cone.components):
        val = np.zeros(cone.n)
        own = cone.edge_owner == ci
        if own.any():
            val += cone.raw_edges[:, own] @ b[own]
        lown = cone.L_owner == ci
        if lown.any():
            val += cone.L_basis[:, lown] @ gamma_raw[lown]
        out[comp.label] = val
    return out


def component_curve(fit, label, x_new):
    """
    Fitted component `label` evaluated at new predictor values.

    Smooth components reuse their basis recipe; ordinal components are
    linearly interpolated between fitted level values.  The result is
    defined up to the additive constant absorbed by the intercept.
    """
    cone = fit.cone
    labels = [c.label for c in cone.components]
    if label not in labels:
        raise InvalidInputError(f"{label!r} is not a nonparametric term of the model")
    ci = labels.index(label)
    comp = cone.components[ci]
    x_new = np.asarray(x_new, dtype=float).ravel()
    if comp.ordinal:
        vals = fit.component_values[label]
        levels, first = np.unique(comp.x, return_index=True)
        return np.interp(x_new, levels, vals[first])
    b = fit.edge_coef
    gamma_raw = fit.linear_coef - cone.edge_to_L @ b if cone.m else fit.linear_coef
    E_new, V_new = comp.evaluate(x_new)
    val = np.zeros(x_new.size)
    own = np.flatnonzero(cone.edge_owner == ci)
    if own.size:
        # edges of this component kept in the cone, in component order
        kept = _kept_edge_indices(cone, ci)
        val += E_new[:, kept] @ b[own]
    for pos in np.flatnonzero(cone.L_owner == ci):
        val += V_new[:, cone.L_source[pos]] * gamma_raw[pos]
    return val


def _kept_edge_indices(cone, ci):
    label = cone.components[ci].label
    gone = {k for lab, k, _ in cone.dropped if lab == label}
    total = cone.components[ci].edges.shape[1]
    return [k for k in range(total) if k not in gone]


def _make_fit(y, family, cone, eta, b, gamma, weights, c, iterations=1,
              z=None, trace=(), separation=False):
    mu = family.inverse_link(eta)
    active = np.flatnonzero(b > 0)
    edf = active.size + cone.d0
    resid_dev = family.deviance(y, mu)
    null_dev = inference.null_deviance(y, family)
    sigma2 = np.nan
    if isinstance(family, Gaussian):
        denom = y.size - cone.d0 - c * edf
        if denom > 0:
            sigma2 = float(np.sum((y - mu) ** 2)) / denom
    # covariate coefficients in the raw-edge parametrization of eta
    gamma_raw = gamma - cone.edge_to_L @ b if cone.m else gamma
    return FitResult(
        y=y, eta_hat=eta, mu_hat=mu, alpha_hat=gamma_raw[cone.Z_cols].copy(),
        edge_coef=b, linear_coef=gamma, active_set=active, edf=float(edf),
        null_deviance=null_dev, residual_deviance=resid_dev, sigma2_hat=sigma2,
        family=family, weights=weights, cone=cone, irls_iterations=iterations,
        c=c, working_response=y if z is None else z, deviance_trace=tuple(trace),
        separation=separation, component_values=_component_values(cone, b, gamma))


def fit_gaussian(y, cone, weights=None, c=DEFAULT_C):
    """
    Least-squares fit: one projection of `y` onto the composite cone.

    Parameters
    ----------
    y : array_like, shape (n,)
    cone : CompositeCone
    weights : array_like, optional
        Positive observation weights.
    c : float
        Multiplier in the variance estimate ``SSR / (n - d0 - c * EDF)``.

    Returns
    -------
    FitResult
    """
    inference.check_c(c)
    y = Gaussian().validate(y)
    if y.size != cone.n:
        raise InvalidInputError(f"y has length {y.size}, cone has n = {cone.n}")
    if y.size <= cone.d0:
        raise InvalidInputError(
            f"need more observations ({y.size}) than linear-space dimension ({cone.d0})")
    proj = project_generator_cone(y, cone.generator_cone(), weights)
    w = np.ones(y.size) if weights is None else np.asarray(weights, dtype=float)
    return _make_fit(y, Gaussian(), cone, proj.theta_hat, proj.edge_coef,
                     proj.linear_coef, w, c)


class LineSearchResult(NamedTuple):
    eta: np.ndarray
    t: float
    stalled: bool


def line_search_segment(eta_k, eta_star, negloglik, xtol=1e-7):
    """
    Minimize `negloglik` on the segment from `eta_k` to `eta_star`.

    A bounded scalar search on ``t in [0, 1]`` is followed by a comparison
    with both endpoints, so an optimum at ``t = 1`` is returned exactly.

    Returns
    -------
    LineSearchResult
        ``(eta, t, stalled)``; `stalled` is set when the objective is not
        finite anywhere inside the segment.
    """
    eta_k = np.asarray(eta_k, dtype=float)
    d = np.asarray(eta_star, dtype=float) - eta_k
    if not np.any(d):
        return LineSearchResult(eta_k, 0.0, False)

    def f(t):
        v = negloglik(eta_k + t * d)
        return v if np.isfinite(v) else np.inf

    f0 = f(0.0)
    probes = [f(t) for t in (0.25, 0.5, 0.75, 1.0)]
    if not np.isfinite(f0) or not np.any(np.isfinite(probes)):
        return LineSearchResult(eta_k, 0.0, True)
    res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": xtol})
    candidates = [(probes[-1], 1.0), (f(res.x), float(res.x)), (f0, 0.0)]
    best_val, best_t = min(candidates, key=lambda vt: vt[0])
    return LineSearchResult(eta_k + best_t * d, best_t, False)


def fit_irls(y, family, cone, tol=IRLS_TOL, max_iter=IRLS_MAX_ITER, c=DEFAULT_C):
    """
    Fit a Poisson or binomial model by iteratively re-weighted cone projection.

    At each step the negative log-likelihood is replaced by its quadratic
    expansion at the current ``eta``, whose minimizer over the cone is a
    weighted projection of the working response ``eta + (y - mu) / v`` with
    weights ``v = b''(eta)``.  The next iterate minimizes the likelihood on
    the segment to that minimizer.  Iteration stops when
    ``|dev_k - dev_{k+1}| / (|dev_k| + 0.1) < tol``.

    Raises
    ------
    ConvergenceError
        When `max_iter` steps pass without meeting the stopping rule; the
        deviance trace is attached.
    """
    family = get_family(family)
    inference.check_c(c)
    if isinstance(family, Gaussian):
        return fit_gaussian(y, cone, c=c)
    y = family.validate(y)
    if y.size != cone.n:
        raise InvalidInputError(f"y has length {y.size}, cone has n = {cone.n}")
    if y.size <= cone.d0:
        raise InvalidInputError(
            f"need more observations ({y.size}) than linear-space dimension ({cone.d0})")
    gcone = cone.generator_cone()
    L = cone.L_basis

    def nll(eta):
        return family.negloglik(eta, y)

    gamma = np.linalg.lstsq(L, family.start(y), rcond=None)[0]
    b = np.zeros(cone.m)
    eta = L @ gamma
    dev = family.deviance_eta(y, eta)
    trace = [dev]
    converged = False
    iterations = 0
    z = w = None
    for iterations in range(1, max_iter + 1):
        mu = family.inverse_link(eta)
        w = np.maximum(family.variance(mu), 1e-12)
        z = eta + (y - mu) / w
        proj = project_generator_cone(z, gcone, w)
        step = line_search_segment(eta, proj.theta_hat, nll)
        t = step.t
        eta_new = step.eta
        b = (1 - t) * b + t * proj.edge_coef
        gamma = (1 - t) * gamma + t * proj.linear_coef
        if t == 1.0:
            b, gamma = proj.edge_coef, proj.linear_coef
        dev_new = family.deviance_eta(y, eta_new)
        trace.append(dev_new)
        done = abs(dev - dev_new) / (abs(dev) + 0.1) < tol or step.stalled
        eta, dev = eta_new, dev_new
        if done:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations",
            best=eta, violation=abs(trace[-2] - trace[-1]), trace=trace)

    # settle on the face of the last projection when that does not cost deviance
    mu = family.inverse_link(eta)
    w = np.maximum(family.variance(mu), 1e-12)
    z = eta + (y - mu) / w
    proj = project_generator_cone(z, gcone, w)
    dev_star = family.deviance_eta(y, proj.theta_hat)
    if dev_star <= dev:
        eta, b, gamma, dev = proj.theta_hat, proj.edge_coef, proj.linear_coef, dev_star
        trace.append(dev)
        mu = family.inverse_link(eta)
        w = np.maximum(family.variance(mu), 1e-12)
        z = eta + (y - mu) / w
    b = np.where(b > 0, b, 0.0)
    separation = False
    if family.name == "binomial":
        mu = family.inverse_link(eta)
        separation = bool(np.any((mu < SEPARATION_EPS) | (mu > 1 - SEPARATION_EPS)))
        if separation:
            warnings.warn("fitted probabilities numerically 0 or 1", RuntimeWarning,
                          stacklevel=2)
    return _make_fit(y, family, cone, eta, b, gamma, w, c, iterations, z,
                     trace, separation)
