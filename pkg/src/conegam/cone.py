"""
Weighted least-squares projection onto polyhedral convex cones.

Two descriptions of a cone are supported:

* generator form, ``{v + sum_j b_j e_j : v in L, b_j >= 0}``, handled by
  :func:`project_generator_cone`;
* constraint form, ``{theta : A theta >= 0, B theta = 0}``, handled by
  :func:`project_constraint_cone` through the polar cone.

Vectors are stored as matrix *columns*: an ``(n, m)`` array holds ``m``
edges of length ``n``.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceError, InvalidInputError, SizeError

__all__ = [
    "GeneratorCone",
    "ConstraintCone",
    "ConeProjectionResult",
    "project_generator_cone",
    "project_constraint_cone",
    "brute_force_projection",
]

KKT_TOL = 1e-8
COEF_TOL = 1e-10
BRUTE_FORCE_MAX_EDGES = 20


def _as_columns(vectors, n=None):
    arr = np.asarray(vectors, dtype=float)
    if arr.size == 0:
        return np.zeros((0 if n is None else n, 0))
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidInputError("expected a 2-D array of column vectors")
    if n is not None and arr.shape[0] != n:
        raise InvalidInputError(
            f"vectors have length {arr.shape[0]}, expected {n}")
    return arr


def _orthonormal_basis(V):
    """Orthonormal basis of the column space of `V` (rank-revealing QR)."""
    if V.shape[1] == 0:
        return np.zeros((V.shape[0], 0))
    q, r, _ = scipy.linalg.qr(V, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > d[0] * 1e-12)) if d.size and d[0] > 0 else 0
    return q[:, :rank]


@dataclass(frozen=True)
class GeneratorCone:
    """Cone ``{v + sum_j b_j e_j : v in span(linear_basis), b_j >= 0}``.

    Parameters
    ----------
    edges : array_like, shape (n, m)
        Generators, one per column.  They are replaced by their residuals
        after projection onto the linear space.
    linear_basis : array_like, shape (n, d), optional
        Linearly independent columns spanning the linear space.
    """

    edges: np.ndarray
    linear_basis: np.ndarray = None

    def __post_init__(self):
        E = np.asarray(self.edges, dtype=float)
        if E.ndim == 1 and E.size:
            E = E[:, None]
        if self.linear_basis is None or np.size(self.linear_basis) == 0:
            n = E.shape[0] if E.ndim == 2 else None
            if n is None:
                raise InvalidInputError(
                    "cannot infer dimension from an empty cone; pass "
                    "linear_basis or use zeros((n, 0)) for edges")
            V = np.zeros((n, 0))
        else:
            V = _as_columns(self.linear_basis)
            n = V.shape[0]
        E = _as_columns(E, n) if E.size else np.zeros((n, 0))
        if E.ndim == 2 and E.shape[0] != n:
            raise InvalidInputError(f"edges have length {E.shape[0]}, expected {n}")
        if V.shape[1] and np.linalg.matrix_rank(V) < V.shape[1]:
            raise InvalidInputError("linear_basis columns are linearly dependent")
        raw_norms = np.linalg.norm(E, axis=0)
        if V.shape[1]:
            Q = _orthonormal_basis(V)
            E = E - Q @ (Q.T @ E)
        if E.shape[1]:
            norms = np.linalg.norm(E, axis=0)
            bad = np.flatnonzero(norms <= 1e-10 * np.maximum(raw_norms, 1e-300))
            if bad.size:
                raise InvalidInputError(
                    f"edges {bad.tolist()} are zero or lie in the linear space")
        object.__setattr__(self, "edges", E)
        object.__setattr__(self, "linear_basis", V)

    @property
    def n(self):
        return self.linear_basis.shape[0]

    @property
    def m(self):
        return self.edges.shape[1]


@dataclass(frozen=True)
class ConstraintCone:
    """Cone ``{theta : A theta >= 0, B theta = 0}``.

    The rows of `A` and `B` together must be linearly independent.
    """

    A: np.ndarray
    B: np.ndarray = None
    n: int = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = self.n
        if n is None:
            if A.ndim == 2 and A.shape[1]:
                n = A.shape[1]
            elif self.B is not None and np.ndim(self.B) == 2:
                n = np.shape(self.B)[1]
            else:
                raise InvalidInputError("cannot infer the cone dimension")
        A = A.reshape(-1, n) if A.size else np.zeros((0, n))
        B = (np.asarray(self.B, dtype=float).reshape(-1, n)
             if self.B is not None and np.size(self.B) else np.zeros((0, n)))
        M = np.vstack([A, B])
        if M.shape[0] > n or (M.shape[0] and np.linalg.matrix_rank(M) < M.shape[0]):
            raise InvalidInputError(
                "rows of A and B must form a linearly independent set")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "n", int(n))


@dataclass(frozen=True)
class ConeProjectionResult:
    """Outcome of a cone projection.

    For generator cones `edge_coef` holds the nonnegative weights on the
    edges and `linear_coef` the free weights on the linear basis, so that
    ``theta_hat = edges @ edge_coef + linear_basis @ linear_coef``.  For
    constraint cones they hold the dual multipliers on the rows of ``A``
    and ``B``.
    """

    theta_hat: np.ndarray
    edge_coef: np.ndarray
    linear_coef: np.ndarray
    active_set: np.ndarray
    iterations: int
    kkt_violation: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)


def _check_weights(weights, n):
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,):
        raise InvalidInputError(f"weights have length {w.size}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise InvalidInputError("weights must be strictly positive and finite")
    return w


def _solve_spd(G, c):
    try:
        cf = scipy.linalg.cho_factor(G, check_finite=False)
        return scipy.linalg.cho_solve(cf, c, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(G, c, rcond=None)[0]


def _nnls_active_set(G, c, usable, kkt_tol, coef_tol, max_iter, passive=None):
    """Primal active-set solve of ``min b'Gb/2 - c'b`` over ``b >= 0``.

    `G` is the Gram matrix of unit-norm generators, so ``c - G b`` is the
    vector of inner products between the residual and each generator.
    """
    m = c.size
    P = np.zeros(m, dtype=bool)
    b = np.zeros(m)
    if passive is not None and passive.any():
        s = _solve_spd(G[np.ix_(passive, passive)], c[passive])
        if np.all(s > coef_tol):
            P = passive.copy()
            b[P] = s
    blocked = np.zeros(m, dtype=bool)
    iterations = 0
    while True:
        grad = c - G @ b
        score = np.where(P | ~usable | blocked, -np.inf, grad)
        j = int(np.argmax(score)) if m else 0
        if m == 0 or score[j] <= kkt_tol:
            break
        iterations += 1
        if iterations > max_iter:
            raise ConvergenceError(
                "active-set iteration cap exceeded",
                best=b.copy(), violation=float(score[j]))
        P[j] = True
        b_before = b.copy()
        while True:
            s = np.zeros(m)
            s[P] = _solve_spd(G[np.ix_(P, P)], c[P])
            if np.all(s[P] > coef_tol):
                b = s
                break
            hit = P & (s <= coef_tol)
            step = np.min(b[hit] / (b[hit] - s[hit]))
            b = b + step * (s - b)
            P &= b > coef_tol
            b[~P] = 0.0
        if not P[j] and np.array_equal(b, b_before):
            # generator numerically dependent on the current face
            blocked[j] = True
        else:
            blocked[:] = False
    return b, P, iterations


def _project_core(y, E, V, kkt_tol=KKT_TOL, coef_tol=COEF_TOL, max_iter=None):
    """Unweighted projection of `y` onto ``span(V) + cone(E)``.

    Returns theta, edge coefficients (for `E` as given), linear
    coefficients, the boolean active mask, iteration count and the final
    KKT violation.
    """
    n, m = E.shape
    Q = _orthonormal_basis(V)
    y_r = y - Q @ (Q.T @ y)
    E_r = E - Q @ (Q.T @ E) if m else E
    ynorm = np.linalg.norm(y_r)
    yscale = max(np.linalg.norm(y), 1e-300)

    b = np.zeros(m)
    P = np.zeros(m, dtype=bool)
    iterations = 0
    violation = 0.0
    if m and ynorm > 1e-14 * yscale:
        enorm = np.linalg.norm(E_r, axis=0)
        emax = max(float(enorm.max()), 1e-300)
        usable = enorm > 1e-12 * emax
        U = np.where(usable, E_r / np.where(usable, enorm, 1.0), 0.0)
        G = U.T @ U
        c = U.T @ y_r
        tol = kkt_tol * ynorm
        ctol = coef_tol * ynorm
        cap = max_iter if max_iter is not None else 50 * max(m, 1)
        bu = np.zeros(m)
        for _ in range(4):
            bu, P, it = _nnls_active_set(G, c, usable, tol, ctol, cap, passive=P)
            iterations += it
            # polish on the final face with a QR-based solve
            if P.any():
                sol = np.linalg.lstsq(U[:, P], y_r, rcond=None)[0]
                if np.all(sol > 0):
                    bu = np.zeros(m)
                    bu[P] = sol
            resid = y_r - U @ bu
            grad = np.where(usable, U.T @ resid, 0.0)
            grad[P] = 0.0
            violation = float(max(grad.max(initial=0.0), 0.0))
            if violation <= tol:
                break
        else:
            raise ConvergenceError(
                "projection did not satisfy the KKT conditions",
                best=bu / np.where(usable, enorm, 1.0),
                violation=violation / ynorm)
        b = np.where(usable, bu / np.where(usable, enorm, 1.0), 0.0)
        violation /= ynorm
    theta = Q @ (Q.T @ y)
    if m:
        theta = theta + E_r @ b
    if V.shape[1]:
        alpha = np.linalg.lstsq(V, theta - E @ b, rcond=None)[0]
    else:
        alpha = np.zeros(0)
    return theta, b, alpha, P, iterations, violation


def project_generator_cone(y, cone, weights=None, max_iter=None):
    """
    Weighted projection of `y` onto a generator-form cone.

    Minimizes ``sum_i w_i (y_i - theta_i)**2`` over
    ``{v + sum_j b_j e_j : v in L, b_j >= 0}`` with a primal active-set
    iteration: start from the projection onto ``L``, repeatedly add the
    edge with the largest positive inner product with the residual, and
    drop edges whose coefficient would turn negative.

    Parameters
    ----------
    y : array_like, shape (n,)
    cone : GeneratorCone
    weights : array_like, shape (n,), optional
        Strictly positive observation weights (default all ones).
    max_iter : int, optional
        Cap on edge additions (default ``50 * m``).

    Returns
    -------
    ConeProjectionResult
        `edge_coef` applies to ``cone.edges`` and `linear_coef` to
        ``cone.linear_basis``.

    Raises
    ------
    InvalidInputError
        On non-positive weights or mismatched shapes.
    ConvergenceError
        If the cap is hit before the KKT conditions hold.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != cone.n:
        raise InvalidInputError(f"y has length {y.size}, cone has n = {cone.n}")
    w = _check_weights(weights, cone.n)
    sw = np.sqrt(w)
    theta, b, alpha, P, it, viol = _project_core(
        sw * y, sw[:, None] * cone.edges, sw[:, None] * cone.linear_basis,
        max_iter=max_iter)
    theta = theta / sw
    return ConeProjectionResult(
        theta_hat=theta, edge_coef=b, linear_coef=alpha,
        active_set=np.flatnonzero(b > 0), iterations=it, kkt_violation=viol)


def _project_polar(y, A, B, weights=None, max_iter=None):
    """Projection onto ``{theta : A theta >= 0, B theta = 0}`` without a rank check.

    Uses the Moreau decomposition: the residual is the projection onto the
    polar cone, which is generated by the negated rows of `A` with the rows
    of `B` spanning its linear part.  Redundant rows are allowed.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    w = _check_weights(weights, n)
    sw = np.sqrt(w)
    At = (np.asarray(A, dtype=float).reshape(-1, n) / sw).T
    Bt = (np.asarray(B, dtype=float).reshape(-1, n) / sw).T if B is not None \
        else np.zeros((n, 0))
    u = sw * y
    polar, lam, nu, P, it, viol = _project_core(u, -At, Bt, max_iter=max_iter)
    theta = (u - polar) / sw
    return ConeProjectionResult(
        theta_hat=theta, edge_coef=lam, linear_coef=nu,
        active_set=np.flatnonzero(lam > 0), iterations=it, kkt_violation=viol)


def project_constraint_cone(y, cone, weights=None, max_iter=None):
    """
    Weighted projection of `y` onto ``{theta : A theta >= 0, B theta = 0}``.

    Returns a :class:`ConeProjectionResult` whose `edge_coef` are the
    nonnegative multipliers on the rows of ``A`` and whose `linear_coef`
    are the multipliers on the rows of ``B``; `active_set` lists the rows
    of ``A`` with positive multiplier.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != cone.n:
        raise InvalidInputError(f"y has length {y.size}, cone has n = {cone.n}")
    return _project_polar(y, cone.A, cone.B, weights, max_iter)


def brute_force_projection(y, cone, weights=None):
    """
    Exact projection by enumerating every face of a generator cone.

    For each subset of edges the least-squares fit on the subset joined
    with the linear space is computed; among fits with nonnegative edge
    coefficients the one with the smallest objective wins.  Exponential
    in the number of edges, so intended only as a verification oracle.

    Returns
    -------
    ndarray, shape (n,)
        The projection.

    Raises
    ------
    SizeError
        If the cone has more than 20 edges.
    """
    if cone.m > BRUTE_FORCE_MAX_EDGES:
        raise SizeError(
            f"brute force limited to {BRUTE_FORCE_MAX_EDGES} edges, got {cone.m}")
    y = np.asarray(y, dtype=float).ravel()
    w = _check_weights(weights, cone.n)
    sw = np.sqrt(w)
    ys = sw * y
    E = sw[:, None] * cone.edges
    V = sw[:, None] * cone.linear_basis
    d = V.shape[1]
    best, best_obj = None, np.inf
    for size in range(cone.m + 1):
        for subset in itertools.combinations(range(cone.m), size):
            X = np.hstack([V, E[:, list(subset)]])
            if X.shape[1] == 0:
                fit = np.zeros_like(ys)
            else:
                coef, _, rank, _ = np.linalg.lstsq(X, ys, rcond=None)
                if rank < X.shape[1]:
                    continue
                if np.any(coef[d:] < -1e-12 * max(1.0, np.abs(coef).max())):
                    continue
                fit = X @ coef
            obj = float(np.sum((ys - fit) ** 2))
            if obj < best_obj:
                best, best_obj = fit, obj
    return best / sw
