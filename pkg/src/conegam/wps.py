"""
Warped-plane splines: bivariate regression monotone in both predictors.

The surface is piecewise bilinear on the knot rectangles, written in the
basis ``[1 | B1 | B2 | B12]`` of linear hat functions (with the first hat
of each axis replaced by the constant) and their products.  Its values on
the knot grid are a linear, invertible function of the coefficients, and
the surface is monotone in an axis exactly when every grid difference
along that axis has the required sign, which gives
``(k1 - 1) k2 + k1 (k2 - 1) = 2 k1 k2 - k1 - k2`` linear constraints.

An optional penalty on squared differences of adjacent slopes allows many
knots and empty cells; the penalty parameter can be chosen by GCV.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import math

import numpy as np
import scipy.linalg

from .cone import _project_polar
from .exceptions import ConeGamError, InvalidInputError
from .family import Gaussian
from .inference import _table, check_c, sigma2_formula
from .splines import KnotSequence, default_knots

__all__ = [
    "WpsDesign",
    "WpsFit",
    "DIRECTIONS",
    "hat_basis",
    "make_wps_bases",
    "grid_values_map",
    "wps_constraint_matrix",
    "wps_penalty_matrix",
    "fit_wps",
    "gcv_score",
    "select_lambda",
]

DIRECTIONS = ("dd", "ii", "di")


def hat_basis(x, knots):
    """Linear hat functions on `knots` evaluated at `x`, shape ``(n, k)``."""
    t = np.asarray(knots.knots if isinstance(knots, KnotSequence) else knots, float)
    x = np.asarray(x, dtype=float).ravel()
    eye = np.eye(t.size)
    return np.column_stack([np.interp(x, t, eye[j]) for j in range(t.size)])


def _tensor_columns(H1, H2):
    """``[1 | B1 | B2 | B12]`` from full hat matrices (first hat dropped)."""
    n = H1.shape[0]
    B1, B2 = H1[:, 1:], H2[:, 1:]
    k2m = B2.shape[1]
    # product column (l1 - 2) * (k2 - 1) + (l2 - 1): l1 outer, l2 inner
    B12 = (B1[:, :, None] * B2[:, None, :]).reshape(n, B1.shape[1] * k2m)
    return np.column_stack([np.ones(n), B1, B2, B12])


@dataclass(frozen=True)
class WpsDesign:
    """Bases, constraints and penalty for a warped-plane fit."""

    knots1: KnotSequence
    knots2: KnotSequence
    B: np.ndarray
    A: np.ndarray = None
    direction: str = None
    Z: np.ndarray = None
    lam: float = 0.0
    D: np.ndarray = None

    @property
    def k1(self):
        return self.knots1.count

    @property
    def k2(self):
        return self.knots2.count

    def basis_at(self, x1, x2):
        return _tensor_columns(hat_basis(x1, self.knots1), hat_basis(x2, self.knots2))


def _check_cover(x, knots, name):
    t = knots.knots
    span = t[-1] - t[0]
    if np.any(x < t[0] - 1e-10 * span) or np.any(x > t[-1] + 1e-10 * span):
        raise InvalidInputError(f"knots for {name} do not cover its observed range")


def make_wps_bases(x1, x2, knots1, knots2):
    """
    Design ``B = [1 | B1 | B2 | B12]`` with ``k1 * k2`` columns.

    ``B1`` holds the hats ``2..k1`` of the first predictor, ``B2`` those of
    the second, and ``B12`` their elementwise products ordered with the
    first predictor's index varying slowest.
    """
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.size != x2.size:
        raise InvalidInputError("x1 and x2 have different lengths")
    _check_cover(x1, knots1, "x1")
    _check_cover(x2, knots2, "x2")
    B = _tensor_columns(hat_basis(x1, knots1), hat_basis(x2, knots2))
    return WpsDesign(knots1=knots1, knots2=knots2, B=B)


def grid_values_map(k1, k2):
    """Matrix ``T`` with ``T @ beta`` = surface values on the knot grid.

    Rows are ordered with the first axis index varying slowest.
    """
    p = k1 * k2
    T = np.zeros((p, p))
    for a in range(k1):
        for b in range(k2):
            row = T[a * k2 + b]
            row[0] = 1.0
            if a >= 1:
                row[a] = 1.0
            if b >= 1:
                row[(k1 - 1) + b] = 1.0
            if a >= 1 and b >= 1:
                row[k1 + k2 - 1 + (a - 1) * (k2 - 1) + (b - 1)] = 1.0
    return T


def wps_constraint_matrix(k1, k2, direction="ii"):
    """
    Monotonicity constraints ``A beta >= 0`` for a warped-plane surface.

    Rows are the grid differences along the first axis
    (``(k1 - 1) * k2`` rows) followed by those along the second axis
    (``k1 * (k2 - 1)`` rows).  ``"dd"`` negates both blocks, ``"di"`` the
    first only.
    """
    if int(k1) != k1 or int(k2) != k2 or k1 < 2 or k2 < 2:
        raise InvalidInputError("k1 and k2 must be integers >= 2")
    if direction not in DIRECTIONS:
        raise InvalidInputError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    k1, k2 = int(k1), int(k2)
    T = grid_values_map(k1, k2)
    rows1, rows2 = [], []
    for b in range(k2):
        for a in range(k1 - 1):
            rows1.append(T[(a + 1) * k2 + b] - T[a * k2 + b])
    for a in range(k1):
        for b in range(k2 - 1):
            rows2.append(T[a * k2 + b + 1] - T[a * k2 + b])
    s1 = -1.0 if direction in ("dd", "di") else 1.0
    s2 = -1.0 if direction == "dd" else 1.0
    return np.vstack([s1 * np.array(rows1), s2 * np.array(rows2)])


def wps_penalty_matrix(knots1, knots2):
    """
    Slope-difference penalty ``D`` (``beta' D'D beta`` is the penalty).

    Each row is the difference of two adjacent grid slopes along one axis,
    with knots rescaled to [0, 1] and the row multiplied by the geometric
    mean of the two interval widths.  Bilinear surfaces have ``D beta = 0``.
    """
    t1 = np.asarray(knots1.knots, float)
    t2 = np.asarray(knots2.knots, float)
    h1 = np.diff(t1) / (t1[-1] - t1[0])
    h2 = np.diff(t2) / (t2[-1] - t2[0])
    k1, k2 = t1.size, t2.size
    T = grid_values_map(k1, k2)
    F = lambda a, b: T[a * k2 + b]  # noqa: E731
    rows = []
    for b in range(k2):
        for a in range(k1 - 2):
            s_next = (F(a + 2, b) - F(a + 1, b)) / h1[a + 1]
            s_prev = (F(a + 1, b) - F(a, b)) / h1[a]
            rows.append(math.sqrt(h1[a] * h1[a + 1]) * (s_next - s_prev))
    for a in range(k1):
        for b in range(k2 - 2):
            s_next = (F(a, b + 2) - F(a, b + 1)) / h2[b + 1]
            s_prev = (F(a, b + 1) - F(a, b)) / h2[b]
            rows.append(math.sqrt(h2[b] * h2[b + 1]) * (s_next - s_prev))
    return np.array(rows).reshape(-1, k1 * k2)


def empty_cells(x1, x2, knots1, knots2):
    """Knot rectangles ``(i, j)`` (0-based) containing no observation."""
    t1, t2 = knots1.knots, knots2.knots
    a = np.clip(np.searchsorted(t1, x1, side="right") - 1, 0, t1.size - 2)
    b = np.clip(np.searchsorted(t2, x2, side="right") - 1, 0, t2.size - 2)
    counts = np.zeros((t1.size - 1, t2.size - 1), dtype=int)
    np.add.at(counts, (a, b), 1)
    return [tuple(int(v) for v in ij) for ij in np.argwhere(counts == 0)]


def gcv_score(sse, edfc, n):
    """Generalized cross-validation ``sse / (1 - edfc / n)**2``."""
    if edfc >= n:
        raise InvalidInputError(f"edfc ({edfc}) must be smaller than n ({n})")
    return sse / (1.0 - edfc / n) ** 2


@dataclass(frozen=True)
class WpsFit:
    """Result of a warped-plane fit."""

    y: np.ndarray
    mu_hat: np.ndarray
    beta_hat: np.ndarray
    alpha_hat: np.ndarray
    edfc: float
    gcv: float
    lambda_used: float
    unconstrained_mu: np.ndarray
    design: WpsDesign
    X: np.ndarray
    M: np.ndarray
    active_rows: np.ndarray
    sigma2_hat: float
    z_names: tuple = ()
    c: float = 1.2
    x1: np.ndarray = field(default=None, repr=False)
    x2: np.ndarray = field(default=None, repr=False)
    family: object = field(default_factory=Gaussian)

    @property
    def n(self):
        return self.y.size

    @property
    def d0(self):
        return 1 + self.alpha_hat.size

    @property
    def sse(self):
        return float(np.sum((self.y - self.mu_hat) ** 2))

    @property
    def edf(self):
        return self.edfc

    @property
    def direction(self):
        return self.design.direction

    @property
    def null_eta(self):
        Z = self.design.Z
        off = Z @ self.alpha_hat if Z.shape[1] else np.zeros(self.n)
        return off + np.mean(self.y - off)

    @property
    def null_deviance(self):
        return float(np.sum((self.y - self.y.mean()) ** 2))

    @property
    def residual_deviance(self):
        return self.sse

    def surface(self, x1, x2):
        """Fitted surface (covariate terms excluded) at new points."""
        return self.design.basis_at(x1, x2) @ self.beta_hat

    def face_operator(self):
        """Linear map ``y -> coefficients`` on the face the fit lies on."""
        A = self.design.A
        p_beta = self.beta_hat.size
        p = self.M.shape[0]
        if self.active_rows.size:
            Aact = np.zeros((self.active_rows.size, p))
            Aact[:, :p_beta] = A[self.active_rows]
            N = scipy.linalg.null_space(Aact)
        else:
            N = np.eye(p)
        K = N.T @ self.M @ N
        return N @ np.linalg.solve(K, N.T @ self.X.T)


def _as_pair(v, name):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InvalidInputError(f"{name} needs one value per predictor")
        return tuple(v)
    return (v, v)


def _axis_knots(x, k, spacing):
    # a bilinear plane needs only the two end knots
    if k == 2:
        lo, hi = float(np.min(x)), float(np.max(x))
        if not hi > lo:
            raise InvalidInputError("predictor is constant")
        return KnotSequence(np.array([lo, hi]), "E")
    return default_knots(x, k, spacing, "ispline")


def _design(y, x1, x2, Z, direction, numknots, spacing, lam):
    if direction not in DIRECTIONS:
        raise InvalidInputError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if lam < 0 or not np.isfinite(lam):
        raise InvalidInputError("penalty must be a finite nonnegative number")
    y = np.asarray(y, dtype=float).ravel()
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if not (y.size == x1.size == x2.size):
        raise InvalidInputError("y, x1 and x2 must have the same length")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("response contains non-finite values")
    n = y.size
    nk1, nk2 = _as_pair(numknots, "numknots")
    sp1, sp2 = _as_pair(spacing, "space")
    if isinstance(nk1, KnotSequence):
        kn1, kn2 = nk1, nk2
    else:
        kn1 = _axis_knots(x1, nk1, sp1)
        kn2 = _axis_knots(x2, nk2, sp2)
    design = make_wps_bases(x1, x2, kn1, kn2)
    k1, k2 = kn1.count, kn2.count
    if lam == 0:
        if n < k1 * k2:
            raise InvalidInputError(
                f"unpenalized fit needs n >= k1*k2 = {k1 * k2}, got n = {n}")
        empty = empty_cells(x1, x2, kn1, kn2)
        if empty:
            raise InvalidInputError(
                f"empty knot cells {empty} (use a penalty or fewer knots)")
    if Z is None:
        Z = np.zeros((n, 0))
    Z = np.asarray(Z, dtype=float).reshape(n, -1)
    A = wps_constraint_matrix(k1, k2, direction)
    D = wps_penalty_matrix(kn1, kn2)
    design = WpsDesign(kn1, kn2, design.B, A, direction, Z, float(lam), D)
    return y, x1, x2, design


def _solve(y, design, c, z_names, x1, x2):
    B, Z, A, D, lam = design.B, design.Z, design.A, design.D, design.lam
    n = y.size
    X = np.column_stack([B, Z])
    p_beta, p = B.shape[1], X.shape[1]
    P = np.zeros((p, p))
    P[:p_beta, :p_beta] = D.T @ D
    M = X.T @ X + lam * P
    try:
        U = scipy.linalg.cholesky(M, lower=False)
    except np.linalg.LinAlgError:
        raise InvalidInputError(
            "design is rank deficient (collinear covariates or too few data)") from None
    if np.min(np.abs(np.diag(U))) <= 1e-10 * np.max(np.abs(np.diag(U))):
        raise InvalidInputError(
            "design is rank deficient (collinear covariates or too few data)")
    Afull = np.zeros((A.shape[0], p))
    Afull[:, :p_beta] = A
    target = scipy.linalg.solve_triangular(U, X.T @ y, trans="T")
    Acon = scipy.linalg.solve_triangular(U, Afull.T, trans="T").T
    proj = _project_polar(target, Acon, None)
    gamma = scipy.linalg.solve_triangular(U, proj.theta_hat)
    gamma_u = scipy.linalg.cho_solve((U, False), X.T @ y)
    mu = X @ gamma
    beta, alpha = gamma[:p_beta], gamma[p_beta:]
    active = proj.active_set
    fit = WpsFit(
        y=y, mu_hat=mu, beta_hat=beta, alpha_hat=alpha, edfc=np.nan, gcv=np.nan,
        lambda_used=lam, unconstrained_mu=X @ gamma_u, design=design, X=X, M=M,
        active_rows=active, sigma2_hat=np.nan, z_names=tuple(z_names), c=c,
        x1=x1, x2=x2)
    S = fit.face_operator()
    edfc = float(np.trace(X @ S))
    sse = fit.sse
    gcv = gcv_score(sse, edfc, n) if edfc < n else np.inf
    try:
        sigma2 = sigma2_formula(sse, n, fit.d0, edfc, c)
    except InvalidInputError:
        sigma2 = np.nan
    return WpsFit(**{**fit.__dict__, "edfc": edfc, "gcv": gcv, "sigma2_hat": sigma2})


def fit_wps(y, x1, x2, Z=None, direction="ii", numknots=None, spacing="E",
            lam=0.0, z_names=None, c=1.2):
    """
    Fit a doubly-monotone warped-plane surface.

    Minimizes ``||y - B beta - Z alpha||^2 + lam * ||D beta||^2`` subject to
    ``A beta >= 0``.  The penalized least-squares problem is whitened with
    the Cholesky factor of its normal matrix and solved as a projection onto
    the transformed constraint cone.

    Parameters
    ----------
    y, x1, x2 : array_like, shape (n,)
    Z : array_like, shape (n, p), optional
        Covariates (no intercept column).
    direction : {"ii", "dd", "di"}
        Increasing in both, decreasing in both, or decreasing in `x1` and
        increasing in `x2`.
    numknots : int or pair, optional
    spacing : {"E", "Q"} or pair
    lam : float
        Penalty on slope differences; 0 requires every knot cell to hold
        data.
    z_names : list of str, optional
    c : float
        Multiplier in the variance estimate.

    Returns
    -------
    WpsFit
        `edfc` is the trace of the fit's linear map restricted to the face
        of the constraint cone on which the solution lies.
    """
    check_c(c)
    y, x1, x2, design = _design(y, x1, x2, Z, direction, numknots, spacing, lam)
    if z_names is None:
        z_names = [f"z{j + 1}" for j in range(design.Z.shape[1])]
    return _solve(y, design, c, z_names, x1, x2)


def _refit_edf(fit, y):
    return _solve(np.asarray(y, float), fit.design, fit.c, fit.z_names,
                  fit.x1, fit.x2).edfc


def refit(fit, y):
    """Same design and penalty, new response."""
    return _solve(np.asarray(y, float), fit.design, fit.c, fit.z_names, fit.x1, fit.x2)


def select_lambda(y, x1, x2, lambda_grid, Z=None, direction="ii", numknots=None,
                  spacing="E", z_names=None, c=1.2, threads=1):
    """
    Fit every penalty in `lambda_grid` and return the fit with smallest GCV.

    Duplicate values are fitted once; ties go to the smaller penalty.  Fits
    that fail are skipped unless all of them fail.
    """
    grid = sorted({float(v) for v in lambda_grid})
    if not grid:
        raise InvalidInputError("lambda_grid is empty")
    if any(v < 0 for v in grid):
        raise InvalidInputError("penalties must be nonnegative")

    def one(lam):
        try:
            return fit_wps(y, x1, x2, Z, direction, numknots, spacing, lam, z_names, c)
        except ConeGamError as exc:
            return exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(v) for v in grid]
    best = None
    for res in results:
        if isinstance(res, Exception):
            continue
        if best is None or res.gcv < best.gcv:
            best = res
    if best is None:
        msgs = "; ".join(f"lambda={v:g}: {r}" for v, r in zip(grid, results))
        raise ConeGamError(f"every penalty in the grid failed: {msgs}")
    return best


def wps_coef_table(fit):
    """Coefficient table for the intercept and covariates of a WPS fit.

    Standard errors come from the fit's linear map on its active face,
    ``cov = sigma^2 S S'``; with no penalty this reduces to the usual
    ``[Z'(I - P)Z]^{-1} sigma^2`` form.
    """
    if not np.isfinite(fit.sigma2_hat):
        sigma2_formula(fit.sse, fit.n, fit.d0, fit.edfc, fit.c)
    S = fit.face_operator()
    p_beta = fit.beta_hat.size
    idx = np.concatenate([[0], p_beta + np.arange(fit.alpha_hat.size)]).astype(int)
    Si = S[idx]
    cov = fit.sigma2_hat * (Si @ Si.T)
    gamma = np.concatenate([fit.beta_hat, fit.alpha_hat])
    df = math.floor(fit.n - fit.d0 - fit.c * fit.edfc)
    names = ("(Intercept)",) + tuple(fit.z_names)
    return _table(names, gamma[idx], cov, fit.sigma2_hat, True, df)
