"""
Knot sequences and shape-constrained spline bases.

Monotone shapes use quadratic I-splines (integrals of the piecewise-linear
hat functions on the knots); convexity shapes and unconstrained smooths use
cubic C-splines (double integrals of the same hats).  A spline built from
these columns is increasing (convex) exactly when the coefficients on the
I-spline (C-spline) columns are nonnegative.

Every basis is stored as a callable transform of ``x`` so that fitted
components can be evaluated away from the design points (surface grids).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError

__all__ = [
    "KnotSequence",
    "BasisSet",
    "ShapeSpec",
    "ConeComponent",
    "SMOOTH_SHAPES",
    "default_knots",
    "make_ispline_basis",
    "make_cspline_basis",
    "build_shape_component",
]

SMOOTH_SHAPES = (
    "s.incr", "s.decr", "s.conv", "s.conc",
    "s.incr.conv", "s.incr.conc", "s.decr.conv", "s.decr.conc", "s",
)

KNOT_CONSTANT = 2.0
MIN_DEFAULT_KNOTS = 4


@dataclass(frozen=True)
class KnotSequence:
    knots: np.ndarray
    spacing: str = "E"

    @property
    def count(self):
        return self.knots.size


def default_knots(x, numknots=None, spacing="E", kind="ispline"):
    """
    Knot sequence covering the range of `x`.

    Parameters
    ----------
    x : array_like
        Predictor values; needs at least three distinct values.
    numknots : int, optional
        Number of knots.  The default grows like ``n**(1/7)`` for I-splines
        and ``n**(1/9)`` for C-splines:
        ``max(4, round(2 * n**p) + 2)``.
    spacing : {"E", "Q"}
        Equal spacing over ``[min(x), max(x)]`` or empirical quantiles.
        Quantile knots that collapse through ties are deduplicated; if
        fewer than three remain, equal spacing is used instead.
    kind : {"ispline", "cspline"}

    Returns
    -------
    KnotSequence
    """
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("predictor contains non-finite values")
    distinct = np.unique(x)
    if distinct.size < 3:
        raise InvalidInputError("predictor needs at least 3 distinct values")
    if spacing not in ("E", "Q"):
        raise InvalidInputError(f"spacing must be 'E' or 'Q', got {spacing!r}")
    if kind not in ("ispline", "cspline"):
        raise InvalidInputError(f"unknown basis kind {kind!r}")
    if numknots is None:
        power = 1.0 / 7.0 if kind == "ispline" else 1.0 / 9.0
        k = max(MIN_DEFAULT_KNOTS, int(round(KNOT_CONSTANT * x.size ** power)) + 2)
        k = min(k, distinct.size)
    else:
        k = int(numknots)
        if k != numknots or k < 3:
            raise InvalidInputError(f"numknots must be an integer >= 3, got {numknots}")
        if k > distinct.size:
            raise InvalidInputError(
                f"{k} knots requested but x has only {distinct.size} distinct values")
    lo, hi = distinct[0], distinct[-1]
    if spacing == "Q":
        knots = np.unique(np.quantile(x, np.linspace(0.0, 1.0, k)))
        if knots.size < 3:
            knots = np.linspace(lo, hi, k)
            spacing = "E"
    else:
        knots = np.linspace(lo, hi, k)
    knots[0], knots[-1] = lo, hi
    return KnotSequence(knots=knots, spacing=spacing)


def _hat_integrals(u, t):
    """First and second antiderivatives (from ``t[0]``) of the hat functions.

    Returns arrays of shape ``(len(u), k)``: ``I[:, j] = int_{t0}^u h_j`` and
    ``C[:, j] = int_{t0}^u I_j``, exact for piecewise-linear hats.
    """
    u = np.asarray(u, dtype=float)
    k = t.size
    I = np.zeros((u.size, k))
    C = np.zeros((u.size, k))
    for j in range(k):
        # the hat h_j has support [t[j-1], t[j+1]] (half-hats at the ends)
        pieces = []
        if j > 0:
            pieces.append((t[j - 1], t[j], 0.0, 1.0))
        if j < k - 1:
            pieces.append((t[j], t[j + 1], 1.0, 0.0))
        for a, b, fa, fb in pieces:
            h = b - a
            slope = (fb - fa) / h
            s = np.clip(u, a, b) - a
            # integral over [a, a+s] of the linear piece
            seg_int = fa * s + 0.5 * slope * s ** 2
            seg_full = 0.5 * (fa + fb) * h
            # double integral: int_a^{u} int_a^{v} piece, continued linearly past b
            seg_dbl = 0.5 * fa * s ** 2 + slope * s ** 3 / 6.0
            past = np.maximum(u - b, 0.0)
            I[:, j] += seg_int
            C[:, j] += seg_dbl + seg_full * past
    return I, C


def _check_range(x, knots):
    t = knots.knots
    span = t[-1] - t[0]
    if np.any(x < t[0] - 1e-10 * span) or np.any(x > t[-1] + 1e-10 * span):
        raise InvalidInputError("predictor values fall outside the knot range")


@dataclass(frozen=True)
class BasisSet:
    """Evaluated spline basis plus the recipe to evaluate it elsewhere.

    Attributes
    ----------
    columns : ndarray, shape (n, m)
        Basis columns at the design points after centering.
    kind : str
        ``"ispline"``, ``"cspline"``, ``"cspline-right"`` or ``"linear"``.
    centering : tuple of str
        Fixed vectors the columns were orthogonalized against, a subset of
        ``("1", "x")``.
    knots : KnotSequence
    offset, slope : ndarray
        Per-column affine correction: evaluated column =
        ``raw(x) - offset - slope * x01`` with ``x01`` the rescaled predictor.
    """

    columns: np.ndarray
    kind: str
    centering: tuple
    knots: KnotSequence
    lo: float
    scale: float
    offset: np.ndarray
    slope: np.ndarray
    norm: np.ndarray

    def raw(self, x):
        u = (np.asarray(x, dtype=float).ravel() - self.lo) / self.scale
        t = (self.knots.knots - self.lo) / self.scale
        I, C = _hat_integrals(u, t)
        if self.kind == "ispline":
            return I, u
        if self.kind == "cspline":
            return C, u
        # right-anchored double integral: int_u^{t_k} int_v^{t_k} h_j
        I_end, C_end = _hat_integrals(t[-1:], t)
        return I_end * (t[-1] - u)[:, None] - C_end + C, u

    def evaluate(self, x):
        """Basis columns at arbitrary points inside the knot range."""
        R, u = self.raw(x)
        return (R - self.offset - np.outer(u, self.slope)) / self.norm


def _build(x, knots, kind, centering):
    x = np.asarray(x, dtype=float).ravel()
    _check_range(x, knots)
    lo = float(knots.knots[0])
    scale = float(knots.knots[-1] - knots.knots[0])
    proto = BasisSet(None, kind, centering, knots, lo, scale,
                     np.zeros(knots.count), np.zeros(knots.count),
                     np.ones(knots.count))
    R, u = proto.raw(x)
    m = R.shape[1]
    offset = np.zeros(m)
    slope = np.zeros(m)
    if centering == ("1",):
        offset = R.mean(axis=0)
    elif centering == ("1", "x"):
        X = np.column_stack([np.ones_like(u), u])
        coef = np.linalg.lstsq(X, R, rcond=None)[0]
        offset, slope = coef[0], coef[1]
    cols = R - offset - np.outer(u, slope)
    norm = np.linalg.norm(cols, axis=0)
    norm[norm == 0] = 1.0
    cols = cols / norm
    return BasisSet(cols, kind, centering, knots, lo, scale, offset, slope, norm)


def make_ispline_basis(x, knots):
    """
    Quadratic I-spline basis, centered.

    With ``k`` knots there are ``k`` columns; together with the constant
    they span the piecewise-quadratic, continuously differentiable splines
    on the knots.  Each column is non-decreasing in `x`, and a combination
    is non-decreasing iff all coefficients are nonnegative.
    """
    return _build(x, knots, "ispline", ("1",))


def make_cspline_basis(x, knots, anchor="left", centering=("1", "x")):
    """
    Cubic C-spline basis, orthogonal to the constant and to `x`.

    With ``k`` knots there are ``k`` convex columns; together with the
    constant and the identity they span the twice continuously
    differentiable piecewise cubics on the knots.  `anchor` picks where the
    columns have zero slope (``"left"`` or ``"right"``), which matters only
    when the identity coefficient carries a sign constraint.
    """
    kind = "cspline" if anchor == "left" else "cspline-right"
    return _build(x, knots, kind, tuple(centering))


@dataclass(frozen=True)
class ShapeSpec:
    """A symbolic shape tag plus knot options."""

    shape: str
    numknots: int = None
    space: str = "E"


@dataclass(frozen=True)
class ConeComponent:
    """Contribution of one predictor to the composite cone.

    Attributes
    ----------
    edges : ndarray, shape (n, m)
        Edge vectors with their sign already applied, so every coefficient
        is constrained nonnegative.
    linear_part : ndarray, shape (n, d)
        Unconstrained directions contributed to the linear space.
    linear_names : tuple of str
        Labels for `linear_part` columns (``"1"`` marks the constant).
    evaluate : callable or None
        ``evaluate(x_new) -> (edges_new, linear_new)`` at new predictor
        values, using the same transforms as the design columns.  None for
        ordinal components, which are only defined at observed levels.
    """

    label: str
    shape: str
    edges: np.ndarray
    linear_part: np.ndarray
    linear_names: tuple
    evaluate: object = field(repr=False, compare=False)
    edge_sign: np.ndarray = None
    basis: BasisSet = None
    x: np.ndarray = field(default=None, repr=False, compare=False)
    ordinal: bool = False


def build_shape_component(x, shape, label="x"):
    """
    Cone component for a smooth shape tag.

    Parameters
    ----------
    x : array_like, shape (n,)
    shape : ShapeSpec or str
        One of the eight smooth shapes (``"s.incr"``, ``"s.decr.conv"``,
        ...) or ``"s"`` for an unconstrained smooth.
    label : str
        Name of the predictor.

    Returns
    -------
    ConeComponent
    """
    if isinstance(shape, str):
        shape = ShapeSpec(shape)
    tag = shape.shape
    if tag not in SMOOTH_SHAPES:
        raise InvalidInputError(
            f"unknown smooth shape {tag!r}; valid: {', '.join(SMOOTH_SHAPES)}")
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    kind = "ispline" if tag in ("s.incr", "s.decr") else "cspline"
    knots = default_knots(x, shape.numknots, shape.space, kind)
    lo = float(knots.knots[0])
    scale = float(knots.knots[-1] - knots.knots[0])
    x01 = (x - lo) / scale
    xbar = x01.mean()

    if tag in ("s.incr", "s.decr"):
        basis = make_ispline_basis(x, knots)
        sign = 1.0 if tag == "s.incr" else -1.0
        signs = np.full(basis.columns.shape[1], sign)

        def evaluate(xn):
            return sign * basis.evaluate(xn), np.ones((np.size(xn), 1))

        return ConeComponent(label, tag, sign * basis.columns, np.ones((n, 1)),
                             ("1",), evaluate, signs, basis, x)

    if tag in ("s.conv", "s.conc", "s"):
        basis = make_cspline_basis(x, knots)
        sign = -1.0 if tag == "s.conc" else 1.0
        if tag == "s":

            def evaluate(xn):
                u = (np.asarray(xn, dtype=float).ravel() - lo) / scale
                return (np.zeros((u.size, 0)),
                        np.column_stack([np.ones_like(u), u - xbar,
                                         basis.evaluate(xn)]))

            lin = np.column_stack([np.ones(n), x01 - xbar, basis.columns])
            names = ("1", "x") + tuple(f"s{j}" for j in range(basis.columns.shape[1]))
            return ConeComponent(label, tag, np.zeros((n, 0)), lin, names,
                                 evaluate, np.zeros(0), basis, x)

        def evaluate(xn):
            u = (np.asarray(xn, dtype=float).ravel() - lo) / scale
            return (sign * basis.evaluate(xn),
                    np.column_stack([np.ones_like(u), u - xbar]))

        signs = np.full(basis.columns.shape[1], sign)
        return ConeComponent(label, tag, sign * basis.columns,
                             np.column_stack([np.ones(n), x01 - xbar]),
                             ("1", "x"), evaluate, signs, basis, x)

    # monotone-convexity combinations: slope is extreme at one end, so the
    # C-splines are anchored there and the identity joins the edges
    monotone, curvature = tag.split(".")[1:]
    slope_sign = 1.0 if monotone == "incr" else -1.0
    curve_sign = 1.0 if curvature == "conv" else -1.0
    # increasing-convex / decreasing-concave: minimum |slope| at the left end
    anchor = "left" if slope_sign == curve_sign else "right"
    basis = make_cspline_basis(x, knots, anchor=anchor, centering=("1",))

    def evaluate(xn):
        u = (np.asarray(xn, dtype=float).ravel() - lo) / scale
        E = np.column_stack([slope_sign * (u - xbar), curve_sign * basis.evaluate(xn)])
        return E, np.ones((u.size, 1))

    E = np.column_stack([slope_sign * (x01 - xbar), curve_sign * basis.columns])
    signs = np.concatenate([[slope_sign], np.full(basis.columns.shape[1], curve_sign)])
    return ConeComponent(label, tag, E, np.ones((n, 1)), ("1",), evaluate,
                         signs, basis, x)
