"""
Order-constraint cones for ordinal predictors.

Constraints act on ``phi in R^n`` (one entry per observation).  Tied
predictor values are tied together through equality rows, and the
inequality rows are written on one representative per level.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cone import ConstraintCone, GeneratorCone
from .exceptions import InvalidInputError
from .splines import ConeComponent

__all__ = [
    "ORDINAL_SHAPES",
    "OrderingSpec",
    "ordinal_constraint_matrices",
    "edges_from_constraints",
    "build_ordinal_component",
]

ORDINAL_SHAPES = (
    "incr", "decr", "conv", "conc",
    "incr.conv", "incr.conc", "decr.conv", "decr.conc",
    "tree", "umbrella",
)


@dataclass(frozen=True)
class OrderingSpec:
    kind: str
    levels: np.ndarray = None
    mode: float = 0.0


def _rows_monotone(r, sign):
    rows = np.zeros((r - 1, r))
    for i in range(r - 1):
        rows[i, i], rows[i, i + 1] = -sign, sign
    return rows


def _rows_convex(levels, sign):
    r = levels.size
    rows = np.zeros((r - 2, r))
    h = np.diff(levels)
    for i in range(r - 2):
        # slope(i+1, i+2) - slope(i, i+1) >= 0, scaled by the mean spacing
        scale = 0.5 * (h[i] + h[i + 1])
        rows[i, i] = 1.0 / h[i]
        rows[i, i + 1] = -1.0 / h[i] - 1.0 / h[i + 1]
        rows[i, i + 2] = 1.0 / h[i + 1]
        rows[i] *= sign * scale
    return rows


def _level_rows(kind, levels, mode):
    r = levels.size
    if kind in ("incr", "decr"):
        return _rows_monotone(r, 1.0 if kind == "incr" else -1.0)
    if kind in ("conv", "conc"):
        return _rows_convex(levels, 1.0 if kind == "conv" else -1.0)
    if kind in ("incr.conv", "incr.conc", "decr.conv", "decr.conc"):
        monotone, curvature = kind.split(".")
        s_mono = 1.0 if monotone == "incr" else -1.0
        s_curve = 1.0 if curvature == "conv" else -1.0
        curve = _rows_convex(levels, s_curve)
        # monotonicity only needs the slope at the end where it is extreme
        slope = np.zeros((1, r))
        i = 0 if s_mono == s_curve else r - 2
        slope[0, i], slope[0, i + 1] = -s_mono, s_mono
        return np.vstack([curve, slope])
    if kind == "tree":
        p = int(np.flatnonzero(levels == mode)[0])
        rows = []
        for i in range(r):
            if i != p:
                row = np.zeros(r)
                row[p], row[i] = -1.0, 1.0
                rows.append(row)
        return np.array(rows).reshape(-1, r)
    if kind == "umbrella":
        p = int(np.flatnonzero(levels == mode)[0])
        rows = []
        for i in range(p):
            row = np.zeros(r)
            row[i], row[i + 1] = -1.0, 1.0
            rows.append(row)
        for i in range(p, r - 1):
            row = np.zeros(r)
            row[i], row[i + 1] = 1.0, -1.0
            rows.append(row)
        return np.array(rows).reshape(-1, r)
    raise InvalidInputError(
        f"unknown ordinal shape {kind!r}; valid: {', '.join(ORDINAL_SHAPES)}")


def ordinal_constraint_matrices(x, spec):
    """
    Constraint matrices ``A`` and ``B`` for an ordinal predictor.

    Parameters
    ----------
    x : array_like, shape (n,)
        Predictor values; ties are allowed.
    spec : OrderingSpec or str
        Shape tag.  ``tree`` and ``umbrella`` use the level ``0`` as the
        placebo or mode.

    Returns
    -------
    ConstraintCone
        ``A`` holds the order constraints between level representatives
        (first occurrence of each level); ``B`` ties every other
        observation of a level to its predecessor in that level.

    Examples
    --------
    >>> ordinal_constraint_matrices([1, 2, 3], "incr").A
    array([[-1.,  1.,  0.],
           [ 0., -1.,  1.]])
    """
    if isinstance(spec, str):
        spec = OrderingSpec(spec)
    kind = spec.kind
    if kind not in ORDINAL_SHAPES:
        raise InvalidInputError(
            f"unknown ordinal shape {kind!r}; valid: {', '.join(ORDINAL_SHAPES)}")
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("predictor contains non-finite values")
    n = x.size
    levels, first, inverse = np.unique(x, return_index=True, return_inverse=True)
    r = levels.size
    if r < 2:
        raise InvalidInputError("ordinal predictor needs at least 2 distinct levels")
    if kind in ("tree", "umbrella") and not np.any(levels == spec.mode):
        raise InvalidInputError(
            f"{kind} ordering needs an observation at level {spec.mode:g}")
    if "conv" in kind or "conc" in kind:
        if r < 3:
            raise InvalidInputError(
                f"{kind} needs at least 3 distinct levels, got {r}")
    L = _level_rows(kind, levels, spec.mode)
    A = np.zeros((L.shape[0], n))
    A[:, first] = L
    B_rows = []
    for lev in range(r):
        members = np.flatnonzero(inverse == lev)
        for a, b in zip(members[:-1], members[1:]):
            row = np.zeros(n)
            row[a], row[b] = 1.0, -1.0
            B_rows.append(row)
    B = np.array(B_rows).reshape(-1, n)
    return ConstraintCone(A, B, n)


def edges_from_constraints(cone):
    """
    Generator form of ``{phi : A phi >= 0, B phi = 0}``.

    ``[A; B]`` is completed to a square nonsingular matrix with an
    orthonormal basis of its null space and inverted; the inverse's columns
    dual to the rows of ``A`` are the edges and those dual to the null-space
    rows span the linear space.

    Returns
    -------
    GeneratorCone
    """
    if not isinstance(cone, ConstraintCone):
        raise InvalidInputError("expected a ConstraintCone")
    A, B, n = cone.A, cone.B, cone.n
    M = np.vstack([A, B])
    N = scipy.linalg.null_space(M) if M.shape[0] else np.eye(n)
    if M.shape[0] + N.shape[1] != n:
        raise InvalidInputError("rows of A and B are rank deficient")
    S = np.vstack([M, N.T])
    Sinv = np.linalg.inv(S)
    r1 = A.shape[0]
    edges = Sinv[:, :r1]
    V = Sinv[:, M.shape[0]:]
    return GeneratorCone(edges if r1 else np.zeros((n, 0)),
                         V if V.shape[1] else np.zeros((n, 0)))


def build_ordinal_component(x, shape, label="x"):
    """Cone component for an unsmoothed order constraint on `x`.

    Fitted values at new points are obtained by linear interpolation
    between the fitted level values (see :func:`conegam.gam.component_curve`).
    """
    x = np.asarray(x, dtype=float).ravel()
    cc = ordinal_constraint_matrices(x, shape)
    gen = edges_from_constraints(cc)
    names = tuple(f"v{j}" for j in range(gen.linear_basis.shape[1]))
    return ConeComponent(label, shape if isinstance(shape, str) else shape.kind,
                         gen.edges, gen.linear_basis, names, None,
                         np.ones(gen.m), None, x, ordinal=True)
