"""
From a parsed formula and a table of columns to a fitted model, and back
out to summaries, fitted values and surface grids.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError
from .family import get_family
from .formula import ModelSpec, parse_model_spec
from .gam import DEFAULT_C, assemble_cone, component_curve, fit_irls
from .inference import coef_table, simulate_cic
from .ordinal import build_ordinal_component
from .splines import SMOOTH_SHAPES, ShapeSpec, build_shape_component
from .wps import WpsFit, fit_wps, select_lambda

__all__ = [
    "NA_TOKENS",
    "read_csv",
    "ModelFit",
    "fit_model",
    "summarize",
    "fitted_table",
    "export_surface_grid",
]

NA_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL", "None", "."})


def read_csv(path):
    """Read a headed UTF-8 CSV into ``{column: list of str}``."""
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise InvalidInputError(f"data file {str(path)!r} not found") from None
    except UnicodeDecodeError as exc:
        raise InvalidInputError(f"data file is not valid UTF-8: {exc}") from None
    if not rows or not any(h.strip() for h in rows[0]):
        raise InvalidInputError("data file has no header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise InvalidInputError("data file has duplicate column names")
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    for i, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise InvalidInputError(
                f"row {i} has {len(r)} fields, header has {len(header)}")
    return {h: [r[j].strip() for r in body] for j, h in enumerate(header)}


def _column(table, name, numeric=True):
    if name not in table:
        raise InvalidInputError(f"column {name!r} not found in data")
    raw = table[name]
    for i, v in enumerate(raw, start=1):
        if v in NA_TOKENS:
            raise InvalidInputError(f"missing value in column {name!r} at row {i}")
    if not numeric:
        return list(raw)
    out = np.empty(len(raw))
    for i, v in enumerate(raw):
        try:
            out[i] = float(v)
        except ValueError:
            raise InvalidInputError(
                f"non-numeric value {v!r} in column {name!r} at row {i + 1}") from None
        if not math.isfinite(out[i]):
            raise InvalidInputError(f"non-finite value in column {name!r} at row {i + 1}")
    return out


def _as_text(values):
    # repr round-trips floats exactly
    if isinstance(values, np.ndarray) and np.issubdtype(values.dtype, np.number):
        return [repr(float(v)) for v in values]
    return [str(v) for v in values]


def _factor_levels(values):
    try:
        return sorted(set(values), key=float)
    except ValueError:
        return sorted(set(values))


@dataclass(frozen=True)
class ModelFit:
    """A fitted model together with what is needed to evaluate it again."""

    spec: ModelSpec
    fit: object
    family: object
    data: dict
    z_names: tuple
    factor_levels: dict
    cic: object = None
    c: float = DEFAULT_C
    warnings: tuple = ()
    settings: dict = field(default_factory=dict)

    @property
    def engine(self):
        return self.spec.engine


def _covariates(spec, table, n):
    """Design columns for linear and factor terms (no intercept)."""
    cols, names, levels, data = [], [], {}, {}
    for term in spec.covariate_terms:
        name = term.predictors[0]
        if term.kind == "linear":
            x = _column(table, name)
            data[name] = x
            cols.append(x)
            names.append(name)
        else:
            vals = _column(table, name, numeric=False)
            lev = _factor_levels(vals)
            if len(lev) < 2:
                raise InvalidInputError(f"factor {name!r} has a single level")
            levels[name] = lev
            data[name] = np.array(vals, dtype=object)
            for lv in lev[1:]:
                cols.append(np.array([v == lv for v in vals], dtype=float))
                names.append(f"factor({name}){lv}")
    Z = np.column_stack(cols) if cols else np.zeros((n, 0))
    return Z, tuple(names), levels, data


def _term_label(term):
    return term.to_text()


def fit_model(spec, table, family="gaussian", c=DEFAULT_C, nsim=0, seed=0,
              threads=1, lambda_grid=None):
    """
    Fit `spec` (a ModelSpec or formula string) to `table`.

    Parameters
    ----------
    table : dict
        Column name to list of strings (as from :func:`read_csv`) or arrays.
    family : str or Family
    c : float
        Multiplier in the variance estimate.
    nsim : int
        Null replicates for the information criterion; 0 skips it.
    seed : int
    threads : int
        Workers for replicates and penalty-grid fits; results do not depend
        on it.
    lambda_grid : sequence of float, optional
        Candidate penalties for a surface term (GCV choice).  Without it the
        surface is fitted unpenalized.
    """
    if isinstance(spec, str):
        spec = parse_model_spec(spec)
    family = get_family(family)
    table = {k: _as_text(vals) for k, vals in table.items()}
    y = family.validate(_column(table, spec.response))
    n = y.size
    if n == 0:
        raise InvalidInputError("data has no rows")
    Z, z_names, levels, data = _covariates(spec, table, n)
    data[spec.response] = y
    notes = []
    if spec.engine == "wps":
        term = spec.constrained_terms[0]
        if family.name != "gaussian":
            raise InvalidInputError("dd/ii/di surfaces are fitted for the gaussian family only")
        x1 = _column(table, term.predictors[0])
        x2 = _column(table, term.predictors[1])
        data[term.predictors[0]], data[term.predictors[1]] = x1, x2
        opts = term.option_dict
        nk = opts.get("numknots")
        sp = opts.get("space", "E")
        if lambda_grid:
            fit = select_lambda(y, x1, x2, lambda_grid, Z, term.symbol, nk, sp,
                                list(z_names), c, threads)
        else:
            fit = fit_wps(y, x1, x2, Z, term.symbol, nk, sp, 0.0, list(z_names), c)
    else:
        comps = []
        for term in spec.constrained_terms:
            name = term.predictors[0]
            x = _column(table, name)
            data[name] = x
            label = _term_label(term)
            if term.symbol in SMOOTH_SHAPES:
                opts = term.option_dict
                shape = ShapeSpec(term.symbol, opts.get("numknots"), opts.get("space", "E"))
                comps.append(build_shape_component(x, shape, label))
            else:
                comps.append(build_ordinal_component(x, term.symbol, label))
        cone = assemble_cone(comps, Z, list(z_names), n=n)
        for lab, k, why in cone.dropped:
            notes.append(f"edge {k} of {lab} dropped: {why}")
        fit = fit_irls(y, family, cone, c=c)
        if fit.separation:
            notes.append("fitted probabilities numerically 0 or 1 (possible separation)")
    cic = simulate_cic(fit, nsim=nsim, seed=seed, threads=threads) if nsim else None
    settings = {"c": c, "nsim": nsim, "seed": seed,
                "lambda_grid": list(lambda_grid) if lambda_grid else None}
    return ModelFit(spec, fit, family, data, z_names, levels, cic, c,
                    tuple(notes), settings)


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def summarize(mf):
    """JSON-ready summary of a :class:`ModelFit`."""
    fit = mf.fit
    notes = list(mf.warnings)
    try:
        table = coef_table(fit)
        coefs = [{k: _num(v) if k != "term" else v for k, v in r.items()}
                 for r in table.records()]
        dispersion, df = _num(table.dispersion), _num(table.df)
        stat = table.stat_name
    except InvalidInputError as exc:
        notes.append(f"coefficient table unavailable: {exc}")
        coefs, dispersion, df = [], None, None
        stat = "t" if mf.family.name == "gaussian" else "z"
    is_wps = isinstance(fit, WpsFit)
    out = {
        "model": mf.spec.to_formula(),
        "engine": mf.engine,
        "family": mf.family.name,
        "link": mf.family.link_name,
        "n": int(fit.y.size),
        "d0": int(fit.d0),
        "c": float(mf.c),
        "edf": _num(fit.edfc if is_wps else fit.edf),
        "sigma2": _num(fit.sigma2_hat) if mf.family.name == "gaussian" else None,
        "deviance": {"null": _num(fit.null_deviance),
                     "residual": _num(fit.residual_deviance)},
        "coefficients": {"statistic": stat, "dispersion": dispersion, "df": df,
                         "rows": coefs},
        "cic": None,
        "irls_iterations": None if is_wps else int(fit.irls_iterations),
        "wps": None,
        "components": [],
        "warnings": notes,
    }
    if mf.cic is not None:
        out["cic"] = {"value": _num(mf.cic.cic), "e0_edf": _num(mf.cic.e0_edf),
                      "loglik": _num(mf.cic.loglik), "nsim": int(mf.cic.nsim),
                      "seed": int(mf.cic.seed), "failures": int(mf.cic.failures)}
    if is_wps:
        out["wps"] = {"direction": fit.direction, "lambda": float(fit.lambda_used),
                      "gcv": _num(fit.gcv), "edfc": _num(fit.edfc),
                      "numknots": [int(fit.design.k1), int(fit.design.k2)],
                      "constraints": int(fit.design.A.shape[0])}
        term = mf.spec.constrained_terms[0]
        out["components"].append({"term": term.to_text(), "shape": term.symbol,
                                  "predictors": list(term.predictors),
                                  "active": int(fit.active_rows.size)})
    else:
        cone = fit.cone
        for ci, comp in enumerate(cone.components):
            own = np.flatnonzero(cone.edge_owner == ci)
            out["components"].append({
                "term": comp.label, "shape": comp.shape,
                "predictors": [mf.spec.constrained_terms[ci].predictors[0]],
                "edges": int(own.size),
                "active": int(np.sum(fit.edge_coef[own] > 0))})
    return out


def fitted_table(mf):
    """Header and rows: row id, y, eta_hat, mu_hat, one column per component."""
    fit = mf.fit
    if isinstance(fit, WpsFit):
        labels = [mf.spec.constrained_terms[0].to_text()]
        comps = [fit.design.B @ fit.beta_hat]
        eta = fit.mu_hat
        mu = fit.mu_hat
    else:
        labels = [c.label for c in fit.cone.components]
        comps = [fit.component_values[lab] for lab in labels]
        eta, mu = fit.eta_hat, fit.mu_hat
    header = ["row_id", "y", "eta_hat", "mu_hat"] + labels
    rows = [[i + 1, fit.y[i], eta[i], mu[i]] + [cv[i] for cv in comps]
            for i in range(fit.y.size)]
    return header, rows


def _pin(x):
    """Largest observed value not exceeding the median."""
    x = np.asarray(x, dtype=float)
    return float(np.max(x[x <= np.median(x)]))


def _mode(values, levels):
    counts = [sum(1 for v in values if v == lv) for lv in levels]
    return levels[int(np.argmax(counts))]


def export_surface_grid(mf, predictor1, predictor2, resolution=25, scale="mean",
                        categ=None):
    """
    Long-format surface over a ``resolution x resolution`` grid.

    Each grid axis spans the observed range of its predictor.  Other
    nonparametric or linear predictors are held at the largest observed
    value not exceeding their median, factors at their most frequent level,
    except `categ`, which yields one surface per level.

    Returns
    -------
    list of tuple
        ``(x1_value, x2_value, level_label, surface_value)``, `x1` varying
        slowest.
    """
    if int(resolution) != resolution or resolution < 2:
        raise InvalidInputError("resolution must be an integer >= 2")
    resolution = int(resolution)
    if scale not in ("mean", "eta"):
        raise InvalidInputError("scale must be 'mean' or 'eta'")
    spec, fit = mf.spec, mf.fit
    nonpar = [p for t in spec.constrained_terms for p in t.predictors]
    if len(nonpar) < 2:
        raise InvalidInputError("surface export needs at least two nonparametric predictors")
    for p in (predictor1, predictor2):
        if p not in nonpar:
            raise InvalidInputError(
                f"{p!r} is not a nonparametric predictor of the model "
                f"(available: {', '.join(nonpar)})")
    if predictor1 == predictor2:
        raise InvalidInputError("the two grid predictors must differ")
    if categ is not None and categ not in mf.factor_levels:
        raise InvalidInputError(f"{categ!r} is not a factor term of the model")

    g1 = np.linspace(mf.data[predictor1].min(), mf.data[predictor1].max(), resolution)
    g2 = np.linspace(mf.data[predictor2].min(), mf.data[predictor2].max(), resolution)
    G1, G2 = np.meshgrid(g1, g2, indexing="ij")
    G1, G2 = G1.ravel(), G2.ravel()
    m = G1.size
    grid_x = {predictor1: G1, predictor2: G2}

    def value_of(name):
        if name in grid_x:
            return grid_x[name]
        return np.full(m, _pin(mf.data[name]))

    # covariate part apart from `categ`
    levels_out = mf.factor_levels.get(categ, [""]) if categ else [""]
    alpha = fit.alpha_hat
    offsets = []
    for lev in levels_out:
        off = np.zeros(m)
        for term in spec.covariate_terms:
            name = term.predictors[0]
            if term.kind == "linear":
                off += alpha_coef(mf, name) * value_of(name)
                continue
            lvls = mf.factor_levels[name]
            at = lev if name == categ else _mode(list(mf.data[name]), lvls)
            if at != lvls[0]:
                off += alpha_coef(mf, f"factor({name}){at}")
        offsets.append(off)

    if isinstance(fit, WpsFit):
        term = spec.constrained_terms[0]
        base = fit.surface(value_of(term.predictors[0]), value_of(term.predictors[1]))
    else:
        base = np.full(m, alpha[0])
        for ci, term in enumerate(spec.constrained_terms):
            base += component_curve(fit, fit.cone.components[ci].label,
                                    value_of(term.predictors[0]))
    rows = []
    for lev, off in zip(levels_out, offsets):
        eta = base + off
        vals = eta if scale == "eta" else mf.family.inverse_link(eta)
        for a, b, v in zip(G1, G2, vals):
            rows.append((float(a), float(b), str(lev), float(v)))
    return rows


def alpha_coef(mf, name):
    """Fitted coefficient of covariate column `name`."""
    fit = mf.fit
    if isinstance(fit, WpsFit):
        names = ("(Intercept)",) + tuple(fit.z_names)
        vals = np.concatenate([[np.nan], fit.alpha_hat])
    else:
        names, vals = fit.alpha_names, fit.alpha_hat
    return float(vals[list(names).index(name)])
