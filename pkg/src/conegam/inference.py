"""
Inference after a constrained fit.

* variance estimate ``SSR / (n - d0 - c * EDF)`` with ``EDF = |J| + d0``;
* coefficient table for the parametric terms, using the projection onto
  the active edges and the non-covariate part of the linear space;
* null and residual deviances;
* the cone information criterion with a simulated null expectation of the
  effective degrees of freedom.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import ConeGamError, InvalidInputError

__all__ = [
    "CoefTable",
    "CicResult",
    "sigma2_formula",
    "estimate_sigma2",
    "coef_table",
    "null_deviance",
    "deviances",
    "cic_formula",
    "simulate_cic",
]


def check_c(c):
    if not 1.0 <= c <= 2.0:
        raise InvalidInputError(f"c must lie in [1, 2], got {c}")
    return float(c)


def sigma2_formula(ssr, n, d0, edf, c=1.2):
    """``ssr / (n - d0 - c * edf)``, rejecting a non-positive denominator."""
    check_c(c)
    denom = n - d0 - c * edf
    if denom <= 0:
        raise InvalidInputError(
            f"n - d0 - c*EDF = {denom:g} <= 0; use fewer knots or a smaller c")
    return ssr / denom


def estimate_sigma2(fit, c=None):
    """Variance estimate for a Gaussian fit (default `c` is the fit's own)."""
    if fit.family.name != "gaussian":
        raise InvalidInputError("sigma^2 is estimated for the gaussian family only")
    c = fit.c if c is None else c
    return sigma2_formula(fit.ssr, fit.n, fit.d0, fit.edf, c)


@dataclass(frozen=True)
class CoefTable:
    names: tuple
    estimate: np.ndarray
    std_error: np.ndarray
    statistic: np.ndarray
    p_value: np.ndarray
    stat_name: str
    dispersion: float
    df: float

    def __len__(self):
        return len(self.names)

    def records(self):
        return [
            {"term": nm, "estimate": float(e), "std_error": float(s),
             f"{self.stat_name}_value": float(t), "p_value": float(p)}
            for nm, e, s, t, p in zip(self.names, self.estimate, self.std_error,
                                      self.statistic, self.p_value)
        ]

    def __str__(self):
        head = f"{'':<20}{'Estimate':>10}{'StdErr':>10}{self.stat_name + '.value':>10}{'p.value':>11}"
        lines = [head]
        for nm, e, s, t, p in zip(self.names, self.estimate, self.std_error,
                                  self.statistic, self.p_value):
            lines.append(f"{nm:<20}{e:>10.4f}{s:>10.4f}{t:>10.4f}{p:>11.4g}")
        return "\n".join(lines)


def _table(names, est, cov, dispersion, gaussian, df):
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = est / se
    if gaussian:
        p = 2.0 * stats.t.sf(np.abs(stat), df)
        stat_name = "t"
    else:
        p = 2.0 * stats.norm.sf(np.abs(stat))
        stat_name = "z"
    p = np.where(np.isnan(p), 1.0, p)
    return CoefTable(tuple(names), est, se, stat, p, stat_name, dispersion, df)


def _residualize(X, target):
    if X.shape[1] == 0:
        return target
    coef = np.linalg.lstsq(X, target, rcond=None)[0]
    return target - X @ coef


def coef_table(fit):
    """
    Estimates, standard errors, t (or z) statistics and p-values for the
    intercept and parametric covariates.

    With ``P_J`` the (weighted) projection onto the active edges (as built
    by their components, before orthogonalization against the covariates)
    and the non-covariate columns of the linear space,

        alpha = [Z'(I - P_J)Z]^{-1} Z'(I - P_J) y,
        cov   = [Z'(I - P_J)Z]^{-1} * sigma^2,

    where ``y`` is the working response and ``sigma^2 = 1`` for Poisson and
    binomial fits.  Gaussian fits use t with
    ``floor(n - d0 - c * EDF)`` degrees of freedom.
    """
    from .wps import WpsFit, wps_coef_table

    if isinstance(fit, WpsFit):
        return wps_coef_table(fit)
    cone = fit.cone
    if cone.Z_cols.size == 0:
        return _table((), np.zeros(0), np.zeros((0, 0)), np.nan, True, np.nan)
    sw = np.sqrt(fit.weights)
    Z = sw[:, None] * cone.L_basis[:, cone.Z_cols]
    X0 = cone.L_basis[:, cone.X0_cols()]
    EJ = cone.raw_edges[:, fit.active_set]
    P_cols = sw[:, None] * np.column_stack([X0, EJ])
    RZ = _residualize(P_cols, Z)
    M = Z.T @ RZ
    for j in range(RZ.shape[1]):
        others = np.delete(RZ, j, axis=1)
        r = _residualize(others, RZ[:, j])
        if np.linalg.norm(r) <= 1e-9 * max(np.linalg.norm(Z[:, j]), 1e-300):
            raise InvalidInputError(
                f"covariate {cone.Z_names[j]!r} is collinear with the active face")
    target = sw * fit.working_response
    Minv = np.linalg.inv(M)
    est = Minv @ (RZ.T @ target)
    gaussian = fit.family.name == "gaussian"
    if gaussian:
        dispersion = estimate_sigma2(fit)
        df = math.floor(fit.n - fit.d0 - fit.c * fit.edf)
    else:
        dispersion, df = 1.0, np.inf
    return _table(cone.Z_names, est, Minv * dispersion, dispersion, gaussian, df)


def null_deviance(y, family):
    """Deviance of the intercept-only model of the same family."""
    y = np.asarray(y, dtype=float)
    return family.deviance(y, np.full(y.size, y.mean()))


def deviances(fit):
    """``(null_deviance, residual_deviance)`` of a fit."""
    return (null_deviance(fit.y, fit.family),
            fit.family.deviance(fit.y, fit.mu_hat))


def cic_formula(loglik, n, d0, e0_edf):
    """
    Cone information criterion

        -2/n * loglik + log(2 * (E0 + d0) / (n - d0 - 1.5 * E0) + 1).
    """
    denom = n - d0 - 1.5 * e0_edf
    if denom <= 0:
        raise InvalidInputError(
            f"n - d0 - 1.5*E0(EDF) = {denom:g} <= 0; the model is too large for CIC")
    return -2.0 / n * loglik + math.log(2.0 * (e0_edf + d0) / denom + 1.0)


@dataclass(frozen=True)
class CicResult:
    cic: float
    e0_edf: float
    nsim: int
    seed: int
    failures: int = 0
    loglik: float = float("nan")


def _null_sample(rng, family, eta0, sigma):
    if family.name == "gaussian":
        return eta0 + sigma * rng.standard_normal(eta0.size)
    if family.name == "poisson":
        return rng.poisson(np.exp(eta0)).astype(float)
    return rng.binomial(1, family.inverse_link(eta0)).astype(float)


def simulate_cic(fit, nsim=100, seed=0, threads=1):
    """
    Cone information criterion with a simulated null expectation of EDF.

    Responses are drawn from the fitted family with every nonparametric
    component set to zero (intercept and covariates kept at their fitted
    values; Gaussian errors use the fitted variance).  The full constrained
    model is refitted to each draw and the mean of its EDF is ``E0(EDF)``.

    Each replicate draws from its own stream spawned from `seed`, and
    results are reduced in replicate order, so the outcome does not depend
    on `threads`.

    Raises
    ------
    ConeGamError
        If 20% or more of the replicate fits fail.
    """
    from .wps import WpsFit, _refit_edf as wps_refit_edf

    if nsim < 1:
        raise InvalidInputError("nsim must be >= 1")
    family = fit.family
    if isinstance(fit, WpsFit):
        eta0 = fit.null_eta
        d0 = fit.d0

        def refit(y):
            return wps_refit_edf(fit, y)
    else:
        from .gam import fit_irls

        cone = fit.cone
        eta0 = cone.L_basis[:, cone.Z_cols] @ fit.alpha_hat
        d0 = cone.d0

        def refit(y):
            return fit_irls(y, family, cone, c=fit.c).edf

    if family.name == "gaussian":
        s2 = fit.sigma2_hat
        if not np.isfinite(s2):
            s2 = float(np.sum((fit.y - fit.mu_hat) ** 2)) / fit.y.size
        sigma = math.sqrt(max(s2, 0.0))
    else:
        sigma = 0.0
    streams = np.random.SeedSequence(seed).spawn(nsim)

    def replicate(ss):
        rng = np.random.default_rng(ss)
        ystar = _null_sample(rng, family, eta0, sigma)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return float(refit(ystar))
        except ConeGamError:
            return None

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            edfs = list(pool.map(replicate, streams))
    else:
        edfs = [replicate(ss) for ss in streams]
    good = [e for e in edfs if e is not None]
    failures = nsim - len(good)
    if failures >= 0.2 * nsim:
        raise ConeGamError(f"{failures} of {nsim} null replicate fits failed")
    e0 = float(np.mean(good))
    loglik = family.loglik(fit.y, fit.mu_hat)
    cic = cic_formula(loglik, fit.y.size, d0, e0)
    return CicResult(cic=cic, e0_edf=e0, nsim=nsim, seed=seed,
                     failures=failures, loglik=loglik)
