"""Exponential-family descriptors with canonical links."""

import numpy as np
from scipy.special import expit, gammaln, logit, xlogy

from .exceptions import InvalidInputError

__all__ = ["Family", "Gaussian", "Poisson", "Binomial", "get_family"]

MU_EPS = 1e-10


class Family:
    """Base class.  Subclasses supply the log-partition ``b`` and friends.

    Every family uses its canonical link, so ``theta == eta`` and the
    Hessian of the negative log-likelihood in ``eta`` is ``diag(b''(eta))``.
    """

    name = None
    link_name = None
    fixed_dispersion = True

    def b(self, theta):
        raise NotImplementedError

    def mean(self, theta):
        raise NotImplementedError

    def variance(self, mu):
        raise NotImplementedError

    def link(self, mu):
        raise NotImplementedError

    def inverse_link(self, eta):
        return self.mean(eta)

    def validate(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("response contains non-finite values")
        return y

    def start(self, y):
        """Link-transformed, slightly shrunken response used as a start."""
        raise NotImplementedError

    def negloglik(self, eta, y):
        """``sum(b(eta) - y * eta)``: negative log-likelihood up to a constant."""
        eta = np.asarray(eta, dtype=float)
        return float(np.sum(self.b(eta) - y * eta))

    def saturated_negloglik(self, y):
        raise NotImplementedError

    def deviance(self, y, mu):
        raise NotImplementedError

    def deviance_eta(self, y, eta):
        return 2.0 * (self.negloglik(eta, y) - self.saturated_negloglik(y))

    def loglik(self, y, mu):
        """Maximized log-likelihood including all normalizing constants."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return isinstance(other, Family) and other.name == self.name

    def __hash__(self):
        return hash(self.name)


class Gaussian(Family):
    name = "gaussian"
    link_name = "identity"
    fixed_dispersion = False

    def b(self, theta):
        return 0.5 * np.asarray(theta) ** 2

    def mean(self, theta):
        return np.asarray(theta, dtype=float)

    def variance(self, mu):
        return np.ones_like(np.asarray(mu, dtype=float))

    def link(self, mu):
        return np.asarray(mu, dtype=float)

    def start(self, y):
        return np.asarray(y, dtype=float)

    def saturated_negloglik(self, y):
        return float(np.sum(-0.5 * y ** 2))

    def deviance(self, y, mu):
        return float(np.sum((y - mu) ** 2))

    def loglik(self, y, mu):
        n = y.size
        sigma2 = max(float(np.mean((y - mu) ** 2)), 1e-300)
        return -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0)


class Poisson(Family):
    name = "poisson"
    link_name = "log"

    def b(self, theta):
        return np.exp(theta)

    def mean(self, theta):
        return np.exp(theta)

    def variance(self, mu):
        return np.asarray(mu, dtype=float)

    def link(self, mu):
        return np.log(mu)

    def validate(self, y):
        y = super().validate(y)
        if np.any(y < 0):
            raise InvalidInputError("poisson response must be nonnegative")
        return y

    def start(self, y):
        return np.log(y + 0.5)

    def saturated_negloglik(self, y):
        return float(np.sum(y - xlogy(y, y)))

    def deviance(self, y, mu):
        mu = np.maximum(mu, MU_EPS)
        return float(2.0 * np.sum(xlogy(y, y) - xlogy(y, mu) - (y - mu)))

    def loglik(self, y, mu):
        mu = np.maximum(mu, MU_EPS)
        return float(np.sum(xlogy(y, mu) - mu - gammaln(y + 1.0)))


class Binomial(Family):
    """Bernoulli outcomes coded 0/1 with the logit link."""

    name = "binomial"
    link_name = "logit"

    def b(self, theta):
        return np.logaddexp(0.0, theta)

    def mean(self, theta):
        return expit(theta)

    def variance(self, mu):
        mu = np.asarray(mu, dtype=float)
        return mu * (1.0 - mu)

    def link(self, mu):
        return logit(mu)

    def validate(self, y):
        y = super().validate(y)
        if np.any((y != 0) & (y != 1)):
            raise InvalidInputError("binomial response must be coded 0/1")
        return y

    def start(self, y):
        return logit((y + 0.5) / 2.0)

    def saturated_negloglik(self, y):
        return 0.0

    def deviance(self, y, mu):
        mu = np.clip(mu, MU_EPS, 1 - MU_EPS)
        return float(-2.0 * np.sum(xlogy(y, mu) + xlogy(1 - y, 1 - mu)))

    def loglik(self, y, mu):
        return -0.5 * self.deviance(y, mu)


_FAMILIES = {
    "gaussian": Gaussian, "g": Gaussian,
    "poisson": Poisson, "p": Poisson,
    "binomial": Binomial, "b": Binomial,
}


def get_family(family):
    """Family instance from a name (``"gaussian"``, ``"p"``, ...) or instance."""
    if isinstance(family, Family):
        return family
    try:
        return _FAMILIES[str(family).lower()]()
    except KeyError:
        raise InvalidInputError(
            f"unknown family {family!r}; use gaussian, poisson or binomial") from None
