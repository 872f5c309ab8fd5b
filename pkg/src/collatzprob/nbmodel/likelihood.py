"""NB2 distribution and the hierarchical GLM log posterior.

NB2 here means mean ``mu`` and variance ``mu + alpha * mu**2``. Libraries
that parameterize the dispersion as ``mu + mu**2 / phi`` need
``phi = 1 / alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _accel
from .._kernels import nb2 as _nb2

LOG_2PI = math.log(2.0 * math.pi)

# prior scales (standard deviations)
BETA0_SD = 10.0
BETA_LOG_SD = 5.0
SIGMA_U_SD = 1.0
ALPHA_SD = 5.0
N_CLASSES = 8


class NonFiniteLogPosterior(ArithmeticError):
    def __init__(self, message: str, row: int | None = None, parameter: str | None = None):
        super().__init__(message)
        self.row = row
        self.parameter = parameter


@dataclass(frozen=True)
class Nb2Params:
    mu: float
    alpha: float

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")

    @property
    def variance(self) -> float:
        return self.mu + self.alpha * self.mu**2

    @property
    def r(self) -> float:
        return 1.0 / self.alpha

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + self.alpha * self.mu)


@dataclass(frozen=True)
class GlmParams:
    beta0: float
    beta_log: float
    u: tuple
    sigma_u: float
    alpha: float

    def __post_init__(self):
        if len(self.u) != N_CLASSES:
            raise ValueError("u must have 8 entries")
        if not self.sigma_u > 0:
            raise ValueError("sigma_u must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def z(self) -> np.ndarray:
        return np.asarray(self.u, dtype=np.float64) / self.sigma_u

    def eta(self, n, residue=None) -> np.ndarray:
        n = np.asarray(n)
        res = (n & 7) if residue is None else np.asarray(residue)
        return self.beta0 + self.beta_log * np.log(n.astype(np.float64)) + np.asarray(self.u)[res]

    def mu(self, n, residue=None) -> np.ndarray:
        return np.exp(self.eta(n, residue))


def nb2_log_pmf(y, params: Nb2Params) -> float:
    """log P(Y = y) under NB2(mu, alpha) via r = 1/alpha, p = 1/(1 + alpha mu)."""
    y = int(y)
    if y < 0:
        return -math.inf
    r = params.r
    am = params.alpha * params.mu
    log_p = -math.log1p(am)
    log_1mp = math.log(am) + log_p
    lgr, lg = _accel.pick(_nb2.lgamma_ratio), _accel.pick(_nb2.lgamma)
    return lgr(y, r) - lg(y + 1.0) + y * log_1mp + r * log_p


def nb2_log_pmf_array(y, mu, alpha) -> np.ndarray:
    """Vectorized ``nb2_log_pmf`` with broadcasting over y, mu, alpha."""
    y = np.asarray(y, dtype=np.int64)
    mu = np.asarray(mu, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(mu <= 0) or np.any(alpha <= 0):
        raise ValueError("mu and alpha must be positive")
    r = 1.0 / alpha
    lam = np.log(alpha) + np.log(mu)
    sp = _nb2.softplus_np(lam)
    return _nb2.lgamma_ratio_np(y, r) - _nb2.lgamma_np(y + 1.0) + y * (lam - sp) - r * sp


def nb2_sample(params: Nb2Params, rng: np.random.Generator, size=None):
    """Gamma-Poisson mixture: rate ~ Gamma(1/alpha, scale alpha*mu), Y ~ Poisson(rate)."""
    lam = rng.gamma(shape=params.r, scale=params.alpha * params.mu, size=size)
    out = rng.poisson(lam)
    return int(out) if size is None else out


def _normal_logpdf(x, sd):
    return -0.5 * LOG_2PI - math.log(sd) - 0.5 * (x / sd) ** 2


def _halfnormal_logpdf(x, sd):
    return math.log(2.0) + _normal_logpdf(x, sd)


def log_prior(params: GlmParams, jacobian: bool = True) -> float:
    """Prior density on (beta0, beta_log, z_0..z_7, sigma_u, alpha).

    With ``jacobian`` the density is on (log sigma_u, log alpha) instead.
    """
    z = params.z
    lp = (
        _normal_logpdf(params.beta0, BETA0_SD)
        + _normal_logpdf(params.beta_log, BETA_LOG_SD)
        + float(np.sum(-0.5 * LOG_2PI - 0.5 * z * z))
        + _halfnormal_logpdf(params.sigma_u, SIGMA_U_SD)
        + _halfnormal_logpdf(params.alpha, ALPHA_SD)
    )
    if jacobian:
        lp += math.log(params.sigma_u) + math.log(params.alpha)
    return lp


def log_likelihood_terms(params: GlmParams, data) -> np.ndarray:
    # overflow shows up as non-finite terms, which log_likelihood reports by row
    with np.errstate(over="ignore", invalid="ignore"):
        mu = params.mu(data.n, data.residue8)
        return nb2_log_pmf_array(data.tau, mu, params.alpha)


def log_likelihood(params: GlmParams, data) -> float:
    terms = log_likelihood_terms(params, data)
    if not np.all(np.isfinite(terms)):
        row = int(np.flatnonzero(~np.isfinite(terms))[0])
        raise NonFiniteLogPosterior(
            f"non-finite likelihood at row {row} (n={int(data.n[row])}, y={int(data.tau[row])})", row=row
        )
    return float(np.sum(terms))


def log_posterior(params: GlmParams, data, jacobian: bool = True) -> float:
    if len(data) == 0:
        raise ValueError("data must be nonempty")
    for name in ("beta0", "beta_log", "sigma_u", "alpha"):
        if not math.isfinite(getattr(params, name)):
            raise NonFiniteLogPosterior(f"parameter {name} is not finite", parameter=name)
    lp = log_prior(params, jacobian) + log_likelihood(params, data)
    if not math.isfinite(lp):
        raise NonFiniteLogPosterior("non-finite log prior", parameter="prior")
    return lp
