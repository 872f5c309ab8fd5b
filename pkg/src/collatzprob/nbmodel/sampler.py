"""Adaptive random-walk Metropolis for the hierarchical NB2 GLM.

Sampling runs on the unconstrained vector

    (b0c, beta_log, z_0..z_7, log sigma_u, log alpha)

where ``b0c = beta0 + beta_log * c`` and ``c`` is the mean log n of the fit
data; the shift has unit Jacobian and removes the near-collinearity of the
intercept and slope. Each sweep updates every coordinate in turn and then
applies two moves that leave every class mean unchanged (so only the prior
moves):

* shift:   b0c += d,         z -= d / sigma_u
* rescale: log sigma_u += e, z *= exp(-e)      (Jacobian exp(-8 e))

Every move owns a proposal scale tuned by Robbins-Monro on its acceptance
probability during warmup, then frozen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import _accel
from .._kernels import nb2 as _nb2
from .diagnostics import ess, split_rhat
from .likelihood import (
    ALPHA_SD,
    BETA0_SD,
    BETA_LOG_SD,
    LOG_2PI,
    N_CLASSES,
    SIGMA_U_SD,
    NonFiniteLogPosterior,
)
from .posterior import PARAM_NAMES, NbPosterior

log = logging.getLogger(__name__)

_B0, _BL, _Z0, _LS, _LA = 0, 1, 2, 2 + N_CLASSES, 3 + N_CLASSES
N_COORDS = 4 + N_CLASSES
_SHIFT, _RESCALE = N_COORDS, N_COORDS + 1
N_MOVES = N_COORDS + 2
_INIT_SCALE = np.array([0.05, 0.01] + [0.5] * N_CLASSES + [0.3, 0.05, 0.3, 0.3])
_LOG_HALF = math.log(2.0)
_VECTOR_ROWS = 1200


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 2
    tune: int = 1000
    draws: int = 1000
    seed: int = 123
    target_accept: float = 0.3
    thin: int = 1
    rhat_max: float = 1.05
    min_ess: float = 100.0
    check_diagnostics: bool = True

    def __post_init__(self):
        if min(self.chains, self.draws, self.thin) < 1 or self.tune < 0:
            raise ValueError("chains, draws and thin must be positive; tune nonnegative")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")


class DiagnosticsError(RuntimeError):
    """Convergence gate failed; the offending posterior rides along."""

    def __init__(self, message: str, posterior: NbPosterior, failures: dict):
        super().__init__(message)
        self.posterior = posterior
        self.failures = failures


def _gain(t: int) -> float:
    return (t + 1.0) ** -0.6


def adaptive_rwm(log_density, x0, n_tune, n_draws, rng, target_accept=0.3, scale0=1.0):
    """Component-wise adaptive RWM for a generic log density on R^d.

    Returns ``(draws, acceptance_rate)`` with draws of shape (n_draws, d).
    """
    x = np.array(x0, dtype=np.float64, ndmin=1)
    d = x.size
    log_scale = np.full(d, math.log(scale0))
    lp = log_density(x)
    if not math.isfinite(lp):
        raise NonFiniteLogPosterior("initial point has non-finite log density")
    out = np.empty((n_draws, d))
    accepted = 0
    for t in range(n_tune + n_draws):
        for i in range(d):
            prop = x.copy()
            prop[i] += math.exp(log_scale[i]) * rng.standard_normal()
            lp_new = log_density(prop)
            ratio = lp_new - lp if math.isfinite(lp_new) else -math.inf
            ok = math.log(rng.random()) < ratio
            if ok:
                x, lp = prop, lp_new
            if t < n_tune:
                log_scale[i] += _gain(t) * (min(1.0, math.exp(min(ratio, 0.0))) - target_accept)
            else:
                accepted += ok
        if t >= n_tune:
            out[t - n_tune] = x
    return out, accepted / max(1, n_draws * d)


class _GlmTarget:
    """Fit data grouped by residue class with cached per-class likelihood sums."""

    def __init__(self, data):
        res = np.asarray(data.residue8, dtype=np.int64)
        order = np.argsort(res, kind="stable")
        self.y = np.asarray(data.tau, dtype=np.float64)[order]
        self.logn = np.asarray(data.log_n, dtype=np.float64)[order]
        self.bounds = np.searchsorted(res[order], np.arange(N_CLASSES + 1)).astype(np.int64)
        self.center = float(self.logn.mean())
        yu, yc = np.unique(np.asarray(data.tau, dtype=np.int64), return_counts=True)
        self.y_unique = yu
        self.y_count = yc.astype(np.float64)
        self.const = float(np.sum(self.y_count * _nb2.lgamma_np(yu + 1.0)))
        if _accel.JIT_ENABLED:
            self._class_terms, self._alpha_terms = _nb2.class_terms_jit, _nb2.alpha_terms_jit
            # numpy's SIMD exp/log1p beat the scalar compiled loop on large classes
            if np.diff(self.bounds).max() >= _VECTOR_ROWS:
                self._class_terms = _nb2.class_terms_numpy
        else:
            self._class_terms, self._alpha_terms = _nb2.class_terms_numpy, _nb2.alpha_terms_numpy

    def eta0(self, x):
        beta0 = x[_B0] - x[_BL] * self.center
        return beta0 + math.exp(x[_LS]) * x[_Z0:_LS]

    def class_terms(self, x, dirty, prev=None):
        out = np.full(N_CLASSES, np.nan) if prev is None else prev.copy()
        if prev is not None:
            out[dirty] = np.nan
        self._class_terms(self.y, self.logn, self.bounds, self.eta0(x), x[_BL], x[_LA], out)
        return out

    def alpha_terms(self, x):
        return self._alpha_terms(self.y_unique, self.y_count, x[_LA])

    def log_prior(self, x):
        beta0 = x[_B0] - x[_BL] * self.center
        z = x[_Z0:_LS]
        sigma, alpha = math.exp(x[_LS]), math.exp(x[_LA])
        return (
            -0.5 * (beta0 / BETA0_SD) ** 2
            - math.log(BETA0_SD)
            - 0.5 * (x[_BL] / BETA_LOG_SD) ** 2
            - math.log(BETA_LOG_SD)
            - 0.5 * float(z @ z)
            - 0.5 * (sigma / SIGMA_U_SD) ** 2
            - math.log(SIGMA_U_SD)
            + _LOG_HALF
            + x[_LS]
            - 0.5 * (alpha / ALPHA_SD) ** 2
            - math.log(ALPHA_SD)
            + _LOG_HALF
            + x[_LA]
            - 0.5 * LOG_2PI * (4 + N_CLASSES)
        )

    def initial_point(self, rng):
        """Moment-matched centre plus jitter drawn from scaled-down priors."""
        y = self.y
        mean = max(float(y.mean()), 0.5)
        var = float(y.var())
        slope = 0.0
        lv = float(self.logn.var())
        if lv > 0 and np.all(y > 0):
            slope = float(np.cov(self.logn, np.log(y), bias=True)[0, 1] / lv)
        alpha = max((var - mean) / mean**2, 1e-3)
        x = np.empty(N_COORDS)
        x[_B0] = math.log(mean) + 0.1 * rng.standard_normal()
        x[_BL] = slope + 0.01 * rng.standard_normal()
        x[_Z0:_LS] = rng.standard_normal(N_CLASSES) * 0.1
        x[_LS] = math.log(abs(SIGMA_U_SD * rng.standard_normal()) + 0.05)
        x[_LA] = math.log(alpha) + 0.1 * rng.standard_normal()
        return x


def _run_chain(target: _GlmTarget, cfg: McmcConfig, rng: np.random.Generator, chain: int):
    x = target.initial_point(rng)
    terms = target.class_terms(x, slice(None))
    aterm = target.alpha_terms(x)
    lprior = target.log_prior(x)
    cur = lprior + terms.sum() + aterm
    if not math.isfinite(cur):
        raise NonFiniteLogPosterior(f"chain {chain}: non-finite log posterior at initial point")
    log_scale = np.log(_INIT_SCALE.copy())
    n_iter = cfg.tune + cfg.draws * cfg.thin
    kept = np.empty((cfg.draws, N_COORDS))
    accepts = np.zeros(N_MOVES)
    all_classes = np.arange(N_CLASSES)
    for t in range(n_iter):
        tuning = t < cfg.tune
        for m in range(N_MOVES):
            step = math.exp(log_scale[m]) * rng.standard_normal()
            prop = x.copy()
            log_jac = 0.0
            new_terms, new_aterm = terms, aterm
            if m == _SHIFT:
                prop[_B0] += step
                prop[_Z0:_LS] -= step / math.exp(x[_LS])
            elif m == _RESCALE:
                prop[_LS] += step
                prop[_Z0:_LS] *= math.exp(-step)
                log_jac = -N_CLASSES * step
            else:
                prop[m] += step
                if _Z0 <= m < _LS:
                    new_terms = target.class_terms(prop, [m - _Z0], terms)
                else:
                    new_terms = target.class_terms(prop, all_classes, terms)
                    if m == _LA:
                        new_aterm = target.alpha_terms(prop)
            new_prior = target.log_prior(prop)
            new = new_prior + new_terms.sum() + new_aterm
            if math.isnan(new):
                raise NonFiniteLogPosterior(
                    f"chain {chain}: NaN log posterior proposing move {m} at iteration {t}",
                    parameter=str(m),
                )
            ratio = new - cur + log_jac
            if math.log(rng.random()) < ratio:
                x, terms, aterm, cur = prop, new_terms, new_aterm, new
                if not tuning:
                    accepts[m] += 1
            if tuning:
                log_scale[m] += _gain(t) * (math.exp(min(ratio, 0.0)) - cfg.target_accept)
        if not tuning and (t - cfg.tune) % cfg.thin == cfg.thin - 1:
            kept[(t - cfg.tune) // cfg.thin] = x
    return kept, accepts / (cfg.draws * cfg.thin), np.exp(log_scale)


def _diagnose(post: NbPosterior, cfg: McmcConfig) -> tuple[dict, dict]:
    report, failures = {}, {}
    for name in PARAM_NAMES:
        ch = post.chains(name)
        rhat, n_eff = split_rhat(ch), ess(ch)
        report[name] = {"rhat": rhat, "ess": n_eff}
        if not (rhat <= cfg.rhat_max) or not (n_eff >= cfg.min_ess):
            failures[name] = report[name]
    return report, failures


def fit_mcmc(data, config: McmcConfig | None = None) -> NbPosterior:
    """Sample the hierarchical NB2 GLM posterior given fit ``Features``.

    Raises ``DiagnosticsError`` when any split R-hat exceeds ``rhat_max`` or
    any ESS falls below ``min_ess`` (unless ``check_diagnostics`` is off).
    """
    cfg = config or McmcConfig()
    if len(data) == 0:
        raise ValueError("data must be nonempty")
    target = _GlmTarget(data)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    samples, accept_rates, scales = [], [], []
    for c, ss in enumerate(seeds):
        kept, acc, sc = _run_chain(target, cfg, np.random.Generator(np.random.PCG64(ss)), c)
        samples.append(kept)
        accept_rates.append(acc.tolist())
        scales.append(sc.tolist())
        log.info("chain %d done, mean acceptance %.3f", c, float(acc.mean()))
    x = np.concatenate(samples)
    beta0 = x[:, _B0] - x[:, _BL] * target.center
    post = NbPosterior(
        beta0=beta0,
        beta_log=x[:, _BL],
        z=x[:, _Z0:_LS],
        sigma_u=np.exp(x[:, _LS]),
        alpha=np.exp(x[:, _LA]),
        n_chains=cfg.chains,
        n_tune=cfg.tune,
        n_draws=cfg.draws,
        seed=cfg.seed,
    )
    report, failures = _diagnose(post, cfg)
    post.diagnostics.update(
        {
            "params": report,
            "acceptance": accept_rates,
            "proposal_scales": scales,
            "config": asdict(cfg),
            "passed": not failures,
        }
    )
    if failures and cfg.check_diagnostics:
        worst = ", ".join(f"{k}: rhat={v['rhat']:.3f} ess={v['ess']:.0f}" for k, v in failures.items())
        raise DiagnosticsError(f"MCMC diagnostics failed ({worst})", post, failures)
    return post
