"""Posterior draws container, posterior predictive sampling and densities."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import _accel
from .._kernels import nb2 as _nb2
from .likelihood import N_CLASSES, GlmParams

PARAM_NAMES = ("beta0", "beta_log", *(f"u_{r}" for r in range(N_CLASSES)), "sigma_u", "alpha")


@dataclass(frozen=True, eq=False)
class NbPosterior:
    """Flattened MCMC draws (chain-major) of the hierarchical NB2 GLM.

    Offsets are stored non-centered: ``u`` is always ``sigma_u[:, None] * z``.
    """

    beta0: np.ndarray
    beta_log: np.ndarray
    z: np.ndarray
    sigma_u: np.ndarray
    alpha: np.ndarray
    n_chains: int = 1
    n_tune: int = 0
    n_draws: int = 0
    seed: int = 0
    diagnostics: dict = field(default_factory=dict)
    u: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("beta0", "beta_log", "sigma_u", "alpha"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(-1))
        z = np.asarray(self.z, dtype=np.float64).reshape(-1, N_CLASSES)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "u", self.sigma_u[:, None] * z)
        if self.size == 0:
            raise ValueError("posterior has no draws")
        if self.n_draws == 0:
            object.__setattr__(self, "n_draws", self.size // max(self.n_chains, 1))

    @property
    def size(self) -> int:
        return self.beta0.size

    @property
    def draws(self) -> list[GlmParams]:
        return [self.draw(s) for s in range(self.size)]

    def draw(self, s: int) -> GlmParams:
        return GlmParams(
            float(self.beta0[s]),
            float(self.beta_log[s]),
            tuple(float(v) for v in self.u[s]),
            float(self.sigma_u[s]),
            float(self.alpha[s]),
        )

    @classmethod
    def from_params(cls, params: list[GlmParams], **meta) -> "NbPosterior":
        return cls(
            beta0=[p.beta0 for p in params],
            beta_log=[p.beta_log for p in params],
            z=[p.z for p in params],
            sigma_u=[p.sigma_u for p in params],
            alpha=[p.alpha for p in params],
            **meta,
        )

    def param_array(self, name: str) -> np.ndarray:
        if name.startswith("u_"):
            return self.u[:, int(name[2:])]
        return getattr(self, name)

    def chains(self, name: str) -> np.ndarray:
        """(n_chains, n_draws) view of one named parameter."""
        return self.param_array(name).reshape(self.n_chains, -1)

    def log_mu(self, n, residue=None) -> np.ndarray:
        """(len(n), S) matrix of log mu over draws."""
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        res = n & 7 if residue is None else np.asarray(residue)
        logn = np.log(n.astype(np.float64))
        return self.beta0[None, :] + self.beta_log[None, :] * logn[:, None] + self.u[:, res].T

    def to_dict(self) -> dict:
        draws = [
            {
                "chain": s // self.n_draws if self.n_draws else 0,
                "beta0": float(self.beta0[s]),
                "beta_log": float(self.beta_log[s]),
                "z": self.z[s].tolist(),
                "u": self.u[s].tolist(),
                "sigma_u": float(self.sigma_u[s]),
                "alpha": float(self.alpha[s]),
            }
            for s in range(self.size)
        ]
        return {
            "n_chains": self.n_chains,
            "n_tune": self.n_tune,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
            "draws": draws,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NbPosterior":
        draws = d["draws"]
        return cls(
            beta0=[x["beta0"] for x in draws],
            beta_log=[x["beta_log"] for x in draws],
            z=[x["z"] for x in draws],
            sigma_u=[x["sigma_u"] for x in draws],
            alpha=[x["alpha"] for x in draws],
            n_chains=int(d["n_chains"]),
            n_tune=int(d["n_tune"]),
            n_draws=int(d["n_draws"]),
            seed=int(d["seed"]),
            diagnostics=d.get("diagnostics", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "NbPosterior":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def posterior_predictive(posterior: NbPosterior, ns, draws_per_point: int, rng: np.random.Generator) -> np.ndarray:
    """(len(ns), draws_per_point) replicated stopping times.

    Each replicate picks a posterior draw uniformly, then samples
    NB2(mu_n, alpha) through its Gamma-Poisson mixture.
    """
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    pick = rng.integers(0, posterior.size, size=(ns.size, draws_per_point))
    logn = np.log(ns.astype(np.float64))[:, None]
    mu = np.exp(posterior.beta0[pick] + posterior.beta_log[pick] * logn + posterior.u[pick, (ns & 7)[:, None]])
    alpha = posterior.alpha[pick]
    rate = rng.gamma(shape=1.0 / alpha, scale=alpha * mu)
    return rng.poisson(rate)


def predictive_log_densities(posterior: NbPosterior, ns, ys) -> np.ndarray:
    """log( mean_s NB2(y_i | mu_i^(s), alpha^(s)) ) for each (n_i, y_i)."""
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    if ns.shape != ys.shape:
        raise ValueError("ns and ys must have the same shape")
    out = np.empty(ns.size)
    args = (
        ys,
        np.log(ns.astype(np.float64)),
        (ns & 7).astype(np.int64),
        posterior.beta0,
        posterior.beta_log,
        np.ascontiguousarray(posterior.u),
        np.log(posterior.alpha),
        out,
    )
    if _accel.JIT_ENABLED:
        _nb2.predictive_jit(*args)
    else:
        _nb2.predictive_numpy(*args)
    return out


def predictive_log_density(posterior: NbPosterior, n: int, y: int) -> float:
    return float(predictive_log_densities(posterior, [n], [y])[0])
