"""Densities and conditional parameter updates.

All densities are on the log scale; ``-inf`` marks an impossible path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import _kernels as K
from .model import ConfigError, ModelSpec, ObservationSeries, Path, Scenario

LOG_2PI = math.log(2.0 * math.pi)


class ImproperPosteriorError(ValueError):
    """The conditional posterior of the precision is not a proper Gamma."""


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)


@dataclass(frozen=True)
class RhoGroup:
    """Reversible pair ``(i, j)`` updated as ``sum = theta_i + theta_j`` with a
    Gamma prior and ``ratio = theta_i / sum`` with a Beta prior."""

    i: int
    j: int
    alpha: float = 0.1
    beta: float = 1.0
    ratio_a: float = 1.0
    ratio_b: float = 1.0


@dataclass
class PriorSpec:
    theta_alpha: np.ndarray
    theta_beta: np.ndarray
    eta_alpha: float = 0.0
    eta_beta: float = 0.0
    reparam_groups: list[RhoGroup] = field(default_factory=list)

    def __post_init__(self):
        self.theta_alpha = np.asarray(self.theta_alpha, dtype=float)
        self.theta_beta = np.asarray(self.theta_beta, dtype=float)
        if np.any(self.theta_alpha <= 0) or np.any(self.theta_beta <= 0):
            raise ConfigError("theta prior hyperparameters must be positive")
        if self.eta_alpha < 0 or self.eta_beta < 0:
            raise ConfigError("eta prior hyperparameters must be nonnegative")
        seen = set()
        for g in self.reparam_groups:
            if g.i == g.j or {g.i, g.j} & seen:
                raise ConfigError("reparameterisation pairs must be disjoint")
            seen |= {g.i, g.j}

    @property
    def paired(self) -> set[int]:
        return {k for g in self.reparam_groups for k in (g.i, g.j)}

    @classmethod
    def from_config(cls, model: ModelSpec, cfg: dict | None = None) -> PriorSpec:
        cfg = model.config.get("priors", {}) if cfg is None else cfg
        r = model.r
        th = cfg.get("theta", {})
        alpha = np.broadcast_to(np.asarray(th.get("alpha", 0.1), float), (r,)).copy()
        beta = np.broadcast_to(np.asarray(th.get("beta", 1.0), float), (r,)).copy()
        eta = cfg.get("eta", {})
        groups = []
        for k, g in enumerate(cfg.get("reparam", [])):
            try:
                i, j = (model.reactions.index(n) if isinstance(n, str) else int(n) for n in g["pair"])
            except (KeyError, ValueError):
                raise ConfigError(f"priors.reparam[{k}]: bad 'pair'") from None
            ra, rb = g.get("ratio_prior", [1.0, 1.0])
            groups.append(RhoGroup(i, j, float(g.get("alpha", 0.1)), float(g.get("beta", 1.0)), float(ra), float(rb)))
        return cls(alpha, beta, float(eta.get("alpha", 0.0)), float(eta.get("beta", 0.0)), groups)


# ---------------------------------------------------------------------------
# path density


def path_statistics(model: ModelSpec, theta, path: Path):
    """``(log psi, integrated intensities, reaction totals, valid)``."""
    return K.path_stats(path.y_a, path.times, path.types, float(path.a), float(path.b),
                        np.asarray(theta, dtype=float), model.A, *model.compiled)


def log_path_density(model: ModelSpec, theta, path: Path) -> float:
    if np.any(path.y_a < 0):
        return -math.inf
    return float(path_statistics(model, theta, path)[0])


# ---------------------------------------------------------------------------
# observation density


def gaussian_loglik(eta: float, x: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    """Sum over masked entries of ``log N(x | y, 1/eta)``."""
    m = int(mask.sum())
    if m == 0:
        return 0.0
    resid = (x - y)[mask]
    return 0.5 * m * (math.log(eta) - LOG_2PI) - 0.5 * eta * float(resid @ resid)


def log_obs_density(model: ModelSpec, eta: float, obs: ObservationSeries, path: Path,
                    interval: tuple[float, float] | None = None,
                    scenario: Scenario | None = None) -> float:
    """Observation log density for the times ``a <= t_l <= b``."""
    a, b = interval if interval is not None else (path.a, path.b)
    sel = (obs.times >= a) & (obs.times <= b)
    if not sel.any():
        return 0.0
    states = path.states_at(model.A, obs.times[sel])
    return gaussian_loglik(eta, obs.values[sel], states, obs.mask(scenario)[sel])


# ---------------------------------------------------------------------------
# conjugate updates


def theta_posterior(prior: PriorSpec, model: ModelSpec, path: Path) -> list[GammaParams]:
    _, integ, totals, ok = path_statistics(model, np.ones(model.r), path)
    if not ok:
        raise ValueError("theta posterior requested for an invalid path")
    return [GammaParams(prior.theta_alpha[i] + totals[i], prior.theta_beta[i] + integ[i])
            for i in range(model.r)]


def residual_stats(model: ModelSpec, path: Path, obs: ObservationSeries,
                   scenario: Scenario | None = None) -> tuple[int, float]:
    """Count of used observation entries and their residual sum of squares."""
    states = path.states_at(model.A, obs.times)
    mask = obs.mask(scenario)
    resid = (obs.values - states)[mask]
    return int(mask.sum()), float(resid @ resid)


def eta_posterior(prior: PriorSpec, model: ModelSpec, path: Path, obs: ObservationSeries,
                  scenario: Scenario | None = None) -> GammaParams:
    m, ss = residual_stats(model, path, obs, scenario)
    shape = prior.eta_alpha + 0.5 * m
    rate = prior.eta_beta + 0.5 * ss
    if shape <= 0 or rate <= 0:
        raise ImproperPosteriorError(
            f"precision posterior Gamma({shape}, {rate}) is improper; "
            "use a proper prior or more observations")
    return GammaParams(shape, rate)


# ---------------------------------------------------------------------------
# joint density


def _log_gamma_pdf(x, a, b):
    if x <= 0:
        return -math.inf
    return a * math.log(b) - math.lgamma(a) + (a - 1) * math.log(x) - b * x


def log_prior_theta(prior: PriorSpec, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    out = 0.0
    paired = prior.paired
    for i in range(len(theta)):
        if i not in paired:
            out += _log_gamma_pdf(theta[i], prior.theta_alpha[i], prior.theta_beta[i])
    for g in prior.reparam_groups:
        s = theta[g.i] + theta[g.j]
        if theta[g.i] <= 0 or theta[g.j] <= 0:
            return -math.inf
        q = theta[g.i] / s
        out += _log_gamma_pdf(s, g.alpha, g.beta) - math.log(s)  # Jacobian of (sum, ratio)
        out += ((g.ratio_a - 1) * math.log(q) + (g.ratio_b - 1) * math.log1p(-q)
                - (gammaln(g.ratio_a) + gammaln(g.ratio_b) - gammaln(g.ratio_a + g.ratio_b)))
    return out


def log_prior_eta(prior: PriorSpec, eta: float) -> float:
    if eta <= 0:
        return -math.inf
    if prior.eta_alpha > 0 and prior.eta_beta > 0:
        return _log_gamma_pdf(eta, prior.eta_alpha, prior.eta_beta)
    # improper: density proportional to eta^(alpha-1) exp(-beta eta)
    return (prior.eta_alpha - 1) * math.log(eta) - prior.eta_beta * eta


def log_joint(model: ModelSpec, prior: PriorSpec, theta, eta: float, path: Path,
              obs: ObservationSeries, scenario: Scenario | None = None,
              include_eta_prior: bool = True) -> float:
    lf0 = model.log_f0(path.y_a)
    if lf0 == -math.inf:
        return -math.inf
    lpsi = log_path_density(model, theta, path)
    if lpsi == -math.inf:
        return -math.inf
    out = lf0 + lpsi + log_obs_density(model, eta, obs, path, scenario=scenario)
    out += log_prior_theta(prior, theta)
    if include_eta_prior:
        out += log_prior_eta(prior, eta)
    return out


# ---------------------------------------------------------------------------
# reversible-pair reparameterisation


def rho_transform(theta, groups: list[RhoGroup]) -> np.ndarray:
    """``(sum, ratio)`` for each group, then the unpaired rates in order."""
    theta = np.asarray(theta, dtype=float)
    out = []
    paired = set()
    for g in groups:
        s = theta[g.i] + theta[g.j]
        if s <= 0:
            raise ValueError(f"rates {g.i}, {g.j} sum to zero")
        out += [s, theta[g.i] / s]
        paired |= {g.i, g.j}
    out += [theta[k] for k in range(len(theta)) if k not in paired]
    return np.array(out)


def rho_inverse(rho, groups: list[RhoGroup], r: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    r = len(rho) if r is None else r
    theta = np.empty(r)
    paired = set()
    for k, g in enumerate(groups):
        s, q = rho[2 * k], rho[2 * k + 1]
        if s <= 0:
            raise ValueError("rate sum must be positive")
        theta[g.i] = s * q
        theta[g.j] = s * (1.0 - q)
        paired |= {g.i, g.j}
    rest = iter(rho[2 * len(groups):])
    for k in range(r):
        if k not in paired:
            theta[k] = next(rest)
    return theta


def rho_ratio_logdensity(q, alpha, beta, I1, I2, N1, N2, ratio_a=1.0, ratio_b=1.0):
    """Unnormalised log density of the ratio after integrating out the sum."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (-(alpha + N1 + N2) * np.log(beta + q * I1 + (1.0 - q) * I2)
               + (N1 + ratio_a - 1) * np.log(q) + (N2 + ratio_b - 1) * np.log1p(-q))
        # 0 * log(0) at the edges
        if N1 + ratio_a - 1 == 0:
            out = np.where(q == 0, -(alpha + N1 + N2) * np.log(beta + I2) + (N2 + ratio_b - 1) * np.log1p(-q), out)
        if N2 + ratio_b - 1 == 0:
            out = np.where(q == 1, -(alpha + N1 + N2) * np.log(beta + I1) + (N1 + ratio_a - 1) * np.log(q), out)
    return out


GRID_SIZE = 4096


def ratio_grid_cdf(alpha, beta, I1, I2, N1, N2, ratio_a=1.0, ratio_b=1.0, size=GRID_SIZE):
    """Grid and normalised CDF for the ratio density.

    A coarse pass over [0, 1] locates the region where the log density is
    within 40 of its maximum; the fine grid of ``size`` points covers it.
    """
    args = (alpha, beta, I1, I2, N1, N2, ratio_a, ratio_b)
    coarse = np.linspace(0.0, 1.0, 1025)
    lc = rho_ratio_logdensity(coarse, *args)
    top = np.nanmax(lc[np.isfinite(lc)]) if np.any(np.isfinite(lc)) else 0.0
    keep = np.flatnonzero(np.isfinite(lc) & (lc > top - 40.0))
    lo = coarse[max(keep[0] - 1, 0)]
    hi = coarse[min(keep[-1] + 1, len(coarse) - 1)]
    grid = np.linspace(lo, hi, size)
    lg = rho_ratio_logdensity(grid, *args)
    dens = np.exp(lg - np.max(lg[np.isfinite(lg)]))
    dens[~np.isfinite(dens)] = 0.0
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    return grid, cdf / cdf[-1]


def sample_rho_pair_from_stats(group: RhoGroup, I1: float, I2: float, N1: int, N2: int, rng):
    """Draw ``(sum, ratio)`` for one reversible pair given its sufficient
    statistics: ratio by inverse CDF on a grid, then the sum from its
    conditional Gamma."""
    grid, cdf = ratio_grid_cdf(group.alpha, group.beta, I1, I2, N1, N2, group.ratio_a, group.ratio_b)
    u = rng.random()
    q = float(np.interp(u, cdf, grid))
    q = min(max(q, 0.0), 1.0)
    shape = group.alpha + N1 + N2
    rate = group.beta + q * I1 + (1.0 - q) * I2
    s = rng.gamma(shape, 1.0 / rate)
    return s, q


def sample_rho_pair(prior: PriorSpec, model: ModelSpec, path: Path, group: RhoGroup, rng):
    _, integ, totals, ok = path_statistics(model, np.ones(model.r), path)
    if not ok:
        raise ValueError("invalid path")
    return sample_rho_pair_from_stats(group, integ[group.i], integ[group.j],
                                      int(totals[group.i]), int(totals[group.j]), rng)
