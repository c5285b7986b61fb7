"""MCMC over (latent path, rates, precision) and its particle-style start.

One iteration updates the path blockwise on a fixed list of overlapping
sub-intervals by Metropolis-Hastings, then draws the rates from their Gamma
full conditionals (reversible pairs through the sum/ratio parameterisation)
and the precision from its Gamma full conditional.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .likelihood import (
    PriorSpec,
    eta_posterior,
    gaussian_loglik,
    log_joint,
    sample_rho_pair_from_stats,
)
from .model import ConfigError, ModelSpec, ObservationSeries, Path, Scenario
from .proposal import (
    Boundary,
    Status,
    TotalsProposalSpec,
    acceptance_log_ratio,
    log_proposal_density,
    propose_path,
    propose_totals_border,
    propose_totals_interior,
)

log = logging.getLogger(__name__)


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Interval:
    a: float
    b: float
    kind: str = "base"  # base | midpoint | custom
    start: bool = False
    end: bool = False


@dataclass
class Schedule:
    intervals: list[Interval]

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)


def build_schedule(times) -> Schedule:
    """``[t_{k-1}, t_k]`` interleaved with the midpoint-to-midpoint intervals
    around each inner observation time; the first interval is flagged as
    the start, the last as the end."""
    t = [float(v) for v in times]
    n = len(t) - 1
    if n < 1:
        raise ValueError("need at least two observation times")
    out = []
    for k in range(1, n + 1):
        out.append(Interval(t[k - 1], t[k], "base", start=(k == 1), end=(k == n)))
        if k < n:
            out.append(Interval(0.5 * (t[k - 1] + t[k]), 0.5 * (t[k] + t[k + 1]), "midpoint"))
    return Schedule(out)


def schedule_from_config(spec, times) -> Schedule:
    if spec in (None, "standard"):
        return build_schedule(times)
    t0, tn = float(times[0]), float(times[-1])
    out = []
    for k, iv in enumerate(spec):
        a, b = float(iv[0]), float(iv[1])
        if not t0 <= a < b <= tn:
            raise ConfigError(f"schedule[{k}]: interval [{a}, {b}] outside [{t0}, {tn}]")
        out.append(Interval(a, b, "custom", start=(a == t0), end=(b == tn)))
    return Schedule(out)


@dataclass
class RunConfig:
    iterations: int = 1000
    thin: int = 1
    seed: int = 0
    scenario: str | None = None
    eta_fixed: float | None = None
    shrinkage: float = 0.95
    init_particles: int = 150
    init_steps: int = 150
    eta0: float = 10.0
    schedule: list | None = None
    path_snapshot_every: int = 0
    update_theta: bool = True
    update_eta: bool = True

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be a positive integer")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ConfigError("shrinkage must lie in (0, 1]")
        if self.init_particles < 1 or self.init_steps < 0:
            raise ConfigError("init particle count must be >= 1 and steps >= 0")
        if self.eta0 <= 0 or (self.eta_fixed is not None and self.eta_fixed <= 0):
            raise ConfigError("precisions must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        d = dict(d)
        init = d.pop("init", {})
        known = set(cls.__dataclass_fields__)
        bad = set(d) - known
        if bad:
            raise ConfigError(f"run config: unknown fields {sorted(bad)}")
        for src, dst in (("particles", "init_particles"), ("steps", "init_steps"),
                         ("shrinkage", "shrinkage"), ("eta0", "eta0")):
            if src in init:
                d[dst] = init[src]
        return cls(**d)


@dataclass
class Target:
    """Everything the chain conditions on."""

    model: ModelSpec
    prior: PriorSpec
    obs: ObservationSeries
    scenario: Scenario
    proposal: TotalsProposalSpec
    eta_fixed: float | None = None

    def __post_init__(self):
        self.mask = self.obs.mask(self.scenario)

    @classmethod
    def build(cls, model: ModelSpec, obs: ObservationSeries, run: RunConfig | None = None,
              prior: PriorSpec | None = None, proposal: TotalsProposalSpec | None = None) -> Target:
        run = run or RunConfig()
        scenario = model.scenario(run.scenario)
        eta_fixed = run.eta_fixed
        if eta_fixed is None and scenario.exact:
            eta_fixed = model.exact_precision
        if obs.species != model.species:
            raise ConfigError("observation species do not match the model")
        return cls(model, prior or PriorSpec.from_config(model), obs, scenario,
                   proposal or TotalsProposalSpec.from_model(model), eta_fixed)

    def restricted(self, last: int) -> Target:
        return Target(self.model, self.prior, self.obs.restrict(last), self.scenario,
                      self.proposal, self.eta_fixed)


@dataclass
class ChainState:
    path: Path
    theta: np.ndarray
    eta: float
    rng: np.random.Generator
    stats: dict = field(default_factory=dict)

    def record(self, kind: str, accepted: bool):
        acc, tot = self.stats.get(kind, (0, 0))
        self.stats[kind] = (acc + int(accepted), tot + 1)

    def acceptance_rates(self) -> dict:
        out = {k: acc / tot for k, (acc, tot) in sorted(self.stats.items()) if tot}
        acc = sum(a for a, _ in self.stats.values())
        tot = sum(t for _, t in self.stats.values())
        out["pooled"] = acc / tot if tot else float("nan")
        return out


# ---------------------------------------------------------------------------
# path updates


def _update_interval(state: ChainState, target: Target, iv: Interval, boundary: Boundary) -> bool:
    model = target.model
    path = state.path
    rng = state.rng
    a, b = iv.a, iv.b
    T, R = path.times, path.types
    ia = int(np.searchsorted(T, a, side="right"))
    ib = int(np.searchsorted(T, b, side="right"))
    y_a = path.y_a + model.A @ np.bincount(R[:ia], minlength=model.r)
    r_old = np.bincount(R[ia:ib], minlength=model.r)
    if boundary is Boundary.INTERIOR:
        status, r_new = propose_totals_interior(r_old, target.proposal, rng)
        y_a_new = y_a
    else:
        status, r_new, y_a_new, _ = propose_totals_border(r_old, boundary, y_a, model.A, target.proposal, rng)
    kind = "border" if boundary is not Boundary.INTERIOR else iv.kind
    if status is not Status.PROPOSED:
        state.record(kind, False)
        return False
    out = propose_path(model, state.theta, y_a_new, r_new, (a, b), rng)
    if out.status is not Status.PROPOSED:
        state.record(kind, False)
        return False
    old = Path(a, b, y_a, T[ia:ib], R[ia:ib])
    out.log_q_reverse = log_proposal_density(model, state.theta, old, y_a, r_old, (a, b))
    lr = acceptance_log_ratio(model, state.theta, state.eta, old, out, target.obs, boundary,
                              obs_mask=target.mask)
    accept = math.log(rng.random()) < lr
    state.record(kind, accept)
    if accept:
        new = out.path
        y0 = new.y_a if boundary is Boundary.START else path.y_a
        state.path = Path(path.a, path.b, y0,
                          np.concatenate([T[:ia], new.times, T[ib:]]),
                          np.concatenate([R[:ia], new.types, R[ib:]]))
    return accept


def sweep(state: ChainState, target: Target, schedule: Schedule) -> ChainState:
    """One pass of blockwise path updates in schedule order.

    On the first/last interval a border move (free initial/final state) is
    tried first, followed by an ordinary fixed-endpoint move.
    """
    for iv in schedule:
        if iv.start and iv.a == state.path.a:
            _update_interval(state, target, iv, Boundary.START)
        if iv.end and iv.b == state.path.b:
            _update_interval(state, target, iv, Boundary.END)
        _update_interval(state, target, iv, Boundary.INTERIOR)
    return state


# ---------------------------------------------------------------------------
# parameter updates


def draw_theta(target: Target, path: Path, rng) -> np.ndarray:
    model, prior = target.model, target.prior
    _, integ, totals, ok = K.path_stats(path.y_a, path.times, path.types, path.a, path.b,
                                        np.ones(model.r), model.A, *model.compiled)
    if not ok:
        raise RuntimeError("chain path became invalid")
    theta = np.empty(model.r)
    paired = prior.paired
    for i in range(model.r):
        if i not in paired:
            theta[i] = rng.gamma(prior.theta_alpha[i] + totals[i], 1.0 / (prior.theta_beta[i] + integ[i]))
    for g in prior.reparam_groups:
        s, q = sample_rho_pair_from_stats(g, integ[g.i], integ[g.j], int(totals[g.i]), int(totals[g.j]), rng)
        theta[g.i] = s * q
        theta[g.j] = s * (1.0 - q)
    return theta


def gibbs_theta(state: ChainState, target: Target, shrinkage: float = 1.0) -> ChainState:
    state.theta = draw_theta(target, state.path, state.rng) * shrinkage
    return state


def gibbs_eta(state: ChainState, target: Target) -> ChainState:
    if target.eta_fixed is not None:
        state.eta = target.eta_fixed
        return state
    post = eta_posterior(target.prior, target.model, state.path, target.obs, target.scenario)
    state.eta = float(post.sample(state.rng))
    return state


# ---------------------------------------------------------------------------
# chain driver


@dataclass
class Trace:
    reactions: list[str]
    species: list[str]
    obs_times: np.ndarray
    iters: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    logjoint: list = field(default_factory=list)
    rtot: list = field(default_factory=list)
    latent: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def append(self, m: int, state: ChainState, target: Target):
        self.iters.append(m)
        self.theta.append(state.theta.copy())
        self.eta.append(state.eta)
        self.logjoint.append(log_joint(target.model, target.prior, state.theta, state.eta, state.path,
                                       target.obs, target.scenario,
                                       include_eta_prior=target.eta_fixed is None))
        self.rtot.append(state.path.reaction_totals(target.model.r))
        self.latent.append(state.path.states_at(target.model.A, self.obs_times))

    def as_arrays(self) -> dict:
        r, p = len(self.reactions), len(self.species)
        return {
            "iter": np.array(self.iters, dtype=np.int64),
            "theta": np.array(self.theta).reshape(-1, r),
            "eta": np.array(self.eta),
            "logjoint": np.array(self.logjoint),
            "rtot": np.array(self.rtot, dtype=np.int64).reshape(-1, r),
            "latent": np.array(self.latent, dtype=np.int64).reshape(-1, len(self.obs_times), p),
        }

    def write(self, trace_path, latent_path=None):
        r = len(self.reactions)
        with open(trace_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", *(f"theta_{i + 1}" for i in range(r)), "eta", "logjoint",
                        *(f"rtot_{i + 1}" for i in range(r))])
            for m, th, et, lj, rt in zip(self.iters, self.theta, self.eta, self.logjoint, self.rtot):
                w.writerow([m, *(repr(float(v)) for v in th), repr(float(et)), repr(float(lj)),
                            *(int(v) for v in rt)])
        if latent_path is not None:
            with open(latent_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["iter", "t", "species", "value"])
                for m, states in zip(self.iters, self.latent):
                    for t, row in zip(self.obs_times, states):
                        for s, v in zip(self.species, row):
                            w.writerow([m, repr(float(t)), s, int(v)])


def run_chain(state: ChainState, target: Target, config: RunConfig,
              schedule: Schedule | None = None, progress=None) -> Trace:
    """``config.iterations`` sweeps, recording every ``config.thin``-th state."""
    schedule = schedule or schedule_from_config(config.schedule, target.obs.times)
    trace = Trace(target.model.reactions, target.model.species, target.obs.times)
    for m in range(1, config.iterations + 1):
        sweep(state, target, schedule)
        if config.update_theta:
            gibbs_theta(state, target)
        if config.update_eta:
            gibbs_eta(state, target)
        if m % config.thin == 0:
            trace.append(m, state, target)
        if config.path_snapshot_every and m % config.path_snapshot_every == 0:
            trace.snapshots.append((m, state.path.copy()))
        if progress is not None:
            progress(m, state)
    return trace


# ---------------------------------------------------------------------------
# initialisation


def sample_initial_states(model: ModelSpec, x0, mask0, eta0: float, size: int, rng) -> np.ndarray:
    """Draws from ``f0(y) * g(x0 | y)``; exact because both factor over
    species."""
    out = np.empty((size, model.p), dtype=np.int64)
    for j, s in enumerate(model.init):
        support = np.arange(s.lo, s.hi + 1)
        if mask0[j]:
            lw = -0.5 * eta0 * (x0[j] - support) ** 2
            w = np.exp(lw - lw.max())
            out[:, j] = rng.choice(support, size=size, p=w / w.sum())
        else:
            out[:, j] = rng.choice(support, size=size)
    return out


def _simulate(model, theta, y0, a, b, rng, equal_rate, cap):
    return K.gillespie(rng, np.ascontiguousarray(y0, dtype=np.int64), float(a), float(b),
                       np.asarray(theta, dtype=float), model.A, *model.compiled, equal_rate, cap)


def initialize(target: Target, config: RunConfig, rng, event_cap: int = 10**7) -> ChainState:
    """Starting values by greedy particle selection.

    On ``[t_0, t_1]``: equal-rate forward paths from initial states drawn
    given ``x_0``; keep the one that best explains ``x_0, x_1``.  Then for
    each further observation: run ``init_steps`` sweeps on the prefix with
    the precision held at ``eta0`` and rates shrunk by ``shrinkage``, extend
    ``init_particles`` forward simulations to the next time and keep the
    best-scoring one.
    """
    model, obs = target.model, target.obs
    t = obs.times
    n = obs.n
    mask = target.mask
    eta0 = config.eta0
    nu = config.shrinkage
    S = config.init_particles
    if n < 1:
        raise InitializationError("need at least two observation times")

    y0s = sample_initial_states(model, obs.values[0], mask[0], eta0, S, rng)
    best, best_score = None, -math.inf
    for s in range(S):
        status, times, types, y1 = _simulate(model, np.ones(model.r), y0s[s],
                                             t[0], t[1], rng, True, event_cap)
        if status != K.OK:
            continue
        score = (gaussian_loglik(eta0, obs.values[0], y0s[s], mask[0])
                 + gaussian_loglik(eta0, obs.values[1], y1, mask[1]))
        if score > best_score:
            best, best_score = Path(t[0], t[1], y0s[s], times, types), score
    if best is None:
        raise InitializationError(
            "no particle produced a usable path on the first interval; increase init particles")
    state = ChainState(best, np.zeros(model.r), eta0, rng)
    sub = target.restricted(1)
    sub.eta_fixed = eta0
    state.theta = draw_theta(sub, state.path, rng) * nu

    for l in range(1, n):
        sub = target.restricted(l)
        sub.eta_fixed = eta0
        sched = build_schedule(t[: l + 1])
        for _ in range(config.init_steps):
            sweep(state, sub, sched)
            gibbs_theta(state, sub, nu)
        y_l = state.path.final_state(model.A)
        best, best_score = None, -math.inf
        for s in range(S):
            status, times, types, y_next = _simulate(model, state.theta, y_l, t[l], t[l + 1], rng, False, event_cap)
            if status != K.OK:
                continue
            score = gaussian_loglik(eta0, obs.values[l + 1], y_next, mask[l + 1])
            if score > best_score:
                best, best_score = (times, types), score
        if best is None:
            raise InitializationError(
                f"all {S} particles failed on [{t[l]}, {t[l + 1]}]; increase init particles")
        p = state.path
        state.path = Path(p.a, t[l + 1], p.y_a, np.concatenate([p.times, best[0]]),
                          np.concatenate([p.types, best[1]]))
        log.debug("init: extended to t=%g with %d events", t[l + 1], state.path.n_tot)

    state.eta = target.eta_fixed if target.eta_fixed is not None else eta0
    state.stats = {}
    return state
