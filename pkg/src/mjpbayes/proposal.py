"""Endpoint-conditioned path proposals.

A proposal on ``[a, b]`` first moves the reaction totals along the kernel
lattice of the jump matrix (so ``y_b`` is preserved), or, on the first and
last interval, along vectors that move a single species at the free end.
A path with those totals is then generated: the order of reaction types is
drawn sequentially with weights ``sqrt(S_i * mu_i)`` (remaining count times
hazard), and the waiting fractions come from a Dirichlet whose
concentrations are proportional to the inverse total hazards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels as K
from .lattice import border_moves, kernel_basis
from .likelihood import gaussian_loglik
from .model import ConfigError, ModelSpec, ObservationSeries, Path, Scenario


class Status(Enum):
    PROPOSED = "proposed"
    UNCHANGED = "unchanged"
    IMPOSSIBLE = "impossible"


class Boundary(Enum):
    INTERIOR = "interior"
    START = "start"
    END = "end"


# ---------------------------------------------------------------------------
# laws on integer vectors


@dataclass(frozen=True)
class SignedBinomialLaw:
    """Independent coordinates ``B * Bin(n, iota)`` with a fair random sign."""

    dim: int
    n: int = 2
    iota: float = 0.4

    def sample(self, rng) -> np.ndarray:
        mag = rng.binomial(self.n, self.iota, size=self.dim)
        sign = np.where(rng.random(self.dim) < 0.5, -1, 1)
        return (sign * mag).astype(np.int64)

    def mass(self, z) -> float:
        z = np.asarray(z)
        out = 1.0
        for v in z:
            k = abs(int(v))
            if k > self.n:
                return 0.0
            pk = math.comb(self.n, k) * self.iota**k * (1 - self.iota) ** (self.n - k)
            out *= pk if k == 0 else 0.5 * pk
        return out


@dataclass(frozen=True)
class TableLaw:
    """Finite law: ``vectors[k]`` with probability ``probs[k]``."""

    vectors: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        if vecs.ndim != 2 or len(vecs) != len(probs) or len(probs) == 0:
            raise ConfigError("table law needs a list of (vector, probability) entries")
        if np.any(probs < 0) or not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
            raise ConfigError("table law probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "probs", probs / probs.sum())
        for v, pr in zip(vecs, probs):
            if not math.isclose(self.mass(-v), pr, rel_tol=1e-9, abs_tol=1e-15):
                raise ConfigError(f"table law is not symmetric at {v.tolist()}")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def sample(self, rng) -> np.ndarray:
        return self.vectors[rng.choice(len(self.probs), p=self.probs)]

    def mass(self, z) -> float:
        z = np.asarray(z)
        hit = np.all(self.vectors == z, axis=1)
        return float(self.probs[hit].sum())

    @classmethod
    def plus_minus(cls, groups: list[np.ndarray]) -> TableLaw:
        """Uniform over groups, then uniform over ``+-`` each column in the group."""
        groups = [g for g in groups if g.shape[1] > 0]
        if not groups:
            raise ValueError("no move vectors")
        vecs, probs = [], []
        for g in groups:
            w = 1.0 / (len(groups) * 2 * g.shape[1])
            for c in g.T:
                vecs += [c, -c]
                probs += [w, w]
        return cls(np.array(vecs), np.array(probs))


@dataclass
class TotalsProposalSpec:
    V: np.ndarray                       # (r, d) kernel basis
    z_law: SignedBinomialLaw | TableLaw
    border_laws: dict[Boundary, TableLaw | None]

    @classmethod
    def from_model(cls, model: ModelSpec, cfg: dict | None = None) -> TotalsProposalSpec:
        cfg = model.config.get("proposal", {}) if cfg is None else cfg
        A = model.A
        if "kernel_basis" in cfg:
            V = np.asarray(cfg["kernel_basis"], dtype=np.int64).reshape(-1, model.r).T
            if np.any(A @ V):
                raise ConfigError("proposal.kernel_basis: vectors are not in the kernel of A")
        else:
            V = kernel_basis(A)
        d = V.shape[1]
        zc = cfg.get("z_law", {"type": "signed_binomial"})
        if zc.get("type") == "table":
            law = TableLaw(np.array([e[0] for e in zc["entries"]]).reshape(-1, d),
                           np.array([e[1] for e in zc["entries"]]))
        elif zc.get("type", "signed_binomial") == "signed_binomial":
            law = SignedBinomialLaw(d, int(zc.get("n", 2)), float(zc.get("iota", 0.4)))
        else:
            raise ConfigError(f"proposal.z_law.type: unknown {zc.get('type')!r}")

        borders = {}
        bcfg = cfg.get("border", {})
        for boundary, default_species in ((Boundary.START, model.free_init_species),
                                          (Boundary.END, list(range(model.p)))):
            bc = bcfg.get(boundary.value, {})
            if "moves" in bc:
                mv = np.asarray(bc["moves"], dtype=np.int64).reshape(-1, model.r).T
                borders[boundary] = TableLaw.plus_minus([mv])
                continue
            species = [model.species.index(s) if isinstance(s, str) else int(s)
                       for s in bc.get("species", [model.species[j] for j in default_species])]
            groups = [border_moves(A, j) for j in species]
            groups = [g for g in groups if g.shape[1] > 0]
            borders[boundary] = TableLaw.plus_minus(groups) if groups else None
        return cls(V, law, borders)


@dataclass
class ProposalOutcome:
    status: Status
    path: Path | None = None
    log_q_forward: float = 0.0
    log_q_reverse: float = 0.0


# ---------------------------------------------------------------------------
# totals moves


def propose_totals_interior(r_tot, spec: TotalsProposalSpec, rng):
    """``(status, r_new)``; ``UNCHANGED`` when a component goes negative."""
    r_tot = np.asarray(r_tot, dtype=np.int64)
    if spec.V.shape[1] == 0:
        return Status.PROPOSED, r_tot.copy()
    z = spec.z_law.sample(rng)
    r_new = r_tot + spec.V @ z
    if np.any(r_new < 0):
        return Status.UNCHANGED, r_tot.copy()
    return Status.PROPOSED, r_new


def propose_totals_border(r_tot, boundary: Boundary, y_a, A, spec: TotalsProposalSpec, rng):
    """Border move ``r_new = r_tot + r'``.

    Returns ``(status, r_new, y_a_new, y_b_new)``: at the start the right
    end state is kept and the initial state follows from the new totals, at
    the end the initial state is kept.
    """
    A = np.asarray(A, dtype=np.int64)
    r_tot = np.asarray(r_tot, dtype=np.int64)
    y_a = np.asarray(y_a, dtype=np.int64)
    y_b = y_a + A @ r_tot
    law = spec.border_laws.get(boundary)
    if law is None:
        return Status.UNCHANGED, r_tot.copy(), y_a, y_b
    r_new = r_tot + law.sample(rng)
    if np.any(r_new < 0):
        return Status.UNCHANGED, r_tot.copy(), y_a, y_b
    if boundary is Boundary.START:
        y_a_new, y_b_new = y_b - A @ r_new, y_b
    else:
        y_a_new, y_b_new = y_a, y_a + A @ r_new
    if np.any(y_a_new < 0) or np.any(y_b_new < 0):
        return Status.UNCHANGED, r_tot.copy(), y_a, y_b
    return Status.PROPOSED, r_new, y_a_new, y_b_new


# ---------------------------------------------------------------------------
# path generation given totals


def dirichlet_params(mu0) -> np.ndarray:
    """Dirichlet concentrations for waiting fractions with total hazards
    ``mu0`` before each step: proportional to ``1/mu0`` and scaled so the
    summed variances match those of conditioned exponential waits."""
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.ndim != 1 or len(mu0) == 0:
        raise ValueError("need a nonempty 1-d sequence of total hazards")
    if np.any(mu0 <= 0):
        raise ValueError("all total hazards must be positive")
    return K.dirichlet_alpha(mu0)


def propose_path(model: ModelSpec, theta, y_a, r_tot, interval, rng) -> ProposalOutcome:
    a, b = interval
    y_a = np.ascontiguousarray(y_a, dtype=np.int64)
    status, times, types, logq = K.propose_bridge(
        rng, y_a, np.ascontiguousarray(r_tot, dtype=np.int64), float(a), float(b),
        np.asarray(theta, dtype=float), model.A, *model.compiled)
    if status != K.OK:
        return ProposalOutcome(Status.IMPOSSIBLE, None, -math.inf)
    return ProposalOutcome(Status.PROPOSED, Path(a, b, y_a, times, types), float(logq))


def log_proposal_density(model: ModelSpec, theta, path: Path, y_a=None, r_tot=None,
                         interval=None) -> float:
    """Log density of generating ``path`` given its start state and totals."""
    y_a = path.y_a if y_a is None else np.ascontiguousarray(y_a, dtype=np.int64)
    r_tot = path.reaction_totals(model.r) if r_tot is None else np.ascontiguousarray(r_tot, dtype=np.int64)
    a, b = (path.a, path.b) if interval is None else interval
    return float(K.log_proposal(y_a, path.times, path.types, r_tot, float(a), float(b),
                                np.asarray(theta, dtype=float), model.A, *model.compiled))


# ---------------------------------------------------------------------------
# Metropolis-Hastings ratio


def acceptance_log_ratio(model: ModelSpec, theta, eta: float, old: Path, new: ProposalOutcome,
                         obs: ObservationSeries | None, boundary: Boundary = Boundary.INTERIOR,
                         scenario: Scenario | None = None, obs_mask: np.ndarray | None = None) -> float:
    """Log of the Metropolis-Hastings ratio (before taking ``min(0, .)``)
    for replacing the segment ``old`` by ``new.path`` on the same interval.

    The totals move is symmetric and cancels; a changed initial state at the
    start of the series contributes the ratio of initial densities.
    """
    if new.status is not Status.PROPOSED:
        return -math.inf
    theta = np.asarray(theta, dtype=float)
    npath = new.path
    a, b = old.a, old.b
    lp_new = K.path_stats(npath.y_a, npath.times, npath.types, a, b, theta, model.A, *model.compiled)[0]
    if lp_new == -math.inf:
        return -math.inf
    lp_old = K.path_stats(old.y_a, old.times, old.types, a, b, theta, model.A, *model.compiled)[0]
    out = lp_new - lp_old + new.log_q_reverse - new.log_q_forward
    if obs is not None:
        sel = (obs.times >= a) & (obs.times <= b)
        if sel.any():
            mask = (obs.mask(scenario) if obs_mask is None else obs_mask)[sel]
            q = obs.times[sel]
            x = obs.values[sel]
            s_new = K.states_at(npath.y_a, npath.times, npath.types, model.A, q)
            s_old = K.states_at(old.y_a, old.times, old.types, model.A, q)
            out += gaussian_loglik(eta, x, s_new, mask) - gaussian_loglik(eta, x, s_old, mask)
    if boundary is Boundary.START and not np.array_equal(npath.y_a, old.y_a):
        out += model.log_f0(npath.y_a) - model.log_f0(old.y_a)
    return out
