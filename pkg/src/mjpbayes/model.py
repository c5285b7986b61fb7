"""Reaction-network models, paths and observation series.

A model is a Markov jump process on counts of ``p`` species with ``r``
reactions.  Reaction ``i`` moves the state by column ``A[:, i]`` of the jump
matrix and fires with hazard ``theta[i] * h_i(t, y)``.  The state-dependent
part ``h_i`` is a product of binomial coefficients of affine functions of the
state (which covers mass action and conserved-quantity terms like
``K - DNA``), optionally times a closed-form time factor.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any

import numpy as np

from . import _kernels as K


class ConfigError(ValueError):
    """A model, run or data file could not be parsed."""


TIME_FACTOR_KINDS = {"none": 0, "linear": 1, "exp": 2}


@dataclass(frozen=True)
class Factor:
    """``binomial(coef . y + const, order)``"""

    coef: tuple[int, ...]
    const: int
    order: int

    def value(self, y) -> int:
        n = self.const + sum(c * int(v) for c, v in zip(self.coef, y))
        return math.comb(n, self.order) if n >= self.order else 0


@dataclass(frozen=True)
class IntensityForm:
    factors: tuple[Factor, ...]
    time_kind: str = "none"
    time_params: tuple[float, float] = (1.0, 0.0)

    def state_part(self, y) -> int:
        out = 1
        for f in self.factors:
            out *= f.value(y)
        return out

    def time_part(self, t: float) -> float:
        return K.time_factor(TIME_FACTOR_KINDS[self.time_kind], np.array(self.time_params, float), float(t))

    def time_integral(self, s: float, t: float) -> float:
        return K.time_factor_integral(TIME_FACTOR_KINDS[self.time_kind], np.array(self.time_params, float), float(s), float(t))


@dataclass(frozen=True)
class SpeciesInit:
    """Initial law of one species: uniform on ``{lo..hi}`` (``lo == hi`` is a
    point mass)."""

    lo: int
    hi: int

    @property
    def is_fixed(self) -> bool:
        return self.lo == self.hi

    def log_pmf(self, v: int) -> float:
        return -math.log(self.hi - self.lo + 1) if self.lo <= v <= self.hi else -math.inf


@dataclass(frozen=True)
class Scenario:
    """Which species are measured, and whether the measurement is exact."""

    name: str
    observed: tuple[bool, ...]
    exact: bool = False


@dataclass
class ModelSpec:
    name: str
    species: list[str]
    reactions: list[str]
    A: np.ndarray
    intensities: list[IntensityForm]
    init: list[SpeciesInit]
    constants: dict[str, int] = field(default_factory=dict)
    scenarios: dict[str, Scenario] = field(default_factory=dict)
    default_scenario: str | None = None
    exact_precision: float = 1e6
    config: dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=np.int64)
        p, r = self.A.shape
        if len(self.species) != p or len(self.reactions) != r or len(self.intensities) != r:
            raise ConfigError("species/reactions do not match the jump matrix shape")
        F = max(1, max(len(h.factors) for h in self.intensities))
        fc = np.zeros((r, F, p), dtype=np.int64)
        fk = np.zeros((r, F), dtype=np.int64)
        fo = np.zeros((r, F), dtype=np.int64)
        tk = np.zeros(r, dtype=np.int64)
        tp = np.zeros((r, 2))
        for i, h in enumerate(self.intensities):
            for f, fac in enumerate(h.factors):
                fc[i, f] = fac.coef
                fk[i, f] = fac.const
                fo[i, f] = fac.order
            tk[i] = TIME_FACTOR_KINDS[h.time_kind]
            tp[i] = h.time_params
        self.compiled = (fc, fk, fo, tk, tp)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.A.shape[1]

    @property
    def time_homogeneous(self) -> bool:
        return all(h.time_kind == "none" for h in self.intensities)

    def scenario(self, name: str | None = None) -> Scenario:
        name = name or self.default_scenario
        if name is None:
            return Scenario("all", tuple([True] * self.p))
        try:
            return self.scenarios[name]
        except KeyError:
            raise ConfigError(f"unknown scenario {name!r}; known: {sorted(self.scenarios)}") from None

    # -- intensities -------------------------------------------------------
    def standardized_intensity(self, i: int, t: float, y) -> float:
        h = self.intensities[i]
        return h.state_part(y) * h.time_part(t)

    def integrated_intensity(self, i: int, s: float, t: float, y) -> float:
        if t < s:
            raise ValueError("integration bounds must satisfy s <= t")
        h = self.intensities[i]
        return h.state_part(y) * h.time_integral(s, t)

    def intensity_vector(self, t: float, y) -> np.ndarray:
        out = np.empty(self.r)
        K.intensities(np.asarray(y, dtype=np.int64), float(t), *self.compiled, out)
        return out

    # -- initial law -------------------------------------------------------
    def log_f0(self, y) -> float:
        return sum(s.log_pmf(int(v)) for s, v in zip(self.init, y))

    @property
    def free_init_species(self) -> list[int]:
        return [j for j, s in enumerate(self.init) if not s.is_fixed]


def apply_reaction(y, A, i: int):
    """``y + A[:, i]``, or ``None`` if a count would become negative."""
    out = np.asarray(y, dtype=np.int64) + np.asarray(A, dtype=np.int64)[:, i]
    return None if np.any(out < 0) else out


@dataclass
class Path:
    """Trajectory on ``[a, b]``: initial state plus ordered events in ``(a, b]``."""

    a: float
    b: float
    y_a: np.ndarray
    times: np.ndarray
    types: np.ndarray

    def __post_init__(self):
        self.y_a = np.ascontiguousarray(self.y_a, dtype=np.int64)
        self.times = np.ascontiguousarray(self.times, dtype=np.float64)
        self.types = np.ascontiguousarray(self.types, dtype=np.int64)

    @classmethod
    def empty(cls, a, b, y_a):
        return cls(a, b, y_a, np.empty(0), np.empty(0, dtype=np.int64))

    @property
    def n_tot(self) -> int:
        return len(self.times)

    def reaction_totals(self, r: int) -> np.ndarray:
        return np.bincount(self.types, minlength=r).astype(np.int64)

    def states(self, A) -> np.ndarray:
        """States ``y_0 .. y_n`` (initial plus after each event)."""
        steps = np.asarray(A, dtype=np.int64)[:, self.types].T
        return np.vstack([self.y_a, self.y_a + np.cumsum(steps, axis=0)]) if len(steps) else self.y_a[None, :].copy()

    def final_state(self, A) -> np.ndarray:
        return self.y_a + np.asarray(A, dtype=np.int64) @ self.reaction_totals(np.shape(A)[1])

    def states_at(self, A, query) -> np.ndarray:
        return K.states_at(self.y_a, self.times, self.types, np.asarray(A, dtype=np.int64), np.asarray(query, dtype=np.float64))

    def is_valid(self, model: ModelSpec) -> bool:
        """Strict ordering inside (a, b], nonnegative states, and positive
        intensity at every event."""
        if np.any(self.y_a < 0):
            return False
        _, _, _, ok = K.path_stats(self.y_a, self.times, self.types, self.a, self.b,
                                   np.ones(model.r), model.A, *model.compiled)
        return bool(ok)

    def copy(self) -> Path:
        return Path(self.a, self.b, self.y_a.copy(), self.times.copy(), self.types.copy())


def reaction_totals(path: Path, r: int) -> np.ndarray:
    return path.reaction_totals(r)


@dataclass
class ObservationSeries:
    times: np.ndarray
    values: np.ndarray  # (n+1, p), NaN marks `na`
    species: list[str]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.times), len(self.species)):
            raise ConfigError("observation values do not match times x species")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ConfigError("observation times must be strictly increasing")
        if np.all(np.isnan(self.values)):
            raise ConfigError("observation series has no non-missing entry")

    @property
    def n(self) -> int:
        return len(self.times) - 1

    def mask(self, scenario: Scenario | None = None) -> np.ndarray:
        m = ~np.isnan(self.values)
        if scenario is not None:
            m &= np.asarray(scenario.observed, dtype=bool)[None, :]
        return m

    def restrict(self, last: int) -> ObservationSeries:
        return ObservationSeries(self.times[: last + 1], self.values[: last + 1], self.species)


# ---------------------------------------------------------------------------
# config / file IO


def _species_index(model_species, name, where):
    if isinstance(name, int):
        return name
    try:
        return model_species.index(name)
    except ValueError:
        raise ConfigError(f"{where}: unknown species {name!r}") from None


def _resolve_int(v, constants, where):
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected an integer")
    if isinstance(v, int):
        return v
    if isinstance(v, str) and v in constants:
        return constants[v]
    raise ConfigError(f"{where}: expected an integer or a constant name, got {v!r}")


def _parse_factor(spec, species, constants, where):
    coef = [0] * len(species)
    for name, c in spec.get("coef", {}).items():
        coef[_species_index(species, name, where)] += _resolve_int(c, constants, where)
    const = spec.get("const", 0)
    if isinstance(const, list):
        const = sum(_resolve_int(c, constants, where) for c in const)
    else:
        const = _resolve_int(const, constants, where)
    order = _resolve_int(spec.get("order", 1), constants, where)
    if order < 1:
        raise ConfigError(f"{where}: factor order must be >= 1")
    return Factor(tuple(coef), const, order)


def model_from_dict(cfg: dict) -> ModelSpec:
    try:
        species = list(cfg["species"])
        rx = cfg["reactions"]
    except KeyError as e:
        raise ConfigError(f"model config: missing field {e.args[0]!r}") from None
    constants = {k: int(v) for k, v in cfg.get("constants", {}).items()}
    p = len(species)
    A = np.zeros((p, len(rx)), dtype=np.int64)
    names, forms = [], []
    for i, rc in enumerate(rx):
        where = f"reactions[{i}]"
        names.append(rc.get("name", f"R{i + 1}"))
        reactants = {_species_index(species, k, where): int(v) for k, v in rc.get("reactants", {}).items()}
        products = {_species_index(species, k, where): int(v) for k, v in rc.get("products", {}).items()}
        if "jump" in rc:
            jump = rc["jump"]
            if len(jump) != p:
                raise ConfigError(f"{where}.jump: expected {p} entries")
            A[:, i] = [int(v) for v in jump]
            if reactants or products:
                stoich = np.zeros(p, dtype=np.int64)
                for j, v in products.items():
                    stoich[j] += v
                for j, v in reactants.items():
                    stoich[j] -= v
                if not np.array_equal(stoich, A[:, i]):
                    raise ConfigError(f"{where}: jump does not match products - reactants")
        elif reactants or products:
            for j, v in products.items():
                A[j, i] += v
            for j, v in reactants.items():
                A[j, i] -= v
        else:
            raise ConfigError(f"{where}: needs 'jump' or 'reactants'/'products'")
        if "intensity" in rc:
            factors = tuple(_parse_factor(f, species, constants, f"{where}.intensity[{k}]")
                            for k, f in enumerate(rc["intensity"]))
        else:
            # mass action
            factors = tuple(Factor(tuple(1 if j == jj else 0 for jj in range(p)), 0, v)
                            for j, v in sorted(reactants.items()) if v > 0)
        tf = rc.get("time_factor")
        if tf is None:
            forms.append(IntensityForm(factors))
        else:
            kind = tf.get("kind", "none")
            if kind not in TIME_FACTOR_KINDS:
                raise ConfigError(f"{where}.time_factor: unknown kind {kind!r}")
            par = tuple(float(v) for v in tf.get("params", [1.0, 0.0]))
            if len(par) != 2:
                raise ConfigError(f"{where}.time_factor.params: expected 2 numbers")
            forms.append(IntensityForm(factors, kind, par))

    init_cfg = cfg.get("init", {})
    init = []
    for j, s in enumerate(species):
        spec = init_cfg.get(s, {"fixed": 0})
        where = f"init.{s}"
        if "fixed" in spec:
            v = _resolve_int(spec["fixed"], constants, where)
            init.append(SpeciesInit(v, v))
        elif "uniform" in spec:
            lo, hi = (_resolve_int(v, constants, where) for v in spec["uniform"])
            if lo > hi or lo < 0:
                raise ConfigError(f"{where}: bad uniform range")
            init.append(SpeciesInit(lo, hi))
        else:
            raise ConfigError(f"{where}: expected 'fixed' or 'uniform'")

    em = cfg.get("error_model", {"type": "gaussian"})
    if em.get("type", "gaussian") != "gaussian":
        raise ConfigError("error_model.type: only 'gaussian' is supported")
    scenarios = {}
    for name, sc in em.get("scenarios", {}).items():
        obs = sc.get("observed", species)
        mask = [False] * p
        for s in obs:
            mask[_species_index(species, s, f"error_model.scenarios.{name}")] = True
        scenarios[name] = Scenario(name, tuple(mask), bool(sc.get("exact", False)))
    default = em.get("default_scenario")
    if default is not None and default not in scenarios:
        raise ConfigError(f"error_model.default_scenario: unknown scenario {default!r}")

    return ModelSpec(
        name=cfg.get("name", "model"),
        species=species,
        reactions=names,
        A=A,
        intensities=forms,
        init=init,
        constants=constants,
        scenarios=scenarios,
        default_scenario=default,
        exact_precision=float(em.get("exact_precision", 1e6)),
        config=cfg,
    )


def load_model(path) -> ModelSpec:
    path = FsPath(path)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} col {e.colno}: {e.msg}") from None
    return model_from_dict(cfg)


def bundled_model(name: str) -> ModelSpec:
    """Load one of the shipped configs (``oregonator``, ``prokaryotic``)."""
    return load_model(FsPath(__file__).parent / "data" / f"{name}.json")


def file_digest(path) -> str:
    return hashlib.sha256(FsPath(path).read_bytes()).hexdigest()


def read_observations(path, species: list[str] | None = None) -> ObservationSeries:
    text = FsPath(path).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0].strip() != "t":
        raise ConfigError(f"{path}: header must start with 't'")
    header = [h.strip() for h in rows[0]]
    names = header[1:]
    if species is not None and names != list(species):
        raise ConfigError(f"{path}: species columns {names} do not match model {list(species)}")
    times, values = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigError(f"{path}: line {ln}: expected {len(header)} fields")
        try:
            times.append(float(row[0]))
            values.append([math.nan if v.strip() == "na" else float(v) for v in row[1:]])
        except ValueError as e:
            raise ConfigError(f"{path}: line {ln}: {e}") from None
    return ObservationSeries(np.array(times), np.array(values).reshape(len(times), len(names)), names)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_observations(path, obs: ObservationSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *obs.species])
        for t, row in zip(obs.times, obs.values):
            w.writerow([_fmt(t), *("na" if math.isnan(v) else _fmt(v) for v in row)])


def write_path(path, trajectory: Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# interval,{_fmt(trajectory.a)},{_fmt(trajectory.b)}\n")
        fh.write("# y0," + ",".join(str(int(v)) for v in trajectory.y_a) + "\n")
        fh.write("tau,reaction_index\n")
        for t, i in zip(trajectory.times, trajectory.types):
            fh.write(f"{_fmt(t)},{int(i) + 1}\n")


def read_path(path) -> Path:
    lines = FsPath(path).read_text().splitlines()
    try:
        iv = lines[0].split(",")
        y0 = lines[1].split(",")
        if iv[0] != "# interval" or y0[0] != "# y0" or lines[2].strip() != "tau,reaction_index":
            raise ValueError
        a, b = float(iv[1]), float(iv[2])
        y_a = np.array([int(v) for v in y0[1:]], dtype=np.int64)
    except (IndexError, ValueError):
        raise ConfigError(f"{path}: malformed path header") from None
    times, types = [], []
    for ln, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        try:
            t, i = line.split(",")
            times.append(float(t))
            types.append(int(i) - 1)
        except ValueError:
            raise ConfigError(f"{path}: line {ln}: expected 'tau,reaction_index'") from None
    return Path(a, b, y_a, np.array(times), np.array(types, dtype=np.int64))
