"""Forward simulation by the direct method.

Time-dependent intensities are frozen at the time of the previous event,
which is only an approximation to the inhomogeneous process.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .model import ModelSpec, Path

DEFAULT_EVENT_CAP = 10**7


class SimulationCapError(RuntimeError):
    """The event cap was hit; ``partial`` holds the path up to that point."""

    def __init__(self, partial: Path, cap: int):
        super().__init__(f"more than {cap} events on [{partial.a}, {partial.b}]")
        self.partial = partial
        self.cap = cap


def _run(model: ModelSpec, theta, y0, interval, rng, equal_rate: bool, cap: int) -> Path:
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("interval must satisfy a < b")
    y0 = np.ascontiguousarray(y0, dtype=np.int64)
    if y0.shape != (model.p,) or np.any(y0 < 0):
        raise ValueError("initial state must be a nonnegative vector of length p")
    theta = np.ascontiguousarray(theta, dtype=float)
    if theta.shape != (model.r,) or np.any(theta < 0):
        raise ValueError("theta must be a nonnegative vector of length r")
    status, times, types, _ = K.gillespie(rng, y0, a, b, theta, model.A, *model.compiled, equal_rate, int(cap))
    path = Path(a, b, y0, times.copy(), types.copy())
    if status == K.CAPPED:
        raise SimulationCapError(path, cap)
    if status != K.OK:
        raise RuntimeError("simulation produced a negative state; check the intensity forms")
    return path


def simulate_path(model: ModelSpec, theta, y0, interval, rng, cap: int = DEFAULT_EVENT_CAP) -> Path:
    return _run(model, theta, y0, interval, rng, False, cap)


def simulate_equal_rate_path(model: ModelSpec, interval, y0, rng, cap: int = DEFAULT_EVENT_CAP) -> Path:
    """Every reaction that can fire does so at rate ``1/(b - a)``."""
    return _run(model, np.ones(model.r), y0, interval, rng, True, cap)


def continue_path(model: ModelSpec, theta, path: Path, b: float, rng, cap: int = DEFAULT_EVENT_CAP) -> Path:
    """Extend ``path`` from its right end to ``b``."""
    ext = simulate_path(model, theta, path.final_state(model.A), (path.b, b), rng, cap)
    return Path(path.a, b, path.y_a, np.concatenate([path.times, ext.times]),
                np.concatenate([path.types, ext.types]))
