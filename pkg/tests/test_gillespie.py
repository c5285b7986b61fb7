import numpy as np
import pytest
from scipy import stats

from mjpbayes import bundled_model
from mjpbayes.gillespie import (
    SimulationCapError,
    continue_path,
    simulate_equal_rate_path,
    simulate_path,
)
from mjpbayes.model import model_from_dict

from .fixtures import OREG_THETA, birth_death


def pure_birth():
    return model_from_dict({"species": ["Y"], "reactions": [{"jump": [1], "intensity": []}]})


def test_zero_rates_give_empty_path():
    m = bundled_model("oregonator")
    p = simulate_path(m, np.zeros(5), [3, 4, 5], (0, 10), np.random.default_rng(0))
    assert p.n_tot == 0


def test_pure_birth_count_is_poisson():
    m = pure_birth()
    rng = np.random.default_rng(11)
    counts = np.array([simulate_path(m, [5.0], [0], (0, 10), rng).n_tot for _ in range(2000)])
    assert abs(counts.mean() - 50) < 3 * np.sqrt(50) / np.sqrt(2000)


def time_average(path, A, lo, hi):
    y = path.states(A)[:, 0]
    edges = np.clip(np.concatenate([[path.a], path.times, [path.b]]), lo, hi)
    return float(np.sum(y * np.diff(edges)) / (hi - lo))


def test_immigration_death_time_average():
    m = birth_death()
    p = simulate_path(m, [10.0, 1.0], [10], (0, 2050), np.random.default_rng(5))
    # batch means over 40 windows of length 50 give the standard error
    batch = np.array([time_average(p, m.A, lo, lo + 50) for lo in range(50, 2050, 50)])
    avg = batch.mean()
    se = batch.std(ddof=1) / np.sqrt(len(batch))
    assert abs(avg - 10) < 3 * se


def test_first_waiting_time_is_exponential():
    m = bundled_model("oregonator")
    y0 = np.array([5, 3, 2])
    mu0 = float(OREG_THETA @ m.intensity_vector(0, y0))
    rng = np.random.default_rng(2024)
    first = []
    for _ in range(10_000):
        p = simulate_path(m, OREG_THETA, y0, (0, 2), rng)
        first.append(p.times[0])
    assert stats.kstest(first, "expon", args=(0, 1 / mu0)).pvalue > 0.01


def test_paths_are_valid_and_reproducible():
    m = bundled_model("prokaryotic")
    theta = np.array([0.1, 0.7, 0.6, 0.085, 0.05, 0.2, 0.2, 0.015])
    p1 = simulate_path(m, theta, [0, 0, 0, 8], (0, 50), np.random.default_rng(9))
    p2 = simulate_path(m, theta, [0, 0, 0, 8], (0, 50), np.random.default_rng(9))
    assert p1.is_valid(m)
    assert np.all(np.diff(p1.times) > 0)
    assert np.array_equal(p1.times, p2.times) and np.array_equal(p1.types, p2.types)


def test_equal_rate_empty_when_nothing_can_fire():
    m = bundled_model("oregonator")
    assert simulate_equal_rate_path(m, (0, 1), [0, 0, 0], np.random.default_rng(0)).n_tot == 0


def test_equal_rate_single_viable_type():
    m = pure_birth()
    rng = np.random.default_rng(1)
    n = np.array([simulate_equal_rate_path(m, (0, 1), [0], rng).n_tot for _ in range(4000)])
    assert abs(n.mean() - 1) < 3 / np.sqrt(4000)
    assert abs(n.var() - 1) < 0.1


def test_equal_rate_many_types():
    # every reaction stays viable with large counts
    m = bundled_model("oregonator")
    rng = np.random.default_rng(3)
    n = np.array([simulate_equal_rate_path(m, (2, 4), [500, 500, 500], rng).n_tot for _ in range(4000)])
    assert abs(n.mean() - 5) < 3 * np.sqrt(5 / 4000)


def test_event_cap_carries_partial_path():
    m = pure_birth()
    with pytest.raises(SimulationCapError) as err:
        simulate_path(m, [1000.0], [0], (0, 10), np.random.default_rng(0), cap=100)
    assert err.value.partial.n_tot == 100


def test_continue_path():
    m = bundled_model("oregonator")
    rng = np.random.default_rng(4)
    p = simulate_path(m, OREG_THETA, [5, 5, 5], (0, 1), rng)
    q = continue_path(m, OREG_THETA, p, 2.0, rng)
    assert q.b == 2.0 and q.is_valid(m)
    assert np.array_equal(q.times[: p.n_tot], p.times)


def test_input_validation():
    m = pure_birth()
    with pytest.raises(ValueError):
        simulate_path(m, [-1.0], [0], (0, 1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_path(m, [1.0], [-1], (0, 1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_path(m, [1.0], [0], (1, 1), np.random.default_rng(0))
