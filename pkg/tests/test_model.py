import json
import math

import numpy as np
import pytest

from mjpbayes import ConfigError, bundled_model
from mjpbayes.model import (
    ObservationSeries,
    Path,
    apply_reaction,
    load_model,
    model_from_dict,
    read_observations,
    read_path,
    reaction_totals,
    write_observations,
    write_path,
)

from .fixtures import DATA, OREG_A, PROK_A, oregonator_h, prokaryotic_h


@pytest.fixture(scope="module")
def oreg():
    return bundled_model("oregonator")


@pytest.fixture(scope="module")
def prok():
    return bundled_model("prokaryotic")


def test_shipped_jump_matrices(oreg, prok):
    assert np.array_equal(oreg.A, OREG_A)
    assert np.array_equal(prok.A, PROK_A)
    assert prok.constants == {"K": 10}


def test_oregonator_h4():
    m = bundled_model("oregonator")
    assert m.standardized_intensity(3, 0.0, [3, 7, 1]) == 3


def test_prokaryotic_h2():
    m = bundled_model("prokaryotic")
    assert m.standardized_intensity(1, 0.0, [0, 0, 0, 4]) == 6


def test_zero_reactant_gives_zero(oreg):
    assert oreg.standardized_intensity(1, 0.0, [0, 5, 5]) == 0
    assert oreg.standardized_intensity(3, 0.0, [1, 5, 5]) == 0


@pytest.mark.parametrize("seed", range(5))
def test_intensities_match_hand_written(oreg, prok, seed):
    rng = np.random.default_rng(seed)
    for m, h in ((oreg, oregonator_h), (prok, prokaryotic_h)):
        for _ in range(20):
            y = rng.integers(0, 11, m.p)
            assert np.array_equal(m.intensity_vector(0.0, y), h(list(y)))


def test_integrated_intensity(oreg):
    assert oreg.integrated_intensity(3, 1.0, 1.0, [3, 0, 0]) == 0
    assert oreg.integrated_intensity(3, 0.5, 1.0, [3, 0, 0]) == 1.5


def test_time_factor_integral():
    m = load_model(DATA / "timed_model.json")
    # 1 + 0.5 t on [0, 2] integrates to 3
    assert m.integrated_intensity(0, 0.0, 2.0, [0]) == pytest.approx(3.0)
    linear = model_from_dict({
        "species": ["Y"],
        "reactions": [{"jump": [1], "intensity": [], "time_factor": {"kind": "linear", "params": [0, 1]}}],
    })
    assert linear.integrated_intensity(0, 0.0, 2.0, [0]) == pytest.approx(2.0)
    expo = model_from_dict({
        "species": ["Y"],
        "reactions": [{"jump": [1], "intensity": [], "time_factor": {"kind": "exp", "params": [2, -1]}}],
    })
    assert expo.integrated_intensity(0, 0.0, 1.0, [0]) == pytest.approx(2 * (1 - math.exp(-1)))
    assert not expo.time_homogeneous


def test_apply_reaction():
    assert np.array_equal(apply_reaction([0, 5, 1], OREG_A, 0), [1, 4, 1])
    assert apply_reaction([0, 0, 0], OREG_A, 1) is None
    assert np.array_equal(apply_reaction([2, 2, 2], np.zeros((3, 1), int), 0), [2, 2, 2])


def test_reaction_totals():
    assert np.array_equal(reaction_totals(Path.empty(0, 1, [0, 0, 0]), 5), np.zeros(5))
    p = Path(0, 1, [5, 5, 5], [0.1, 0.2, 0.3], [0, 0, 2])
    assert np.array_equal(p.reaction_totals(5), [2, 0, 1, 0, 0])


def test_path_validity(oreg):
    p = read_path(DATA / "oreg_fixture.csv")
    assert p.is_valid(oreg)
    assert np.array_equal(p.final_state(oreg.A), [2, 1, 1])
    assert np.array_equal(p.states(oreg.A)[-1], p.final_state(oreg.A))
    # out of order, at the left end, past the right end, impossible event
    assert not Path(0, 2, [3, 2, 1], [0.5, 0.25], [0, 0]).is_valid(oreg)
    assert not Path(0, 2, [3, 2, 1], [0.0], [0]).is_valid(oreg)
    assert not Path(0, 2, [3, 2, 1], [2.5], [0]).is_valid(oreg)
    assert not Path(0, 2, [0, 2, 1], [1.0], [1]).is_valid(oreg)


def test_states_at(oreg):
    p = read_path(DATA / "oreg_fixture.csv")
    s = p.states_at(oreg.A, [0.0, 0.25, 0.6, 2.0])
    assert np.array_equal(s, [[3, 2, 1], [4, 1, 1], [5, 1, 2], [2, 1, 1]])


def test_initial_law(oreg, prok):
    assert oreg.log_f0([0, 25, 3]) == pytest.approx(-3 * math.log(26))
    assert oreg.log_f0([0, 26, 3]) == -math.inf
    assert prok.log_f0([0, 0, 0, 7]) == pytest.approx(-math.log(11))
    assert prok.log_f0([1, 0, 0, 7]) == -math.inf
    assert prok.free_init_species == [3]


def test_scenarios(oreg):
    assert oreg.scenario("C").observed == (True, True, False)
    assert oreg.scenario("A").exact
    assert oreg.scenario().name == "B"
    with pytest.raises(ConfigError):
        oreg.scenario("Z")


def test_observation_roundtrip(tmp_path, oreg):
    obs = read_observations(DATA / "oreg_obs.csv", oreg.species)
    assert obs.n == 2
    assert math.isnan(obs.values[0, 1])
    m = obs.mask(oreg.scenario("C"))
    assert m.tolist() == [[True, False, False], [True, True, False], [True, True, False]]
    write_observations(tmp_path / "o.csv", obs)
    again = read_observations(tmp_path / "o.csv")
    assert np.array_equal(again.times, obs.times)
    assert np.array_equal(again.values, obs.values, equal_nan=True)
    assert (tmp_path / "o.csv").read_text() == (DATA / "oreg_obs.csv").read_text()


def test_path_roundtrip(tmp_path):
    p = Path(0.0, 1.0, [1, 2, 3], [0.1, 1 / 3, 0.9], [0, 4, 2])
    write_path(tmp_path / "p.csv", p)
    q = read_path(tmp_path / "p.csv")
    assert q.a == 0.0 and q.b == 1.0
    assert np.array_equal(q.y_a, p.y_a)
    assert np.array_equal(q.times, p.times)
    assert np.array_equal(q.types, p.types)


def test_observation_validation():
    with pytest.raises(ConfigError):
        ObservationSeries([0.0, 0.0], [[1.0], [2.0]], ["Y"])
    with pytest.raises(ConfigError):
        ObservationSeries([0.0, 1.0], [[math.nan], [math.nan]], ["Y"])


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"species": ["Y"],\n "reactions": [}')
    with pytest.raises(ConfigError, match="line 2"):
        load_model(bad)
    with pytest.raises(ConfigError, match="reactions"):
        model_from_dict({"species": ["Y"]})
    with pytest.raises(ConfigError, match="unknown species"):
        model_from_dict({"species": ["Y"], "reactions": [{"reactants": {"Z": 1}}]})
    with pytest.raises(ConfigError, match="does not match"):
        model_from_dict({"species": ["Y"], "reactions": [{"reactants": {"Y": 1}, "jump": [1]}]})
    cfg = json.loads((DATA / "timed_model.json").read_text())
    cfg["reactions"][0]["time_factor"]["kind"] = "cubic"
    with pytest.raises(ConfigError, match="cubic"):
        model_from_dict(cfg)
