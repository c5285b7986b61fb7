"""Shared test data: transcribed reference matrices and small models."""
from fractions import Fraction
from pathlib import Path as FsPath

import numpy as np

from mjpbayes.model import model_from_dict

DATA = FsPath(__file__).parent / "data"

# jump matrices, written out independently of the shipped JSON configs
OREG_A = np.array([
    [1, -1, 1, -2, 0],
    [-1, -1, 0, 0, 1],
    [0, 0, 1, 0, -1],
])
OREG_V = np.array([[1, -1, 0, 1, 0], [1, 0, 1, 1, 1]]).T
OREG_BORDER_J1 = np.array([[1, -1, 0, 0, 0], [0, 0, 0, 1, 0], [0, 1, 1, 0, 1]]).T
OREG_THETA = np.array([0.1, 0.1, 2.5, 0.04, 1.0])

PROK_A = np.array([
    [0, 0, 1, 0, 0, 0, -1, 0],
    [0, 0, 0, 1, -2, 2, 0, -1],
    [-1, 1, 0, 0, 1, -1, 0, 0],
    [-1, 1, 0, 0, 0, 0, 0, 0],
])
PROK_V = np.array([
    [1, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 1, 0, 0],
    [0, 0, 1, 0, 0, 0, 1, 0],
    [0, 0, 0, 1, 0, 0, 0, 1],
]).T
PROK_V5 = np.array([[0, -1, 0, 2, 1, 0, 0, 0]]).T
PROK_THETA = np.array([0.1, 0.7, 0.6, 0.085, 0.05, 0.2, 0.2, 0.015])


def oregonator_h(y):
    """Hand-written mass-action intensities of the Oregonator."""
    y1, y2, y3 = y
    return [y2, y1 * y2, y1, y1 * (y1 - 1) // 2, y3]


def prokaryotic_h(y, K=10):
    rna, p, p2, dna = y
    return [dna * p2, K - dna, dna, rna, p * (p - 1) // 2, p2, rna, p]


def birth_death(birth=1.0, death=1.0, lo=0, hi=15):
    """One species, 0 -> Y at rate theta_1, Y -> 0 at rate theta_2 * y."""
    return model_from_dict({
        "name": "birth-death",
        "species": ["Y"],
        "reactions": [
            {"name": "birth", "jump": [1], "intensity": []},
            {"name": "death", "reactants": {"Y": 1}, "products": {}},
        ],
        "init": {"Y": {"uniform": [lo, hi]}},
        "error_model": {"scenarios": {"all": {"observed": ["Y"]}}, "default_scenario": "all"},
        "priors": {"theta": {"alpha": [2.0, 2.0], "beta": [2.0 / birth, 2.0 / death]},
                   "eta": {"alpha": 0.0, "beta": 0.0}},
    })


# timed_model.json: reaction 1 has time factor 1 + t/2
def timed_h(y):
    return [1, y[0]]


def timed_weight(k, s, t):
    if k == 0:
        return (t - s) + Fraction(1, 4) * (t * t - s * s)
    return t - s
