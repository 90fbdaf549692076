"""Shared builders for the test suite."""

import math

import numpy as np

from src.logic.hamiltonian import CouplingModel, couplings_from_model
from src.logic.spin_hilbert import SpinSystem

RMS_TARGET = 2.0 * math.pi * 7900.0
TAU0 = 57.6e-6


def random_system(n_spins: int, seed: int = 3, target: float = RMS_TARGET) -> SpinSystem:
    return couplings_from_model(CouplingModel.random_all_to_all(seed, 1.0, target), n_spins)


def pair_system(d: float) -> SpinSystem:
    return SpinSystem(2, np.array([[0.0, d], [d, 0.0]]))


def config_dict(tmp_dir: str, **sections) -> dict:
    base = {
        "system": {"n_spins": 4, "label": "test",
                   "coupling": {"variant": "random_all_to_all", "target_second_moment_hz": 7900.0}},
        "schedule": {"tau0_us": 57.6, "n_cycles": 8, "p_values": [0.0, 0.3, 1.0], "prep_cycles": [0]},
        "analysis": {"retain_spectra": True},
        "output": {"directory": tmp_dir, "formats": ["csv", "svg"]},
        "seed": 11,
    }
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merged = dict(base[key])
            merged.update(value)
            base[key] = merged
        else:
            base[key] = value
    return base
