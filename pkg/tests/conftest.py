"""Shared fixtures: synthetic trajectories and compact training artifacts."""

import numpy as np
import pytest

from triloop.channels import CSV_COLUMNS


@pytest.fixture(scope="session")
def toy_trajectory():
    """Deterministic smooth multi-channel trajectory, dataset row layout.

    Each channel follows its own offset sine plus mild noise, scaled to a
    plausible physical magnitude, so windows carry learnable structure
    without needing the plant simulator.
    """
    n = 500
    rng = np.random.default_rng(1234)
    t = np.arange(n, dtype=float)
    traj = np.empty((n, len(CSV_COLUMNS)))
    traj[:, 0] = t
    for j in range(1, len(CSV_COLUMNS)):
        period = 60.0 + 7.0 * j
        scale = [30.0, 100.0, 0.1, 5.0][j % 4]
        traj[:, j] = (scale * (1.0 + 0.3 * np.sin(2 * np.pi * t / period + 0.37 * j))
                      + rng.normal(0, 0.002 * scale, n))
    return traj
