"""Shared fixtures: one small-box trajectory reused across the suite.

The mini run (n=2^13, L=256, T=64) is big enough to show the decay laws
and the periodic-box artifacts the tests freeze, but cheap enough
(~15 s) to share session-wide.  Tests that need a field at one instant
build a PlainSnap instead of evolving.
"""

import numpy as np
import pytest

from shortpulse.bands import build_cutoff
from shortpulse.evolve import SolverConfig, evolve
from shortpulse.packets import PacketParams, probe_snapshot
from shortpulse.spectral import Field, derivative


class PlainSnap:
    """Minimal snapshot view (t, u, u_x) for norm/probe helpers."""

    def __init__(self, t, u):
        self.t = t
        self.u = u
        self.u_x = derivative(u)


def gaussian_pulse(grid, eps=0.1, width=1.0):
    """The standard zero-mean datum: eps * d/dx exp(-(x/width)^2)."""
    z = grid.x / width
    return Field(grid, eps * (-2.0 * z / width) * np.exp(-z ** 2))


MINI_CONFIG = dict(n=1 << 13, length=256.0, dt=0.02, t_final=64.0,
                   wrap_tol=0.02)


@pytest.fixture(scope="session")
def mini_traj():
    cfg = SolverConfig(**MINI_CONFIG)
    u0 = gaussian_pulse(cfg.grid())
    return evolve(u0, cfg)


@pytest.fixture(scope="session")
def mini_rows(mini_traj):
    return [s.norms for s in mini_traj.snapshots]


@pytest.fixture(scope="session")
def mini_probe_records(mini_traj):
    params = PacketParams()
    records = []
    for snap in mini_traj.snapshots:
        if snap.t >= 1.0:
            records.extend(probe_snapshot(snap, params))
    return records


@pytest.fixture(scope="session")
def cutoff():
    return build_cutoff(1.0)
