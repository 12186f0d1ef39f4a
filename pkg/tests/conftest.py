"""Shared builders for hand-sized problem instances."""

import numpy as np
import pytest

from irs_swipt.channels import ChannelSet
from irs_swipt.metrics import QosTargets
from irs_swipt.penalty import Problem


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channels(rng, m=3, n=4, k_i=2, k_e=2, scale=1.0) -> ChannelSet:
    """Unit-scale synthetic channels; no geometry, just shapes and fades."""
    return ChannelSet(
        iu_direct=scale * crandn(rng, k_i, m),
        iu_reflected=scale * crandn(rng, k_i, n),
        eu_direct=scale * crandn(rng, k_e, m),
        eu_reflected=scale * crandn(rng, k_e, n),
        ap_irs=crandn(rng, n, m),
    )


def small_problem(seed=0, m=3, n=4, k_i=2, k_e=2, sinr_min=2.0,
                  harvest_min=0.5, noise=1.0, energy_beams=True) -> Problem:
    """O(1)-scale instance the solver finishes in well under a second."""
    rng = np.random.default_rng(seed)
    cs = random_channels(rng, m=m, n=n, k_i=k_i, k_e=k_e)
    targets = QosTargets(sinr_min=np.full(k_i, float(sinr_min)),
                         harvest_min_w=np.full(k_e, float(harvest_min)))
    return Problem(cs, targets, np.full(k_i, float(noise)),
                   dedicated_energy_beams=energy_beams)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
