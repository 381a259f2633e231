"""Deterministic random substream derivation.

Every random draw in the package comes from a generator derived here. A
substream is labeled by a path of non-negative integers (repetition index,
role, sweep cell coordinates, ...) hashed together with the master seed into
a ``numpy`` seed sequence, so any substream can be reconstructed in isolation
and parallel execution order cannot change results. Gaussian variates then
come from ``numpy``'s documented ziggurat transform over PCG64, which is
bit-stable for a fixed numpy build.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError

# Role labels for the per-repetition substreams.
ROLE_TRUTH = 0
ROLE_OBS = 1
ROLE_FILTER = 2
ROLE_SHOCKS = 3

_MAX_SEED = 2**64 - 1


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return the generator for ``(master_seed, *path)``.

    The same arguments always yield an identical stream; distinct paths give
    statistically independent streams.
    """
    if not isinstance(master_seed, (int, np.integer)):
        raise ConfigError("master seed must be an integer")
    if not 0 <= master_seed <= _MAX_SEED:
        raise ConfigError("master seed must fit in an unsigned 64-bit integer")
    entropy = [int(master_seed)]
    for part in path:
        if int(part) < 0:
            raise ConfigError("substream path components must be non-negative")
        entropy.append(int(part))
    return np.random.default_rng(np.random.SeedSequence(entropy))
