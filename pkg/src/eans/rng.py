"""Seeded RNG streams.

Every random decision in a run is drawn from a generator keyed by
(root seed, stream name, step). Streams are mutually independent, so
toggling one feature (e.g. the sampling strategy) never shifts the
draws of another, and training can resume from any step without
serializing generator state.
"""

import numpy as np

# Fixed stream ids; never renumber, or seeded runs change.
INIT = 0
BATCH = 1
NEGATIVES = 2
CLUSTER = 3
TOYDATA = 4
ANALYSIS = 5


def stream(seed: int, name: int, step: int = 0) -> np.random.Generator:
    """Generator for one (seed, stream, step) cell."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(name, step)))
