"""Deterministic, addressable random streams for replicated simulations.

Every random draw in a run is pulled from a Philox stream keyed by
(master_seed, purpose, replication). Within a stream, arrays are filled in
C order, so the draws consumed by particle i at step m sit at a fixed
position that does not depend on the total particle count. Two runs at
different n but the same (seed, replication) therefore share initial states
and Brownian increments for their common particles, which is what makes
paired-seed comparisons across n meaningful.
"""

import numpy as np

# Purpose tags keep the streams for initial states, Brownian increments,
# adjacency sampling, the reference ensemble, and validation probes disjoint.
INITIAL = 1
BROWNIAN = 2
ADJACENCY = 3
REFERENCE_INITIAL = 4
REFERENCE_BROWNIAN = 5
PROBE = 6


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (master_seed, key).

    Distinct keys yield statistically independent streams; identical keys
    yield bit-identical draws on the same platform/build.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
