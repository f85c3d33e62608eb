"""Seeded random streams.

Every random draw in a run comes from a generator derived from
``(base_seed, replica_id, purpose)`` over the counter-based Philox bit
generator, so two algorithms given the same triple consume identical streams.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    ORACLE = 1
    COMPRESSOR = 2
    DATA = 3
    SAMPLER = 4


def make_stream(base_seed: int, replica_id: int, purpose: Purpose) -> np.random.Generator:
    seq = np.random.SeedSequence([int(base_seed), int(replica_id), int(purpose)])
    return np.random.Generator(np.random.Philox(seq))


class StreamFactory:
    """Hands out one generator per purpose for one replica.

    Repeated lookups return the same generator, so draws keep advancing.
    """

    def __init__(self, base_seed: int, replica_id: int = 0):
        self.base_seed = int(base_seed)
        self.replica_id = int(replica_id)
        self._streams: dict[Purpose, np.random.Generator] = {}

    def get(self, purpose: Purpose) -> np.random.Generator:
        if purpose not in self._streams:
            self._streams[purpose] = make_stream(self.base_seed, self.replica_id, purpose)
        return self._streams[purpose]

    @property
    def oracle(self) -> np.random.Generator:
        return self.get(Purpose.ORACLE)

    @property
    def compressor(self) -> np.random.Generator:
        return self.get(Purpose.COMPRESSOR)

    @property
    def data(self) -> np.random.Generator:
        return self.get(Purpose.DATA)

    @property
    def sampler(self) -> np.random.Generator:
        return self.get(Purpose.SAMPLER)


def derive_seed(base_seed: int, index: int) -> int:
    """Deterministic child seed for sweep point `index`."""
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1)[0])
