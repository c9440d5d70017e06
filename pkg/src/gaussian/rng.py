"""Keyed, counter-based random streams.

A stream is a value ``(seed, stream_id)``. Its generator is a Philox
bit generator keyed from a ``SeedSequence`` built from both numbers, so
the n-th draw of a stream is a pure function of ``(seed, stream_id, n)``
and parallel tasks never share mutable generator state.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= self.stream_id <= _MASK64):
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at draw 0 of this stream."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))

    def derive(self, *keys: int) -> 'RngStream':
        """
        Child stream for a sub-task.

        Args:
            keys: Non-negative integers naming the sub-task (batch index, grid index, ...)

        Returns:
            RngStream with the same seed and a stream_id hashed from this stream and the keys
        """
        seq = np.random.SeedSequence(entropy=[self.seed, self.stream_id],
                                     spawn_key=tuple(int(k) for k in keys))
        child_id = int(seq.generate_state(1, dtype=np.uint64)[0])
        return RngStream(self.seed, child_id)

    @property
    def fingerprint(self) -> int:
        """64-bit identifier of the stream lineage, carried by every estimate."""
        digest = hashlib.blake2b(f"{self.seed}:{self.stream_id}".encode(), digest_size=8).digest()
        return int.from_bytes(digest, 'big')


def stream_from_seed(seed: int) -> RngStream:
    """Root stream of an experiment."""
    return RngStream(int(seed) & _MASK64, 0)
