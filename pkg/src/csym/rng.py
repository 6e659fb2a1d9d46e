"""Counter-based random draws.

Every draw is a pure function of (base_seed, stream_index, channel, row, col),
computed with the splitmix64 finalizer.  Trials and entries can be generated
in any order, or in parallel, and come out bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps mod 2^64, which is what the hash wants
    z = z + np.uint64(_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")
        object.__setattr__(self, "base_seed", int(self.base_seed) & MASK64)

    def child(self, stream_index: int) -> SeedSpec:
        return SeedSpec(self.base_seed, stream_index)

    def key(self, channel: int = 0) -> int:
        k = splitmix64(self.base_seed)
        k = splitmix64(k ^ self.stream_index)
        return splitmix64(k ^ (channel * _GAMMA & MASK64))

    def bits(self, rows: int, cols: int, channel: int = 0) -> np.ndarray:
        """A rows x cols array of uint64 words, one per matrix position."""
        key = np.uint64(self.key(channel))
        idx = np.arange(rows * cols, dtype=np.uint64).reshape(rows, cols)
        # encode (row, col) independent of the array shape
        i, j = np.divmod(idx, np.uint64(cols))
        counter = (i << np.uint64(32)) | j
        with np.errstate(over="ignore"):
            return _mix_array(_mix_array(counter ^ key))

    def uniform_bits(self, count: int, channel: int = 0) -> np.ndarray:
        return self.bits(1, count, channel)[0]

    def stream_bits(self, count: int, rows: int, cols: int, channel: int = 0) -> np.ndarray:
        """Words for streams stream_index, ..., stream_index + count - 1 at once.

        Slice t equals ``self.child(self.stream_index + t).bits(rows, cols, channel)``.
        """
        streams = np.arange(self.stream_index, self.stream_index + count, dtype=np.uint64)
        with np.errstate(over="ignore"):
            k = _mix_array(np.uint64(splitmix64(self.base_seed)) ^ streams)
            keys = _mix_array(k ^ np.uint64(channel * _GAMMA & MASK64))
            i = np.arange(rows, dtype=np.uint64)[:, None]
            j = np.arange(cols, dtype=np.uint64)[None, :]
            counter = (i << np.uint64(32)) | j
            return _mix_array(_mix_array(counter[None, :, :] ^ keys[:, None, None]))


def words_to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to floats in [0, 1) using the top 53 bits."""
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def words_mod(words: np.ndarray, a: int) -> np.ndarray:
    """Residues mod a; the bias is at most a / 2^64."""
    return (words % np.uint64(a)).astype(np.int64)
