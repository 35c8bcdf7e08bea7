"""Counter-based normal noise.

Every draw is a pure function of ``(seed, stream_id, index)``.  Draw ``k``
of a stream consumes the two 64-bit Philox words ``2k`` and ``2k + 1``
(key = ``(seed, stream_id)``) and maps them to a normal variate with the
cosine branch of Box-Muller.  Because consumption per draw is fixed, any
slice of a stream can be regenerated without touching the rest, and spins
can be visited in any order.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseStream",
    "normal",
    "normals",
    "generator",
    "STREAM_INIT",
    "STREAM_SDE",
    "STREAM_INSTANCE",
]

_MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4

# stream ids reserved for the solvers and generators
STREAM_INSTANCE = 0
STREAM_INIT = 1
STREAM_SDE = 2


def _key(seed, stream_id):
    return np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)


def _raw(seed, stream_id, first_word, count):
    block, skip = divmod(first_word, _WORDS_PER_BLOCK)
    bits = np.random.Philox(
        key=_key(seed, stream_id),
        counter=np.array([block & _MASK64, (block >> 64) & _MASK64, 0, 0], dtype=np.uint64),
    )
    return bits.random_raw(skip + count)[skip:]


def normals(seed, stream_id, start, count):
    """Draws ``start .. start + count - 1`` of stream ``(seed, stream_id)``."""
    if count <= 0:
        return np.zeros(0)
    words = _raw(seed, stream_id, 2 * start, 2 * count)
    # 53-bit uniforms on the open interval (0, 1)
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass
class NoiseStream:
    seed: int
    stream_id: int = 0
    counter: int = 0

    def normal(self):
        return normal(self)

    def take(self, count):
        out = normals(self.seed, self.stream_id, self.counter, count)
        self.counter += count
        return out


def normal(stream):
    """One standard-normal draw; advances ``stream.counter`` by one."""
    return float(stream.take(1)[0])


def generator(seed, stream_id=STREAM_INSTANCE):
    """A numpy ``Generator`` on the same keyed Philox family, for instance
    construction where variable consumption (choice, permutation) is fine."""
    return np.random.Generator(
        np.random.Philox(key=_key(seed, stream_id))
    )
