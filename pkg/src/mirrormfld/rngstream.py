"""Counter-based random streams for reproducible parallel simulation.

Protocol ``philox4x64-lane-v1``: the draw for particle i at (iteration k,
substep s) comes from a Philox-4x64 generator keyed by the master seed with
its 256-bit counter preset to place k and s in the two high words.  Within
a block each particle owns a fixed lane of ``4 * ceil(dim / 4)`` 64-bit
words (Philox emits four words per counter tick, so lanes are aligned to
counter boundaries).  Uniforms are built from the top 53 bits of each word
and normals by the inverse normal CDF, so every value consumes exactly one
word -- which is what makes a block sliceable: any worker can reproduce
rows [lo, hi) of a block without generating the rest.

Consequences: results depend only on (seed, particle index, iteration,
substep), never on how particles are partitioned across workers, and
permuting particle indices permutes the draws with them.
"""
from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

PROTOCOL = "philox4x64-lane-v1"

# iteration word reserved for initial-condition draws; sampler iterations
# are validated to stay below it
INIT_ITERATION = 1 << 62
_MAX_SEED = (1 << 64) - 1


def _lane_words(dim: int) -> int:
    return 4 * ((dim + 3) // 4)


def raw_block(seed: int, iteration: int, substep: int, lo: int, hi: int, dim: int) -> np.ndarray:
    """Rows [lo, hi) of the (n, dim) uint64 block for (iteration, substep)."""
    if not 0 <= seed <= _MAX_SEED:
        raise ValueError("seed must fit in 64 bits")
    if iteration < 0 or iteration > INIT_ITERATION or substep < 0 or substep >= (1 << 64):
        raise ValueError("iteration/substep outside the counter layout")
    if not 0 <= lo <= hi:
        raise ValueError("bad slice")
    lane = _lane_words(dim)
    bitgen = Philox(key=seed, counter=(substep << 128) | (iteration << 192))
    if lo:
        bitgen.advance(lo * lane // 4)  # advance counts 4-word counter ticks
    out = Generator(bitgen).integers(0, 1 << 64, size=(hi - lo, lane),
                                     dtype=np.uint64, endpoint=False)
    return out[:, :dim]


def uniform_block(seed: int, iteration: int, substep: int, lo: int, hi: int, dim: int) -> np.ndarray:
    """Uniforms strictly inside (0, 1):  ((word >> 11) + 0.5) * 2^-53."""
    raw = raw_block(seed, iteration, substep, lo, hi, dim)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normal_block(seed: int, iteration: int, substep: int, lo: int, hi: int, dim: int) -> np.ndarray:
    """Standard normals via the inverse CDF (exactly one word per value)."""
    return ndtri(uniform_block(seed, iteration, substep, lo, hi, dim))
