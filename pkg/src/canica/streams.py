"""Deterministic substreams from a counter-based generator.

All randomness in the package flows through Philox4x64-10, a named
counter-based generator with a published algorithm, so that every stream
can be reproduced from ``(seed, purpose, index)`` alone, in any order and
under any worker schedule.

The 128-bit Philox key is ``[seed, purpose]`` and the index is placed in
the second counter word, so distinct purposes give independent streams
and distinct indices within one purpose never overlap (a single stream
would need 2**64 draws to collide with its neighbour).
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# Purpose constants. Never reuse a value for a new purpose: doing so would
# correlate streams that share a seed.
GROUP_PATTERNS = 0x01
SUBJECT_STRUCTURE = 0x02
SUBJECT_NOISE = 0x03
ORDER_DATA_BOOT = 0x10
ORDER_NULL_MATRIX = 0x11
ORDER_NULL_BOOT = 0x12
CCA_NOISE_BOOT = 0x20
ICA_INIT = 0x30
SPLIT_SHUFFLE = 0x40
SPLIT_HALF_SEED = 0x41
SUBJECT_ORDER_SEED = 0x50
PIPELINE_CCA_SEED = 0x51
PIPELINE_ICA_SEED = 0x52


def substream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, purpose, index) stream."""
    bitgen = np.random.Philox(
        key=[seed & _MASK64, purpose & _MASK64],
        counter=[0, index & _MASK64, 0, 0],
    )
    return np.random.Generator(bitgen)


def derive_seed(seed: int, purpose: int, index: int = 0) -> int:
    """Derive a child seed for an operation that takes its own seed."""
    return int(substream(seed, purpose, index).integers(0, 1 << 63))
