"""Counter-keyed random streams for parallel Monte Carlo ensembles.

Every path in an ensemble draws from its own Philox stream keyed by
(master_seed, path_index, purpose).  Streams are independent of block
layout and worker count, so ensemble results are reproducible no matter
how the work is split.
"""

from __future__ import annotations

import numpy as np

# purpose tags keep independent noise sources within one path separated
DIFFUSION = 0
JUMP_TIMES = 1
JUMP_SIZES = 2
AUX = 3


def stream(master_seed: int, index: int = 0, purpose: int = DIFFUSION) -> np.random.Generator:
    """Return the Generator for one (path, purpose) slot of an ensemble."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(int(index), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def block_streams(master_seed: int, start: int, count: int,
                  purpose: int = DIFFUSION) -> list[np.random.Generator]:
    """Streams for a contiguous block of path indices [start, start+count)."""
    return [stream(master_seed, start + i, purpose) for i in range(count)]


def block_normals(master_seed: int, start: int, count: int, shape: tuple,
                  purpose: int = DIFFUSION) -> np.ndarray:
    """Stack per-path standard-normal draws into one (count, *shape) array.

    Each path's noise comes entirely from its own stream, so the result for
    path i does not depend on the block boundaries.
    """
    out = np.empty((count,) + shape)
    for i, g in enumerate(block_streams(master_seed, start, count, purpose)):
        out[i] = g.standard_normal(shape)
    return out
