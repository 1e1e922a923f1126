"""Counter-based Gaussian streams keyed by (seed, path index).

Philox4x32-10 maps a 128-bit counter and 64-bit key to four 32-bit words
with no internal state, so the draws for path ``i`` depend only on ``seed``
and ``i``. Any split of the paths across workers reproduces the serial run
bit for bit.

Counter layout: ``(path_lo, path_hi, block, stream)``. Each block yields two
53-bit uniforms and, through Box-Muller, two standard normals.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_SHIFT32 = np.uint64(32)


def philox4x32(counter: tuple, key: tuple[int, int], rounds: int = 10) -> tuple[NDArray[np.uint64], ...]:
    """Philox4x32 block function, vectorized over broadcastable counter words.

    Words are carried in ``uint64`` arrays holding 32-bit values so the
    32x32 -> 64 bit products need no special handling.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for i in range(rounds):
        if i:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def _uniform53(hi: NDArray[np.uint64], lo: NDArray[np.uint64]) -> NDArray[np.float64]:
    # strictly inside (0, 1) so log() below is finite
    bits = (hi >> np.uint64(5)) * np.uint64(1 << 26) + (lo >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def seed_key(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def path_normals(seed: int, start: int, stop: int, count: int, stream: int = 0) -> NDArray[np.float64]:
    """Standard normals for paths ``start .. stop - 1``, ``count`` per path.

    Returns an array of shape ``(stop - start, count)``.
    """
    key = seed_key(seed)
    n_blocks = (count + 1) // 2
    paths = np.arange(start, stop, dtype=np.uint64)[:, None]
    blocks = np.arange(n_blocks, dtype=np.uint64)[None, :]
    x0, x1, x2, x3 = philox4x32((paths & _MASK32, paths >> _SHIFT32, blocks, np.uint64(stream)), key)
    x0, x1, x2, x3 = np.broadcast_arrays(x0, x1, x2, x3)
    u1 = _uniform53(x0, x1)
    u2 = _uniform53(x2, x3)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty((stop - start, 2 * n_blocks))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :count]
