"""Counter-based random increments.

Every uniform is a pure function of ``(seed, index, attempt, block)`` computed
with the Philox4x32-10 bijection, so a stream shifted by ``n`` replays the
increments ``X_{n+1}, X_{n+2}, ...`` exactly and trajectories can be generated
in any order or batch size.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function, vectorised.

    ``counter`` is a sequence of four uint32-valued arrays, ``key`` of two.
    Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    # 53 random bits -> [0, 1)
    bits = ((hi << _SHIFT) | lo) >> np.uint64(11)
    return bits.astype(np.float64) * (1.0 / 9007199254740992.0)


def uniforms(seed, index, attempt, n: int):
    """Uniforms of shape ``broadcast(seed, index, attempt) + (n,)`` in [0, 1)."""
    seed = np.asarray(seed, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    attempt = np.asarray(attempt, dtype=np.uint64)
    seed, index, attempt = np.broadcast_arrays(seed, index, attempt)
    key = (seed & _MASK, seed >> _SHIFT)
    cols = []
    for block in range((n + 1) // 2):
        ctr = (index & _MASK, index >> _SHIFT, attempt, np.full_like(index, block))
        w0, w1, w2, w3 = philox4x32(ctr, key)
        cols.append(_to_unit(w0, w1))
        cols.append(_to_unit(w2, w3))
    return np.stack(cols[:n], axis=-1)


class IncrementStream:
    """Handle on the uniforms of one seed.

    ``uniforms(k, attempt, n)`` gives the ``n`` uniforms used by the
    ``attempt``-th rejection trial of increment ``k``.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = seed

    def uniforms(self, index, attempt=0, n: int = 2):
        return uniforms(self.seed, index, attempt, n)

    def __eq__(self, other):
        return isinstance(other, IncrementStream) and other.seed == self.seed

    def __hash__(self):
        return hash(("IncrementStream", self.seed))

    def __repr__(self):
        return f"IncrementStream(seed={self.seed})"


def trajectory_seeds(base_seed: int, count: int, start: int = 0) -> np.ndarray:
    """Independent 64-bit seeds for trajectories ``start .. start+count-1``."""
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(start + i,))
        out[i] = ss.generate_state(1, dtype=np.uint64)[0]
    return out
