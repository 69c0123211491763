"""Counter-based Gaussian variates addressed by (seed, particle, step, component).

Each variate is a pure function of its address: a Philox4x32-10 block is
evaluated on the counter ``(particle, step, component, 0)`` under the key
``(seed_lo, seed_hi)`` and turned into one standard normal by Box-Muller.
Evaluation order and thread count therefore cannot change any value.
"""

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


def philox4x32(c0, c1, c2, c3, key):
    """Vectorised Philox4x32-10.

    Counter words are broadcastable integer arrays holding 32-bit values;
    ``key`` is a pair of 32-bit ints.  Returns four uint64 arrays whose values
    fit in 32 bits.
    """
    x0, x1, x2, x3 = np.broadcast_arrays(
        *(np.asarray(c, dtype=np.uint64) & _MASK for c in (c0, c1, c2, c3))
    )
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        p0 = x0 * _M0
        p1 = x2 * _M1
        y0 = (p1 >> _SHIFT32) ^ x1 ^ np.uint64(k0)
        y2 = (p0 >> _SHIFT32) ^ x3 ^ np.uint64(k1)
        x0, x1, x2, x3 = y0, p1 & _MASK, y2, p0 & _MASK
        if r < _ROUNDS - 1:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
    return x0, x1, x2, x3


def seed_key(seed):
    seed = int(seed)
    if not -(2**63) <= seed < 2**64:
        raise ValueError(f"seed {seed} does not fit in 64 bits")
    seed &= 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _unit53(hi, lo):
    # 53-bit uniform on [0, 1)
    bits = (hi << np.uint64(21)) ^ (lo >> np.uint64(11))
    return bits.astype(np.float64) * _INV53


def normals(seed, particle, step, component):
    """Standard normal variates at the broadcast addresses."""
    w0, w1, w2, w3 = philox4x32(particle, step, component, 0, seed_key(seed))
    u1 = 1.0 - _unit53(w0, w1)  # (0, 1]
    u2 = _unit53(w2, w3)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def normal_block(seed, particles, n_steps, dim):
    """Array of shape ``(len(particles), n_steps, dim)`` of addressed normals."""
    particles = np.asarray(particles, dtype=np.uint64)
    i = particles[:, None, None]
    k = np.arange(n_steps, dtype=np.uint64)[None, :, None]
    j = np.arange(dim, dtype=np.uint64)[None, None, :]
    return normals(seed, i, k, j)
