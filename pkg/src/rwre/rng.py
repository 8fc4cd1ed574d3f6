"""Counter-based random numbers.

Every random draw in the package is a pure function of integer keys
(master seed, stream tag, indices), so results do not depend on the order
in which sites, replicas or walkers are processed.
"""

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags
ENV = 1
WALK = 2
REPLICA = 3
BOOTSTRAP = 4
TRAP = 5


def _as_u64(x):
    arr = np.asarray(x)
    if arr.dtype == np.uint64:
        return arr
    if arr.dtype.kind in "iu":
        return np.ascontiguousarray(arr, dtype=np.int64).view(np.uint64)
    raise TypeError(f"integer keys required, got {arr.dtype}")


def _key(x):
    if isinstance(x, (int, np.integer)):
        return np.uint64(int(x) & MASK64)
    return _as_u64(x)


def mix64(z):
    """splitmix64 finalizer on uint64 scalars or arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def hash64(*keys):
    """Hash a sequence of integer keys (scalars or broadcastable arrays)."""
    h = mix64(np.uint64(0x243F6A8885A308D3))
    with np.errstate(over="ignore"):
        for k in keys:
            h = mix64(h ^ (_key(k) + _GOLDEN))
    return h


def uniform(*keys):
    """Uniform double in [0, 1) from integer keys."""
    h = hash64(*keys)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derive_seed(seed, *indices):
    """Child 64-bit seed for a substream, as a Python int."""
    return int(hash64(seed, *indices))
