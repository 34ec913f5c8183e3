"""Counter-based random numbers keyed by (seed, step, site).

Every environment value is a pure function of its index, built from the
splitmix64 finalizer.  This makes the field reproducible regardless of the
order in which sites are visited, and lets independent streams be derived
with :func:`split` without any shared state.

Seed derivation (documented contract)::

    split(seed, r) = mix64(seed XOR mix64((r + 1) * GOLDEN))

where ``mix64`` is the splitmix64 output function and arithmetic is mod 2**64.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# offset applied to signed coordinates before hashing
_COORD_OFFSET = 1 << 40

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_STREAM_A = np.uint64(0xD1B54A32D192ED03)
_U_STREAM_B = np.uint64(0x8CB92BA72F3D8DD7)
_U_COORD = np.uint64(0xA24BAED4963EE407)
_TWO_M53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def as_seed(seed: int) -> int:
    if seed < 0:
        raise ValueError("seeds are nonnegative 64-bit integers")
    return int(seed) & MASK64


def split(seed: int, r: int) -> int:
    """Derive the seed of sub-stream ``r`` from ``seed``."""
    if r < 0:
        raise ValueError("stream index must be nonnegative")
    return mix64(as_seed(seed) ^ mix64(((r + 1) * GOLDEN) & MASK64))


def derive(seed: int, *path: int) -> int:
    """Apply :func:`split` along a path of stream indices."""
    s = as_seed(seed)
    for r in path:
        s = split(s, r)
    return s


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _U_M1
    z = (z ^ (z >> np.uint64(27))) * _U_M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def split_u64(seed, r):
    """numba twin of :func:`split` on uint64 arguments."""
    return _mix(seed ^ _mix((r + np.uint64(1)) * _U_GOLDEN))


@njit(cache=True, inline="always")
def step_key(seed, step):
    return _mix(seed ^ _mix(np.uint64(step + 1) * _U_GOLDEN))


@njit(cache=True, inline="always")
def absorb(key, coord):
    """Fold one signed coordinate into a site key."""
    return _mix(key ^ (np.uint64(coord + _COORD_OFFSET) * _U_COORD))


@njit(cache=True, inline="always")
def uniform_pair(key):
    """Two uniforms in the open interval (0, 1) from one site key."""
    ha = _mix(key ^ _U_STREAM_A)
    hb = _mix(key ^ _U_STREAM_B)
    ua = (np.float64(ha >> np.uint64(11)) + 0.5) * _TWO_M53
    ub = (np.float64(hb >> np.uint64(11)) + 0.5) * _TWO_M53
    return ua, ub
