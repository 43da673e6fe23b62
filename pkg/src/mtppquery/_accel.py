"""JIT switch and the counter-based random stream shared by all samplers.

Setting ``MTPPQUERY_DISABLE_JIT=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
makes every kernel run as plain Python over numpy arrays.  Both paths draw
the same random numbers for the same ``(seed, trajectory index, counter)``.
"""
import os

import numpy as np


def _flag(name):
    return os.environ.get(name, "").strip() not in ("", "0")


try:
    if _flag("MTPPQUERY_DISABLE_JIT") or _flag("NUMBA_DISABLE_JIT"):
        raise ImportError
    import numba
    JIT_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    JIT_ENABLED = False


def njit(fn):
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0


# Python-int reference implementation (used by the fallback path and RngStream).

def mix64_py(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key_py(seed, index):
    return mix64_py(mix64_py(seed) ^ mix64_py(index + GAMMA))


def uniform_py(key, counter):
    return (mix64_py(key + (counter + 1) * GAMMA) >> 11) * INV_2_53


if JIT_ENABLED:
    _U_GAMMA = np.uint64(GAMMA)
    _U_M1 = np.uint64(_M1)
    _U_M2 = np.uint64(_M2)
    _S30 = np.uint64(30)
    _S27 = np.uint64(27)
    _S31 = np.uint64(31)
    _S11 = np.uint64(11)
    _ONE = np.uint64(1)

    @njit
    def _mix64_nb(z):
        z = np.uint64(z)
        z = (z ^ (z >> _S30)) * _U_M1
        z = (z ^ (z >> _S27)) * _U_M2
        return z ^ (z >> _S31)

    @njit
    def stream_key(seed, index):
        return _mix64_nb(_mix64_nb(np.uint64(seed)) ^ _mix64_nb(np.uint64(index) + _U_GAMMA))

    @njit
    def uniform(key, counter):
        z = np.uint64(key) + (np.uint64(counter) + _ONE) * _U_GAMMA
        return float(_mix64_nb(z) >> _S11) * INV_2_53

    def seed_arg(seed):
        return np.uint64(int(seed) & MASK64)

else:
    stream_key = stream_key_py
    uniform = uniform_py

    def seed_arg(seed):
        return int(seed) & MASK64
