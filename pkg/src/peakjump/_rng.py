"""Deterministic random streams usable from both python and compiled code.

The sampler needs one independent stream per ladder rung plus one for the
exchange decisions, with draws reproducible no matter how the replicas are
scheduled.  numpy's ``Generator`` objects cannot be indexed from inside a
numba kernel, so the generator itself is implemented here as plain njit
functions over ``uint64[:, ::1]`` state rows (xoshiro256++), with exact
rejection samplers for the normal (Marsaglia polar) and gamma
(Marsaglia-Tsang) distributions.  Streams are seeded through
``numpy.random.SeedSequence`` so one master seed yields any number of
independent substreams.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["RandomStream", "spawn_stream_states"]

_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U23 = np.uint64(23)
_U45 = np.uint64(45)
_U64 = np.uint64(64)
# 2**-53, so uniforms live on the 53-bit grid in [0, 1)
_INV53 = 1.1102230246251565e-16


@njit(cache=True, inline="always")
def _rotl(x, k):
    return np.uint64((x << k) | (x >> (_U64 - k)))


@njit(cache=True, inline="always")
def next_u64(states, i):
    s0 = states[i, 0]
    s1 = states[i, 1]
    s2 = states[i, 2]
    s3 = states[i, 3]
    out = np.uint64(_rotl(np.uint64(s0 + s3), _U23) + s0)
    t = np.uint64(s1 << _U17)
    s2 = np.uint64(s2 ^ s0)
    s3 = np.uint64(s3 ^ s1)
    s1 = np.uint64(s1 ^ s2)
    s0 = np.uint64(s0 ^ s3)
    s2 = np.uint64(s2 ^ t)
    s3 = _rotl(s3, _U45)
    states[i, 0] = s0
    states[i, 1] = s1
    states[i, 2] = s2
    states[i, 3] = s3
    return out


@njit(cache=True, inline="always")
def rng_uniform(states, i):
    """One double in [0, 1)."""
    return float(next_u64(states, i) >> _U11) * _INV53


@njit(cache=True)
def rng_normal(states, i):
    """One standard normal draw (Marsaglia polar, spare discarded)."""
    while True:
        u = 2.0 * rng_uniform(states, i) - 1.0
        v = 2.0 * rng_uniform(states, i) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * np.sqrt(-2.0 * np.log(s) / s)


@njit(cache=True)
def rng_gamma(states, i, shape):
    """One Gamma(shape, 1) draw by Marsaglia-Tsang rejection; exact for all shape > 0."""
    if shape < 1.0:
        # boost: Gamma(shape) = Gamma(shape + 1) * U^(1/shape)
        g = rng_gamma(states, i, shape + 1.0)
        u = rng_uniform(states, i)
        while u <= 0.0:
            u = rng_uniform(states, i)
        return g * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = rng_normal(states, i)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng_uniform(states, i)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v
        if u > 0.0 and np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)):
            return d * v


def spawn_stream_states(seed, count):
    """Derive `count` independent stream states from one master seed.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
    count : int

    Returns
    -------
    uint64 array of shape (count, 4), one xoshiro256++ state per row.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    out = np.empty((count, 4), dtype=np.uint64)
    for i, child in enumerate(ss.spawn(count)):
        st = child.generate_state(4, np.uint64)
        if not st.any():
            st[0] = np.uint64(0x9E3779B97F4A7C15)
        out[i] = st
    return out


class RandomStream:
    """A single deterministic stream with uniform/normal/gamma draws.

    Thin python handle over one compiled-state row; the sampler kernels and
    the python-level move functions draw from the same underlying generator,
    so a seed gives one reproducible sequence regardless of entry point.
    """

    __slots__ = ("_states",)

    def __init__(self, state):
        st = np.ascontiguousarray(np.asarray(state, dtype=np.uint64)).reshape(1, 4)
        if not st.any():
            raise ValueError("stream state must be nonzero")
        self._states = st.copy()

    @classmethod
    def from_seed(cls, seed):
        return cls(spawn_stream_states(seed, 1)[0])

    @property
    def state(self):
        """Current state row (copy); useful for checkpoint comparisons."""
        return self._states[0].copy()

    def uniform(self, lo=0.0, hi=1.0):
        return lo + (hi - lo) * rng_uniform(self._states, 0)

    def normal(self, mean=0.0, sd=1.0):
        return mean + sd * rng_normal(self._states, 0)

    def gamma(self, shape, rate=1.0):
        if shape <= 0.0 or rate <= 0.0:
            raise ValueError("gamma shape and rate must be positive")
        return rng_gamma(self._states, 0, float(shape)) / rate

    def integers(self, n):
        """One integer uniform on {0, ..., n-1}."""
        if n <= 0:
            raise ValueError("n must be positive")
        j = int(rng_uniform(self._states, 0) * n)
        return min(j, n - 1)
