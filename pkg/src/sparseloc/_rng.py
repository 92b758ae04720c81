"""Counter-based pseudo-random primitives.

Every draw is a pure function of (seed, stream tag, realization index,
site coordinates), so sampling is reproducible under any scheduling or
partitioning of work.  The core is the splitmix64 finalizer applied to a
fold of the inputs; all arithmetic is wrapping uint64.
"""

from __future__ import annotations

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _fold(state: np.ndarray, word: np.ndarray) -> np.ndarray:
    return _mix64(state + _GOLDEN + word)


def site_uniforms(seed: int, tag: int, realization: int, coords: np.ndarray) -> np.ndarray:
    """Uniform(0,1) variates, one per row of ``coords``.

    coords: integer array of shape (n, nu).  The result only depends on
    the row values, never on their order in the array.
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    n = coords.shape[0]
    with np.errstate(over="ignore"):
        state = np.full(n, np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        state = _fold(state, np.full(n, np.uint64(tag & 0xFFFFFFFFFFFFFFFF)))
        state = _fold(state, np.full(n, np.uint64(realization & 0xFFFFFFFFFFFFFFFF)))
        for j in range(coords.shape[1]):
            state = _fold(state, coords[:, j].astype(np.int64).view(np.uint64))
        bits = _mix64(state)
    # 53-bit mantissa, shifted off zero so inverse CDFs stay finite
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def scalar_uniform(seed: int, tag: int, realization: int, index: int) -> float:
    """Single uniform draw keyed by an integer index instead of a site."""
    u = site_uniforms(seed, tag, realization, np.array([[index]], dtype=np.int64))
    return float(u[0])
