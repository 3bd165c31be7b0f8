"""Reproducible per-path random streams derived from one master seed.

Path ``i`` of stream ``tag`` gets the 64-bit seed
``SeedSequence(master, spawn_key=(tag, i)).generate_state(1, uint64)[0]``.
Each path seed is split into independent sub-streams with
``SeedSequence(path_seed).spawn(k)``.  Outputs therefore depend only on the
master seed and the path index, never on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

STREAM_SDE = 1
STREAM_TRAJECTORY = 2


def path_seed(master: int, index: int, stream: int = 0) -> int:
    """64-bit seed of path ``index`` within ``stream``."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(stream), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def substreams(seed: int, n: int = 2) -> list[np.random.Generator]:
    """``n`` independent PCG64 generators derived from one path seed."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(int(seed)).spawn(n)]


def chunk_ranges(n: int, n_chunks: int) -> list[range]:
    """Split ``range(n)`` into at most ``n_chunks`` contiguous pieces."""
    n_chunks = max(1, min(n_chunks, n)) if n > 0 else 1
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(bounds[k], bounds[k + 1]) for k in range(n_chunks)]


def map_paths(fn: Callable[[range], None], n: int, workers: int = 1) -> None:
    """Run ``fn`` over index ranges covering ``range(n)``.

    ``fn`` must write its results into preallocated per-index slots, which
    keeps the outcome independent of ``workers``.
    """
    if workers <= 1:
        fn(range(n))
        return
    ranges = chunk_ranges(n, 8 * workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fn, r) for r in ranges]:
            fut.result()


def mean_and_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean over axis 0 and its standard error; NaN error for a single sample."""
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    if n < 2:
        return mean, np.full(np.shape(mean), np.nan)
    return mean, samples.std(axis=0, ddof=1) / np.sqrt(n)


def complex_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean and separate standard errors of real and imaginary parts."""
    m_re, e_re = mean_and_stderr(samples.real)
    m_im, e_im = mean_and_stderr(samples.imag)
    return m_re + 1j * m_im, e_re, e_im

