"""Blocked Monte Carlo with median-of-means aggregation.

Block ``b`` of a run keyed by ``(seed, stream)`` draws from its own counter-based
stream ``derive_stream(stream, b)`` in chunks of a fixed row count, so block means
are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .errors import ParameterError
from .rng import derive_stream, make_generator

# sqrt(pi/2): asymptotic inflation of the median's standard error over the mean's
_MEDIAN_EFFICIENCY = math.sqrt(math.pi / 2)
# MAD -> standard deviation under normality
_MAD_SCALE = 1.4826


def block_sizes(n_samples: int, blocks: int) -> list[int]:
    if int(blocks) != blocks or blocks < 1:
        raise ParameterError(f"blocks must be a positive integer, got {blocks!r}")
    if int(n_samples) != n_samples or n_samples < blocks:
        raise ParameterError(f"n_samples ({n_samples}) must be an integer >= blocks ({blocks})")
    base, extra = divmod(int(n_samples), int(blocks))
    return [base + (b < extra) for b in range(int(blocks))]


def tail_count(n: int) -> int:
    """Number of top values handed to the Pareto tail in a block of ``n``."""
    return min(int(math.ceil(math.sqrt(n))), max(n - 1, 0))


def _largest(values: np.ndarray, count: int) -> np.ndarray:
    if values.size <= count:
        return values
    return np.partition(values, values.size - count)[values.size - count :]


def block_means(
    integrand: Callable[[np.random.Generator, int], np.ndarray],
    n_samples: int,
    blocks: int,
    seed: int,
    stream: int = 0,
    chunk_rows: int = 16384,
    workers: int = 1,
    tail_index: float | None = None,
) -> np.ndarray:
    """Per-block sample means of ``integrand(gen, rows)``.

    ``integrand`` must return ``rows`` nonnegative values drawn from ``gen``.
    With ``tail_index = a`` in ``(1, 2]`` the block mean is tail corrected: the
    top ``k = ceil(sqrt(n))`` values are replaced by the mean of a Pareto(``a``)
    tail above the ``(k+1)``-th largest value.  This removes the downward skew of
    block means when the values have infinite variance.
    """
    sizes = block_sizes(n_samples, blocks)
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if tail_index is not None and not tail_index > 1.0:
        raise ParameterError(f"tail_index must exceed 1, got {tail_index}")

    def run(b: int) -> float:
        gen = make_generator(seed, derive_stream(stream, b))
        n = sizes[b]
        k = tail_count(n) if tail_index is not None else 0
        top = np.empty(0)
        total = 0.0
        done = 0
        while done < n:
            rows = min(chunk_rows, n - done)
            vals = np.asarray(integrand(gen, rows), dtype=float)
            total += float(np.sum(vals))
            if k:
                top = _largest(np.concatenate([top, vals]), k + 1)
            done += rows
        if not k:
            return total / n
        top = np.sort(top)
        u, excess = top[0], top[1:]
        return (total - float(np.sum(excess)) + k * u * tail_index / (tail_index - 1.0)) / n

    if workers == 1:
        return np.array([run(b) for b in range(len(sizes))])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(run, range(len(sizes)))))


def median_of_means(means: np.ndarray) -> tuple[float, float]:
    """Median of block means and its standard error from the block spread."""
    means = np.asarray(means, dtype=float)
    med = float(np.median(means))
    if means.size < 2:
        return med, math.inf
    mad = float(np.median(np.abs(means - med)))
    spread = _MAD_SCALE * mad
    return med, _MEDIAN_EFFICIENCY * spread / math.sqrt(means.size)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def bootstrap_median(means: np.ndarray, gen: np.random.Generator) -> float:
    """Median of one with-replacement resample of the block means."""
    idx = gen.integers(0, len(means), size=len(means))
    return float(np.median(np.asarray(means)[idx]))
