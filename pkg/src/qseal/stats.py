"""Monte Carlo harness and binomial summaries."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

from scipy.stats import binomtest

from .rng import Rng, stream

T = TypeVar("T")

BLOCK = 1000


def _run_block(fn, seed, path, start, stop):
    rng = stream(seed, *path)
    return [fn(rng) for _ in range(start, stop)]


def run_trials(
    fn: Callable[[Rng], T],
    trials: int,
    seed: int,
    cell: Sequence[int] = (0,),
    block: int = BLOCK,
    workers: int = 1,
) -> list[T]:
    """Run ``fn`` ``trials`` times.

    Trials are cut into blocks of ``block``; block ``j`` of ``cell`` draws from
    ``stream(seed, *cell, j)``. Results come back in trial order whatever the
    worker count, so output depends only on the seed.
    """
    jobs = [(seed, (*cell, j), s, min(s + block, trials)) for j, s in enumerate(range(0, trials, block))]
    if workers <= 1 or len(jobs) == 1:
        chunks = [_run_block(fn, *job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_block, [fn] * len(jobs), *zip(*jobs)))
    return [x for chunk in chunks for x in chunk]


def wilson_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(successes, trials).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


def within_sigma(observed: float, expected: float, trials: int, z: float = 3.0) -> bool:
    """``|observed - expected| <= z * sqrt(p(1-p)/T)`` with ``p = expected``.

    For ``expected`` in {0, 1} the band collapses to exact equality.
    """
    return abs(observed - expected) <= z * binomial_sigma(expected, trials) + 1e-12


def cis_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def nonincreasing_adjacent(rates: Sequence[float], cis: Sequence[tuple[float, float]]) -> bool:
    """Each step either does not increase or has overlapping CIs with its predecessor."""
    return all(
        rates[i + 1] <= rates[i] or cis_overlap(cis[i], cis[i + 1]) for i in range(len(rates) - 1)
    )
