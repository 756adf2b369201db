"""Shared oracles for the test suite.

Everything here recomputes model quantities by direct enumeration or direct
summation, independent of the dynamic programs under test.
"""

from __future__ import annotations

import itertools

import numpy as np

from absatag.crf import CrfParams
from absatag.labels import ConstraintMask


def enumerate_sequences(num_tags: int, length: int) -> np.ndarray:
    """All label sequences of the given length, one per row, in product order."""
    return np.array(list(itertools.product(range(num_tags), repeat=length)), dtype=int)


def brute_scores(
    params: CrfParams,
    emissions: np.ndarray,
    mask: ConstraintMask | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(sequences, scores) for every possible labeling, scored by direct sums."""
    trans, start, end = params.effective(mask)
    T = emissions.shape[0]
    seqs = enumerate_sequences(params.num_tags, T)
    scores = start[seqs[:, 0]] + end[seqs[:, -1]]
    for t in range(T):
        scores = scores + emissions[t, seqs[:, t]]
    for t in range(T - 1):
        scores = scores + trans[seqs[:, t], seqs[:, t + 1]]
    return seqs, scores


def brute_log_partition(
    params: CrfParams, emissions: np.ndarray, mask: ConstraintMask | None = None
) -> float:
    _, scores = brute_scores(params, emissions, mask)
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_viterbi(
    params: CrfParams, emissions: np.ndarray, mask: ConstraintMask | None = None
) -> tuple[list[int], float]:
    """Argmax sequence by enumeration.

    Ties resolve the way the backpointer rule does: the Viterbi recurrence
    picks the lowest tag index at every decision working backward from the
    last position, which selects the optimal sequence minimizing the
    reversed label tuple lexicographically.
    """
    seqs, scores = brute_scores(params, emissions, mask)
    best = scores.max()
    winners = seqs[scores == best]
    key = min(tuple(reversed(row)) for row in winners.tolist())
    return list(reversed(key)), float(best)


def random_instance(
    rng: np.random.Generator, T: int, num_tags: int = 10, scale: float = 1.0
) -> tuple[CrfParams, np.ndarray]:
    params = CrfParams(
        transitions=rng.normal(scale=scale, size=(num_tags, num_tags)),
        start=rng.normal(scale=scale, size=num_tags),
        end=rng.normal(scale=scale, size=num_tags),
    )
    emissions = rng.normal(scale=scale, size=(T, num_tags))
    return params, emissions
