"""Linear-chain CRF over the ten-tag space.

Scores live in log space throughout.  For an emission matrix ``e`` of shape
(T, K) and a label sequence y:

    score(y) = start[y0] + sum_t e[t, y_t] + sum_t trans[y_t, y_{t+1}] + end[y_{T-1}]

``log_partition`` runs the forward algorithm with log-sum-exp; gradients of
the negative log-likelihood are expected-minus-observed counts from
forward-backward; ``viterbi`` is the usual max-product pass with
backpointers.

The transition-constraint mask is applied functionally: stored parameters
stay finite, and at score time masked-off entries are replaced by a large
negative constant (MASK_SCORE).  The constant dominates any achievable legal
score at the scales this package works at, and exp(MASK_SCORE) underflows to
zero in float64, so constrained quantities match true -inf masking while the
arithmetic stays NaN-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GoldViolatesMask, LengthMismatch, NoLegalPath
from .labels import NUM_TAGS, ConstraintMask

MASK_SCORE = -1e4


@dataclass
class CrfParams:
    """Transition matrix plus dedicated start/end score vectors."""

    transitions: np.ndarray  # (K, K); [i, j] scores tag i -> tag j
    start: np.ndarray  # (K,)
    end: np.ndarray  # (K,)

    @classmethod
    def zeros(cls, num_tags: int = NUM_TAGS) -> "CrfParams":
        return cls(
            transitions=np.zeros((num_tags, num_tags)),
            start=np.zeros(num_tags),
            end=np.zeros(num_tags),
        )

    @classmethod
    def init_random(
        cls, rng: np.random.Generator, num_tags: int = NUM_TAGS, scale: float = 0.1
    ) -> "CrfParams":
        """Small symmetric uniform init, seeded by the caller's generator."""
        return cls(
            transitions=rng.uniform(-scale, scale, size=(num_tags, num_tags)),
            start=rng.uniform(-scale, scale, size=num_tags),
            end=rng.uniform(-scale, scale, size=num_tags),
        )

    @property
    def num_tags(self) -> int:
        return self.start.shape[0]

    def copy(self) -> "CrfParams":
        return CrfParams(
            transitions=self.transitions.copy(),
            start=self.start.copy(),
            end=self.end.copy(),
        )

    def effective(
        self, mask: ConstraintMask | None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Score-time parameters with masked-off entries pushed to MASK_SCORE."""
        if mask is None:
            return self.transitions, self.start, self.end
        trans = np.where(mask.transition, self.transitions, MASK_SCORE)
        start = np.where(mask.start, self.start, MASK_SCORE)
        end = np.where(mask.end, self.end, MASK_SCORE)
        return trans, start, end


@dataclass
class CrfGradients:
    """Gradients of the batch NLL; ``emissions[s]`` matches batch sentence s."""

    transitions: np.ndarray
    start: np.ndarray
    end: np.ndarray
    emissions: list[np.ndarray]


def _logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


def _check_emissions(emissions: np.ndarray, num_tags: int) -> np.ndarray:
    emissions = np.asarray(emissions, dtype=float)
    if emissions.ndim != 2 or emissions.shape[1] != num_tags:
        raise LengthMismatch(
            f"emission matrix must be (T, {num_tags}); got {emissions.shape}"
        )
    return emissions


def sequence_score(
    params: CrfParams,
    emissions: np.ndarray,
    labels: list[int],
    mask: ConstraintMask | None = None,
) -> float:
    """Unnormalized log score of one label-index sequence."""
    emissions = _check_emissions(emissions, params.num_tags)
    T = emissions.shape[0]
    if len(labels) != T:
        raise LengthMismatch(f"{len(labels)} labels for {T} emission rows")
    trans, start, end = params.effective(mask)
    y = np.asarray(labels, dtype=int)
    score = start[y[0]] + emissions[np.arange(T), y].sum() + end[y[-1]]
    if T > 1:
        score += trans[y[:-1], y[1:]].sum()
    return float(score)


def _forward_table(
    emissions: np.ndarray, trans: np.ndarray, start: np.ndarray
) -> np.ndarray:
    """alpha[t, j] = log sum over prefixes ending in tag j at position t."""
    T, K = emissions.shape
    alpha = np.empty((T, K))
    alpha[0] = start + emissions[0]
    for t in range(1, T):
        alpha[t] = emissions[t] + _logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    return alpha


def _backward_table(
    emissions: np.ndarray, trans: np.ndarray, end: np.ndarray
) -> np.ndarray:
    """beta[t, i] = log sum over suffixes starting from tag i at position t."""
    T, K = emissions.shape
    beta = np.empty((T, K))
    beta[T - 1] = end
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (emissions[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(
    params: CrfParams, emissions: np.ndarray, mask: ConstraintMask | None = None
) -> float:
    """log sum of exp(sequence_score) over all K^T label sequences."""
    emissions = _check_emissions(emissions, params.num_tags)
    trans, start, end = params.effective(mask)
    alpha = _forward_table(emissions, trans, start)
    return float(_logsumexp(alpha[-1] + end))


def batch_nll(
    params: CrfParams,
    batch: list[tuple[np.ndarray, list[int]]],
    mask: ConstraintMask | None = None,
) -> float:
    """Mean NLL without gradients (forward pass only)."""
    if not batch:
        raise LengthMismatch("empty batch")
    total = 0.0
    for emissions, labels in batch:
        total += log_partition(params, emissions, mask) - sequence_score(
            params, emissions, labels, mask
        )
    return total / len(batch)


def _gold_violates(
    labels: list[int], mask: ConstraintMask
) -> bool:
    if not mask.start[labels[0]] or not mask.end[labels[-1]]:
        return True
    return any(
        not mask.transition[labels[t - 1], labels[t]] for t in range(1, len(labels))
    )


def nll_and_grad(
    params: CrfParams,
    batch: list[tuple[np.ndarray, list[int]]],
    mask: ConstraintMask | None = None,
) -> tuple[float, CrfGradients]:
    """Mean negative log-likelihood over the batch and its gradients.

    Gradients are expected feature counts under the model minus observed
    counts on the gold paths, averaged over the batch.  With a mask active,
    gradients of masked-off entries are exactly zero (the stored parameter
    does not enter the score), and a gold path through a masked edge raises
    GoldViolatesMask.
    """
    if not batch:
        raise LengthMismatch("empty batch")
    K = params.num_tags
    trans, start, end = params.effective(mask)
    nll = 0.0
    g_trans = np.zeros((K, K))
    g_start = np.zeros(K)
    g_end = np.zeros(K)
    g_emissions: list[np.ndarray] = []

    for emissions, labels in batch:
        emissions = _check_emissions(emissions, K)
        T = emissions.shape[0]
        if len(labels) != T:
            raise LengthMismatch(f"{len(labels)} labels for {T} emission rows")
        if mask is not None and _gold_violates(list(labels), mask):
            raise GoldViolatesMask(
                f"gold path {labels} uses a transition forbidden by the mask"
            )
        y = np.asarray(labels, dtype=int)

        alpha = _forward_table(emissions, trans, start)
        beta = _backward_table(emissions, trans, end)
        log_z = _logsumexp(alpha[-1] + end)

        nll += float(log_z) - sequence_score(params, emissions, labels, mask)

        # Unary marginals P(y_t = j).
        unary = np.exp(alpha + beta - log_z)
        g_em = unary.copy()
        g_em[np.arange(T), y] -= 1.0
        g_emissions.append(g_em)

        g_start += unary[0]
        g_start[y[0]] -= 1.0
        g_end += unary[-1]
        g_end[y[-1]] -= 1.0

        # Pairwise marginals P(y_t = i, y_{t+1} = j), accumulated over t.
        for t in range(T - 1):
            pair = np.exp(
                alpha[t][:, None]
                + trans
                + (emissions[t + 1] + beta[t + 1])[None, :]
                - log_z
            )
            g_trans += pair
            g_trans[y[t], y[t + 1]] -= 1.0

    n = len(batch)
    nll /= n
    g_trans /= n
    g_start /= n
    g_end /= n
    g_emissions = [g / n for g in g_emissions]

    if mask is not None:
        g_trans = np.where(mask.transition, g_trans, 0.0)
        g_start = np.where(mask.start, g_start, 0.0)
        g_end = np.where(mask.end, g_end, 0.0)

    return nll, CrfGradients(
        transitions=g_trans, start=g_start, end=g_end, emissions=g_emissions
    )


def viterbi(
    params: CrfParams, emissions: np.ndarray, mask: ConstraintMask | None = None
) -> tuple[list[int], float]:
    """Highest-scoring label sequence and its score.

    Ties break toward the lowest tag index at every backpointer decision
    (np.argmax returns the first maximum), so decoding is deterministic.
    With a mask active the result is checked against the grammar; if it
    violates, no legal path exists and NoLegalPath is raised.
    """
    emissions = _check_emissions(emissions, params.num_tags)
    trans, start, end = params.effective(mask)
    T, K = emissions.shape

    v = start + emissions[0]
    pointers = np.empty((T - 1, K), dtype=int) if T > 1 else None
    for t in range(1, T):
        cand = v[:, None] + trans
        pointers[t - 1] = np.argmax(cand, axis=0)
        v = emissions[t] + np.max(cand, axis=0)
    v = v + end

    best_last = int(np.argmax(v))
    best_score = float(v[best_last])
    path = [best_last]
    for t in range(T - 2, -1, -1):
        path.append(int(pointers[t][path[-1]]))
    path.reverse()

    if mask is not None and _gold_violates(path, mask):
        raise NoLegalPath("no label sequence satisfies the constraint mask")
    return path, best_score
