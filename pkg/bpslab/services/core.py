"""Exact probability plumbing and the optimal / unbounded solutions of a game.

Every argmax in the package goes through :func:`argmax_lowest`, so ties always
resolve to the lowest index.
"""

from typing import Sequence, Union

import numpy as np
import structlog

from ..exceptions import (
    AllZeroWeights,
    EmptyUtteranceSpace,
    InvalidParameter,
    NegativeWeight,
    SupportViolation,
    ValidationError,
)
from ..models.game import CommunicationGame

logger = structlog.get_logger(__name__)

Weights = Union[Sequence[float], np.ndarray]


def normalize(weights: Weights) -> np.ndarray:
    """
    Scale non-negative weights into a distribution

    Args:
        weights: Non-negative reals, at least one positive

    Returns:
        Distribution proportional to ``weights``
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise InvalidParameter(f"weights must be a vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidParameter("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight at index {int(np.argmax(w < 0))}")
    total = w.sum()
    if total <= 0:
        raise AllZeroWeights("every weight is zero")
    return w / total


def normalize_log(log_weights: Weights) -> np.ndarray:
    """Normalize weights given in the log domain (``-inf`` marks a zero weight)"""
    lw = np.asarray(log_weights, dtype=float)
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise InvalidParameter("log weights must be finite or -inf")
    peak = lw.max(initial=-np.inf)
    if peak == -np.inf:
        raise AllZeroWeights("every weight is zero")
    shifted = np.exp(lw - peak)
    return shifted / shifted.sum()


def safe_log(values: Weights) -> np.ndarray:
    """Elementwise log with log(0) = -inf and no warning"""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(values, dtype=float))


def argmax_lowest(values: Weights) -> int:
    """Index of the maximum, lowest index among ties"""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyUtteranceSpace("argmax over an empty utterance space")
    # np.argmax already returns the first maximizer
    return int(np.argmax(v))


def solve_exact(game: CommunicationGame, speaker_scores: Weights) -> int:
    """Utterance index with the highest score, lowest index among ties"""
    scores = np.asarray(speaker_scores, dtype=float)
    if scores.size == 0:
        raise EmptyUtteranceSpace("no speaker scores given")
    if scores.shape != (len(game.utterances),):
        raise ValidationError("speaker_scores", f"expected {len(game.utterances)} scores, got {scores.shape}")
    return argmax_lowest(scores)


def ups_distribution(game: CommunicationGame) -> np.ndarray:
    """Unbounded pragmatic speaker: S_ups(u) ∝ L_real(z*|u,c)"""
    try:
        return normalize(game.listener_column)
    except AllZeroWeights:
        logger.error("unwinnable game", target=game.intentions.symbols[game.target_intention])
        raise AllZeroWeights(
            f"no utterance gives intention {game.intentions.symbols[game.target_intention]!r} positive probability"
        )


def expected_listener_probability(dist: Weights, game: CommunicationGame) -> float:
    """E_{u~dist} L_real(z*|u,c), computed exactly"""
    return float(np.dot(np.asarray(dist, dtype=float), game.listener_column))


def total_variation(p: Weights, q: Weights) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


def kl_divergence(p: Weights, q: Weights) -> float:
    """
    KL(p || q) by enumeration

    Raises:
        SupportViolation: if q is zero somewhere p is positive
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    support = p > 0
    if np.any(q[support] <= 0):
        raise SupportViolation(f"q is zero at index {int(np.argmax(support & (q <= 0)))} where p is positive")
    return float(np.sum(p[support] * (np.log(p[support]) - np.log(q[support]))))
