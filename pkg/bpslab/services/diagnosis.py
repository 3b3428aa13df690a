"""Capability diagnosis by comparison against oracle-augmented speakers.

A model fails a game for one of three reasons: its base speaker never
proposes the right utterance (search), its ToM listener misjudges the real
listener (pragmatics), or its sampler misses what its own posterior prefers
(inference). Each cause is probed by an oracle that keeps every capability of
the model except one:

* pragmatic oracle: the model's own candidates, re-ranked by the real listener;
* search oracle: the top-n utterances of the true posterior, ranked by the
  model's ToM listener;
* inference oracle: the exact argmax of the model's S_base · L_ToM.

A model answers either exactly, with the argmax of its own posterior, or by
best-of-n over base-speaker candidates ranked by its ToM listener. An exact
model's candidates are the whole support of its base speaker, and it cannot
be inference-limited.

Trial ``i`` always uses the generator ``default_rng(seed + i)``.
"""

from enum import Enum
from typing import Callable, Optional, Tuple, Union

import numpy as np
import structlog

from ..exceptions import InvalidParameter
from ..models.game import CommunicationGame
from ..models.reports import DiagnosisReport, Verdict
from ..utils.rng import sample_index, trial_rng
from .core import argmax_lowest, ups_distribution
from .speakers import BpsSpeaker, bps_distribution

logger = structlog.get_logger(__name__)

Policy = Callable[[np.random.Generator], int]
Speaker = Union[np.ndarray, Policy]


class Metric(str, Enum):
    EXPECTED_LISTENER = "expected_listener_probability"
    ARGMAX_SUCCESS = "argmax_success"


class Answering(str, Enum):
    EXACT = "exact"
    BEST_OF_N = "best-of-n"


def _scores(game: CommunicationGame, metric: Metric) -> np.ndarray:
    column = game.listener_column
    if metric == Metric.ARGMAX_SUCCESS:
        return (column == column.max()).astype(float)
    return column


def _best_by(candidates: np.ndarray, ranking: np.ndarray) -> int:
    values = ranking[candidates]
    return int(candidates[values == values.max()].min())


def evaluate_performance(
    speaker: Speaker,
    game: CommunicationGame,
    trials: int,
    seed: int = 0,
    metric: Metric = Metric.EXPECTED_LISTENER,
) -> float:
    """
    Score a speaker on a game

    Args:
        speaker: Distribution over utterances, or a policy drawing one utterance from a generator
        game: Game supplying the real listener
        trials: Monte-Carlo trials; 0 requests exact enumeration (distributions only)
        seed: Base seed of the per-trial generators
        metric: Graded listener probability or 0/1 argmax success

    Returns:
        Estimate of E[score(u)] for u produced by the speaker
    """
    return float(_trial_scores(speaker, game, trials, seed, metric).mean())


def _trial_scores(speaker: Speaker, game: CommunicationGame, trials: int, seed: int, metric: Metric) -> np.ndarray:
    scores = _scores(game, metric)
    if trials < 0:
        raise InvalidParameter(f"trials must be >= 0, got {trials}")
    if trials == 0:
        if callable(speaker):
            raise InvalidParameter("exact evaluation needs a distribution, not a sampling policy")
        return np.array([float(np.dot(np.asarray(speaker, dtype=float), scores))])
    if callable(speaker):
        policy = speaker
    else:
        dist = np.asarray(speaker, dtype=float)

        def policy(rng: np.random.Generator) -> int:
            return int(sample_index(rng, dist, 1)[0])

    return np.array([scores[policy(trial_rng(seed, i))] for i in range(trials)])


def oracle_best_of_n(base_dist: np.ndarray, game: CommunicationGame, n: int, rng: np.random.Generator) -> int:
    """Sample n candidates from the model and let the real listener pick"""
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    candidates = sample_index(rng, np.asarray(base_dist, dtype=float), n)
    return _best_by(candidates, game.listener_column)


def _best_of_n_policy(dist: np.ndarray, n: int, ranking: Optional[np.ndarray]) -> Policy:
    """The model's answer from n candidates: the first one, or the best under ``ranking``"""

    def policy(rng: np.random.Generator) -> int:
        candidates = sample_index(rng, dist, n)
        return int(candidates[0]) if ranking is None else _best_by(candidates, ranking)

    return policy


def _paired_gaps(
    model_dist: np.ndarray,
    game: CommunicationGame,
    n: int,
    trials: int,
    seed: int,
    ranking: Optional[np.ndarray] = None,
) -> np.ndarray:
    if trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    column = game.listener_column
    dist = np.asarray(model_dist, dtype=float)
    model = _best_of_n_policy(dist, n, ranking)
    gaps = np.empty(trials)
    for i in range(trials):
        # both draw the same n candidates from trial i's generator
        oracle = oracle_best_of_n(dist, game, n, trial_rng(seed, i))
        gaps[i] = column[oracle] - column[model(trial_rng(seed, i))]
    return gaps


def capability_gap(model_dist: np.ndarray, game: CommunicationGame, n: int, trials: int, seed: int = 0) -> float:
    """Expected listener-probability gain of the best-of-n oracle over the model's own samples"""
    return float(_paired_gaps(model_dist, game, n, trials, seed).mean())


def capability_gap_estimate(
    model_dist: np.ndarray,
    game: CommunicationGame,
    n: int,
    trials: int,
    seed: int = 0,
    ranking: Optional[np.ndarray] = None,
) -> Tuple[float, float]:
    """
    Gap and its standard error

    Without ``ranking`` the model answers with its first candidate; with it,
    the model keeps the candidate ``ranking`` scores highest.
    """
    gaps = _paired_gaps(model_dist, game, n, trials, seed, ranking)
    return float(gaps.mean()), _stderr(gaps)


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def _verdict(pragmatic_gap: float, search_gap: float, inference_gap: float, epsilon: float) -> Verdict:
    largest = max(pragmatic_gap, search_gap, inference_gap)
    if largest <= epsilon:
        return Verdict.ADEQUATE
    if pragmatic_gap >= largest:
        return Verdict.PRAGMATICS_LIMITED
    # the model's own posterior already holds the better utterance
    if inference_gap > epsilon and inference_gap + epsilon >= search_gap:
        return Verdict.INFERENCE_LIMITED
    return Verdict.SEARCH_LIMITED


def diagnose(
    model: BpsSpeaker,
    game: CommunicationGame,
    n: int,
    trials: int,
    seed: int = 0,
    epsilon: float = 0.02,
    answering: Answering = Answering.BEST_OF_N,
) -> DiagnosisReport:
    """
    Attribute a BPS's shortfall on a game to search, pragmatics or inference

    Args:
        model: Speaker under diagnosis
        game: Game with the real listener
        n: Candidates per best-of-n answer, and the size of the search oracle's pool
        trials: Monte-Carlo trials
        seed: Base seed of the per-trial generators
        epsilon: Smallest gap that counts as a deficiency
        answering: How the model turns its posterior into one utterance

    Returns:
        Scores of the model and the three oracles, gaps and the verdict
    """
    if trials < 1:
        raise InvalidParameter(f"trials must be >= 1, got {trials}")
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if epsilon < 0:
        raise InvalidParameter(f"epsilon must be >= 0, got {epsilon}")
    answering = Answering(answering)

    z, c = game.target_intention, game.context
    column = game.listener_column
    base = model.base.row(z, c)
    tom = model.tom.log_likelihood(z, c)
    inference_choice = argmax_lowest(bps_distribution(model, z, c))

    if answering == Answering.EXACT:
        model_values = np.array([column[inference_choice]])
        model_success = float(_scores(game, Metric.ARGMAX_SUCCESS)[inference_choice])
        pragmatic_score = float(column[_best_by(np.flatnonzero(base > 0), column)])
        pragmatic_stderr = 0.0
    else:
        policy = _best_of_n_policy(base, n, tom)
        model_values = _trial_scores(policy, game, trials, seed, Metric.EXPECTED_LISTENER)
        model_success = evaluate_performance(policy, game, trials, seed, metric=Metric.ARGMAX_SUCCESS)
        pragmatic_score = evaluate_performance(lambda rng: oracle_best_of_n(base, game, n, rng), game, trials, seed)
        _, pragmatic_stderr = capability_gap_estimate(base, game, n, trials, seed, ranking=tom)

    # top-n support of the true posterior, best first, ties by index
    posterior = ups_distribution(game)
    order = np.lexsort((np.arange(len(posterior)), -posterior))
    top = order[: min(n, int(np.count_nonzero(posterior)))]
    search_score = float(column[_best_by(top, tom)])

    inference_score = float(column[inference_choice])

    model_score = float(model_values.mean())
    pragmatic_gap = pragmatic_score - model_score
    search_gap = search_score - model_score
    inference_gap = inference_score - model_score
    verdict = _verdict(pragmatic_gap, search_gap, inference_gap, epsilon)

    logger.info(
        "diagnosis finished",
        verdict=verdict.value,
        answering=answering.value,
        pragmatic_gap=round(pragmatic_gap, 6),
        search_gap=round(search_gap, 6),
        inference_gap=round(inference_gap, 6),
    )
    return DiagnosisReport(
        model_score=model_score,
        oracle_pragmatic_score=pragmatic_score,
        oracle_search_score=search_score,
        oracle_inference_score=inference_score,
        pragmatic_gap=pragmatic_gap,
        search_gap=search_gap,
        inference_gap=inference_gap,
        pragmatic_gap_stderr=pragmatic_stderr,
        model_score_stderr=_stderr(model_values),
        model_success_rate=model_success,
        verdict=verdict,
        trials=trials,
        n=n,
        seed=seed,
        epsilon=epsilon,
        answering=answering.value,
    )
