"""Synthetic preference data and Bradley-Terry reward fitting.

The synthetic rater prefers utterance a over b with probability

    σ(log L_real(z*|a,c) - log L_real(z*|b,c)) = L(a) / (L(a) + L(b)),

and a fair coin decides when both listener probabilities are zero.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import structlog
from scipy.optimize import minimize
from scipy.special import expit

from ..exceptions import InvalidParameter, ValidationError
from ..models.game import CommunicationGame
from .speakers import RewardTable

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class PreferenceDatum:
    a: int
    b: int
    winner: int

    def __post_init__(self):
        if self.a == self.b:
            raise ValidationError("pair", f"a preference pair needs two different utterances, got {self.a} twice")
        if self.winner not in (self.a, self.b):
            raise ValidationError("winner", f"winner {self.winner} is not part of the pair ({self.a}, {self.b})")

    @property
    def loser(self) -> int:
        return self.b if self.winner == self.a else self.a


def sample_preferences(game: CommunicationGame, pairs: int, rng: np.random.Generator) -> List[PreferenceDatum]:
    """
    Draw rated pairs from the game's real listener

    Pairs are uniform over ordered pairs of distinct utterances.
    """
    if pairs < 0:
        raise InvalidParameter(f"pairs must be >= 0, got {pairs}")
    if pairs == 0:
        return []
    size = len(game.utterances)
    if size < 2:
        raise InvalidParameter("preference pairs need at least two utterances")

    first = rng.integers(size, size=pairs)
    second = rng.integers(size - 1, size=pairs)
    second = second + (second >= first)

    scores = game.listener_column
    total = scores[first] + scores[second]
    with np.errstate(invalid="ignore", divide="ignore"):
        p_first = np.where(total > 0, scores[first] / total, 0.5)
    first_wins = rng.random(pairs) < p_first

    winners = np.where(first_wins, first, second)
    return [PreferenceDatum(a=int(a), b=int(b), winner=int(w)) for a, b, w in zip(first, second, winners)]


def preference_counts(data: Sequence[PreferenceDatum], num_utterances: int) -> np.ndarray:
    """``counts[i, j]`` = number of times utterance i beat utterance j"""
    counts = np.zeros((num_utterances, num_utterances))
    if data:
        winners = np.fromiter((d.winner for d in data), dtype=int, count=len(data))
        losers = np.fromiter((d.loser for d in data), dtype=int, count=len(data))
        if winners.max() >= num_utterances or losers.max() >= num_utterances:
            raise ValidationError("preferences", f"utterance index out of range for {num_utterances} utterances")
        np.add.at(counts, (winners, losers), 1.0)
    return counts


def fit_reward_from_preferences(
    data: Sequence[PreferenceDatum], num_utterances: int, reg: float = 1e-4
) -> RewardTable:
    """
    Regularized Bradley-Terry maximum likelihood

    Args:
        data: Rated pairs
        num_utterances: Size of the utterance space
        reg: L2 weight on the rewards

    Returns:
        Reward table with the last utterance's reward fixed at 0 (beta 1.0)
    """
    if num_utterances < 1:
        raise InvalidParameter("num_utterances must be >= 1")
    if reg <= 0:
        raise InvalidParameter(f"reg must be positive, got {reg}")

    counts = preference_counts(data, num_utterances)
    compared = (counts + counts.T).sum(axis=1) > 0
    if not np.all(compared):
        logger.warning(
            "utterances never compared; their reward is set by regularization alone",
            utterances=np.flatnonzero(~compared).tolist(),
        )
    if num_utterances == 1:
        return RewardTable(values=np.zeros(1))

    def full(x: np.ndarray) -> np.ndarray:
        return np.append(x, 0.0)

    def loss(x: np.ndarray) -> float:
        rewards = full(x)
        diff = rewards[:, None] - rewards[None, :]
        return float(np.sum(counts * np.logaddexp(0.0, -diff)) + reg * np.dot(x, x))

    def gradient(x: np.ndarray) -> np.ndarray:
        rewards = full(x)
        diff = rewards[:, None] - rewards[None, :]
        upset = counts * expit(-diff)
        grad = -upset.sum(axis=1) + upset.sum(axis=0)
        return grad[:-1] + 2 * reg * x

    def hessian(x: np.ndarray) -> np.ndarray:
        rewards = full(x)
        diff = rewards[:, None] - rewards[None, :]
        weight = counts * expit(diff) * expit(-diff)
        weight = weight + weight.T
        hess = np.diag(weight.sum(axis=1)) - weight
        return hess[:-1, :-1] + 2 * reg * np.eye(num_utterances - 1)

    result = minimize(
        loss,
        x0=np.zeros(num_utterances - 1),
        jac=gradient,
        hess=hessian,
        method="trust-exact",
        options={"gtol": 1e-9},
    )
    if not result.success:
        logger.warning("Bradley-Terry fit stopped early", message=str(result.message), iterations=int(result.nit))
    logger.debug("Bradley-Terry fit finished", pairs=len(data), iterations=int(result.nit))
    return RewardTable(values=full(result.x))
