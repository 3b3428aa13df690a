"""Base speakers, theory-of-mind listeners and the bounded pragmatic speaker.

A bounded pragmatic speaker (BPS) combines a base speaker prior
S_base(u|z,c) with a theory-of-mind likelihood L_ToM(z|u,c):

    S_bps(u|z*,c) ∝ S_base(u|z*,c) · L_ToM(z*|u,c)

Listeners only need to supply the likelihood column for the requested
intention, up to a constant factor; the product is normalized over u.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_softmax, softmax

from ..exceptions import AllZeroWeights, InvalidParameter, UndefinedCounterfactual, ValidationError
from ..models.game import Conditional
from .core import normalize, normalize_log, safe_log

# smallest normal double; below it a product has lost precision
TINY = np.finfo(float).tiny


@dataclass(frozen=True, eq=False)
class BaseSpeaker:
    """Prior over utterances given (context, intention); zero entries shrink the search space"""

    dist: Conditional

    def __post_init__(self):
        if len(self.dist.sources) != 2:
            raise ValidationError(self.dist.name, "base speaker must be conditioned on (context, intention)")

    @property
    def num_utterances(self) -> int:
        return len(self.dist.target)

    def row(self, z: int, c: int) -> np.ndarray:
        return self.dist.table[c, z]


@dataclass(frozen=True, eq=False)
class RewardTable:
    """
    Reward R_φ per utterance with inverse-temperature link ``beta``

    ``values`` is indexed ``[u]`` (the usual reward signature), or, as an
    experimental extension, ``[c][u]`` or ``[c][z][u]``.
    """

    values: np.ndarray
    beta: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim not in (1, 2, 3) or values.shape[-1] == 0:
            raise ValidationError("reward", f"unsupported reward shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("reward", "rewards must be finite")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValidationError("beta", f"beta must be positive and finite, got {self.beta!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def num_utterances(self) -> int:
        return self.values.shape[-1]

    @property
    def per_utterance(self) -> bool:
        return self.values.ndim == 1

    def scores(self, z: int, c: int) -> np.ndarray:
        if self.values.ndim == 1:
            return self.values
        if self.values.ndim == 2:
            return self.values[c]
        return self.values[c, z]

    def with_beta(self, beta: float) -> "RewardTable":
        return RewardTable(values=self.values, beta=beta)


class ToMListener(ABC):
    """The speaker's internal model of the real listener"""

    @property
    @abstractmethod
    def num_utterances(self) -> int:
        ...

    @abstractmethod
    def likelihood(self, z: int, c: int) -> np.ndarray:
        """L_ToM(z|u,c) for every utterance u, up to a positive factor"""

    def log_likelihood(self, z: int, c: int) -> np.ndarray:
        return safe_log(self.likelihood(z, c))

    def as_conditional(self) -> Conditional:
        raise UndefinedCounterfactual(
            f"{type(self).__name__} models only the target intention's row; other intentions are undefined"
        )


@dataclass(frozen=True, eq=False)
class TabularToMListener(ToMListener):
    """Full listener table over intentions given (context, utterance), optionally tempered by ``alpha``"""

    dist: Conditional
    alpha: float = 1.0

    def __post_init__(self):
        if len(self.dist.sources) != 2:
            raise ValidationError(self.dist.name, "listener must be conditioned on (context, utterance)")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise InvalidParameter(f"alpha must be finite and >= 0, got {self.alpha!r}")

    @property
    def num_utterances(self) -> int:
        return len(self.dist.sources[1])

    def likelihood(self, z: int, c: int) -> np.ndarray:
        column = self.dist.table[c, :, z]
        if self.alpha == 1.0:
            return column
        return np.exp(self.log_likelihood(z, c))

    def log_likelihood(self, z: int, c: int) -> np.ndarray:
        column = self.dist.table[c, :, z]
        # zero stays impossible even at alpha = 0
        with np.errstate(invalid="ignore"):
            return np.where(column > 0, self.alpha * safe_log(column), -np.inf)

    def as_conditional(self) -> Conditional:
        if self.alpha != 1.0:
            return super().as_conditional()
        return self.dist


@dataclass(frozen=True, eq=False)
class RewardToMListener(ToMListener):
    """L_ToM(z*|u,c) ∝ exp(R(u)/β), materialized lazily per request"""

    reward: RewardTable

    @property
    def num_utterances(self) -> int:
        return self.reward.num_utterances

    def likelihood(self, z: int, c: int) -> np.ndarray:
        # softmax subtracts the max before exponentiating
        return softmax(self.reward.scores(z, c) / self.reward.beta)

    def log_likelihood(self, z: int, c: int) -> np.ndarray:
        return log_softmax(self.reward.scores(z, c) / self.reward.beta)


@dataclass(frozen=True, eq=False)
class SpeakerToMListener(ToMListener):
    """L_ToM(z|u,c) ∝ S(u|z,c): a speaker reused as its own listener"""

    speaker: Conditional

    @property
    def num_utterances(self) -> int:
        return len(self.speaker.target)

    def likelihood(self, z: int, c: int) -> np.ndarray:
        return self.speaker.table[c, z]


@dataclass(frozen=True, eq=False)
class BpsSpeaker:
    base: BaseSpeaker
    tom: ToMListener

    def __post_init__(self):
        if self.base.num_utterances != self.tom.num_utterances:
            raise ValidationError(
                "tom",
                f"listener covers {self.tom.num_utterances} utterances, base speaker {self.base.num_utterances}",
            )


def bps_distribution(s: BpsSpeaker, z: int, c: int) -> np.ndarray:
    """
    Bounded pragmatic speaker distribution over utterances

    Args:
        s: Base speaker and ToM listener
        z: Target intention index
        c: Context index

    Returns:
        normalize(S_base(u|z,c) · L_ToM(z|u,c)); the product is taken directly
        unless a possible term underflows, then in the log domain

    Raises:
        AllZeroWeights: if prior and likelihood have disjoint support
    """
    prior = s.base.row(z, c)
    log_likelihood = s.tom.log_likelihood(z, c)
    weights = prior * s.tom.likelihood(z, c)
    possible = (prior > 0) & (log_likelihood > -np.inf)
    try:
        if np.all(weights[possible] >= TINY):
            return normalize(weights)
        return normalize_log(safe_log(prior) + log_likelihood)
    except AllZeroWeights:
        raise AllZeroWeights(f"base speaker and ToM listener have disjoint support for intention {z}, context {c}")


def tom_from_reward(r: RewardTable) -> RewardToMListener:
    return RewardToMListener(reward=r)


def trivial_bps_from_lm(lm: Conditional) -> BpsSpeaker:
    """
    View a language model as a BPS that uses itself as both components

    The result's distribution is proportional to lm(u|z,c)², so it shares the
    language model's argmax in every game.
    """
    return BpsSpeaker(base=BaseSpeaker(dist=lm), tom=SpeakerToMListener(speaker=lm))


def strictly_positive(base: BaseSpeaker, z: Optional[int] = None, c: Optional[int] = None) -> bool:
    table = base.dist.table if z is None else base.row(z, c)
    return bool(np.all(table > 0))
