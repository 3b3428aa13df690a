"""Approximate inference for bounded pragmatic speakers.

Two routes are implemented:

* Monte-Carlo pragmatic inference: sample candidates from the base speaker
  and keep the one the reward ranks highest.
* Variational inference with a tabular softmax family S_θ. Minimizing the
  KL-regularized RLHF objective

      -E_{u~S_θ}[R(u)] + β · KL(S_θ || S_0)

  is the same problem as minimizing KL(S_θ || S_bps) for the BPS built from
  S_0 and L_ToM ∝ exp(R/β). The two objectives differ by β times the
  log-partition log Σ_u S_0(u)·exp(R(u)/β), which does not depend on θ.

All expectations are exact sums over the utterance space.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
import structlog
from scipy.special import log_softmax, logsumexp, softmax

from ..exceptions import AllZeroWeights, InvalidParameter, SupportViolation, ValidationError
from ..models.reports import OptimizeReport
from ..utils.rng import sample_index
from .core import argmax_lowest, safe_log
from .speakers import BaseSpeaker, BpsSpeaker, RewardTable, bps_distribution, strictly_positive, tom_from_reward

logger = structlog.get_logger(__name__)

StepCallback = Callable[[int, np.ndarray, float, float], None]


@dataclass(frozen=True, eq=False)
class SoftmaxPolicy:
    """Tabular variational speaker S_θ; ``logits`` is indexed [c][z][u]"""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=float)
        if logits.ndim != 3:
            raise ValidationError(
                "logits", f"expected a [context][intention][utterance] table, got shape {logits.shape}"
            )
        if not np.all(np.isfinite(logits)):
            raise ValidationError("logits", "logits must be finite")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)

    @classmethod
    def uniform(cls, num_contexts: int, num_intentions: int, num_utterances: int) -> "SoftmaxPolicy":
        return cls(logits=np.zeros((num_contexts, num_intentions, num_utterances)))

    @classmethod
    def matching(cls, base: BaseSpeaker) -> "SoftmaxPolicy":
        """Policy whose rows reproduce a strictly positive base speaker"""
        if np.any(base.dist.table <= 0):
            raise SupportViolation("a softmax policy cannot represent zero probabilities")
        return cls(logits=np.log(base.dist.table))

    def distribution(self, z: int, c: int) -> np.ndarray:
        return softmax(self.logits[c, z])

    def log_distribution(self, z: int, c: int) -> np.ndarray:
        return log_softmax(self.logits[c, z])

    def with_row(self, z: int, c: int, row: np.ndarray) -> "SoftmaxPolicy":
        logits = self.logits.copy()
        logits[c, z] = row
        return SoftmaxPolicy(logits=logits)


class Objective(str, Enum):
    RLHF = "rlhf"
    VI = "vi"


def mc_pragmatic_infer(
    base: BaseSpeaker, r: RewardTable, z: int, c: int, n: int, rng: np.random.Generator
) -> int:
    """
    Best-of-n selection: sample candidates from the base speaker, keep the best by reward

    Args:
        base: Base speaker the candidates are drawn from
        r: Reward used to rank the candidates
        z: Target intention index
        c: Context index
        n: Number of i.i.d. candidates
        rng: Generator the candidates are drawn with

    Returns:
        Utterance index; among equally rewarded candidates the lowest index wins
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    row = base.row(z, c)
    if row.sum() <= 0:
        raise AllZeroWeights(f"base speaker has no mass for intention {z}, context {c}")
    candidates = sample_index(rng, row, n)
    scores = r.scores(z, c)[candidates]
    return int(candidates[scores == scores.max()].min())


def exact_pragmatic_choice(base: BaseSpeaker, r: RewardTable, z: int, c: int) -> int:
    """argmax_u S_base(u|z,c)·exp(R(u)/β), the target best-of-n approximates"""
    return argmax_lowest(closed_form_rlhf_optimum(base, r, z, c))


def _positive_prior(s0: BaseSpeaker, z: int, c: int) -> np.ndarray:
    row = s0.row(z, c)
    if not strictly_positive(s0, z, c):
        raise SupportViolation(
            f"reference speaker S_0 has zero probability at utterance {int(np.argmax(row <= 0))}; "
            "KL(S_θ || S_0) is infinite for a full-support softmax policy"
        )
    return row


def rlhf_objective(p: SoftmaxPolicy, r: RewardTable, s0: BaseSpeaker, z: int, c: int) -> float:
    """Minimization form -E_{S_θ}[R] + β·KL(S_θ || S_0), by enumeration"""
    log_s0 = np.log(_positive_prior(s0, z, c))
    q = p.distribution(z, c)
    log_q = p.log_distribution(z, c)
    return float(-np.dot(q, r.scores(z, c)) + r.beta * np.dot(q, log_q - log_s0))


def vi_objective(p: SoftmaxPolicy, bps: BpsSpeaker, z: int, c: int) -> float:
    """KL(S_θ || S_bps), by enumeration"""
    target = bps_distribution(bps, z, c)
    q = p.distribution(z, c)
    support = q > 0
    if np.any(target[support] <= 0):
        raise SupportViolation("S_bps is zero where S_θ is positive; the KL divergence is infinite")
    log_q = p.log_distribution(z, c)
    return float(np.dot(q[support], log_q[support] - np.log(target[support])))


def reward_bps(s0: BaseSpeaker, r: RewardTable) -> BpsSpeaker:
    return BpsSpeaker(base=s0, tom=tom_from_reward(r))


def log_partition(s0: BaseSpeaker, r: RewardTable, z: int, c: int) -> float:
    """log Σ_u S_0(u|z,c)·exp(R(u)/β)"""
    return float(logsumexp(safe_log(s0.row(z, c)) + r.scores(z, c) / r.beta))


def equivalence_gap(p: SoftmaxPolicy, r: RewardTable, s0: BaseSpeaker, z: int, c: int) -> float:
    """
    vi_objective - rlhf_objective / β

    For every θ this equals :func:`log_partition`, so both objectives share
    their minimizers and their gradients agree up to the factor β.
    """
    return vi_objective(p, reward_bps(s0, r), z, c) - rlhf_objective(p, r, s0, z, c) / r.beta


def _softmax_chain(q: np.ndarray, h: np.ndarray) -> np.ndarray:
    # d/dθ_j of Σ_k q_k·h_k with h treated as ∂f/∂q: q_j (h_j - E_q[h])
    return q * (h - np.dot(q, h))


def objective_gradient(
    p: SoftmaxPolicy,
    objective: Objective,
    z: int,
    c: int,
    *,
    reward: Optional[RewardTable] = None,
    base: Optional[BaseSpeaker] = None,
    bps: Optional[BpsSpeaker] = None,
) -> np.ndarray:
    """
    Analytic gradient of an objective with respect to all logits

    Args:
        p: Policy to differentiate at
        objective: ``Objective.RLHF`` (needs ``reward`` and ``base``) or
            ``Objective.VI`` (needs ``bps``, or ``reward`` and ``base`` to build it)

    Returns:
        Array shaped like ``p.logits``; only the (c, z) row is non-zero
    """
    q = p.distribution(z, c)
    log_q = p.log_distribution(z, c)
    if objective == Objective.RLHF:
        if reward is None or base is None:
            raise InvalidParameter("the RLHF gradient needs a reward and a reference speaker")
        log_s0 = np.log(_positive_prior(base, z, c))
        h = -reward.scores(z, c) + reward.beta * (log_q - log_s0)
    elif objective == Objective.VI:
        if bps is None:
            if reward is None or base is None:
                raise InvalidParameter("the VI gradient needs a BPS, or a reward and a base speaker")
            bps = reward_bps(base, reward)
        target = bps_distribution(bps, z, c)
        if np.any(target[q > 0] <= 0):
            raise SupportViolation("S_bps is zero where S_θ is positive; the KL divergence is infinite")
        h = log_q - safe_log(target)
    else:
        raise InvalidParameter(f"unknown objective {objective!r}")
    grad = np.zeros_like(p.logits)
    grad[c, z] = _softmax_chain(q, h)
    return grad


def finite_difference_gradient(
    f: Callable[[SoftmaxPolicy], float], p: SoftmaxPolicy, h: float = 1e-5
) -> np.ndarray:
    """Central finite differences of ``f`` over every logit"""
    grad = np.zeros_like(p.logits)
    base_logits = p.logits.copy()
    for index in np.ndindex(base_logits.shape):
        perturbed = base_logits.copy()
        perturbed[index] += h
        upper = f(SoftmaxPolicy(logits=perturbed))
        perturbed[index] -= 2 * h
        lower = f(SoftmaxPolicy(logits=perturbed))
        grad[index] = (upper - lower) / (2 * h)
    return grad


def closed_form_rlhf_optimum(s0: BaseSpeaker, r: RewardTable, z: int, c: int) -> np.ndarray:
    """The tilted distribution S_0·exp(R/β)/Z, i.e. the BPS posterior"""
    return bps_distribution(reward_bps(s0, r), z, c)


def optimize_variational(
    init: SoftmaxPolicy,
    r: RewardTable,
    s0: BaseSpeaker,
    z: int,
    c: int,
    *,
    beta: Optional[float] = None,
    lr: float = 0.5,
    max_steps: int = 50_000,
    tol: float = 1e-8,
    callback: Optional[StepCallback] = None,
) -> Tuple[SoftmaxPolicy, OptimizeReport]:
    """
    Full-batch natural-gradient descent on the RLHF objective

    Each step moves the logits along log S_θ - log S_0 - R/β, the gradient of
    the VI form preconditioned by the inverse Fisher metric of the softmax
    family. In distribution space the step is S_θ ← S_θ^(1-lr) · S_bps^lr up to
    normalization, so every log-ratio to the optimum shrinks by |1 - lr| per step
    whatever its probability. Convergence is still judged on the Euclidean
    logit gradient.

    Args:
        init: Starting policy
        r: Reward table; ``beta`` overrides its temperature when given
        s0: Strictly positive reference speaker
        z: Target intention index
        c: Context index
        lr: Fixed learning rate in (0, 2)
        max_steps: Upper bound on gradient updates
        tol: Convergence threshold on the gradient max-norm
        callback: Called as ``callback(step, distribution, objective, grad_norm)``
            before every update and once at the end

    Returns:
        Final policy and a report; ``converged`` is False when ``max_steps`` ran out
    """
    if not 0 < lr < 2:
        raise InvalidParameter(f"lr must lie in (0, 2), got {lr}")
    if max_steps < 0:
        raise InvalidParameter(f"max_steps must be >= 0, got {max_steps}")
    if tol <= 0:
        raise InvalidParameter(f"tol must be positive, got {tol}")
    if beta is not None:
        r = r.with_beta(beta)

    log_s0 = np.log(_positive_prior(s0, z, c))
    rewards = r.scores(z, c)
    row = init.logits[c, z].copy()

    def evaluate(logits: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        q = softmax(logits)
        log_q = log_softmax(logits)
        objective = float(-np.dot(q, rewards) + r.beta * np.dot(q, log_q - log_s0))
        direction = log_q - log_s0 - rewards / r.beta
        return q, direction - direction.mean(), _softmax_chain(q, direction), objective

    converged = False
    steps = 0
    q, direction, grad, objective = evaluate(row)
    grad_norm = float(np.abs(grad).max())
    while True:
        if callback is not None:
            callback(steps, q, objective, grad_norm)
        if grad_norm <= tol:
            converged = True
            break
        if steps >= max_steps:
            break
        row -= lr * direction
        steps += 1
        q, direction, grad, objective = evaluate(row)
        grad_norm = float(np.abs(grad).max())

    if converged:
        logger.info("variational optimization converged", steps=steps, objective=objective, grad_norm=grad_norm)
    else:
        logger.warning("variational optimization did not converge", steps=steps, grad_norm=grad_norm, tol=tol)

    report = OptimizeReport(
        steps=steps,
        final_objective=objective,
        final_grad_norm=grad_norm,
        converged=converged,
        tolerance=tol,
        max_steps=max_steps,
    )
    return init.with_row(z, c, row), report
