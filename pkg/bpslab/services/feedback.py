"""Learning a target distribution p(u) from scalar rewards or structured feedback.

The target is decomposed as p(u) = Σ_z p(u|z)·p(z) over a latent space Z'.
After the learner proposes û ~ q, a feedback unit is one of:

* reward-only: the scalar log p(û);
* structured, channel (i): a latent sample ẑ ~ p(z);
* structured, channel (ii): a latent sample ẑ ~ p(z|û).

Both learners are charged one unit of budget per feedback message and are
scored by the exact KL(learner || target) at each checkpoint.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from ..exceptions import InvalidParameter, ValidationError, ZeroMarginal
from ..models.game import ROW_TOLERANCE, Conditional, Space, SpaceKind
from ..models.reports import ComparisonTable, CurvePoint, LearningCurve, SummaryRow
from ..models.schemas import FeedbackTask
from ..utils.rng import make_rng, sample_index
from .core import kl_divergence

logger = structlog.get_logger(__name__)

REWARD_ONLY = "reward-only"
STRUCTURED = "structured"

# floor on log p(û) handed to the reward-only learner
LOG_FLOOR = -50.0
FIT_TOLERANCE = 1e-12
FIT_MAX_ITERATIONS = 5_000
# share of uniform mass in the structured learner's proposal
EXPLORATION = 0.5


@dataclass(frozen=True)
class Factorization:
    """
    Grid layout shared by latents and utterances

    Latent z = a·B + b for a grid (A, B) and utterance u = x·Y + y for a grid
    (X, Y); p(z) factors as p(a)·p(b) and p(u|z) as f(x|a)·g(y|b). The layout
    ((Z, 1), (U, 1)) puts no constraint on either.
    """

    latent: Tuple[int, int]
    utterance: Tuple[int, int]

    @classmethod
    def unconstrained(cls, num_latents: int, num_utterances: int) -> "Factorization":
        return cls(latent=(num_latents, 1), utterance=(num_utterances, 1))


@dataclass(frozen=True, eq=False)
class StructuredTarget:
    """p(z) over a latent space and p(u|z) as a Conditional over utterances"""

    p_z: np.ndarray
    p_u_given_z: Conditional
    factorization: Optional[Factorization] = None

    def __post_init__(self):
        p_z = np.array(self.p_z, dtype=float)
        if len(self.p_u_given_z.sources) != 1:
            raise ValidationError(self.p_u_given_z.name, "p(u|z) must be conditioned on the latent space alone")
        if p_z.shape != (len(self.p_u_given_z.sources[0]),):
            raise ValidationError("p_z", f"expected {len(self.p_u_given_z.sources[0])} entries, got {p_z.shape}")
        if not np.all(np.isfinite(p_z)) or np.any(p_z < 0) or abs(p_z.sum() - 1.0) > ROW_TOLERANCE:
            raise ValidationError("p_z", "p(z) must be a distribution")
        p_z.setflags(write=False)
        object.__setattr__(self, "p_z", p_z)

        layout = self.factorization or Factorization.unconstrained(self.num_latents, self.num_utterances)
        if np.prod(layout.latent) != self.num_latents or np.prod(layout.utterance) != self.num_utterances:
            raise ValidationError(
                "factorization", f"grids {layout.latent} and {layout.utterance} do not fit the spaces"
            )
        if layout.latent[1] > 1:
            grid = p_z.reshape(layout.latent)
            if np.abs(grid - np.outer(grid.sum(axis=1), grid.sum(axis=0))).max() > ROW_TOLERANCE:
                raise ValidationError("p_z", f"p(z) must factor over the latent grid {layout.latent}")
        object.__setattr__(self, "factorization", layout)

    @property
    def num_latents(self) -> int:
        return len(self.p_z)

    @property
    def num_utterances(self) -> int:
        return len(self.p_u_given_z.target)


def implied_marginal(t: StructuredTarget) -> np.ndarray:
    """p(u) = Σ_z p(u|z)·p(z)"""
    return t.p_z @ t.p_u_given_z.table


def bayes_posterior(t: StructuredTarget, u: int) -> np.ndarray:
    """
    p(z|u) ∝ p(u|z)·p(z)

    Raises:
        ZeroMarginal: if the target never produces ``u``
    """
    joint = t.p_u_given_z.table[:, u] * t.p_z
    marginal = joint.sum()
    if marginal <= 0:
        raise ZeroMarginal(f"utterance {t.p_u_given_z.target.symbols[u]!r} has probability zero under the target")
    return joint / marginal


def _posterior_matrix(t: StructuredTarget) -> np.ndarray:
    # [u, z]; rows of impossible utterances stay zero
    joint = t.p_u_given_z.table.T * t.p_z
    marginal = joint.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(marginal > 0, joint / marginal, 0.0)


def build_target(task: FeedbackTask) -> StructuredTarget:
    """
    Construct a compositional target from a task recipe

    The latent z = (a, b) and the utterance u = (x, y) live on the same a×b
    grid. p(u|z) = f(x|a)·g(y|b), where f and g put weight ``1 - noise`` on the
    matching value and spread ``noise`` with Dirichlet rows; p(z) = p(a)·p(b)
    with both factors drawn from Dirichlet(``concentration``). Everything is
    drawn from ``target_seed``.
    """
    rng = make_rng(task.target_seed)
    first, second = task.factor_sizes

    def factor(size: int) -> np.ndarray:
        spread = rng.dirichlet(np.ones(size), size=size)
        return (1.0 - task.noise) * np.eye(size) + task.noise * spread

    table = np.kron(factor(first), factor(second))
    p_z = np.outer(
        rng.dirichlet(np.full(first, task.concentration)), rng.dirichlet(np.full(second, task.concentration))
    ).ravel()

    latents = Space(
        kind=SpaceKind.INTENTION,
        symbols=tuple(f"z{a}.{b}" for a in range(first) for b in range(second)),
        name="latents",
    )
    utterances = Space(
        kind=SpaceKind.UTTERANCE,
        symbols=tuple(f"u{x}.{y}" for x in range(first) for y in range(second)),
        name="utterances",
    )
    # kron of row-stochastic factors drifts from 1 only by rounding
    table = table / table.sum(axis=1, keepdims=True)
    return StructuredTarget(
        p_z=p_z / p_z.sum(),
        p_u_given_z=Conditional(sources=(latents,), target=utterances, table=table, name="p_u_given_z"),
        factorization=Factorization(latent=(first, second), utterance=(first, second)),
    )


def _checkpoints(budget: int, checkpoints: Optional[Sequence[int]]) -> List[int]:
    if budget < 0:
        raise InvalidParameter(f"budget must be >= 0, got {budget}")
    points = sorted(set([0, budget] if checkpoints is None else checkpoints))
    if not points or points[0] < 0 or points[-1] > budget:
        raise InvalidParameter(f"checkpoints must lie within [0, {budget}]")
    return points


def reward_only_learner(
    target: StructuredTarget,
    budget: int,
    rng: np.random.Generator,
    lr: float = 0.1,
    steps_per_feedback: int = 1,
    checkpoints: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> LearningCurve:
    """
    Variational baseline driven by scalar feedback log p(û)

    Each unit: draw û ~ q, receive log p(û), and take ``steps_per_feedback``
    score-function steps on KL(q || p) with a running baseline. The step size
    decays as lr / sqrt(1 + t/100).

    Args:
        target: Distribution to learn
        budget: Number of feedback units
        rng: Generator for proposals
        lr: Initial learning rate
        steps_per_feedback: Gradient steps taken with each single evaluation
        checkpoints: Budgets at which KL is recorded (default: 0 and ``budget``)
        seed: Label stored on the curve
    """
    if lr <= 0:
        raise InvalidParameter(f"lr must be positive, got {lr}")
    if steps_per_feedback < 1:
        raise InvalidParameter(f"steps_per_feedback must be >= 1, got {steps_per_feedback}")
    points = _checkpoints(budget, checkpoints)
    p = implied_marginal(target)
    with np.errstate(divide="ignore"):
        log_p = np.maximum(np.log(p), LOG_FLOOR)

    logits = np.zeros(target.num_utterances)
    baseline = 0.0
    curve: List[CurvePoint] = []
    pending = iter(points)
    next_point = next(pending)
    for t in range(budget + 1):
        if t == next_point:
            curve.append(CurvePoint(budget=t, kl=max(kl_divergence(softmax(logits), p), 0.0)))
            next_point = next(pending, None)
            if next_point is None:
                break
        q = softmax(logits)
        u = int(sample_index(rng, q, 1)[0])
        step = lr / np.sqrt(1.0 + t / 100.0)
        for _ in range(steps_per_feedback):
            log_q = log_softmax(logits)
            value = log_q[u] - log_p[u]
            score = -softmax(logits)
            score[u] += 1.0
            logits -= step * (value - baseline) * score
        baseline += 0.1 * (value - baseline)

    logger.debug("reward-only learner finished", budget=budget, final_kl=curve[-1].kl)
    return LearningCurve(learner=REWARD_ONLY, seed=seed, points=curve)


class FactoredModel:
    """
    Penalized likelihood fit of p(z) = p(a)·p(b) and p(u|z) = f(x|a)·g(y|b)

    Channel (i) counts inform p(z) directly. A channel (ii) pair (û, ẑ) adds
    log p(ẑ|û) = log p(ẑ) + log p(û|ẑ) - log p(û). Every factor probability
    carries a ``smoothing`` pseudo-count, which keeps the optimum in the
    interior. Parameters are softmax logits of p(a), p(b), the rows of f and
    the rows of g.
    """

    def __init__(self, layout: Factorization, smoothing: float):
        self.layout = layout
        self.smoothing = smoothing
        (a, b), (x, y) = layout.latent, layout.utterance
        self._sizes = (a, b, a * x, b * y)
        self.params = np.zeros(sum(self._sizes))

    def _split(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        (a, b), (x, y) = self.layout.latent, self.layout.utterance
        first, second, phi, gamma = np.split(params, np.cumsum(self._sizes)[:-1])
        return (
            log_softmax(first),
            log_softmax(second),
            log_softmax(phi.reshape(a, x), axis=1),
            log_softmax(gamma.reshape(b, y), axis=1),
        )

    def unpack(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Log p(z), log f and log g"""
        log_a, log_b, log_f, log_g = self._split(params)
        return (log_a[:, None] + log_b[None, :]).ravel(), log_f, log_g

    def marginal(self, params: Optional[np.ndarray] = None) -> np.ndarray:
        log_p, log_f, log_g = self.unpack(self.params if params is None else params)
        return np.exp(log_p) @ np.kron(np.exp(log_f), np.exp(log_g))

    def objective(self, params: np.ndarray, z_counts: np.ndarray, pair_counts: np.ndarray) -> Tuple[float, np.ndarray]:
        """
        Negative penalized log-likelihood per observation, with its gradient

        Args:
            params: Concatenated logits
            z_counts: Channel (i) counts per latent
            pair_counts: Channel (ii) counts indexed [u, z]
        """
        (a, b), (x, y) = self.layout.latent, self.layout.utterance
        log_a, log_b, log_f, log_g = self._split(params)
        p_a, p_b, f, g = np.exp(log_a), np.exp(log_b), np.exp(log_f), np.exp(log_g)
        p_grid = np.outer(p_a, p_b)
        grid = pair_counts.reshape(x, y, a, b)
        latent_counts = (z_counts + pair_counts.sum(axis=0)).reshape(a, b)
        c_a = latent_counts.sum(axis=1) + self.smoothing
        c_b = latent_counts.sum(axis=0) + self.smoothing
        c_f = grid.sum(axis=(1, 3)).T + self.smoothing
        c_g = grid.sum(axis=(0, 2)).T + self.smoothing

        kernel = np.kron(f, g)
        marginal = p_grid.ravel() @ kernel
        proposed = pair_counts.sum(axis=1)
        ratio = proposed / marginal
        weights = ratio.reshape(x, y)
        # expected latent counts of the -log p(û) terms
        responsibility = (p_grid.ravel() * (kernel @ ratio)).reshape(a, b)

        value = (
            c_a @ log_a
            + c_b @ log_b
            + np.sum(c_f * log_f)
            + np.sum(c_g * log_g)
            - proposed @ np.log(marginal)
        )
        d_a = c_a - responsibility.sum(axis=1)
        d_b = c_b - responsibility.sum(axis=0)
        d_f = c_f - f * (p_grid @ g @ weights.T)
        d_g = c_g - g * (p_grid.T @ f @ weights)
        grad = np.concatenate(
            [
                d_a - p_a * d_a.sum(),
                d_b - p_b * d_b.sum(),
                (d_f - f * d_f.sum(axis=1, keepdims=True)).ravel(),
                (d_g - g * d_g.sum(axis=1, keepdims=True)).ravel(),
            ]
        )
        total = z_counts.sum() + pair_counts.sum() + 1.0
        return -value / total, -grad / total

    def fit(self, z_counts: np.ndarray, pair_counts: np.ndarray) -> np.ndarray:
        """Refit from the current counts, starting at the previous optimum; returns p̂(u)"""
        result = minimize(
            self.objective,
            self.params,
            args=(z_counts, pair_counts),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": FIT_MAX_ITERATIONS, "ftol": FIT_TOLERANCE, "gtol": FIT_TOLERANCE},
        )
        if not result.success:
            logger.debug("factored fit stopped early", message=str(result.message), iterations=result.nit)
        self.params = result.x
        return self.marginal()


def structured_feedback_learner(
    target: StructuredTarget,
    budget: int,
    rng: np.random.Generator,
    smoothing: float = 1e-3,
    prior_share: float = 0.5,
    checkpoints: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> LearningCurve:
    """
    Learn p(u) from latent samples

    Feedback unit k is a channel (i) sample ẑ ~ p(z) when floor((k+1)·share)
    exceeds floor(k·share), otherwise a channel (ii) pair (û ~ q, ẑ ~ p(z|û));
    share 0.5 alternates the channels. The counts are fitted by a
    ``FactoredModel`` on the target's grid layout and p̂(u) = Σ_z p̂(u|z)p̂(z).
    The proposal q mixes the current p̂(u) with the uniform distribution and is
    refreshed at doubling budgets and at checkpoints.

    Args:
        target: Distribution to learn
        budget: Number of feedback units
        rng: Generator for proposals and feedback
        smoothing: Pseudo-count added to every estimated probability
        prior_share: Fraction of units spent on channel (i)
        checkpoints: Budgets at which KL is recorded (default: 0 and ``budget``)
        seed: Label stored on the curve
    """
    if smoothing <= 0:
        raise InvalidParameter(f"smoothing must be positive, got {smoothing}")
    if not 0 < prior_share < 1:
        raise InvalidParameter(f"prior_share must lie in (0, 1), got {prior_share}")
    points = _checkpoints(budget, checkpoints)
    p = implied_marginal(target)
    posterior_cdf = np.cumsum(_posterior_matrix(target), axis=1)
    num_u, num_z = target.num_utterances, target.num_latents

    model = FactoredModel(target.factorization, smoothing)
    z_counts = np.zeros(num_z)
    pair_counts = np.zeros((num_u, num_z))
    estimate = model.marginal()

    def channel_one_units(start: int, stop: int) -> int:
        return int(np.floor(stop * prior_share) - np.floor(start * prior_share))

    refreshes = set(points)
    size = 1
    while size < budget:
        refreshes.add(size)
        size *= 2

    curve: List[CurvePoint] = []
    done = 0
    for boundary in sorted(refreshes):
        if boundary > done:
            prior_units = channel_one_units(done, boundary)
            pair_units = boundary - done - prior_units
            if prior_units:
                np.add.at(z_counts, sample_index(rng, target.p_z, prior_units), 1.0)
            if pair_units:
                proposal = EXPLORATION / num_u + (1.0 - EXPLORATION) * estimate
                proposed = sample_index(rng, proposal, pair_units)
                # an impossible proposal gets no answer but still costs its unit
                answerable = posterior_cdf[proposed, -1] > 0
                proposed = proposed[answerable]
                draws = rng.random(answerable.size)[answerable] * posterior_cdf[proposed, -1]
                latents = np.minimum((draws[:, None] >= posterior_cdf[proposed]).sum(axis=1), num_z - 1)
                np.add.at(pair_counts, (proposed, latents), 1.0)
            estimate = model.fit(z_counts, pair_counts)
            done = boundary
        if boundary in points:
            kl = max(kl_divergence(estimate, p), 0.0)
            curve.append(CurvePoint(budget=boundary, kl=kl))
            logger.debug("structured learner checkpoint", budget=boundary, kl=kl)

    return LearningCurve(learner=STRUCTURED, seed=seed, points=curve)


def compare_sample_efficiency(
    task: FeedbackTask,
    budgets: Sequence[int],
    seeds: Sequence[int],
    *,
    smoothing: float = 1e-3,
    lr: float = 0.1,
    prior_share: float = 0.5,
) -> ComparisonTable:
    """
    Run both learners on the task's target for every seed

    Each learner gets its own ``default_rng(seed)`` stream and records KL at
    every requested budget.

    Returns:
        One curve per (learner, seed) and the median KL per (learner, budget)
    """
    if not budgets or not seeds:
        raise InvalidParameter("budgets and seeds must be non-empty")
    target = build_target(task)
    budgets = sorted(set(budgets))
    horizon = budgets[-1]

    curves: List[LearningCurve] = []
    for seed in seeds:
        curves.append(
            structured_feedback_learner(
                target,
                horizon,
                make_rng(seed),
                smoothing=smoothing,
                prior_share=prior_share,
                checkpoints=budgets,
                seed=seed,
            )
        )
        curves.append(reward_only_learner(target, horizon, make_rng(seed), lr=lr, checkpoints=budgets, seed=seed))

    by_learner: Dict[str, List[LearningCurve]] = {}
    for curve in curves:
        by_learner.setdefault(curve.learner, []).append(curve)
    summary = [
        SummaryRow(
            learner=learner,
            budget=budget,
            median_kl=float(np.median([c.points[i].kl for c in group])),
        )
        for learner, group in by_learner.items()
        for i, budget in enumerate(budgets)
    ]
    logger.info("sample-efficiency comparison finished", seeds=len(seeds), budgets=budgets)
    return ComparisonTable(curves=curves, summary=summary)
