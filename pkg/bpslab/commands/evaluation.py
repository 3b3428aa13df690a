"""Capability diagnosis and feedback-learning experiments."""

from typing import Dict, List

from ..models.reports import ExperimentConfig, LearningCurve
from ..models.schemas import FeedbackTask
from ..services.diagnosis import Answering
from ..services.diagnosis import diagnose as diagnose_speaker
from ..services.feedback import (
    REWARD_ONLY,
    STRUCTURED,
    build_target,
    compare_sample_efficiency,
    reward_only_learner,
    structured_feedback_learner,
)
from ..services.loader import SpecBundle
from ..services.speakers import BpsSpeaker
from ..utils.rng import make_rng
from .base import CommandOutput, base_speaker, command, game, tom_listener

CURVE_HEADER = ["learner", "seed", "budget", "kl"]


@command("diagnose", help="Attribute a speaker's shortfall to search, pragmatics or inference")
def diagnose(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    g = game(config, bundle)
    model = BpsSpeaker(base=base_speaker(bundle), tom=tom_listener(config, bundle))
    report = diagnose_speaker(
        model, g, config.n_candidates, max(config.trials, 1), config.seed, config.epsilon, Answering(config.answering)
    )
    records = [
        {"speaker": "model", "score": report.model_score, "gap": 0.0},
        {"speaker": "pragmatic_oracle", "score": report.oracle_pragmatic_score, "gap": report.pragmatic_gap},
        {"speaker": "search_oracle", "score": report.oracle_search_score, "gap": report.search_gap},
        {"speaker": "inference_oracle", "score": report.oracle_inference_score, "gap": report.inference_gap},
    ]
    return CommandOutput(header=["speaker", "score", "gap"], records=records, summary=report.model_dump(mode="json"))


def _task(bundle: SpecBundle) -> FeedbackTask:
    if bundle is None or bundle.feedback_task is None:
        return FeedbackTask()
    return bundle.feedback_task


def _curve_records(curves: List[LearningCurve]) -> List[Dict]:
    return [
        {"learner": curve.learner, "seed": curve.seed, "budget": point.budget, "kl": point.kl}
        for curve in curves
        for point in curve.points
    ]


@command("feedback", help="Learning curves of both learners for one seed", needs_spec=False)
def feedback(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    task = _task(bundle)
    target = build_target(task)
    budgets = sorted(set(config.budgets))
    curves = [
        structured_feedback_learner(
            target,
            budgets[-1],
            make_rng(config.seed),
            smoothing=config.smoothing,
            prior_share=config.prior_share,
            checkpoints=budgets,
            seed=config.seed,
        ),
        reward_only_learner(
            target, budgets[-1], make_rng(config.seed), lr=config.feedback_lr, checkpoints=budgets, seed=config.seed
        ),
    ]
    return CommandOutput(
        header=CURVE_HEADER,
        records=_curve_records(curves),
        summary={
            "task": task.model_dump(),
            "final_kl": {curve.learner: curve.final_kl for curve in curves},
        },
    )


@command("compare", help="Median KL per budget of both learners over many seeds", needs_spec=False)
def compare(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    task = _task(bundle)
    table = compare_sample_efficiency(
        task,
        config.budgets,
        config.seeds,
        smoothing=config.smoothing,
        lr=config.feedback_lr,
        prior_share=config.prior_share,
    )
    structured = [c for c in table.curves if c.learner == STRUCTURED]
    reward_only = [c for c in table.curves if c.learner == REWARD_ONLY]
    budgets = [point.budget for point in structured[0].points]
    wins = {
        str(budget): sum(s.points[i].kl < r.points[i].kl for s, r in zip(structured, reward_only))
        for i, budget in enumerate(budgets)
    }
    return CommandOutput(
        header=CURVE_HEADER,
        records=_curve_records(table.curves),
        summary={
            "task": task.model_dump(),
            "median_kl": [row.model_dump() for row in table.summary],
            "structured_wins": wins,
            "seeds": len(config.seeds),
        },
    )
