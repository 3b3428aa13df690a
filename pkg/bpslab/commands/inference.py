"""Best-of-n inference, RLHF as variational inference and reward fitting."""

from typing import Any, Dict, List

import numpy as np

from ..models.reports import ExperimentConfig
from ..services.core import normalize, safe_log, total_variation, ups_distribution
from ..services.inference import (
    Objective,
    SoftmaxPolicy,
    closed_form_rlhf_optimum,
    exact_pragmatic_choice,
    log_partition,
    mc_pragmatic_infer,
    objective_gradient,
    optimize_variational,
    reward_bps,
    rlhf_objective,
    vi_objective,
)
from ..services.loader import SpecBundle, reference_speaker
from ..services.preferences import fit_reward_from_preferences, preference_counts, sample_preferences
from ..services.speakers import tom_from_reward
from ..utils.rng import make_rng, trial_rng
from .base import CommandOutput, base_speaker, command, game, indices, reward


@command("mc-infer", help="Best-of-n candidates from the base speaker ranked by reward, against the exact choice")
def mc_infer(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    z, c = indices(config, bundle)
    base = base_speaker(bundle)
    r = reward(config, bundle)
    exact = exact_pragmatic_choice(base, r, z, c)
    utterances = bundle.require("utterances", config.subcommand).symbols

    records = []
    for i in range(config.trials):
        choice = mc_pragmatic_infer(base, r, z, c, config.n_candidates, trial_rng(config.seed, i))
        records.append({"trial": i, "choice": utterances[choice], "agrees": int(choice == exact)})
    agreement = float(np.mean([row["agrees"] for row in records])) if records else 0.0
    return CommandOutput(
        header=["trial", "choice", "agrees"],
        records=records,
        summary={
            "exact_choice": utterances[exact],
            "n_candidates": config.n_candidates,
            "agreement_rate": agreement,
            "trials": config.trials,
        },
    )


def _is_logged(step: int) -> bool:
    return step & (step - 1) == 0 or step % 1_000 == 0


@command("rlhf", help="Gradient descent on the KL-regularized reward objective; learning curve against the closed form")
def rlhf(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    z, c = indices(config, bundle)
    s0 = reference_speaker(bundle)
    r = reward(config, bundle)
    optimum = closed_form_rlhf_optimum(s0, r, z, c)

    curve: List[Dict[str, Any]] = []
    last: Dict[str, Any] = {}

    def record(step: int, q: np.ndarray, objective: float, grad_norm: float) -> None:
        point = {
            "step": step,
            "objective": objective,
            "grad_norm": grad_norm,
            "tv_to_closed_form": total_variation(q, optimum),
        }
        last.update(point)
        if _is_logged(step):
            curve.append(point)

    init = SoftmaxPolicy.uniform(*s0.dist.shape)
    policy, report = optimize_variational(
        init, r, s0, z, c, lr=config.lr, max_steps=config.max_steps, tol=config.tol, callback=record
    )
    if not curve or curve[-1]["step"] != last["step"]:
        curve.append(dict(last))

    return CommandOutput(
        header=["step", "objective", "grad_norm", "tv_to_closed_form"],
        records=curve,
        summary={
            **report.model_dump(),
            "beta": r.beta,
            "final_tv_to_closed_form": last["tv_to_closed_form"],
            "closed_form": optimum.tolist(),
            "policy": policy.distribution(z, c).tolist(),
        },
    )


@command("check-eq8", help="Check that the VI and RLHF objectives differ by the log-partition at random logits")
def check_equivalence(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    z, c = indices(config, bundle)
    s0 = reference_speaker(bundle)
    r = reward(config, bundle)
    bps = reward_bps(s0, r)
    constant = log_partition(s0, r, z, c)

    records = []
    worst_gradient = 0.0
    for i in range(config.trials):
        logits = trial_rng(config.seed, i).normal(size=s0.dist.shape)
        policy = SoftmaxPolicy(logits=logits)
        vi = vi_objective(policy, bps, z, c)
        rl = rlhf_objective(policy, r, s0, z, c)
        vi_grad = objective_gradient(policy, Objective.VI, z, c, bps=bps)
        rl_grad = objective_gradient(policy, Objective.RLHF, z, c, reward=r, base=s0)
        worst_gradient = max(worst_gradient, float(np.abs(vi_grad - rl_grad / r.beta).max()))
        records.append({"trial": i, "vi_objective": vi, "rlhf_objective": rl, "gap": vi - rl / r.beta})

    gaps = np.array([row["gap"] for row in records])
    return CommandOutput(
        header=["trial", "vi_objective", "rlhf_objective", "gap"],
        records=records,
        summary={
            "log_partition": constant,
            "gap_spread": float(gaps.max() - gaps.min()) if gaps.size else 0.0,
            "max_gap_error": float(np.abs(gaps - constant).max()) if gaps.size else 0.0,
            "max_gradient_difference": worst_gradient,
            "trials": config.trials,
        },
    )


@command("fit-reward", help="Fit a Bradley-Terry reward to synthetic preferences drawn from the real listener")
def fit_reward(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    g = game(config, bundle)
    size = len(g.utterances)
    data = sample_preferences(g, config.pairs, make_rng(config.seed))
    fitted = fit_reward_from_preferences(data, size, reg=config.reward_reg)
    counts = preference_counts(data, size)

    # the rater's scores are log-listener probabilities, so its ToM listener is S_ups
    true_tom = ups_distribution(g)
    fitted_tom = tom_from_reward(fitted).likelihood(g.target_intention, g.context)
    log_listener = safe_log(g.listener_column)
    records = [
        {
            "index": u,
            "utterance": g.utterances.symbols[u],
            "log_listener": float(log_listener[u]),
            "fitted_reward": float(fitted.values[u]),
            "wins": int(counts[u].sum()),
            "comparisons": int(counts[u].sum() + counts[:, u].sum()),
        }
        for u in range(size)
    ]
    return CommandOutput(
        header=["index", "utterance", "log_listener", "fitted_reward", "wins", "comparisons"],
        records=records,
        summary={
            "pairs": config.pairs,
            "fitted_reward": fitted.values.tolist(),
            "tv_to_true_tom": total_variation(normalize(fitted_tom), true_tom),
        },
    )
