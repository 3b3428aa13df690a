"""Exact solutions of a single communication game."""

import numpy as np

from ..models.reports import ExperimentConfig
from ..services.core import argmax_lowest, expected_listener_probability, solve_exact, total_variation, ups_distribution
from ..services.loader import SpecBundle
from ..services.rsa import literal_listener, pragmatic_speaker, rsa_as_bps
from ..services.speakers import BpsSpeaker, bps_distribution
from .base import CommandOutput, base_speaker, command, game, indices, symbol, tom_listener


def _distribution_output(utterances, dist: np.ndarray, extra: dict) -> CommandOutput:
    records = [
        {"index": i, "utterance": u, "probability": float(p)} for i, (u, p) in enumerate(zip(utterances.symbols, dist))
    ]
    choice = argmax_lowest(dist)
    summary = {"choice": utterances.symbols[choice], "choice_index": choice, **extra}
    return CommandOutput(header=["index", "utterance", "probability"], records=records, summary=summary)


@command("solve", help="Utterance maximizing the real listener's probability of the target (lowest index on ties)")
def solve(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    g = game(config, bundle)
    scores = g.listener_column
    choice = solve_exact(g, scores)
    records = [
        {"index": i, "utterance": u, "listener_probability": float(s)}
        for i, (u, s) in enumerate(zip(g.utterances.symbols, scores))
    ]
    return CommandOutput(
        header=["index", "utterance", "listener_probability"],
        records=records,
        summary={
            "choice": g.utterances.symbols[choice],
            "choice_index": choice,
            "listener_probability": float(scores[choice]),
        },
    )


@command("ups", help="Unbounded pragmatic speaker: the real listener's column, normalized")
def ups(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    g = game(config, bundle)
    dist = ups_distribution(g)
    return _distribution_output(
        g.utterances, dist, {"expected_listener_probability": expected_listener_probability(dist, g)}
    )


@command("bps", help="Bounded pragmatic speaker from base_speaker and a ToM listener")
def bps(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    z, c = indices(config, bundle)
    speaker = BpsSpeaker(base=base_speaker(bundle), tom=tom_listener(config, bundle))
    dist = bps_distribution(speaker, z, c)
    extra = {"target": symbol(bundle.intentions, z), "context": symbol(bundle.contexts, c)}
    if bundle.game is not None:
        extra["expected_listener_probability"] = expected_listener_probability(dist, game(config, bundle))
    return _distribution_output(bundle.require("utterances", config.subcommand), dist, extra)


@command("rsa", help="RSA pragmatic speaker next to its BPS embedding, per referent")
def rsa(config: ExperimentConfig, bundle: SpecBundle) -> CommandOutput:
    lexicon = bundle.require("lexicon", config.subcommand)
    cfg = bundle.rsa
    s1 = pragmatic_speaker(literal_listener(lexicon, cfg.prior), cfg.alpha)
    embedded = rsa_as_bps(lexicon, cfg)

    records = []
    largest_tv = 0.0
    for z, referent in enumerate(lexicon.referents.symbols):
        direct = s1.row(0, z)
        via_bps = bps_distribution(embedded, z, 0)
        largest_tv = max(largest_tv, total_variation(direct, via_bps))
        for u, utterance in enumerate(lexicon.utterances.symbols):
            records.append(
                {"referent": referent, "utterance": utterance, "s1": float(direct[u]), "bps": float(via_bps[u])}
            )
    return CommandOutput(
        header=["referent", "utterance", "s1", "bps"],
        records=records,
        summary={"alpha": cfg.alpha, "max_total_variation": largest_tv},
    )
