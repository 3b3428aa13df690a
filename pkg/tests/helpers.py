"""Builders for small single-context games shared by the test modules."""

import numpy as np

from bpslab.models.game import CommunicationGame, Conditional, Space, SpaceKind, listener_table, speaker_table
from bpslab.services.feedback import StructuredTarget
from bpslab.services.speakers import BaseSpeaker, TabularToMListener

INTENTIONS = Space.of(SpaceKind.INTENTION, "target", "other")


def utterance_space(size):
    return Space(kind=SpaceKind.UTTERANCE, symbols=tuple(f"u{i}" for i in range(size)))


def game_from_column(column, target=0):
    """Game whose target column is ``column``; the other intention takes the rest"""
    column = np.asarray(column, dtype=float)
    utterances = utterance_space(len(column))
    table = np.stack([column, 1.0 - column], axis=1)[np.newaxis]
    return CommunicationGame(
        utterances=utterances,
        intentions=INTENTIONS,
        contexts=Space.single_context(),
        listener=listener_table(utterances, INTENTIONS, Space.single_context(), table),
        target_intention=target,
    )


def base_from_row(row):
    """Base speaker with ``row`` for the target intention and a uniform row for the other"""
    row = np.asarray(row, dtype=float)
    utterances = utterance_space(len(row))
    table = np.stack([row, np.full(len(row), 1.0 / len(row))])[np.newaxis]
    return BaseSpeaker(dist=speaker_table(utterances, INTENTIONS, Space.single_context(), table))


def tom_from_column(column, alpha=1.0):
    return TabularToMListener(dist=game_from_column(column).listener, alpha=alpha)


def target_from_rows(p_z, rows):
    """Structured target from p(z) and rows p(u|z)"""
    rows = np.asarray(rows, dtype=float)
    latents = Space(kind=SpaceKind.INTENTION, symbols=tuple(f"z{i}" for i in range(rows.shape[0])), name="latents")
    table = Conditional(sources=(latents,), target=utterance_space(rows.shape[1]), table=rows, name="p_u_given_z")
    return StructuredTarget(p_z=np.asarray(p_z, dtype=float), p_u_given_z=table)
