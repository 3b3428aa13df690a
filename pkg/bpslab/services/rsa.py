"""Rational Speech Act reference games and their embedding as a BPS.

Referents play the role of intentions and there is a single context.
"""

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..exceptions import InvalidParameter, ValidationError
from ..models.game import Conditional, Space, SpaceKind
from .core import normalize, normalize_log, safe_log
from .speakers import BaseSpeaker, BpsSpeaker, TabularToMListener


@dataclass(frozen=True, eq=False)
class Lexicon:
    """Boolean truth table, utterances × referents"""

    utterances: Space
    referents: Space
    truth: np.ndarray

    def __post_init__(self):
        truth = np.array(self.truth, dtype=bool)
        if truth.shape != (len(self.utterances), len(self.referents)):
            raise ValidationError("lexicon", f"truth table shape {truth.shape} does not match spaces")
        empty_rows = np.flatnonzero(~truth.any(axis=1))
        if empty_rows.size:
            utterance = self.utterances.symbols[empty_rows[0]]
            raise ValidationError(f"lexicon.{utterance}", "utterance is true of no referent")
        empty_cols = np.flatnonzero(~truth.any(axis=0))
        if empty_cols.size:
            referent = self.referents.symbols[empty_cols[0]]
            raise ValidationError(f"lexicon.{referent}", "referent has no describing utterance")
        truth.setflags(write=False)
        object.__setattr__(self, "truth", truth)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]], referents: Optional[Sequence[str]] = None) -> "Lexicon":
        """Build from ``{utterance: [referents it is true of]}``"""
        if referents is None:
            ordered = []
            for extension in mapping.values():
                ordered.extend(r for r in extension if r not in ordered)
            referents = ordered
        utterance_space = Space(kind=SpaceKind.UTTERANCE, symbols=tuple(mapping.keys()), name="lexicon")
        referent_space = Space(kind=SpaceKind.INTENTION, symbols=tuple(referents), name="referents")
        truth = np.zeros((len(utterance_space), len(referent_space)), dtype=bool)
        for u, extension in enumerate(mapping.values()):
            for r in extension:
                truth[u, referent_space.index(r)] = True
        return cls(utterances=utterance_space, referents=referent_space, truth=truth)

    def to_mapping(self) -> dict:
        return {
            u: [self.referents.symbols[z] for z in np.flatnonzero(self.truth[i])]
            for i, u in enumerate(self.utterances.symbols)
        }


@dataclass(frozen=True, eq=False)
class RsaConfig:
    alpha: float
    prior: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise InvalidParameter(f"alpha must be finite and >= 0, got {self.alpha!r}")
        prior = np.array(self.prior, dtype=float)
        if prior.ndim != 1 or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise ValidationError("prior", "prior must be a distribution over referents")
        prior.setflags(write=False)
        object.__setattr__(self, "prior", prior)

    @classmethod
    def uniform(cls, num_referents: int, alpha: float = 1.0) -> "RsaConfig":
        return cls(alpha=alpha, prior=np.full(num_referents, 1.0 / num_referents))


def literal_listener(lex: Lexicon, prior) -> Conditional:
    """L0(z|u) ∝ [u true of z] · prior(z), one row per utterance"""
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (len(lex.referents),):
        raise ValidationError("prior", f"expected {len(lex.referents)} entries, got {prior.shape}")
    table = np.stack([normalize(lex.truth[u] * prior) for u in range(len(lex.utterances))])
    return Conditional(
        sources=(Space.single_context(), lex.utterances),
        target=lex.referents,
        table=table[np.newaxis],
        name="literal_listener",
    )


def pragmatic_speaker(L0: Conditional, alpha: float) -> Conditional:
    """
    S1(u|z) ∝ exp(α · log L0(z|u))

    Utterances with L0(z|u) = 0 stay impossible for every α, so α = 0 gives the
    uniform distribution over utterances that can convey z at all.
    """
    if not (np.isfinite(alpha) and alpha >= 0):
        raise InvalidParameter(f"alpha must be finite and >= 0, got {alpha!r}")
    contexts, utterances = L0.sources
    # [c, u, z] -> [c, z, u]
    by_referent = np.transpose(L0.table, (0, 2, 1))
    with np.errstate(invalid="ignore"):
        log_weights = np.where(by_referent > 0, alpha * safe_log(by_referent), -np.inf)
    table = np.empty_like(by_referent)
    for c in range(by_referent.shape[0]):
        for z in range(by_referent.shape[1]):
            table[c, z] = normalize_log(log_weights[c, z])
    return Conditional(sources=(contexts, L0.target), target=utterances, table=table, name="pragmatic_speaker")


def pragmatic_listener(S1: Conditional, prior) -> Conditional:
    """L1(z|u) ∝ S1(u|z) · prior(z)"""
    contexts, referents = S1.sources
    prior = np.asarray(prior, dtype=float)
    # [c, z, u] -> [c, u, z]
    joint = np.transpose(S1.table, (0, 2, 1)) * prior
    table = np.empty_like(joint)
    for c in range(joint.shape[0]):
        for u in range(joint.shape[1]):
            table[c, u] = normalize(joint[c, u])
    return Conditional(sources=(contexts, S1.target), target=referents, table=table, name="pragmatic_listener")


def rsa_as_bps(lex: Lexicon, cfg: RsaConfig) -> BpsSpeaker:
    """
    Embed the RSA pragmatic speaker as a BPS

    The base speaker is uniform over the utterances literally true of each
    referent, and the ToM listener is the literal listener tempered by α, so
    the BPS distribution equals S1 for every α.
    """
    base_table = lex.truth.T / lex.truth.T.sum(axis=1, keepdims=True)
    contexts = Space.single_context()
    base = BaseSpeaker(
        dist=Conditional(
            sources=(contexts, lex.referents),
            target=lex.utterances,
            table=base_table[np.newaxis],
            name="rsa_base_speaker",
        )
    )
    tom = TabularToMListener(dist=literal_listener(lex, cfg.prior), alpha=cfg.alpha)
    return BpsSpeaker(base=base, tom=tom)
