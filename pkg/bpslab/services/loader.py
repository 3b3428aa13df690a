"""Reading and writing spec files.

A spec file is a JSON object validated by :class:`bpslab.models.schemas.SpecFile`
and turned into the domain objects every command works with. The first
violation is reported with its location, e.g. ``listener[0][1]``.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pydantic
import structlog

from ..exceptions import IoError, ParseError, SupportViolation, ValidationError
from ..models.game import CommunicationGame, Space, SpaceKind, listener_table, speaker_table
from ..models.schemas import FeedbackTask, SpecFile
from ..utils.files import atomic_write_text, render_json
from .rsa import Lexicon, RsaConfig
from .speakers import BaseSpeaker, RewardTable, TabularToMListener, strictly_positive

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class SpecBundle:
    """Everything a spec file defines; absent sections are None"""

    utterances: Optional[Space] = None
    intentions: Optional[Space] = None
    contexts: Optional[Space] = None
    target_intention: int = 0
    context: int = 0
    game: Optional[CommunicationGame] = None
    base: Optional[BaseSpeaker] = None
    tom: Optional[TabularToMListener] = None
    reward: Optional[RewardTable] = None
    lexicon: Optional[Lexicon] = None
    rsa: Optional[RsaConfig] = None
    feedback_task: Optional[FeedbackTask] = None
    source: Optional[str] = None

    def require(self, section: str, command: str) -> Any:
        value = getattr(self, section)
        if value is None:
            raise ValidationError(section, f"the {command} command needs a spec file with '{section}'")
        return value


def load_spec(path: Union[str, Path]) -> SpecBundle:
    """
    Read and validate a spec file

    Raises:
        IoError: if the file cannot be read
        ParseError: if it is not JSON
        ValidationError: on the first invariant violation, with its path
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error("spec file unreadable", path=str(path), error=str(e))
        raise IoError(f"Cannot read spec file {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}")
    bundle = parse_spec(data, source=str(path))
    logger.debug("spec loaded", path=str(path), sections=_sections(bundle))
    return bundle


def parse_spec(data: Any, source: Optional[str] = None) -> SpecBundle:
    """Validate an already decoded spec object"""
    if not isinstance(data, dict):
        raise ValidationError("$", "a spec must be a JSON object")
    try:
        spec = SpecFile.model_validate(data)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        raise ValidationError(_location(first["loc"]), first["msg"])
    return _build(spec, source)


def _location(loc: Sequence[Union[str, int]]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "$"


def _array(values: Any, name: str) -> np.ndarray:
    try:
        return np.array(values, dtype=float)
    except ValueError:
        raise ValidationError(name, "table rows have different lengths")


def _resolve(value: Union[int, str], space: Optional[Space], name: str) -> int:
    if isinstance(value, str):
        if space is None:
            raise ValidationError(name, "symbolic index needs the matching space")
        try:
            return space.index(value)
        except ValidationError as e:
            raise ValidationError(name, e.reason)
    if space is not None and not 0 <= value < len(space):
        raise ValidationError(name, f"index {value} out of range")
    return value


def _build(spec: SpecFile, source: Optional[str]) -> SpecBundle:
    utterances = intentions = None
    if spec.utterances is not None:
        utterances = Space(kind=SpaceKind.UTTERANCE, symbols=tuple(spec.utterances), name="utterances")
    if spec.intentions is not None:
        intentions = Space(kind=SpaceKind.INTENTION, symbols=tuple(spec.intentions), name="intentions")
    contexts = (
        Space(kind=SpaceKind.CONTEXT, symbols=tuple(spec.contexts), name="contexts")
        if spec.contexts is not None
        else Space.single_context()
    )
    target = _resolve(spec.target_intention, intentions, "target_intention")
    context = _resolve(spec.context, contexts, "context")

    game = None
    if spec.listener is not None:
        listener = listener_table(utterances, intentions, contexts, _array(spec.listener, "listener"))
        game = CommunicationGame(
            utterances=utterances,
            intentions=intentions,
            contexts=contexts,
            listener=listener,
            target_intention=target,
            context=context,
        )

    base = None
    if spec.base_speaker is not None:
        base = BaseSpeaker(
            dist=speaker_table(utterances, intentions, contexts, _array(spec.base_speaker, "base_speaker"))
        )

    tom = None
    if spec.tom_listener is not None:
        tom = TabularToMListener(
            dist=listener_table(
                utterances, intentions, contexts, _array(spec.tom_listener, "tom_listener"), name="tom_listener"
            )
        )

    reward = None
    if spec.reward is not None:
        values = _array(spec.reward, "reward")
        expected = _reward_shape(values.ndim, utterances, intentions, contexts)
        if values.shape != expected:
            raise ValidationError("reward", f"shape {values.shape} does not match spaces {expected}")
        reward = RewardTable(values=values, beta=spec.beta)

    lexicon = rsa = None
    if spec.lexicon is not None:
        if not spec.lexicon:
            raise ValidationError("lexicon", "lexicon must contain at least one utterance")
        lexicon = Lexicon.from_mapping(spec.lexicon, spec.referents)
        if spec.prior is None:
            rsa = RsaConfig.uniform(len(lexicon.referents), alpha=spec.alpha)
        else:
            rsa = RsaConfig(alpha=spec.alpha, prior=np.array(spec.prior, dtype=float))
            if rsa.prior.shape != (len(lexicon.referents),):
                raise ValidationError("prior", f"expected {len(lexicon.referents)} entries, got {rsa.prior.shape}")

    return SpecBundle(
        utterances=utterances,
        intentions=intentions,
        contexts=contexts,
        target_intention=target,
        context=context,
        game=game,
        base=base,
        tom=tom,
        reward=reward,
        lexicon=lexicon,
        rsa=rsa,
        feedback_task=spec.feedback_task,
        source=source,
    )


def _reward_shape(
    ndim: int, utterances: Space, intentions: Optional[Space], contexts: Space
) -> Tuple[int, ...]:
    if ndim == 1:
        return (len(utterances),)
    if ndim == 2:
        return (len(contexts), len(utterances))
    if intentions is None:
        raise ValidationError("reward", "a per-intention reward needs 'intentions'")
    return (len(contexts), len(intentions), len(utterances))


def _sections(bundle: SpecBundle) -> list:
    names = ("game", "base", "tom", "reward", "lexicon", "feedback_task")
    return [name for name in names if getattr(bundle, name) is not None]


def uniform_base(bundle: SpecBundle) -> BaseSpeaker:
    """Uniform speaker over the spec file's utterances for every (context, intention)"""
    utterances = bundle.require("utterances", "this")
    intentions = bundle.intentions or Space(kind=SpaceKind.INTENTION, symbols=("target",), name="intentions")
    shape = (len(bundle.contexts), len(intentions), len(utterances))
    table = np.full(shape, 1.0 / len(utterances))
    return BaseSpeaker(dist=speaker_table(utterances, intentions, bundle.contexts, table))


def reference_speaker(bundle: SpecBundle) -> BaseSpeaker:
    """
    The S_0 used by the RLHF commands

    Uses ``base_speaker`` when present, otherwise the uniform speaker.

    Raises:
        SupportViolation: naming the first row with a zero entry
    """
    if bundle.base is None:
        return uniform_base(bundle)
    if strictly_positive(bundle.base):
        return bundle.base
    c, z, u = (int(i) for i in np.argwhere(bundle.base.dist.table <= 0)[0])
    raise SupportViolation(
        f"base_speaker[{c}][{z}][{u}]: the reference speaker must be strictly positive for RLHF "
        "(a softmax policy has full support, so the KL term would be infinite)"
    )


def dump_spec(bundle: SpecBundle) -> Dict[str, Any]:
    """Serialize a bundle back into the spec-file schema"""
    data: Dict[str, Any] = {}
    if bundle.utterances is not None:
        data["utterances"] = list(bundle.utterances.symbols)
    if bundle.intentions is not None:
        data["intentions"] = list(bundle.intentions.symbols)
    if bundle.contexts is not None:
        data["contexts"] = list(bundle.contexts.symbols)
    data["target_intention"] = bundle.target_intention
    data["context"] = bundle.context
    if bundle.game is not None:
        data["listener"] = bundle.game.listener.table.tolist()
    if bundle.base is not None:
        data["base_speaker"] = bundle.base.dist.table.tolist()
    if bundle.tom is not None:
        data["tom_listener"] = bundle.tom.dist.table.tolist()
    if bundle.reward is not None:
        data["reward"] = bundle.reward.values.tolist()
        data["beta"] = bundle.reward.beta
    if bundle.lexicon is not None:
        data["lexicon"] = bundle.lexicon.to_mapping()
        data["referents"] = list(bundle.lexicon.referents.symbols)
        data["prior"] = bundle.rsa.prior.tolist()
        data["alpha"] = bundle.rsa.alpha
    if bundle.feedback_task is not None:
        data["feedback_task"] = bundle.feedback_task.model_dump()
    return data


def save_spec(bundle: SpecBundle, path: Union[str, Path]) -> None:
    atomic_write_text(Path(path), render_json(dump_spec(bundle)))
    logger.info("spec written", path=str(path))
