from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..exceptions import ValidationError
from ..models.game import CommunicationGame, Space
from ..models.reports import ExperimentConfig
from ..services.loader import SpecBundle, uniform_base
from ..services.speakers import BaseSpeaker, RewardTable, ToMListener, TabularToMListener, tom_from_reward


@dataclass
class CommandOutput:
    header: List[str]
    records: List[Dict[str, Any]]
    summary: Dict[str, Any]


Handler = Callable[[ExperimentConfig, Optional[SpecBundle]], CommandOutput]


@dataclass(frozen=True)
class Command:
    name: str
    handler: Handler
    help: str
    needs_spec: bool = True


COMMANDS: Dict[str, Command] = {}


def command(name: str, help: str, needs_spec: bool = True) -> Callable[[Handler], Handler]:
    """Register a subcommand handler"""

    def register(handler: Handler) -> Handler:
        COMMANDS[name] = Command(name=name, handler=handler, help=help, needs_spec=needs_spec)
        return handler

    return register


def indices(config: ExperimentConfig, bundle: SpecBundle) -> Tuple[int, int]:
    """Target intention and context, with CLI overrides by symbol"""
    z, c = bundle.target_intention, bundle.context
    if config.target is not None:
        z = bundle.require("intentions", config.subcommand).index(config.target)
    if config.context is not None:
        c = bundle.contexts.index(config.context)
    return z, c


def game(config: ExperimentConfig, bundle: SpecBundle) -> CommunicationGame:
    z, c = indices(config, bundle)
    return bundle.require("game", config.subcommand).with_target(z, c)


def reward(config: ExperimentConfig, bundle: SpecBundle) -> RewardTable:
    table = bundle.require("reward", config.subcommand)
    return table if config.beta is None else table.with_beta(config.beta)


def base_speaker(bundle: SpecBundle) -> BaseSpeaker:
    """The spec file's base speaker, or the uniform one"""
    return bundle.base if bundle.base is not None else uniform_base(bundle)


def tom_listener(config: ExperimentConfig, bundle: SpecBundle) -> ToMListener:
    """Explicit ToM table, else the reward's listener, else the real listener"""
    if bundle.tom is not None:
        return bundle.tom
    if bundle.reward is not None:
        return tom_from_reward(reward(config, bundle))
    if bundle.game is not None:
        return TabularToMListener(dist=bundle.game.listener)
    raise ValidationError(
        "tom_listener", f"the {config.subcommand} command needs 'tom_listener', 'reward' or 'listener'"
    )


def symbol(space: Optional[Space], index: int) -> str:
    return space.symbols[index] if space is not None else str(index)
