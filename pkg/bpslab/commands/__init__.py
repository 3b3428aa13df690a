from . import evaluation, games, inference
from .base import COMMANDS, Command, CommandOutput

__all__ = ["COMMANDS", "Command", "CommandOutput", "evaluation", "games", "inference"]
