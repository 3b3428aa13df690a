from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..exceptions import ValidationError

ROW_TOLERANCE = 1e-9


class SpaceKind(str, Enum):
    UTTERANCE = "utterance"
    INTENTION = "intention"
    CONTEXT = "context"


@dataclass(frozen=True)
class Space:
    """Finite indexed alphabet of utterances, intentions or contexts"""

    kind: SpaceKind
    symbols: Tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        path = self.name or f"{self.kind.value}s"
        if len(self.symbols) == 0:
            raise ValidationError(path, "space must contain at least one symbol")
        seen = set()
        for i, symbol in enumerate(self.symbols):
            if not isinstance(symbol, str) or not symbol:
                raise ValidationError(f"{path}[{i}]", "symbols must be non-empty strings")
            if symbol in seen:
                raise ValidationError(f"{path}[{i}]", f"duplicate symbol {symbol!r}")
            seen.add(symbol)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValidationError(self.name or f"{self.kind.value}s", f"unknown symbol {symbol!r}")

    @classmethod
    def of(cls, kind: SpaceKind, *symbols: str) -> "Space":
        return cls(kind=kind, symbols=tuple(symbols))

    @classmethod
    def single_context(cls) -> "Space":
        return cls(kind=SpaceKind.CONTEXT, symbols=("default",))


@dataclass(frozen=True, eq=False)
class Conditional:
    """
    Row-stochastic probability table

    ``table`` has one axis per conditioning space (in ``sources`` order) and a
    final axis over ``target``. Every slice along the last axis is a
    distribution. The array is frozen after validation.
    """

    sources: Tuple[Space, ...]
    target: Space
    table: np.ndarray
    name: str = "table"

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        table = np.array(self.table, dtype=float)
        expected = tuple(len(s) for s in self.sources) + (len(self.target),)
        if table.shape != expected:
            raise ValidationError(self.name, f"shape {table.shape} does not match spaces {expected}")
        if not np.all(np.isfinite(table)):
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(table))[0])
            raise ValidationError(_path(self.name, bad), "entries must be finite")
        if np.any(table < 0):
            bad = tuple(int(i) for i in np.argwhere(table < 0)[0])
            raise ValidationError(_path(self.name, bad), "entries must be non-negative")
        sums = table.sum(axis=-1)
        off = np.abs(sums - 1.0) > ROW_TOLERANCE
        if np.any(off):
            bad = tuple(int(i) for i in np.argwhere(off)[0])
            raise ValidationError(_path(self.name, bad), f"row sums to {float(sums[bad])!r}, expected 1")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def row(self, *index: int) -> np.ndarray:
        return self.table[tuple(index)]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.table.shape


@dataclass(frozen=True, eq=False)
class CommunicationGame:
    """A speaker must make the real listener infer ``target_intention`` in ``context``"""

    utterances: Space
    intentions: Space
    contexts: Space
    listener: Conditional
    target_intention: int = 0
    context: int = 0

    def __post_init__(self):
        expected = (len(self.contexts), len(self.utterances), len(self.intentions))
        if self.listener.shape != expected:
            raise ValidationError("listener", f"shape {self.listener.shape} does not match spaces {expected}")
        if not 0 <= self.target_intention < len(self.intentions):
            raise ValidationError("target_intention", f"index {self.target_intention} out of range")
        if not 0 <= self.context < len(self.contexts):
            raise ValidationError("context", f"index {self.context} out of range")

    @property
    def listener_column(self) -> np.ndarray:
        """L_real(z*|u,c) for every utterance u"""
        return self.listener.table[self.context, :, self.target_intention]

    def with_target(self, target_intention: int, context: Optional[int] = None) -> "CommunicationGame":
        return CommunicationGame(
            utterances=self.utterances,
            intentions=self.intentions,
            contexts=self.contexts,
            listener=self.listener,
            target_intention=target_intention,
            context=self.context if context is None else context,
        )


def _path(name: str, index: Tuple[int, ...]) -> str:
    return name + "".join(f"[{i}]" for i in index)


def listener_table(
    utterances: Space, intentions: Space, contexts: Space, table, name: str = "listener"
) -> Conditional:
    """Conditional over intentions given (context, utterance)"""
    return Conditional(sources=(contexts, utterances), target=intentions, table=table, name=name)


def speaker_table(
    utterances: Space, intentions: Space, contexts: Space, table, name: str = "base_speaker"
) -> Conditional:
    """Conditional over utterances given (context, intention)"""
    return Conditional(sources=(contexts, intentions), target=utterances, table=table, name=name)
