from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Table3 = List[List[List[float]]]
RewardValues = Union[List[float], List[List[float]], Table3]


class FeedbackTask(BaseModel):
    """Recipe for a compositional structured-feedback target"""

    model_config = ConfigDict(extra="forbid")

    # latent grid a×b, mirrored by an utterance grid of the same size
    factor_sizes: List[int] = [4, 4]
    concentration: float = Field(default=0.3, gt=0)
    noise: float = Field(default=0.05, ge=0, le=1)
    target_seed: int = 0

    @field_validator("factor_sizes")
    @classmethod
    def check_factor_sizes(cls, v):
        if len(v) != 2 or any(size < 1 for size in v):
            raise ValueError("factor_sizes must be two positive integers")
        return v


class SpecFile(BaseModel):
    """
    Schema of a spec file

    Tables are nested lists: ``listener`` and ``tom_listener`` are indexed
    [context][utterance][intention], ``base_speaker`` [context][intention][utterance].
    """

    model_config = ConfigDict(extra="forbid")

    utterances: Optional[List[str]] = None
    intentions: Optional[List[str]] = None
    contexts: Optional[List[str]] = None
    listener: Optional[Table3] = None
    target_intention: Union[int, str] = 0
    context: Union[int, str] = 0

    base_speaker: Optional[Table3] = None
    tom_listener: Optional[Table3] = None
    reward: Optional[RewardValues] = None
    beta: float = Field(default=1.0, gt=0)

    lexicon: Optional[Dict[str, List[str]]] = None
    referents: Optional[List[str]] = None
    prior: Optional[List[float]] = None
    alpha: float = Field(default=1.0, ge=0)

    feedback_task: Optional[FeedbackTask] = None

    @model_validator(mode="after")
    def check_spaces(self):
        needs_spaces = any(t is not None for t in (self.listener, self.base_speaker, self.tom_listener))
        if needs_spaces and (self.utterances is None or self.intentions is None):
            raise ValueError("tables need 'utterances' and 'intentions'")
        if self.reward is not None and self.utterances is None:
            raise ValueError("a reward needs 'utterances'")
        return self
