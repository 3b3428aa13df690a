from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class OptimizeReport(BaseModel):
    steps: int
    final_objective: float
    final_grad_norm: float
    converged: bool
    tolerance: float
    max_steps: int

    @model_validator(mode="after")
    def check_consistency(self):
        if self.steps > self.max_steps:
            raise ValueError(f"steps {self.steps} exceed max_steps {self.max_steps}")
        if self.converged and self.final_grad_norm > self.tolerance:
            raise ValueError("converged report with gradient norm above tolerance")
        return self


class Verdict(str, Enum):
    SEARCH_LIMITED = "search-limited"
    PRAGMATICS_LIMITED = "pragmatics-limited"
    INFERENCE_LIMITED = "inference-limited"
    ADEQUATE = "adequate"


class DiagnosisReport(BaseModel):
    """Capability diagnosis of one speaker on one game"""

    model_score: float = Field(ge=0.0, le=1.0)
    oracle_pragmatic_score: float = Field(ge=0.0, le=1.0)
    oracle_search_score: float = Field(ge=0.0, le=1.0)
    oracle_inference_score: float = Field(ge=0.0, le=1.0)
    pragmatic_gap: float
    search_gap: float
    inference_gap: float
    pragmatic_gap_stderr: float
    model_score_stderr: float
    model_success_rate: float = Field(ge=0.0, le=1.0)
    verdict: Verdict
    trials: int
    n: int
    seed: int
    epsilon: float
    metric: str = "expected_listener_probability"
    answering: str = "best-of-n"
    # search and inference oracles are built by analogy with the pragmatic one
    extrapolated_oracles: List[str] = ["search", "inference"]

    @model_validator(mode="after")
    def check_gaps(self):
        expected = {
            "pragmatic_gap": self.oracle_pragmatic_score - self.model_score,
            "search_gap": self.oracle_search_score - self.model_score,
            "inference_gap": self.oracle_inference_score - self.model_score,
        }
        for name, value in expected.items():
            if abs(getattr(self, name) - value) > 1e-12:
                raise ValueError(f"{name} does not match the scores it is derived from")
        return self


class CurvePoint(BaseModel):
    budget: int = Field(ge=0)
    kl: float = Field(ge=0.0)


class LearningCurve(BaseModel):
    learner: str
    seed: int
    points: List[CurvePoint]

    @model_validator(mode="after")
    def check_budgets(self):
        budgets = [p.budget for p in self.points]
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise ValueError("curve budgets must be strictly increasing")
        return self

    @property
    def final_kl(self) -> float:
        return self.points[-1].kl


class SummaryRow(BaseModel):
    learner: str
    budget: int
    median_kl: float


class ComparisonTable(BaseModel):
    curves: List[LearningCurve]
    summary: List[SummaryRow]


class ExperimentConfig(BaseModel):
    """Parameter bag of one CLI run; ranges match the documented knobs"""

    subcommand: str
    spec: Optional[str] = None
    seed: int = 0
    out: Optional[str] = None
    format: Literal["csv", "json"] = "json"
    # None keeps the beta stored with the reward
    beta: Optional[float] = Field(default=None, gt=0)
    lr: float = Field(default=0.5, gt=0, lt=2)
    max_steps: int = Field(default=50_000, ge=0)
    tol: float = Field(default=1e-8, gt=0)
    n_candidates: int = Field(default=8, ge=1)
    answering: Literal["exact", "best-of-n"] = "exact"
    pairs: int = Field(default=10_000, ge=0)
    trials: int = Field(default=2_000, ge=0)
    epsilon: float = Field(default=0.02, ge=0)
    reward_reg: float = Field(default=1e-4, gt=0)
    smoothing: float = Field(default=1e-3, gt=0)
    feedback_lr: float = Field(default=0.1, gt=0)
    prior_share: float = Field(default=0.5, gt=0, lt=1)
    budgets: List[int] = [100, 1_000, 10_000]
    seeds: List[int] = list(range(10))
    target: Optional[str] = None
    context: Optional[str] = None

    @model_validator(mode="after")
    def check_lists(self):
        if not self.budgets or any(b < 0 for b in self.budgets):
            raise ValueError("budgets must be a non-empty list of non-negative counts")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        return self


class RunResult(BaseModel):
    config: ExperimentConfig
    header: List[str]
    records: List[Dict[str, Any]]
    summary: Dict[str, Any]
    wall_clock: float
    seed: int
    version: str
