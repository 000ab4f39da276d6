"""
Report models for gsn-shaper

Records written by training, evaluation, verification and the run
manifest.
"""
from __future__ import annotations
from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class StepRecord(BaseModel):
    """One completed training iteration."""

    step: int = Field(..., description="Zero-based iteration index")
    loss_f: float = Field(..., description="Guide logistic loss")
    loss_g: float = Field(..., description="One-sided generator loss on chain states")
    vfe: List[float] = Field(default_factory=list, description="Free energy per unrolled step")
    moment_match: float = Field(0.0, description="Moment-matching term")
    total: float = Field(..., description="Weighted generator objective")
    guide_data: float = Field(..., description="Mean guide score on the data batch")
    guide_chain: float = Field(..., description="Mean guide score on chain states")
    aborted: bool = Field(False, description="Step rolled back after a non-finite loss")

    def flat(self) -> Dict[str, Any]:
        row = self.model_dump(exclude={"vfe"})
        for t, value in enumerate(self.vfe, start=1):
            row[f"vfe_{t}"] = value
        return row


class EvalReport(BaseModel):
    """Sample statistics of chains started on the data."""

    n_chains: int
    steps: int
    sample_mean: List[float]
    sample_cov: List[List[float]]
    data_mean: List[float]
    data_cov: List[List[float]]
    mean_error: float = Field(..., description="Euclidean distance between sample and data means")
    cov_rel_error: float = Field(..., description="Relative Frobenius error of the sample covariance")
    guide_on_samples: float
    guide_on_data: float
    guide_abs_on_data: float = Field(..., description="Mean |f_psi| on data, near 0 when shaping succeeds")
    displacement_median: float = Field(..., description="Median per-step move of a chain")
    displacement_mean: float


class VerifyRow(BaseModel):
    """One check of a verification suite."""

    suite: str
    case: str
    check: str
    value: float = Field(..., description="Measured residual or quantity")
    tolerance: Optional[float] = Field(None, description="Pass threshold, when numeric")
    detail: str = Field("", description="Verdict text or expected value")
    passed: bool


class RunManifest(BaseModel):
    """Written before any long computation and rewritten when the run ends."""

    command: str
    version: str
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    overrides: List[str] = Field(default_factory=list)
    started_at: datetime
    finished_at: Optional[datetime] = None
    status: str = "running"
    outputs: List[str] = Field(default_factory=list)
