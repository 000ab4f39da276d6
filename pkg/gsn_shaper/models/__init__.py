"""Configuration and report models."""
from gsn_shaper.models.config import TrainConfig
from gsn_shaper.models.report import EvalReport, RunManifest, StepRecord, VerifyRow

__all__ = ["TrainConfig", "EvalReport", "RunManifest", "StepRecord", "VerifyRow"]
