"""
Training configuration for gsn-shaper
"""
from __future__ import annotations
from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator


class TrainConfig(BaseModel):
    """Hyperparameters of one training run. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Chain and batching
    unroll: int = Field(5, ge=1, description="Unroll length T of the generative chain")
    batch_size: int = Field(64, ge=2, description="Data rows per step; chain batches match it")
    steps: int = Field(2000, ge=0, description="Total alternating iterations")
    seed: int = Field(0, ge=0, description="Root seed of every random stream")

    # Optimizer
    lr_gen: float = Field(1e-3, gt=0, description="Generator learning rate")
    lr_guide: float = Field(2e-3, gt=0, description="Guide learning rate")
    beta1: float = Field(0.9, ge=0, lt=1, description="First-moment decay")
    beta2: float = Field(0.999, ge=0, lt=1, description="Second-moment decay")
    eps: float = Field(1e-8, gt=0, description="Denominator offset")

    # Loss weights
    lambda_vfe: float = Field(1.0, ge=0, description="Weight of the per-step free energy")
    lambda_shape: float = Field(1.0, ge=0, description="Weight of the one-sided guide loss")
    lambda_mm: float = Field(0.0, ge=0, description="Weight of the moment-matching term")
    n_samples: int = Field(1, ge=1, description="Reparameterized draws per free-energy term")

    # Networks
    hidden: List[int] = Field(default_factory=lambda: [32, 32], description="Encoder/decoder hidden widths")
    guide_hidden: List[int] = Field(default_factory=lambda: [32, 32], description="Guide hidden widths")
    latent_dim: int = Field(2, ge=1, description="Latent dimension k_z")
    decoder: Literal["gaussian", "bernoulli"] = Field("gaussian", description="Reconstruction family")
    guide_steps: int = Field(1, ge=1, description="Guide updates per generator update")

    # Dataset
    dataset: str = Field("ring", description="ring, two_circles, spiral or a CSV path")
    ring_modes: int = Field(8, ge=1)
    ring_radius: float = Field(2.0, ge=0)
    ring_std: float = Field(0.1, gt=0)
    n_data: int = Field(4000, ge=2)
    holdout_fraction: float = Field(0.1, gt=0, lt=1)

    # Bookkeeping
    checkpoint_interval: int = Field(500, ge=1, description="Steps between checkpoints")
    log_interval: int = Field(100, ge=1, description="Steps between progress log lines")

    @field_validator("hidden", "guide_hidden")
    @classmethod
    def positive_widths(cls, widths: List[int]) -> List[int]:
        if any(w <= 0 for w in widths):
            raise ValueError("hidden widths must be positive")
        return widths
