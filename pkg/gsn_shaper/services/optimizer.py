"""
Adaptive-moment optimizer for gsn-shaper
"""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from gsn_shaper.core.nets import ParamStore
from gsn_shaper.exceptions import NumericError, ShapeError


@dataclass
class AdamState:
    """Per-parameter first/second moments and the update counter."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def copy(self) -> AdamState:
        return AdamState({k: a.copy() for k, a in self.m.items()},
                         {k: a.copy() for k, a in self.v.items()}, self.step)


class Adam:
    """Adam over every parameter of one store."""

    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, state: AdamState = None):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        if state is None:
            state = AdamState(
                {name: np.zeros_like(value) for name, value in store.items()},
                {name: np.zeros_like(value) for name, value in store.items()},
            )
        for name, value in store.items():
            if state.m[name].shape != value.shape or state.v[name].shape != value.shape:
                raise ShapeError(f"optimizer state {name}", value.shape, state.m[name].shape)
        self.state = state

    def update(self, grads: Mapping[str, np.ndarray]):
        """One bias-corrected step. Parameters without a gradient entry are untouched."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {name}")
        s = self.state
        s.step += 1
        c1 = 1.0 - self.beta1 ** s.step
        c2 = 1.0 - self.beta2 ** s.step
        for name in sorted(grads):
            g = grads[name]
            s.m[name] = self.beta1 * s.m[name] + (1.0 - self.beta1) * g
            s.v[name] = self.beta2 * s.v[name] + (1.0 - self.beta2) * g * g
            step = self.lr * (s.m[name] / c1) / (np.sqrt(s.v[name] / c2) + self.eps)
            self.store.set(name, self.store[name] - step)
