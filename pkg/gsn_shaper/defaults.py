"""Bundled default config and verification matrices for gsn-shaper."""
from pathlib import Path

import numpy as np

DEFAULT_RING_CONFIG = """\
# Ring of eight Gaussians, trained with collaborative shaping.
dataset = "ring"
ring_modes = 8
ring_radius = 2.0
ring_std = 0.1
n_data = 4000
holdout_fraction = 0.1

unroll = 5
batch_size = 64
steps = 2000
seed = 0

lr_gen = 1e-3
lr_guide = 2e-3
lambda_vfe = 1.0
lambda_shape = 1.0
lambda_mm = 0.0

hidden = [32, 32]
guide_hidden = [32, 32]
latent_dim = 2
decoder = "gaussian"

checkpoint_interval = 500
log_interval = 100
"""

# Corollary 2 fixtures: (name, column-stochastic matrix, expected verdict kind, expected witness)
IDENTITY_2 = np.eye(2)
TWO_CYCLE = np.array([[0.0, 1.0], [1.0, 0.0]])
LAZY_TWO_STATE = np.array([[0.9, 0.5], [0.1, 0.5]])

BUNDLED_MATRICES = {
    "identity": (IDENTITY_2, "reducible", "reducible (state 0 cannot reach state 1)"),
    "two-cycle": (TWO_CYCLE, "periodic", "periodic, period 2"),
    "lazy-two-state": (LAZY_TWO_STATE, "ergodic", "ergodic"),
}

LAZY_TWO_STATE_STATIONARY = np.array([5.0 / 6.0, 1.0 / 6.0])


def write_default_config(path: Path) -> Path:
    """Write the bundled ring config unless the file already exists."""
    path = Path(path)
    if not path.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(DEFAULT_RING_CONFIG, encoding="utf-8")
    return path
