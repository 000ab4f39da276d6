"""
Datasets for gsn-shaper

Toy 2D manifolds standing in for draws from the target distribution,
random finite targets for the exact suites, and CSV ingestion.
Generators draw from one counter-based stream per call, keyed on the
seed and a per-generator counter, so results never depend on call order.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple, Union
import logging
import re

import numpy as np
import pandas as pd

from gsn_shaper.exceptions import ConfigError, DataFormatError, ShapeError
from gsn_shaper.services.exact import Dist
from gsn_shaper.utils.rng import make_rng

logger = logging.getLogger(__name__)

# per-generator stream counters
RING_STREAM = 101
CIRCLES_STREAM = 102
SPIRAL_STREAM = 103
DISCRETE_STREAM = 104
SPLIT_STREAM = 105


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n×d sample matrix with cached mean and unbiased covariance."""
    samples: np.ndarray
    name: str = "dataset"
    mean: np.ndarray = field(init=False, repr=False)
    cov: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError("Dataset (n×d matrix required)", x.shape)
        if x.shape[0] < 2:
            raise DataFormatError(f"dataset needs at least 2 rows, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DataFormatError("dataset contains non-finite values")
        x.setflags(write=False)
        mean = x.mean(axis=0)
        centered = x - mean
        cov = centered.T @ centered / (x.shape[0] - 1)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def binary(self) -> bool:
        """Every entry is exactly 0 or 1."""
        return bool(np.all((self.samples == 0.0) | (self.samples == 1.0)))

    def __len__(self) -> int:
        return self.n

    def batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Rows drawn uniformly without replacement (with replacement if size > n)."""
        rows = rng.choice(self.n, size=size, replace=size > self.n)
        return self.samples[rows]

    def split(self, holdout_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
        """Random (train, holdout) partition; both parts keep at least 2 rows."""
        if not 0.0 < holdout_fraction < 1.0:
            raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
        n_hold = int(round(self.n * holdout_fraction))
        n_hold = min(max(n_hold, 2), self.n - 2)
        order = make_rng(seed, SPLIT_STREAM).permutation(self.n)
        return (Dataset(self.samples[order[n_hold:]], f"{self.name}/train"),
                Dataset(self.samples[order[:n_hold]], f"{self.name}/holdout"))


def _check_common(n: int, std: float):
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not std > 0:
        raise ValueError(f"std must be positive, got {std}")


def make_ring_of_gaussians(k: int, radius: float, std: float, n: int, seed: int) -> Dataset:
    """k isotropic Gaussians centred at angles 2*pi*j/k on a circle."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    _check_common(n, std)
    rng = make_rng(seed, RING_STREAM)
    component = rng.integers(0, k, size=n)
    angle = 2.0 * np.pi * component / k
    centres = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return Dataset(centres + std * rng.standard_normal((n, 2)), f"ring{k}")


def make_two_circles(n: int, radii: Sequence[float] = (1.0, 2.0), std: float = 0.05, seed: int = 0) -> Dataset:
    """Uniform angles on one of two concentric circles, chosen with equal probability."""
    _check_common(n, std)
    radii = np.asarray(radii, dtype=np.float64)
    if radii.shape != (2,) or np.any(radii < 0):
        raise ValueError(f"radii must be two non-negative values, got {radii.tolist()}")
    rng = make_rng(seed, CIRCLES_STREAM)
    r = radii[rng.integers(0, 2, size=n)]
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    points = r[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return Dataset(points + std * rng.standard_normal((n, 2)), "two_circles")


def spiral_point(t: np.ndarray, turns: float, radius: float = 2.0) -> np.ndarray:
    """Archimedean spiral r = radius * t, angle = 2*pi*turns*t, for t in [0, 1]."""
    t = np.asarray(t, dtype=np.float64)
    angle = 2.0 * np.pi * turns * t
    return radius * t[:, None] * np.stack([np.cos(angle), np.sin(angle)], axis=1)


def make_spiral(n: int, turns: float = 1.5, std: float = 0.05, seed: int = 0, radius: float = 2.0) -> Dataset:
    _check_common(n, std)
    if turns <= 0:
        raise ValueError(f"turns must be positive, got {turns}")
    rng = make_rng(seed, SPIRAL_STREAM)
    t = rng.uniform(0.0, 1.0, size=n)
    return Dataset(spiral_point(t, turns, radius) + std * rng.standard_normal((n, 2)), "spiral")


def random_discrete_target(m: int, concentration: float, seed: int) -> Dist:
    """Full-support distribution drawn from a symmetric Dirichlet."""
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    if not concentration > 0:
        raise ValueError(f"concentration must be positive, got {concentration}")
    p = make_rng(seed, DISCRETE_STREAM).dirichlet(np.full(m, float(concentration)))
    # keep full support when small concentrations underflow
    return Dist.normalized(np.maximum(p, 1e-300))


# =============================================================================
# CSV I/O
# =============================================================================

_TOKENIZE_LINE = re.compile(r"line (\d+)")


def _cell(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float("nan")


def save_csv(data: Union[Dataset, np.ndarray], path: Path, columns: Sequence[str] = ()):
    """Header row plus one row per sample, 17 significant digits, LF endings."""
    samples = data.samples if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=np.float64))
    names = list(columns) or [f"x{j}" for j in range(samples.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(samples, columns=names).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    logger.debug("Wrote %d rows to %s", samples.shape[0], path)


def load_csv(path: Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise DataFormatError(f"{path}: no header row") from exc
    except pd.errors.ParserError as exc:
        match = _TOKENIZE_LINE.search(str(exc))
        raise DataFormatError(f"{path}: inconsistent column count",
                              line=int(match.group(1)) if match else None) from exc

    values = np.vectorize(_cell, otypes=[np.float64])(frame.to_numpy()) if frame.size else np.empty(frame.shape)
    bad_rows = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
    if bad_rows.size:
        # header is line 1
        raise DataFormatError(f"{path}: non-numeric or non-finite cell", line=int(bad_rows[0]) + 2)
    return Dataset(values, path.stem)


def check_decoder(family: str, dataset: Dataset):
    """Bernoulli reconstruction needs 0/1 data."""
    if family == "bernoulli" and not dataset.binary:
        raise ConfigError(f"decoder 'bernoulli' needs 0/1 data, {dataset.name} is continuous", key="decoder")


def build_dataset(cfg) -> Dataset:
    """Dataset named by a TrainConfig: a bundled generator or a CSV path."""
    if cfg.dataset == "ring":
        dataset = make_ring_of_gaussians(cfg.ring_modes, cfg.ring_radius, cfg.ring_std, cfg.n_data, cfg.seed)
    elif cfg.dataset == "two_circles":
        dataset = make_two_circles(cfg.n_data, seed=cfg.seed)
    elif cfg.dataset == "spiral":
        dataset = make_spiral(cfg.n_data, seed=cfg.seed)
    else:
        dataset = load_csv(Path(cfg.dataset))
    check_decoder(cfg.decoder, dataset)
    return dataset
