"""Arguments and helpers shared by the gsn-shaper commands."""
from __future__ import annotations
import argparse
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from gsn_shaper.config import get_settings, load_train_config
from gsn_shaper.core.autodiff import Tape
from gsn_shaper.defaults import DEFAULT_RING_CONFIG
from gsn_shaper.exceptions import CheckpointError
from gsn_shaper.models.config import TrainConfig
from gsn_shaper.services.checkpoint import Checkpoint, load_checkpoint
from gsn_shaper.services.data import Dataset
from gsn_shaper.services.sgsn import SimpleGsn, unroll_chain
from gsn_shaper.utils.rng import make_rng


def add_output_args(parser: argparse.ArgumentParser):
    parser.add_argument("--out", type=Path, default=None,
                        help="Output root (default: $GSN_SHAPER_OUT or ./runs)")
    parser.add_argument("--seed", type=int, default=None, help="Seed of every random stream")


def add_config_args(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None, help="TOML experiment config (default: bundled ring)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config key; may repeat; wins over the file")


def output_root(args: argparse.Namespace) -> Path:
    return args.out if args.out is not None else get_settings().out


def resolve_config(args: argparse.Namespace, seed_override: bool = True) -> Tuple[TrainConfig, List[str]]:
    """Config file (or bundled default), then --set overrides, then --seed when it seeds the config."""
    overrides = list(args.overrides)
    if seed_override and getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if args.config is None:
        return load_train_config(text=DEFAULT_RING_CONFIG, overrides=overrides), overrides
    return load_train_config(args.config, overrides), overrides


def load_generator(path: Path, dataset: Optional[Dataset] = None) -> Tuple[SimpleGsn, Checkpoint]:
    ckpt = load_checkpoint(path)
    try:
        g = SimpleGsn.from_store(ckpt.generator, ckpt.family)
    except ValueError as exc:
        raise CheckpointError(str(exc), record="gen") from exc
    if dataset is not None and dataset.dim != g.d_x:
        raise CheckpointError(f"model expects {g.d_x} columns, dataset has {dataset.dim}", record="gen/enc.w0")
    return g, ckpt


def sample_chains(g: SimpleGsn, dataset: Dataset, n_chains: int, steps: int, seed: int) -> np.ndarray:
    """States of n_chains chains started on data rows, shape (steps + 1, n_chains, d_x)."""
    rng = make_rng(seed, 0)
    starts = dataset.batch(rng, n_chains)
    if steps == 0:
        return starts[None]
    return unroll_chain(g, starts, steps, rng, g.bind(Tape(), frozen=True)).state_values()
