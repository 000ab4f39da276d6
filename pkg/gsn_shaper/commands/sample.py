"""
gsn-shaper sample

Runs chains from a trained checkpoint, starting on data rows, and
writes the trajectories as CSV plus a PPM scatter over the dataset.
"""
from __future__ import annotations
import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from gsn_shaper.commands.common import (add_config_args, add_output_args, load_generator, output_root,
                                        resolve_config, sample_chains)
from gsn_shaper.config import get_settings
from gsn_shaper.services.data import build_dataset
from gsn_shaper.services.render import scatter_image, write_ppm
from gsn_shaper.utils.runs import RunRecorder, create_run_dir

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectories.csv"
IMAGE_FILE = "samples.ppm"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("sample", help="Sample chains from a checkpoint")
    parser.add_argument("checkpoint", type=Path, help="Checkpoint file (.gsnc)")
    parser.add_argument("--chains", type=int, default=64, help="Number of chains")
    parser.add_argument("--steps", "-T", type=int, default=50, help="Transitions per chain")
    add_config_args(parser)
    add_output_args(parser)
    parser.set_defaults(handler=run)
    return parser


def trajectory_frame(states: np.ndarray) -> pd.DataFrame:
    """Long format: chain id, t, then one column per coordinate."""
    steps, chains, d = states.shape
    frame = pd.DataFrame(states.transpose(1, 0, 2).reshape(-1, d), columns=[f"x{j}" for j in range(d)])
    frame.insert(0, "t", np.tile(np.arange(steps), chains))
    frame.insert(0, "chain", np.repeat(np.arange(chains), steps))
    return frame


def run(args: argparse.Namespace) -> int:
    if args.chains < 1 or args.steps < 0:
        logger.error("--chains must be >= 1 and --steps >= 0 (got %d, %d)", args.chains, args.steps)
        return 2
    if not args.checkpoint.exists():
        raise FileNotFoundError(args.checkpoint)

    cfg, overrides = resolve_config(args, seed_override=False)
    seed = args.seed if args.seed is not None else 0
    dataset = build_dataset(cfg)
    g, ckpt = load_generator(args.checkpoint, dataset)

    run_dir = create_run_dir(output_root(args), "sample", seed)
    recorder = RunRecorder(run_dir, "sample", seed, {"checkpoint": str(args.checkpoint), "step": ckpt.step,
                                                      "chains": args.chains, "steps": args.steps,
                                                      **cfg.model_dump()}, overrides)

    states = sample_chains(g, dataset, args.chains, args.steps, seed)
    csv_path = run_dir / TRAJECTORY_FILE
    trajectory_frame(states).to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
    recorder.output(csv_path)

    shown = states[1:] if args.steps > 0 else states
    if g.d_x == 2:
        image = scatter_image(shown.reshape(-1, 2), dataset.samples, get_settings().image_size)
        recorder.output(write_ppm(run_dir / IMAGE_FILE, image))
    else:
        logger.info("Skipping scatter image for %d-dimensional samples", g.d_x)

    if args.steps > 0:
        moves = np.linalg.norm(np.diff(states, axis=0), axis=-1)
        logger.info("Median per-step displacement: %.4f", float(np.median(moves)))
    recorder.finish()
    return 0
