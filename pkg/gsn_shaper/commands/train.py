"""
gsn-shaper train

Runs the alternating guide/generator loop and writes the history CSV,
checkpoints, an evaluation report and the manifest.
"""
from __future__ import annotations
import argparse
import logging
from pathlib import Path

import yaml

from gsn_shaper.commands.common import add_config_args, add_output_args, output_root, resolve_config
from gsn_shaper.services import train as training
from gsn_shaper.services.data import build_dataset
from gsn_shaper.utils.runs import RunRecorder, create_run_dir

logger = logging.getLogger(__name__)

EVAL_FILE = "eval.yaml"
EVAL_CHAINS = 64
EVAL_STEPS = 50


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("train", help="Train a Simple GSN with collaborative shaping")
    add_config_args(parser)
    add_output_args(parser)
    parser.add_argument("--resume", type=Path, default=None, help="Continue from a checkpoint file")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    cfg, overrides = resolve_config(args)
    dataset = build_dataset(cfg)
    train_set, holdout = dataset.split(cfg.holdout_fraction, cfg.seed)

    run_dir = create_run_dir(output_root(args), "train", cfg.seed)
    recorder = RunRecorder(run_dir, "train", cfg.seed, cfg.model_dump(), overrides)
    logger.info("Training on %s (%d rows) into %s", dataset.name, train_set.n, run_dir)

    try:
        if args.resume is not None:
            history, state = training.resume(args.resume, cfg, train_set, run_dir,
                                              history_csv=args.resume.parent.parent / training.HISTORY_FILE)
        else:
            history, state = training.train_loop(cfg, train_set, run_dir)
    except BaseException:
        recorder.finish("failed")
        raise

    recorder.output(run_dir / training.HISTORY_FILE)
    for path in sorted((run_dir / training.CHECKPOINT_DIR).glob("*.gsnc")):
        recorder.output(path)

    if state.step > 0:
        report = training.evaluate(state.generator, state.guide, train_set, EVAL_CHAINS, EVAL_STEPS,
                                   cfg.seed, holdout=holdout)
        with open(run_dir / EVAL_FILE, "w", encoding="utf-8") as f:
            yaml.safe_dump(report.model_dump(mode="json"), f, sort_keys=False)
        recorder.output(run_dir / EVAL_FILE)
        logger.info("Held-out mean |f|: %.3f, covariance error: %.1f%%",
                    report.guide_abs_on_data, 100 * report.cov_rel_error)

    logger.info("Completed %d steps", len(history))
    recorder.finish()
    return 0
