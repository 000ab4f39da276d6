"""
gsn-shaper export

Datasets (bundled generators or CSV files) export to CSV or to a PPM
scatter; checkpoints export to a PPM grid of chain samples over the
dataset.
"""
from __future__ import annotations
import argparse
import logging
from pathlib import Path

from gsn_shaper.commands.common import (add_config_args, add_output_args, load_generator, output_root,
                                        resolve_config, sample_chains)
from gsn_shaper.config import get_settings
from gsn_shaper.exceptions import ConfigError
from gsn_shaper.services.data import build_dataset, load_csv, save_csv
from gsn_shaper.services.render import scatter_image, write_ppm
from gsn_shaper.utils.runs import RunRecorder, create_run_dir

logger = logging.getLogger(__name__)

FORMATS = ("csv", "ppm")
GENERATED = ("ring", "two_circles", "spiral")
GRID_CHAINS = 64
GRID_STEPS = 50


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("export", help="Export a dataset or checkpoint")
    parser.add_argument("source", help="ring, two_circles, spiral, a CSV file or a .gsnc checkpoint")
    parser.add_argument("--format", dest="fmt", choices=FORMATS, default="csv", help="Output format")
    add_config_args(parser)
    add_output_args(parser)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    is_generated = args.source in GENERATED
    source = Path(args.source)
    if not is_generated and not source.exists():
        raise FileNotFoundError(source)

    if source.suffix == ".gsnc" and args.fmt != "ppm":
        raise ConfigError("checkpoints export to ppm only", key="format")

    seed = args.seed if args.seed is not None else 0
    cfg, overrides = resolve_config(args, seed_override=False)
    if is_generated:
        cfg = cfg.model_copy(update={"dataset": args.source})

    run_dir = create_run_dir(output_root(args), "export", seed)
    recorder = RunRecorder(run_dir, "export", seed, {"source": args.source, "format": args.fmt}, overrides)
    size = get_settings().image_size

    if source.suffix == ".gsnc":
        dataset = build_dataset(cfg)
        g, _ = load_generator(source, dataset)
        states = sample_chains(g, dataset, GRID_CHAINS, GRID_STEPS, seed)
        out = write_ppm(run_dir / f"{source.stem}.ppm", scatter_image(states[1:].reshape(-1, g.d_x), dataset.samples, size))
    else:
        dataset = build_dataset(cfg) if is_generated else load_csv(source)
        if args.fmt == "csv":
            out = run_dir / f"{dataset.name}.csv"
            save_csv(dataset, out)
        else:
            out = write_ppm(run_dir / f"{dataset.name}.ppm", scatter_image(dataset.samples, None, size))

    recorder.output(out)
    recorder.finish()
    logger.info("Exported %s to %s", args.source, out)
    return 0
