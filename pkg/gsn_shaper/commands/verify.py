"""
gsn-shaper verify

Runs one verification suite (or all of them), writes a CSV report of
every check and exits 1 if any check fails.
"""
from __future__ import annotations
import argparse
import logging

from rich.console import Console
from rich.table import Table

from gsn_shaper.commands.common import add_output_args, output_root
from gsn_shaper.config import get_settings
from gsn_shaper.services.verify import SUITES, run_suite, write_report
from gsn_shaper.utils.runs import RunRecorder, create_run_dir

logger = logging.getLogger(__name__)


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("verify", help="Run a theorem-verification suite")
    parser.add_argument("suite", choices=[*SUITES, "all"], help="Suite to run")
    add_output_args(parser)
    parser.set_defaults(handler=run)
    return parser


def _table(suite: str, rows) -> Table:
    table = Table(title=f"verify {suite}", show_header=True, header_style="bold magenta")
    for column in ("case", "check", "value", "tolerance", "detail", "result"):
        table.add_column(column)
    for r in rows:
        table.add_row(r.case, r.check, f"{r.value:.3e}",
                      "" if r.tolerance is None else f"{r.tolerance:.0e}", r.detail,
                      "[green]pass[/green]" if r.passed else "[bold red]FAIL[/bold red]")
    return table


def run(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    run_dir = create_run_dir(output_root(args), f"verify-{args.suite}", seed)
    recorder = RunRecorder(run_dir, "verify", seed, {"suites": suites})
    console = Console()
    scale = get_settings().verify_tolerance_scale

    failed = 0
    for suite in suites:
        rows = run_suite(suite, seed, scale)
        recorder.output(write_report(rows, run_dir / f"verify_{suite}.csv"))
        console.print(_table(suite, rows))
        failed += sum(not r.passed for r in rows)

    if failed:
        console.print(f"\n[bold red]✗ {failed} check(s) failed[/bold red]")
        recorder.finish("failed")
        return 1
    console.print("\n[bold green]✓ All checks passed[/bold green]")
    recorder.finish()
    return 0
