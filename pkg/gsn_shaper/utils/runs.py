"""
Run directories and manifests for gsn-shaper

Every command writes below its own run directory under the output
root. The manifest is written before the command starts computing and
rewritten when it ends.
"""
from __future__ import annotations
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import yaml

from gsn_shaper import __version__
from gsn_shaper.models.report import RunManifest

MANIFEST_FILE = "manifest.yaml"


def create_run_dir(root: Path, command: str, seed: int) -> Path:
    """Fresh directory `<command>-seed<seed>-<UTC timestamp>[-n]` under root."""
    root = Path(root)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    base = f"{command}-seed{seed}-{stamp}"
    candidate, n = root / base, 0
    while candidate.exists():
        n += 1
        candidate = root / f"{base}-{n}"
    candidate.mkdir(parents=True)
    return candidate


class RunRecorder:
    """Owns a run directory and keeps its manifest current."""

    def __init__(self, run_dir: Path, command: str, seed: int, config: Optional[Dict[str, Any]] = None,
                 overrides: Sequence[str] = ()):
        self.run_dir = Path(run_dir)
        self.manifest = RunManifest(
            command=command, version=__version__, seed=seed, config=config or {},
            overrides=list(overrides), started_at=datetime.now(timezone.utc),
        )
        self.write()

    @property
    def path(self) -> Path:
        return self.run_dir / MANIFEST_FILE

    def output(self, path: Path) -> Path:
        """Register an artifact written by the run."""
        rel = str(Path(path).relative_to(self.run_dir))
        if rel not in self.manifest.outputs:
            self.manifest.outputs.append(rel)
        return path

    def finish(self, status: str = "completed"):
        self.manifest.status = status
        self.manifest.finished_at = datetime.now(timezone.utc)
        self.write()

    def write(self):
        with open(self.path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.manifest.model_dump(mode="json"), f, sort_keys=False)


def read_manifest(path: Path) -> RunManifest:
    with open(path, encoding="utf-8") as f:
        return RunManifest(**(yaml.safe_load(f) or {}))
