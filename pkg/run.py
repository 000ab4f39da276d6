#!/usr/bin/env python3
"""
gsn-shaper - Quick Start Script

Runs every verification suite, then a short training run on the ring
dataset. Pass extra `--set key=value` arguments to change the run.
"""
import sys
import os

# Add the project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

if __name__ == "__main__":
    from gsn_shaper.config import get_settings
    from gsn_shaper.main import main

    settings = get_settings()

    print("=" * 50)
    print("gsn-shaper")
    print("=" * 50)
    print(f"Output root: {settings.out}")
    print(f"Log level: {settings.log_level}")
    print("=" * 50)

    code = main(["verify", "all"])
    if code == 0:
        code = main(["train", "--set", "steps=200", *sys.argv[1:]])
    sys.exit(code)
