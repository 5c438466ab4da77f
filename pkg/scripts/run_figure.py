#!/usr/bin/env python3
"""Run the CLI command behind one (or every) figure config in configs/figures."""
import argparse
import sys
from pathlib import Path

from fraclap.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
FIGURES = {
    "periodicplots": "green",
    "neumannplots": "green",
    "mfpt_vs_second_trap_location": "gmfpt",
    "mfpt_vs_trap_location": "gmfpt",
    "split_prob_vs_alpha": "split",
    "splitting": "split",
}


def run(name: str, extra: list[str]) -> int:
    config = ROOT / "configs" / "figures" / f"{name}.json"
    return cli_main([FIGURES[name], "--config", str(config), *extra])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("name", choices=[*FIGURES, "all"])
    args, extra = ap.parse_known_args()
    names = list(FIGURES) if args.name == "all" else [args.name]
    codes = [run(n, extra) for n in names]
    sys.exit(max(codes))
