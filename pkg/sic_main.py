"""Main entry point for the full-duplex self-interference cancellation simulator.

Runs the command-line interface so the tool can be started from a checkout
without installing it: `python sic_main.py sweep distortion_levels --out results/distortion_levels.csv`.
"""
import os
import sys

# Ensure the package is importable when running this file as a script
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from sic_tool.cli import main


if __name__ == "__main__":
    sys.exit(main())
