#!/usr/bin/env python3
"""
RWI 实验运行脚本
Random walk insertion experiments from the command line

Usage:
    python run_rwi.py run --n 1000 --d 8 --epsilon 0.2 --seed 42
    python run_rwi.py verify --n 200 --d 4 --m 700 --trials 20
    python run_rwi.py bounds --d 2048
"""

import sys
from pathlib import Path

# make `src` and `config` importable when run from a checkout
sys.path.insert(0, str(Path(__file__).resolve().parent))

from src.cli_io import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
