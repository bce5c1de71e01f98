"""
HBN-PUF simulator entry point

Usage:
    python hbn_puf.py sim --config configs/tiny.json --out results/tiny.hbn
    python hbn_puf.py stats results/tiny.hbn --out results/tiny_stats.csv
"""
import sys

from src.cli import main


if __name__ == "__main__":
    sys.exit(main())
