#!/usr/bin/env python3
"""Run every experiment config in configs/ and summarize pass/fail."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from gmfs.cli import main  # noqa: E402

CONFIGS = ["ergodicity", "euler_sweep", "lln_sweep", "interchange",
           "quenched_vs_annealed", "concentration"]


def run(out_root="results"):
    root = pathlib.Path(__file__).resolve().parents[1]
    codes = {}
    for name in CONFIGS:
        cfg = root / "configs" / f"{name}.yaml"
        out = root / out_root / name
        print(f"=== {name} ===")
        codes[name] = main([name, "--config", str(cfg), "--out", str(out)])
    print("\nsummary:")
    for name, code in codes.items():
        label = {0: "PASS", 2: "FAIL", 3: "INCONCLUSIVE"}[code]
        print(f"  {name}: {label}")
    return max(codes.values())


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
