"""Desk-scale versions of the binary and survival simulation scenarios.

Usage: python scripts/run_desk.py OUTDIR [binary|tte|all] [fractions...]
Prints the x3/x4/x5 rows of each scenario's metrics.
"""

import logging
import sys
import time
from pathlib import Path

from augmi.config import MIConfig, ScenarioConfig
from augmi.runner import run_scenario

FRACTIONS = (0.01, 0.05, 0.10, 0.20)
SHOW = ("x3", "x4", "x5[2]", "x5[3]", "x5[4]")


def scenarios(kind, fractions):
    if kind in ("binary", "all"):
        for f in fractions:
            yield "binary", "glm", f
    if kind in ("tte", "all"):
        for method in ("cart", "glm", "transformation"):
            for f in fractions:
                yield "tte", method, f


def main(argv):
    out = Path(argv[1] if len(argv) > 1 else "runs/desk")
    kind = argv[2] if len(argv) > 2 else "all"
    fractions = tuple(float(x) for x in argv[3:]) or FRACTIONS
    for outcome, method, frac in scenarios(kind, fractions):
        cfg = ScenarioConfig(
            outcome=outcome, n=20_000, observed_fraction=frac, replicates=50, seed=2024,
            mi=MIConfig(m=10, iterations=10, method=method), parallelism=1,
            output_dir=str(out / f"{outcome}_{method}_{int(round(frac * 100)):02d}"),
        )
        t0 = time.time()
        res = run_scenario(cfg)
        print(f"\n{outcome} {method} {frac:.0%}: K={res.metrics.K} failed={res.n_failed} "
              f"({time.time() - t0:.0f}s)")
        for coef in SHOW:
            cell = res.metrics.cells[coef]
            print(f"  {coef:6s} d={cell['mi']['d']:.2f}  rmse mi={cell['mi']['rmse']:.4f} "
                  f"cca={cell['cca']['rmse']:.4f}  mae mi={cell['mi']['mae']:.4f} "
                  f"cca={cell['cca']['mae']:.4f}", flush=True)


if __name__ == "__main__":
    logging.basicConfig(level=logging.WARNING)
    main(sys.argv)
