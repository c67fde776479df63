"""Log-log slopes of mean cover time against radius for the Cantor set and the row-2 carpet.

Besides the raw slope, the slope of ``log(E T_r / log(1/r))`` is printed as a
diagnostic: the coupon-collector factor inflates the raw slope at finite scales.
"""
import argparse
import json
import math
import sys
from pathlib import Path

from chaoscover.analysis import slope_fit
from chaoscover.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def report(name: str, out: Path) -> None:
    recs = [json.loads(l) for l in (out / "cover_time.jsonl").read_text().splitlines()]
    pts = [(r["r"], r["mean"]) for r in recs]
    raw = slope_fit(pts).exponent
    corrected = slope_fit([(r, m / math.log(1 / r)) for r, m in pts]).exponent
    ref = json.loads((out / "slope.jsonl").read_text()).get("reference_dim_measure")
    print(f"{name}: raw slope {raw:.4f}  log-corrected {corrected:.4f}  reference {ref}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/slopes")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    for name in ("cantor_slope", "carpet_slope"):
        out = Path(args.out) / name
        code = main(["--config", str(CONFIGS / f"{name}.toml"), "--out", str(out),
                     "--trials", str(args.trials), "--threads", str(args.threads)])
        if code:
            sys.exit(code)
        report(name, out)
    print(f"cantor target log2/log3 = {math.log(2) / math.log(3):.5f}")
