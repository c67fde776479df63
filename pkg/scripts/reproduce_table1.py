"""Print the dimension table for the three reference carpets and write it under ``out/table1``."""
import argparse
import sys

from chaoscover.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/table1")
    args = ap.parse_args()
    code = main(["--experiment", "table1", "--out", args.out])
    if code == 0:
        with open(f"{args.out}/table1.csv", encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    sys.exit(code)
