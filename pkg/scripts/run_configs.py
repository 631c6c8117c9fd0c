"""Run every JSON config under scripts/configs (or those given) through the CLI."""
import sys
from pathlib import Path

from sphertess.cli import main


def run(paths):
    codes = {}
    for p in paths:
        print(f"== {p}", flush=True)
        codes[str(p)] = main(["run", str(p)])
    for p, rc in codes.items():
        print(f"{rc}  {p}")
    return max(codes.values(), default=0)


if __name__ == "__main__":
    args = sys.argv[1:] or sorted(Path(__file__).with_name("configs").glob("*.json"))
    sys.exit(run(args))
