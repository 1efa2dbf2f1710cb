"""Per-sender SER as the number of interval-multiplexed senders grows."""

import argparse
from pathlib import Path

from beaconfold.harness import MULTIPLEX_FIELDS, multiplex_experiment, write_csv
from beaconfold.multiplex import assign_intervals


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--senders", default="1,5,10,15,20")
    ap.add_argument("--occupancy", type=float, default=0.1)
    ap.add_argument("--rho", type=int, default=5)
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in (int(v) for v in args.senders.split(",")):
        assignment = assign_intervals(n, 53, 149)
        for cancel in (False, True):
            got = multiplex_experiment(assignment, args.occupancy, args.trials, args.seed,
                                       rho=args.rho, cancel=cancel)
            for r in got:
                r["senders"] = n
            rows += got
            worst = max(r["ser"] for r in got)
            mean = sum(r["ser"] for r in got) / n
            mode = "cancelling" if cancel else "plain"
            print(f"n={n:2d} {mode:10s} mean SER {mean:.4f} worst {worst:.4f}")
    write_csv(rows, ["senders"] + MULTIPLEX_FIELDS, out / "multiplex_scale.csv")


if __name__ == "__main__":
    main()
