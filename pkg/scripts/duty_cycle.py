"""Smallest receiver duty cycle that still decodes every sender, per contact window."""

import argparse
from pathlib import Path

from beaconfold.errors import InsufficientContactError
from beaconfold.harness import duty_cycle_experiment, write_csv
from beaconfold.multiplex import assign_intervals

FIELDS = ["senders", "contact_window_s", "min_active_fraction", "success_rate"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--senders", type=int, default=3)
    ap.add_argument("--contacts", default="4,6,9,17")
    ap.add_argument("--occupancy", type=float, default=0.05)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    assignment = assign_intervals(args.senders, 53, 149)
    rows = []
    for window in (float(v) for v in args.contacts.split(",")):
        try:
            res = duty_cycle_experiment(assignment, window, args.seed,
                                        occupancy=args.occupancy, trials=args.trials)
        except InsufficientContactError as exc:
            print(f"{window:5.1f} s: {exc}")
            continue
        print(f"{window:5.1f} s: duty {res.min_active_fraction:.3f} "
              f"(success {res.success_rate:.3f})")
        rows.append({"senders": args.senders, "contact_window_s": window,
                     "min_active_fraction": res.min_active_fraction,
                     "success_rate": res.success_rate})
    write_csv(rows, FIELDS, out / "duty_cycle.csv")


if __name__ == "__main__":
    main()
