"""SER against sampling duration for both variants (T = 97 shift units).

Writes one CSV per variant and prints the shortest duration reaching each
SER target.
"""

import argparse
from pathlib import Path

from beaconfold.harness import SER_FIELDS, ExperimentConfig, ser_sweep, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x", type=int, default=97)
    ap.add_argument("--rho-max", type=int, default=10)
    ap.add_argument("--occupancy", default="0.1,0.3,0.5,0.9")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=13)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    occupancies = tuple(float(b) for b in args.occupancy.split(","))
    for variant in ("freebee", "afreebee"):
        cfg = ExperimentConfig(variant=variant, x=args.x, rhos=tuple(range(1, args.rho_max + 1)),
                               occupancies=occupancies, trials=args.trials, seed=args.seed)
        points = ser_sweep(cfg)
        write_csv([p.as_row() for p in points], SER_FIELDS, out / f"ser_{variant}.csv")
        for b in occupancies:
            row = [p for p in points if p.occupancy == b]
            for target in (0.05, 0.01):
                hit = next((p for p in row if p.ser < target), None)
                where = f"{hit.sampling_duration_s:.2f} s (rho={hit.rho})" if hit else "not reached"
                print(f"{variant:9s} B={b:.1f} SER<{target:.0%}: {where}")


if __name__ == "__main__":
    main()
