"""Model bit rate against beacon interval for several repetition counts."""

import argparse

from beaconfold.harness import write_csv
from beaconfold.modem import AFREEBEE, FREEBEE, IntervalConfig, bit_rate

FIELDS = ["x", "interval_ms", "rho", "variant", "rate_exact_bps", "rate_floor_bps"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta-us", type=int, default=1024)
    ap.add_argument("--rhos", default="1,3,5")
    ap.add_argument("--xs", default="16,32,64,97,128,256,512")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    rows = []
    for x in (int(v) for v in args.xs.split(",")):
        cfg = IntervalConfig(args.delta_us, x)
        for rho in (int(v) for v in args.rhos.split(",")):
            for variant in (FREEBEE, AFREEBEE):
                rows.append({
                    "x": x, "interval_ms": cfg.interval_us / 1000, "rho": rho,
                    "variant": variant, "rate_exact_bps": bit_rate(cfg, rho, variant),
                    "rate_floor_bps": bit_rate(cfg, rho, variant, floor=True),
                })
    text = write_csv(rows, FIELDS, args.out)
    if text is not None:
        print(text, end="")


if __name__ == "__main__":
    main()
