"""Runtime against database size for a fixed planted model."""

from __future__ import annotations

import argparse

from ism.experiments import scaling


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000])
    ap.add_argument("--iterations", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    times = scaling(tuple(args.sizes), args.iterations, seed=args.seed)
    base = times[args.sizes[0]]
    for n, s in times.items():
        print(f"N={n}\t{s:.1f}s\tx{s / base:.2f}")


if __name__ == "__main__":
    main()
