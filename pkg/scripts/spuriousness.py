"""Mining pure noise: how many candidates are accepted and how many patterns survive."""

from __future__ import annotations

import argparse

from ism.experiments import spuriousness


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=1000)
    ap.add_argument("--alphabet", type=int, default=20)
    ap.add_argument("--length", type=int, default=20)
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()
    print("seed\tevaluated\tacceptance_first_50\tnon_singletons\tseconds")
    for seed in args.seeds:
        res = spuriousness(args.rows, args.alphabet, args.length, iterations=args.iterations, seed=seed)
        x = res.extra
        print(f"{seed}\t{x['evaluated']}\t{x['acceptance_rate']:.2f}\t{x['non_singletons']}\t{res.seconds:.1f}")


if __name__ == "__main__":
    main()
