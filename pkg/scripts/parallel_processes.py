"""Interleaved cyclic processes: which processes have a pure pattern in the top-k."""

from __future__ import annotations

import argparse

from ism.evaluation import process_recall
from ism.experiments import parallel_processes


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=1000)
    ap.add_argument("--row-length", type=int, default=100)
    ap.add_argument("--iterations", type=int, default=50)
    ap.add_argument("--top-k", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = parallel_processes(n_rows=args.rows, row_length=args.row_length, iterations=args.iterations,
                             top_k=args.top_k, seed=args.seed)
    top = [s for s in res.ranked if len(s) > 1]
    for k in range(1, args.top_k + 1):
        print(f"k={k}\trecall={process_recall(top, {x: x // 5 for x in range(25)}, 5, k):.2f}")
    print(f"top-{args.top_k}: {res.extra['top']}")
    print(f"{res.seconds:.1f}s, {res.extra['true_windows']} of the top patterns are in-order process windows")


if __name__ == "__main__":
    main()
