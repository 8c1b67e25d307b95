"""Replay the three adversarial schedules and print the cost ratios they force."""

import argparse
from fractions import Fraction

from cprsched.engine import RunConfig, run
from cprsched.workloads import gen_lemma1, gen_lemma2, gen_lemma3


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rounds", type=int, default=20)
    ap.add_argument("--dmax", type=int, default=5)
    args = ap.parse_args()

    print("count-policy PR, growing chain")
    trace = run(RunConfig("pr", schedule=gen_lemma1(args.rounds)))
    counts = [trace.rows[2 * r].realloc_count for r in range(1, args.rounds + 1)]
    events = 2 * args.rounds + args.rounds - 1
    print(f"  moves per round: {counts}")
    print(f"  reallocations per arrival/departure: {sum(counts) / events:.3f}")

    print("weight-policy PR, one departure at depth d")
    for d in range(2, args.dmax + 1):
        beta = run(RunConfig("pr-weight", schedule=gen_lemma2(d))).beta()
        want = Fraction((2 ** d - 1) ** 2, 2 ** d)
        print(f"  d={d}: ratio {float(beta.max):.6g} (expected {float(want):.6g}), events {len(beta.ratios)}")

    print("CR, threshold crossing")
    for x, w in ((0, 32), (1, 64), (2, 128)):
        beta = run(RunConfig("cr", schedule=gen_lemma3(x, w))).beta()
        print(f"  x={x} w={w}: ratio {beta.max} = {float(beta.max):.6g}")


if __name__ == "__main__":
    main()
