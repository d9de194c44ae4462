"""Compare the shared-producer offset search with exhaustive enumeration on random instances."""

import argparse
import math
import random
import warnings

from freshsched.derivation import DegeneratePeriodWarning
from freshsched.generators import shared_producer_instance
from freshsched.synthesis import consensus_search, freshness_windows


def feasible_offsets(period, windows):
    hyper = math.lcm(period, *(w.frame for w in windows))
    span = range(-2 * hyper // period - 2, 2 * hyper // period + 2)
    return [phi for phi in range(period)
            if all(any(k * w.frame + w.lower <= phi + j * period <= k * w.frame + w.upper for j in span)
                   for w in windows for k in range(hyper // w.frame))]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--instances", type=int, default=500)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    warnings.simplefilter("ignore", DegeneratePeriodWarning)
    feasible = disagreements = 0
    for _ in range(args.instances):
        g, phases = shared_producer_instance(rng, rng.randint(2, 4))
        truth = feasible_offsets(g.task("S").period, freshness_windows(g, "S", phases))
        got = consensus_search(g, "S", phases)
        feasible += bool(truth)
        disagreements += (got is None) != (not truth) or (got is not None and got not in truth)
    print(f"instances={args.instances} feasible={feasible} infeasible={args.instances - feasible} "
          f"disagreements={disagreements}")


if __name__ == "__main__":
    main()
