"""Synthesize offsets for random DAGs and report utilization, test verdicts and simulated misses."""

import argparse
import random
import warnings

from freshsched.analysis import offset_aware_test, utilization
from freshsched.derivation import DegeneratePeriodWarning
from freshsched.generators import random_dag
from freshsched.simulator import simulate_task_set
from freshsched.synthesis import SynthesisError, assign_offsets


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--graphs", type=int, default=300)
    ap.add_argument("--cores", type=int, default=1)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    warnings.simplefilter("ignore", DegeneratePeriodWarning)
    done = rejected = accepted = missed = 0
    while done < args.graphs:
        g = random_dag(rng, rng.randint(1, 8), rng.uniform(0.1, 1.0) * args.cores, cores=args.cores)
        try:
            tasks = assign_offsets(g, verify=False).task_set(g)
        except SynthesisError:
            rejected += 1
            continue
        done += 1
        accepted += offset_aware_test(tasks, args.cores).schedulable
        missed += any(j.missed for j in simulate_task_set(tasks, args.cores))
        assert utilization(tasks) == utilization(g.tasks)
    print(f"graphs={done} rejected={rejected} test-accepted={accepted} with-misses={missed}")


if __name__ == "__main__":
    main()
