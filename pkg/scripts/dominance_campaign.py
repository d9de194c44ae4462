"""Check that offset demand never exceeds synchronous demand on random task sets."""

import argparse
import random

from freshsched.analysis import checkpoints, dbf_async, dbf_sync
from freshsched.generators import random_task_set
from freshsched.model import lcm


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sets", type=int, default=1000)
    ap.add_argument("--max-tasks", type=int, default=10)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    bad = points = 0
    for _ in range(args.sets):
        m = rng.randint(1, 4)
        tasks = random_task_set(rng, rng.randint(1, args.max_tasks), rng.uniform(0.05, 1.0) * m)
        horizon = lcm(t.period for t in tasks) + max(t.offset for t in tasks)
        for t in checkpoints(tasks, horizon):
            points += 1
            bad += any(dbf_async(x, t) > dbf_sync(x, t) for x in tasks)
    print(f"sets={args.sets} checkpoints={points} counterexamples={bad}")


if __name__ == "__main__":
    main()
