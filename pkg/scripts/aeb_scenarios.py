"""Replay the braking-pipeline scenarios on one and two cores and print worst imu->ctrl ages."""

import argparse
from pathlib import Path

from freshsched.derivation import derive_periods
from freshsched.graphio import load_graph
from freshsched.simulator import AgeAnchor, ConsumptionInstant, Policy, SimulationConfig, simulate
from freshsched.synthesis import Mode, assign_offsets

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "aeb.json"
MODES = {"release/start": (AgeAnchor.PRODUCER_RELEASE, ConsumptionInstant.CONSUMER_START),
         "release/finish": (AgeAnchor.PRODUCER_RELEASE, ConsumptionInstant.CONSUMER_FINISH),
         "finish/finish": (AgeAnchor.PRODUCER_FINISH, ConsumptionInstant.CONSUMER_FINISH)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graph", default=str(FIXTURE))
    ap.add_argument("--seed", type=int, default=0, help="unused; scenarios are deterministic")
    args = ap.parse_args()
    base = derive_periods(load_graph(args.graph))
    bound = base.edge("imu", "ctrl").freshness
    for cores in (1, 2):
        g = base.with_platform(cores=cores)
        runs = {"asap": (Policy.ASAP, None, ()), "fixed order": (Policy.FIXED_ORDER, None, ("imu", "vis", "ctrl")),
                "jit": (Policy.JIT, assign_offsets(g, Mode.SINGLE if cores == 1 else Mode.GLOBAL), ())}
        for name, (policy, result, order) in runs.items():
            for label, (anchor, instant) in MODES.items():
                cfg = SimulationConfig(policy, order=order, age_anchor=anchor, consumption_instant=instant)
                worst = max((r.age for r in simulate(g, result, cfg).records("imu", "ctrl")), default=None)
                verdict = "fresh" if worst is not None and worst <= bound else "STALE"
                print(f"cores={cores} {name:<12} {label:<15} worst age {worst / 1000:g}ms  {verdict}")


if __name__ == "__main__":
    main()
