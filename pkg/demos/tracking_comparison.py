"""Figure-eight and spiral tracking: DNN-RISE against the PD baseline.

Both controllers fly the same reference with the arms swinging and a 1 N,
0.1 Hz sinusoidal push on every axis. The table reports max and mean |e1|
after a 10 s warm-up together with the relative reduction.

    python demos/tracking_comparison.py [--duration 60]
"""

import argparse

from dualarm_rise import compare_controllers, scenario_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration", type=float, default=60.0)
    args = ap.parse_args()
    for scenario in ("figure-eight", "spiral"):
        report, dnn, base = compare_controllers(scenario_preset(scenario, duration=args.duration))
        print(f"\n{scenario} ({args.duration:g} s, {len(dnn)} steps per controller)")
        print(report.table())
        print(f"final weight norms: {', '.join(f'{x:.3f}' for x in dnn.weight_norms()[-1])}")


if __name__ == "__main__":
    main()
