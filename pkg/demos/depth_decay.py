"""Mismatch at round depth + 1 against the accuracy bounds, grouped by loop-free depth.

Run with ``python3 demos/depth_decay.py [out_dir]``; CSVs go to ``out_dir`` when given.
"""

import collections
import sys

from dwls.harness import ExperimentConfig, run_experiment

out_dir = sys.argv[1] if len(sys.argv) > 1 else None
res = run_experiment(ExperimentConfig(rounds=30), out_dir)

print(f"DWLS reaches 1e-6 at round {res.rounds_to(1e-6)}, "
      f"block-Jacobi at round {res.rounds_to(1e-6, 2)}")
for name, rows in (("covariance", res.depth_cov), ("estimate", res.depth_est)):
    worst = collections.defaultdict(lambda: (0.0, 0.0))
    for _, depth, mismatch, bound, _ in rows:
        m, b = worst[depth]
        worst[depth] = (max(m, mismatch), max(b, bound))
    print(f"\n{name}: depth  max mismatch  bound")
    for d in sorted(worst):
        print(f"{d:>18}  {worst[d][0]:12.2e}  {worst[d][1]:.2e}")
