"""Message passing on a loopy network equals WLS on its unrolled, collapsed line.

Run with ``python3 demos/loopy_equivalence.py``.
"""

import numpy as np

from dwls import oracle, run
from dwls.checks import random_loopy_graph, rel_err
from dwls.harness import random_measurements
from dwls.transforms import collapse_to_line, unroll

rng = np.random.default_rng(7)
net = random_measurements(random_loopy_graph(rng, 8, extra=3), rng)
traj = run(net, rounds=10)
ref = oracle.solve(net)

print("round  |x1(N) - x1_line(N)|/|x|   |x1(N) - x1_wls|")
for N in range(1, 11):
    x_line, _ = oracle.solve_line(collapse_to_line(unroll(net, 1, N)))
    x_hat = traj.belief(N, 1).x_hat
    print(f"{N:5d}  {rel_err(x_hat, x_line):24.2e}   {np.linalg.norm(x_hat - ref.x_of(1)):.2e}")
