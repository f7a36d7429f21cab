"""Grid refinement of the fast-marching solver against the exact disk distance
and against the Dijkstra path oracle on smooth random speeds.

    python scripts/eikonal_convergence.py [--fields 5]
"""

import argparse

import numpy as np

from accretion.eikonal import dijkstra_oracle, solve_fmm
from accretion.geometry import build_grid
from accretion.harness import analytic_disk_error, eikonal_domain, random_speed_continuous

ap = argparse.ArgumentParser()
ap.add_argument("--fields", type=int, default=5)
ap.add_argument("--seed", type=int, default=0)
a = ap.parse_args()

sizes = (33, 65, 129, 257)
err = [analytic_disk_error(n) for n in sizes]
print("n     h        sup err   ratio")
for i, n in enumerate(sizes):
    ratio = "" if i == 0 else f"{err[i - 1] / err[i]:.3f}"
    print(f"{n:<5} {1 / (n - 1):.5f}  {err[i]:.3e}  {ratio}")

rng = np.random.default_rng(a.seed)
grids = {n: build_grid(eikonal_domain(), n) for n in (65, 129)}
print("\nfield  rel(65)   rel(129)")
for f in range(a.fields):
    sp = random_speed_continuous(rng, 0.5, 1.0)
    rel = []
    for n, g in grids.items():
        s = sp(g.coords)
        o = dijkstra_oracle(s, g).values
        rel.append(np.abs(solve_fmm(s, g).values - o).max() / o.max())
    print(f"{f:<5}  {rel[0]:.4f}    {rel[1]:.4f}")
