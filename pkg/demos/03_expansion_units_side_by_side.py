"""All seven feature-expansion units on one toy cloud.

Every unit maps N x C features to r*N x C' with the children of point i at
rows r*i .. r*i+r-1. The interesting split is whether a unit lets points see
their neighbors: the branch/duplicate/MLP units don't, the graph units do.

Run: python demos/03_expansion_units_side_by_side.py
"""

import numpy as np

from puxp.autodiff import ParameterStore, Tensor
from puxp.geometry import PointCloud, knn_bruteforce
from puxp.units import UNIT_KINDS, ExpansionContext, ExpansionSpec, build_unit

n, c, k, r = 12, 8, 4, 2
rng = np.random.default_rng(3)
cloud = PointCloud(rng.normal(size=(n, 3)))
base = knn_bruteforce(cloud, k)
feats = rng.normal(size=(n, c))

print(f"{n} points, {c} channels, k={k}, ratio={r}\n")
print(f"{'unit':18s} {'out shape':>10s} {'params':>7s}  isolation")
perturbed = feats.copy()
j = int(base.entries[0, 0])  # this point is a neighbor of point 0
perturbed[j] += 1e-2

for kind in UNIT_KINDS:
    store = ParameterStore()
    spec = ExpansionSpec(kind=kind, ratio=r, channels=c, k=k)
    unit = build_unit(store, spec, np.random.default_rng(11))
    out = unit.expand(ExpansionContext(cloud, base, Tensor(feats))).features
    out2 = unit.expand(ExpansionContext(cloud, base, Tensor(perturbed))).features
    others = np.ones(out.shape[0], dtype=bool)
    others[r * j : r * j + r] = False
    touched = not np.array_equal(out.data[others], out2.data[others])
    verdict = "neighbors react" if touched else "points are independent"
    print(f"{kind:18s} {str(out.shape):>10s} {store.value_count():>7d}  {verdict}")

print(f"\n(perturbed point {j}'s feature by 1e-2 and compared other points' children)")
print("Only nodeshuffle and proedgeshuffle fuse neighborhood information,")
print("which is exactly what the progressive EdgeConv rounds are for.")
