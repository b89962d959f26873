"""How interaction overlap becomes the user-correlation operator.

Computes pairwise Jaccard indices of item sets, buckets them into typical
correlation values, and shows the normalized result.

    python3 demos/correlation_levels.py
"""
import numpy as np

from socgcf.data import Dataset
from socgcf.graph import build_C, build_R, classify_f, jaccard_pairs

np.set_printoptions(precision=4, suppress=True)

item_sets = {
    "ana": {0, 1, 2, 3, 4},
    "ben": {0, 1, 2, 3, 5},    # 4 shared of 6 -> 0.667
    "cai": {0, 6, 7, 8},       # 1 shared with ana of 8 -> 0.125
    "dee": {9},                # shares nothing
}
names = list(item_sets)
train = [(u, i) for u, n in enumerate(names) for i in sorted(item_sets[n])]
d = Dataset(len(names), 10, train, [], [])
r = build_R(d)

jac = jaccard_pairs(r, floor=0.0).to_dense()
print("Jaccard index between users:")
for a, row in zip(names, jac):
    print(f"  {a}: {row}")

print("\nbucketed levels:")
for j in (0.05, 0.125, 0.45, 0.667, 0.95):
    print(f"  J={j:<6} -> {classify_f(j)}")

print("\nnormalized correlation operator (entries below J=0.1 are dropped):")
print(build_C(r).to_dense())
