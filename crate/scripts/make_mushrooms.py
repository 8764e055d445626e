"""Build data/mushrooms (LIBSVM, 112 binary features) from the UCI agaricus-lepiota table.

Each categorical attribute is one-hot encoded over the values that occur in the
data, sorted by value code; "?" counts as a value. Labels: edible 1, poisonous 2.
"""
import sys

src, dst = sys.argv[1], sys.argv[2]
rows = [line.strip().split(",") for line in open(src) if line.strip()]
n_attr = len(rows[0]) - 1
values = [sorted({r[1 + a] for r in rows}) for a in range(n_attr)]
offsets, total = [], 0
for v in values:
    offsets.append(total)
    total += len(v)
with open(dst, "w") as out:
    for r in rows:
        label = 1 if r[0] == "e" else 2
        feats = [offsets[a] + values[a].index(r[1 + a]) + 1 for a in range(n_attr)]
        out.write(f"{label} " + " ".join(f"{f}:1" for f in feats) + "\n")
print(f"{len(rows)} rows, {total} features")
