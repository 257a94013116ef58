"""Writes fixtures/eval: 14 items with 2-4 parts (11 predicted exactly) and
a few larger items."""
import json
import os
import shutil

ROOT = os.path.join(os.path.dirname(__file__), "..", "eval")

# (id, gt tree, equivalences, prediction); prediction None = missing file,
# a str = raw tree text as a model might emit it.
ITEMS = [
    ("a01", [0, 1], [], [1, 0]),
    ("a02", [0, 1, 2], [], [2, 0, 1]),
    ("a03", [[0, 1], 2], [], [2, [1, 0]]),
    ("a04", [[0, 1], 2], [[0, 2]], [[2, 1], 0]),
    ("a05", [[0, 1], [2, 3]], [], [[3, 2], [1, 0]]),
    ("a06", [[[0, 1], 2], 3], [], [3, [2, [0, 1]]]),
    ("a07", [[1, 3], 2], [[1, 2]], [[2, 3], 1]),
    ("a08", [[0, 1, 2], 3], [[0, 1]], [3, [2, 1, 0]]),
    ("a09", [0, 1, 2, 3], [[0, 1], [2, 3]], [3, 2, 1, 0]),
    ("a10", [[0, 2], [1, 3]], [[0, 1], [2, 3]], [[1, 3], [0, 2]]),
    ("a11", [[[2, 3], 1], 0], [], "[[[3,2],1],0]"),
    ("a12", [[0, 1], 2], [], [[0, 2], 1]),
    ("a13", [[[0, 1], 2], 3], [], None),
    ("a14", [[0, 1], [2, 3]], [], "[[0,1],[2,3]"),
    ("b01", [[[0, 1], 2], [3, 4]], [[3, 4]], [[4, 3], [2, [1, 0]]]),
    ("b02", [[[0, 1], [2, 3]], 4, 5], [[4, 5]], [[[0, 1], 2, 3], 4, 5]),
    ("c01", [[[[0, 1], 2], [3, 4]], [5, 6], [7, 8]], [], [[[[0, 1], 2], [3, 4]], [5, 6], [7, 8]]),
]


def leaves(t):
    return [t] if isinstance(t, int) else [x for c in t for x in leaves(c)]


def main():
    shutil.rmtree(ROOT, ignore_errors=True)
    os.makedirs(os.path.join(ROOT, "gt"))
    os.makedirs(os.path.join(ROOT, "pred"))
    for ident, gt, eq, pred in ITEMS:
        item = {
            "id": ident,
            "parts": [{"id": p} for p in sorted(leaves(gt))],
            "equivalences": eq,
            "gt_tree": gt,
        }
        with open(os.path.join(ROOT, "gt", f"{ident}.json"), "w") as f:
            json.dump(item, f)
            f.write("\n")
        if pred is None:
            continue
        with open(os.path.join(ROOT, "pred", f"{ident}.json"), "w") as f:
            json.dump({"tree": pred}, f)
            f.write("\n")


main()
