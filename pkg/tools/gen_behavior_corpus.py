#!/usr/bin/env python3
"""Regenerate the bundled behavior corpus.

Emits instruction trees paired with small annotated worlds: object ids
and poses vary per example (seeded), labels drive the annotations. Run
from the repository root:

    python tools/gen_behavior_corpus.py > src/minworld/assets/behavior_corpus.json
"""

from __future__ import annotations

import json
import sys

import numpy as np

ACTIONS = ("look", "navigate", "open", "turn")

TREES = {
    "drive": "(VP (VB drive) (PP (TO to) (NP (DT the) (NN {x}))))",
    "open": "(VP (VB open) (NP (DT the) (NN {x})))",
    "look": "(VP (VB look) (PP (IN through) (NP (DT the) (NN {x}))))",
    "turn_handle_door": "(VP (VB turn) (NP (NP (DT the) (NN handle)) "
                        "(PP (IN of) (NP (DT the) (NN door)))))",
    "turn_top_box": "(VP (VB turn) (NP (NP (DT the) (NN top)) "
                    "(PP (IN of) (NP (DT the) (NN box)))))",
}

# (pattern, noun, world labels); a +child suffix nests the composite
# subtype object under its parent
CASES = [
    ("drive", "door", ["door"]),
    ("drive", "door", ["door", "ball"]),
    ("drive", "door", ["door", "box", "suitcase"]),
    ("drive", "box", ["box"]),
    ("drive", "box", ["box", "door"]),
    ("drive", "drawer", ["drawer", "pitcher"]),
    ("open", "door", ["door", "door+handle"]),
    ("open", "door", ["door"]),
    ("open", "door", ["door", "ball", "door+handle"]),
    ("open", "drawer", ["drawer"]),
    ("open", "box", ["box", "cracker_box"]),
    ("turn_handle_door", "handle", ["door", "door+handle"]),
    ("turn_handle_door", "handle", ["door", "door+handle", "suitcase"]),
    ("turn_top_box", "top", ["box", "box+top"]),
    ("look", "door", ["door"]),
    ("look", "door", ["door", "pitcher", "ball"]),
    ("drive", "door", ["door", "drawer"]),
    ("open", "door", ["door", "door+handle", "box"]),
    ("drive", "box", ["box", "ball", "cracker_box"]),
    ("look", "door", ["door", "box"]),
    ("turn_top_box", "top", ["box", "box+top", "door"]),
    ("drive", "drawer", ["drawer", "door"]),
]


def make_world(labels, rng):
    ids = [int(i) for i in rng.choice(np.arange(1, 40), len(labels), replace=False)]
    objects = []
    by_label = {}
    for obj_id, spec in zip(ids, labels):
        if "+" in spec:
            parent_label, subtype = spec.split("+")
            label = f"{parent_label}_{subtype}"
            parent = by_label[parent_label]
            px, py, pz = parent["pose"]["x"], parent["pose"]["y"], parent["pose"]["z"]
            x, y, z = px + 0.2, py + 0.15, pz
            obj = {
                "id": obj_id, "label": label,
                "pose": {"x": round(x, 3), "y": round(y, 3), "z": round(z, 3),
                         "yaw": 0.0},
                "bbox": {"min": [round(x - 0.05, 3), round(y - 0.05, 3),
                                 round(z - 0.05, 3)],
                         "max": [round(x + 0.05, 3), round(y + 0.05, 3),
                                 round(z + 0.05, 3)]},
                "parent": parent["id"],
            }
        else:
            x, y = (round(float(v), 3) for v in rng.uniform(-4.0, 4.0, 2))
            z = 0.5
            obj = {
                "id": obj_id, "label": spec,
                "pose": {"x": x, "y": y, "z": z, "yaw": 0.0},
                "bbox": {"min": [round(x - 0.5, 3), round(y - 0.5, 3), 0.0],
                         "max": [round(x + 0.5, 3), round(y + 0.5, 3), 1.0]},
            }
            by_label[spec] = obj
        objects.append(obj)
    objects.sort(key=lambda o: o["id"])
    return objects


def find(objects, label):
    for obj in objects:
        if obj["label"] == label:
            return obj["id"]
    raise KeyError(label)


def all_actions(obj_id):
    return [{"action": a, "object": obj_id} for a in ACTIONS]


def gold_for(pattern, noun, objects):
    if pattern in ("drive", "look"):
        target = find(objects, noun)
        action = "navigate" if pattern == "drive" else "look"
        return ([[0, d] for d in all_actions(target)]
                + [[1, d] for d in all_actions(target)]
                + [[2, {"action": action, "object": target}]])
    if pattern == "open":
        target = find(objects, noun)
        return ([[0, d] for d in all_actions(target)]
                + [[1, {"action": "open", "object": target}]])
    parent_label = "door" if pattern == "turn_handle_door" else "box"
    sub = find(objects, f"{parent_label}_{noun}")
    parent = find(objects, parent_label)
    return ([[0, d] for d in all_actions(sub)]
            + [[1, d] for d in all_actions(parent)]
            + [[2, d] for d in all_actions(parent)]
            + [[3, d] for d in all_actions(sub) + all_actions(parent)]
            + [[4, {"action": "turn", "object": sub}]])


def main() -> None:
    rng = np.random.default_rng(7)
    examples = []
    for pattern, noun, labels in CASES:
        objects = make_world(labels, rng)
        tree = TREES[pattern].format(x=noun)
        examples.append({
            "tree": tree,
            "world": {"objects": objects},
            "gold": gold_for(pattern, noun, objects),
        })
    json.dump({"kind": "behavior", "examples": examples}, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
