"""World model: objects accumulated from detections.

One writer (the perception loop) integrates detections; readers take
immutable snapshots. Objects may carry a parent link one level deep
(a handle on a door), never chains.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

ASSOC_RADIUS = 0.5
PARENT_MARGIN = 0.1
PARENT_FALLBACK_RADIUS = 0.75


class WorldError(ValueError):
    pass


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.z, self.yaw):
            if not math.isfinite(v):
                raise WorldError("non-finite pose component")
        # normalize yaw into [-pi, pi)
        yaw = math.remainder(self.yaw, math.tau)
        if yaw >= math.pi:
            yaw -= math.tau
        object.__setattr__(self, "yaw", yaw)

    def distance(self, other: "Pose") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))

    def xy_distance(self, other: "Pose") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}

    @classmethod
    def from_json(cls, d: dict) -> "Pose":
        return cls(d["x"], d["y"], d.get("z", 0.0), d.get("yaw", 0.0))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box; lo <= hi componentwise, positive volume unless
    explicitly flagged degenerate."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    degenerate: bool = False

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if any(a > b for a, b in zip(lo, hi)):
            raise WorldError(f"box min {lo} exceeds max {hi}")
        if not self.degenerate and any(a == b for a, b in zip(lo, hi)):
            raise WorldError("zero-volume box not flagged degenerate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple((a + b) / 2.0 for a, b in zip(self.lo, self.hi))

    def contains(self, point, margin: float = 0.0) -> bool:
        return all(a - margin <= p <= b + margin
                   for p, a, b in zip(point, self.lo, self.hi))

    def translated(self, dx: float, dy: float, dz: float = 0.0) -> "Aabb":
        d = (dx, dy, dz)
        return Aabb(tuple(a + v for a, v in zip(self.lo, d)),
                    tuple(b + v for b, v in zip(self.hi, d)),
                    self.degenerate)

    def to_json(self) -> dict:
        return {"min": list(self.lo), "max": list(self.hi)}

    @classmethod
    def from_json(cls, d: dict) -> "Aabb":
        lo, hi = tuple(d["min"]), tuple(d["max"])
        degenerate = any(a == b for a, b in zip(lo, hi))
        return cls(lo, hi, degenerate)


@dataclass
class WorldObject:
    id: int
    label: str
    pose: Pose
    bbox: Aabb
    parent: int | None = None
    first_seen: float = 0.0
    last_seen: float = 0.0

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "label": self.label,
            "pose": self.pose.to_json(),
            "bbox": self.bbox.to_json(),
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
        }
        if self.parent is not None:
            d["parent"] = self.parent
        return d

    @classmethod
    def from_json(cls, d: dict) -> "WorldObject":
        return cls(
            id=int(d["id"]),
            label=d["label"],
            pose=Pose.from_json(d["pose"]),
            bbox=Aabb.from_json(d["bbox"]),
            parent=d.get("parent"),
            first_seen=d.get("first_seen", 0.0),
            last_seen=d.get("last_seen", 0.0),
        )


@dataclass(frozen=True)
class Detection:
    label: str
    pose: Pose
    bbox: Aabb
    timestamp: float
    source_detector: str
    spurious: bool = False


class WorldModel:
    """Mutable object store keyed by id; integrate() is the only writer
    path and snapshot() hands out deep copies for readers."""

    def __init__(self, objects=None):
        self.objects: dict[int, WorldObject] = {}
        self._next_id = 1
        for obj in objects or []:
            if obj.id in self.objects:
                raise WorldError(f"duplicate object id {obj.id}")
            self.objects[obj.id] = obj
            self._next_id = max(self._next_id, obj.id + 1)
        self._check_single_layer()

    def _check_single_layer(self) -> None:
        for obj in self.objects.values():
            if obj.parent is None:
                continue
            parent = self.objects.get(obj.parent)
            if parent is None:
                raise WorldError(f"object {obj.id} parent {obj.parent} missing")
            if parent.parent is not None:
                raise WorldError(f"parent chain deeper than one at {obj.id}")

    def query(self, label: str | None = None, parent: int | None = None) -> list[WorldObject]:
        out = []
        for obj in sorted(self.objects.values(), key=lambda o: o.id):
            if label is not None and obj.label != label:
                continue
            if parent is not None and obj.parent != parent:
                continue
            out.append(obj)
        return out

    def labels(self) -> set[str]:
        return {obj.label for obj in self.objects.values()}

    def snapshot(self) -> "WorldModel":
        return copy.deepcopy(self)

    def _associate(self, d: Detection, assoc_radius: float) -> WorldObject | None:
        best = None
        best_key = None
        for obj in self.objects.values():
            if obj.label != d.label:
                continue
            dist = obj.pose.distance(d.pose)
            if dist > assoc_radius:
                continue
            key = (dist, obj.id)
            if best_key is None or key < best_key:
                best, best_key = obj, key
        return best

    def _find_parent(self, d: Detection, parent_label: str) -> int | None:
        candidates = [o for o in self.objects.values()
                      if o.label == parent_label and o.parent is None]
        inside = [o for o in candidates if o.bbox.contains(
            d.bbox.center, margin=PARENT_MARGIN)]
        pool = inside or [o for o in candidates
                          if o.pose.distance(d.pose) <= PARENT_FALLBACK_RADIUS]
        if not pool:
            return None
        return min(pool, key=lambda o: (o.pose.distance(d.pose), o.id)).id

    def integrate(self, d: Detection, links=(), assoc_radius: float = ASSOC_RADIUS) -> "WorldModel":
        """Fold one detection in: update the nearest same-label object
        within assoc_radius, else create a new one; attach a parent when
        the label is a child label in links."""
        obj = self._associate(d, assoc_radius)
        if obj is None:
            obj = WorldObject(self._next_id, d.label, d.pose, d.bbox,
                              first_seen=d.timestamp, last_seen=d.timestamp)
            self._next_id += 1
            self.objects[obj.id] = obj
        else:
            obj.pose = d.pose
            obj.bbox = d.bbox
            obj.last_seen = d.timestamp
        parent_labels = [p for p, c in links if c == d.label]
        if parent_labels and obj.parent is None:
            for parent_label in sorted(parent_labels):
                found = self._find_parent(d, parent_label)
                if found is not None and found != obj.id:
                    obj.parent = found
                    break
        self._check_single_layer()
        return self

    def to_json(self) -> dict:
        return {"objects": [o.to_json() for o in self.query()]}

    @classmethod
    def from_json(cls, data: dict) -> "WorldModel":
        return cls([WorldObject.from_json(d) for d in data.get("objects", [])])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WorldModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
