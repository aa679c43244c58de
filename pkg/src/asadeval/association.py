"""Baseline data association: online motion-reliant vs offline appearance-driven.

Both strategies turn a stream of anonymous per-keyframe detections (box,
score, appearance embedding) into a record with unique actor identities and
empty action sets. The online tracker walks keyframes in order and links
each detection to an active track by a blend of box overlap with the track's
last box and cosine distance to the track's mean embedding, so it leans on
motion continuity. The offline tracker sees the whole stream and greedily
agglomerates detections by a decayed blend of overlap and appearance
similarity, subject to the constraint that a cluster never holds two
detections from the same keyframe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import AssignmentProblem, iou, iou_matrix, solve_assignment
from .model import ActorObservation, BoundingBox, VideoRecord

ONLINE_IOU_WEIGHT = 0.7
OFFLINE_IOU_WEIGHT = 0.3
DEFAULT_MATCH_THRESHOLD = 0.6
DEFAULT_MERGE_THRESHOLD = 0.5
DEFAULT_MAX_GAP = 10


@dataclass(frozen=True)
class Detection:
    """An anonymous detection: box, confidence, appearance embedding."""

    box: BoundingBox
    score: float
    appearance: np.ndarray


@dataclass(frozen=True)
class DetectionStream:
    """Per-keyframe detections for one video; no identities attached."""

    video_id: str
    dim: int
    frames: dict[int, tuple[Detection, ...]] = field(default_factory=dict)

    @property
    def keyframes(self) -> tuple[int, ...]:
        return tuple(sorted(self.frames))

    def n_detections(self) -> int:
        return sum(len(dets) for dets in self.frames.values())


@dataclass(frozen=True)
class AssociationConfig:
    """Knobs shared by both association strategies.

    ``iou_weight`` blends box overlap against cosine appearance similarity:
    1 is motion-only, 0 is appearance-only. ``match_threshold`` rejects
    online track/detection pairs costing more; ``merge_threshold`` is the
    minimum affinity for an offline cluster merge; ``max_gap`` bounds both
    online track retirement and the offline linking horizon, in keyframes.
    """

    mode: str
    iou_weight: float
    match_threshold: float = DEFAULT_MATCH_THRESHOLD
    merge_threshold: float = DEFAULT_MERGE_THRESHOLD
    max_gap: int = DEFAULT_MAX_GAP

    def __post_init__(self) -> None:
        if self.mode not in ("online", "offline"):
            raise ValueError(f"mode must be 'online' or 'offline', got {self.mode!r}")
        if not (0.0 <= self.iou_weight <= 1.0):
            raise ValueError("iou_weight must lie in [0, 1]")
        for name in ("match_threshold", "merge_threshold"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.max_gap < 1:
            raise ValueError("max_gap must be >= 1")

    @classmethod
    def online(cls, **overrides) -> "AssociationConfig":
        params = {"mode": "online", "iou_weight": ONLINE_IOU_WEIGHT}
        params.update(overrides)
        return cls(**params)

    @classmethod
    def offline(cls, **overrides) -> "AssociationConfig":
        params = {"mode": "offline", "iou_weight": OFFLINE_IOU_WEIGHT}
        params.update(overrides)
        return cls(**params)


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cosine similarity, clipped to [0, 1]; zero vectors are maximally far."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 1.0
    sim = float(np.dot(u, v)) / (nu * nv)
    return float(min(1.0, max(0.0, 1.0 - sim)))


def _check_dims(stream: DetectionStream) -> None:
    for dets in stream.frames.values():
        for det in dets:
            if det.appearance.ndim != 1 or det.appearance.shape[0] != stream.dim:
                raise ValueError(
                    f"appearance dimensionality {det.appearance.shape} does not "
                    f"match stream dim {stream.dim}"
                )


@dataclass
class _Track:
    track_id: int
    last_box: BoundingBox
    last_seen: int
    appearance_sum: np.ndarray
    count: int

    @property
    def mean_appearance(self) -> np.ndarray:
        return self.appearance_sum / self.count


def track_online(stream: DetectionStream, cfg: AssociationConfig) -> VideoRecord:
    """Sequential association: each keyframe matched only against live tracks.

    Cost between a track and a detection is
    iou_weight * (1 - IoU(last box, detection box))
    + (1 - iou_weight) * cosine distance(track mean embedding, detection embedding);
    per keyframe the optimal assignment is taken and pairs costing more than
    ``match_threshold`` are rejected. Unmatched detections open new
    identities in first-appearance order; tracks unmatched for more than
    ``max_gap`` keyframes retire. Output actions are empty.
    """
    if cfg.mode != "online":
        raise ValueError("track_online requires cfg.mode == 'online'")
    _check_dims(stream)

    tracks: list[_Track] = []
    next_id = 1
    observations: list[ActorObservation] = []
    for keyframe in stream.keyframes:
        detections = stream.frames[keyframe]
        active = [t for t in tracks if keyframe - t.last_seen <= cfg.max_gap]

        assigned: dict[int, int] = {}
        if active and detections:
            cost = np.empty((len(active), len(detections)))
            for i, track in enumerate(active):
                mean_app = track.mean_appearance
                for j, det in enumerate(detections):
                    box_term = 1.0 - iou(track.last_box, det.box)
                    app_term = cosine_distance(mean_app, det.appearance)
                    cost[i, j] = (
                        cfg.iou_weight * box_term + (1.0 - cfg.iou_weight) * app_term
                    )
            solution = solve_assignment(AssignmentProblem(cost=cost), drop_gated=False)
            for i, j in solution.pairs:
                if cost[i, j] <= cfg.match_threshold:
                    assigned[j] = i

        for j, det in enumerate(detections):
            if j in assigned:
                track = active[assigned[j]]
                track.last_box = det.box
                track.last_seen = keyframe
                track.appearance_sum = track.appearance_sum + det.appearance
                track.count += 1
                track_id = track.track_id
            else:
                track_id = next_id
                next_id += 1
                tracks.append(
                    _Track(
                        track_id=track_id,
                        last_box=det.box,
                        last_seen=keyframe,
                        appearance_sum=det.appearance.astype(float).copy(),
                        count=1,
                    )
                )
            observations.append(
                ActorObservation(
                    video_id=stream.video_id,
                    keyframe=keyframe,
                    box=det.box,
                    actor_id=track_id,
                    actions=frozenset(),
                    score=det.score,
                )
            )
    return VideoRecord(video_id=stream.video_id, observations=tuple(observations))


class _UnionFind:
    """Union-find over detections, tracking each cluster's occupied keyframes."""

    def __init__(self, keyframes: list[int]):
        self.parent = list(range(len(keyframes)))
        self.keyframe_sets: list[set[int]] = [{kf} for kf in keyframes]

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def can_merge(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        return not (self.keyframe_sets[ra] & self.keyframe_sets[rb])

    def merge(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if len(self.keyframe_sets[ra]) < len(self.keyframe_sets[rb]):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.keyframe_sets[ra] |= self.keyframe_sets[rb]


def track_offline(stream: DetectionStream, cfg: AssociationConfig) -> VideoRecord:
    """Global association: agglomerate detections by decayed overlap + appearance.

    The affinity between detections at keyframes t1 < t2 with t2 - t1 <= max_gap is
    (1 - w) * appearance similarity + w * IoU, where w = iou_weight * decay
    and decay falls linearly from 1 at gap 1 to 0 at gap max_gap, so motion
    evidence vanishes across long gaps while appearance keeps its say.
    Detection pairs are merged greedily from the highest affinity down,
    skipping merges below ``merge_threshold`` and merges that would put two
    same-keyframe detections in one cluster. Clusters become identities
    ordered by their earliest keyframe.
    """
    if cfg.mode != "offline":
        raise ValueError("track_offline requires cfg.mode == 'offline'")
    _check_dims(stream)

    flat: list[tuple[int, Detection]] = []
    for keyframe in stream.keyframes:
        for det in stream.frames[keyframe]:
            flat.append((keyframe, det))
    if not flat:
        return VideoRecord(video_id=stream.video_id, observations=())

    keyframes = [kf for kf, _ in flat]
    boxes = np.array(
        [[d.box.x1, d.box.y1, d.box.x2, d.box.y2] for _, d in flat], dtype=float
    )
    embeddings = np.array([d.appearance for _, d in flat], dtype=float)
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    unit = embeddings / norms

    frame_index: dict[int, list[int]] = {}
    for idx, kf in enumerate(keyframes):
        frame_index.setdefault(kf, []).append(idx)
    ordered_frames = sorted(frame_index)

    edges: list[tuple[float, int, int]] = []
    for a_pos, kf_a in enumerate(ordered_frames):
        rows = frame_index[kf_a]
        for kf_b in ordered_frames[a_pos + 1 :]:
            gap = kf_b - kf_a
            if gap > cfg.max_gap:
                break
            cols = frame_index[kf_b]
            if cfg.max_gap == 1:
                decay = 1.0
            else:
                decay = (cfg.max_gap - gap) / (cfg.max_gap - 1)
            w = cfg.iou_weight * decay
            overlap = iou_matrix(boxes[rows], boxes[cols])
            similarity = np.clip(unit[rows] @ unit[cols].T, 0.0, 1.0)
            affinity = (1.0 - w) * similarity + w * overlap
            for i, row in enumerate(rows):
                for j, col in enumerate(cols):
                    value = float(affinity[i, j])
                    if value >= cfg.merge_threshold:
                        edges.append((value, row, col))

    edges.sort(key=lambda e: (-e[0], e[1], e[2]))
    clusters = _UnionFind(keyframes)
    for _, a, b in edges:
        if clusters.can_merge(a, b):
            clusters.merge(a, b)

    members: dict[int, list[int]] = {}
    for idx in range(len(flat)):
        members.setdefault(clusters.find(idx), []).append(idx)
    roots = sorted(members, key=lambda root: min(members[root]))

    observations: list[ActorObservation] = []
    for actor_id, root in enumerate(roots, start=1):
        for idx in members[root]:
            keyframe, det = flat[idx]
            observations.append(
                ActorObservation(
                    video_id=stream.video_id,
                    keyframe=keyframe,
                    box=det.box,
                    actor_id=actor_id,
                    actions=frozenset(),
                    score=det.score,
                )
            )
    return VideoRecord(video_id=stream.video_id, observations=tuple(observations))
