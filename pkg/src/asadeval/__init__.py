"""Evaluation engine and data-association harness for actor-identified
spatiotemporal action detection.

Scores predictions against ground truth on spatial detection (AP at an IoU
gate), actor identification (IDF1, MT, ML, ID switches), and multi-label
action classification (Hamming loss over gated matched pairs), and ships two
baseline trackers plus a seeded synthetic benchmark comparing them.
"""

from .actions import HammingResult, MatchedPair, MatchedPairSet, hamming_loss, match_pairs
from .association import (
    AssociationConfig,
    Detection,
    DetectionStream,
    cosine_distance,
    track_offline,
    track_online,
)
from .detection import (
    APResult,
    DetectionTally,
    PRCurve,
    average_precision,
    precision_recall,
    tally_frame,
)
from .evaluation import EvalReport, MetricBlock, evaluate_records
from .identity import IdMatchResult, MtMlResult, TrackCoverage, id_switches, idf1, mt_ml
from .io_formats import (
    FormatError,
    parse_annotations,
    parse_detection_stream,
    read_report,
    write_annotations,
    write_detection_stream,
    write_report,
)
from .matching import (
    Assignment,
    AssignmentProblem,
    build_cost_matrix,
    iou,
    solve_assignment,
)
from .model import (
    ActorObservation,
    BoundingBox,
    Tracklet,
    VideoRecord,
    Violation,
    build_tracklets,
    validate_record,
)
from .synthetic import Perturbation, ScenarioSpec, generate, perturb, scenario_preset
from .version import __version__

__all__ = [
    "__version__",
    "ActorObservation",
    "APResult",
    "Assignment",
    "AssignmentProblem",
    "AssociationConfig",
    "BoundingBox",
    "Detection",
    "DetectionStream",
    "DetectionTally",
    "EvalReport",
    "FormatError",
    "HammingResult",
    "IdMatchResult",
    "MatchedPair",
    "MatchedPairSet",
    "MetricBlock",
    "MtMlResult",
    "Perturbation",
    "PRCurve",
    "ScenarioSpec",
    "TrackCoverage",
    "Tracklet",
    "VideoRecord",
    "Violation",
    "average_precision",
    "build_cost_matrix",
    "build_tracklets",
    "cosine_distance",
    "evaluate_records",
    "generate",
    "hamming_loss",
    "id_switches",
    "idf1",
    "iou",
    "match_pairs",
    "mt_ml",
    "parse_annotations",
    "parse_detection_stream",
    "perturb",
    "precision_recall",
    "read_report",
    "scenario_preset",
    "solve_assignment",
    "tally_frame",
    "track_offline",
    "track_online",
    "validate_record",
    "write_annotations",
    "write_detection_stream",
    "write_report",
]
