"""Online action detection from 3D skeleton streams with bags of gesturelets."""

from .classifier import ClassModel, learn_threshold, score_histogram, train_linear
from .codebook import Codebook, build_histogram, soft_assign, train_codebook
from .descriptor import DescriptorParams, compute_descriptor, descriptor_matrix
from .detector import (
    OnlineDetector,
    ScoreArray,
    SmoothingParams,
    detect_offline,
    detect_online,
    frame_scores,
    kadane_max_subarray,
    smooth,
)
from .evaluation import EvalConfig, evaluate, fscore, mean_ap, overlap_ratio
from .skeleton import (
    Annotation,
    DetectionEvent,
    SkeletonFrame,
    SkeletonSequence,
    SkeletonTopology,
    validate_sequence,
)

__version__ = "0.1.0"
