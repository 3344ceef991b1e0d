"""ergowatch: webcam-ergonomics monitoring built on landmark streams.

Layers: tracking fixes (jitter suppression, loss gate), feature extraction
(head pose, blinks, yawns), fuzzy recommendations with explicit-feedback
adaptation, and ten-minute session reports.
"""

from .config import PipelineConfig
from .mlkit import LinearModel, MulticlassModel, PcaBasis, least_squares, pca_fit, std_normal, train_linear_svm
from .pipeline import ModelBundle, Pipeline
from .pose import CameraIntrinsics, Pose, PoseClass, RigidTemplate, project, solve_pnp
from .recommend import RuleSet, default_rules
from .session import PeriodStats, SessionTracker
from .stream import LandmarkFrame, StreamScript, parse_frame, serialize_frame, simulate
from .trackfix import JitterModel, TrackState, learn_jitter

__version__ = "0.1.0"
