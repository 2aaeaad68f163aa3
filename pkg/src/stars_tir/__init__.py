"""Thermal-infrared correlation-filter tracking.

ASTF filter training, EPSR filter refinement, GESR patch super-resolution
and a one-pass evaluation harness.
"""
from .astf import AstfConfig, AstfState, FilterBank, SpatialRegParams, TemporalRegParams, admm_astf
from .boxes import BoundingBox, Frame
from .epsr import EpsrConfig, EpsrState, epsr_run
from .evaluation import EvalReport, SequenceAnnotation, run_ope
from .features import FeatureConfig, extract_features, extract_patch
from .gesr import GesrConfig, gesr_reconstruct
from .tracker import TrackerConfig, TrackResult, TrackerState, init, run_sequence, track

__version__ = "0.1.0"
