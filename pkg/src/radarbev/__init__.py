"""Prior-filtered radar association and BEV radar feature rasterization."""

from ._accel import backend_name
from .association import Association, MatchConfig, associate
from .feature import RadarFeatureMap, concat_descriptor, rasterize, read_feature_map, write_feature_map
from .geometry import BevBox, EgoPose, GridSpec, iou, transform_point, world_to_cell
from .ingest import RadarPoint, SweepBundle, accumulate_sweeps, gate_by_depth, parse_sweep
from .priors import ClassPolicy, PriorBox, apply_class_policy, dedup_priors, load_priors

__version__ = "0.1.0"
