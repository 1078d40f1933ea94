"""LDPC code design and joint peeling decoding for the two-user
frame-asynchronous binary adder channel."""

__version__ = "0.1.0"

from .degree_model import (
    DegreeDistribution,
    EnsembleSpec,
    Perspective,
    Side,
    design_rate,
    eval_poly,
    edge_to_node,
    load_code,
    node_to_edge,
    reference_code,
    validate,
)
from .density_evolution import DEState, DETrajectory, de_run, de_scalar_step, de_step, feasibility_margin
from .tanner import TannerGraph, error_floor_bound, expurgate, find_deg1_stopping_sets, joint_view, sample_graph
from .decoder import DecodeResult, decode, decode_erasure_pattern
from .seeding import seed_split

__all__ = [
    "DEState",
    "DETrajectory",
    "DecodeResult",
    "DegreeDistribution",
    "EnsembleSpec",
    "Perspective",
    "Side",
    "TannerGraph",
    "de_run",
    "de_scalar_step",
    "de_step",
    "decode",
    "decode_erasure_pattern",
    "design_rate",
    "edge_to_node",
    "error_floor_bound",
    "eval_poly",
    "expurgate",
    "feasibility_margin",
    "find_deg1_stopping_sets",
    "joint_view",
    "load_code",
    "node_to_edge",
    "reference_code",
    "sample_graph",
    "seed_split",
    "validate",
]
