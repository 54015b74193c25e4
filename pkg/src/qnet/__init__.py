"""Spatial quantum-internet network models and their photonic overlays."""

from qnet.geometry import RngStream, sample_disk, euclidean_distance, geodesic_distance
from qnet.graph import SpatialGraph
from qnet.fiber import (
    WaxmanParams,
    SoaresParams,
    RozenfeldParams,
    generate_waxman,
    generate_soares,
    generate_rozenfeld,
)
from qnet.overlay import PhotonicParams, sample_overlay
from qnet.metrics import MetricsReport, full_report

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "sample_disk",
    "euclidean_distance",
    "geodesic_distance",
    "SpatialGraph",
    "WaxmanParams",
    "SoaresParams",
    "RozenfeldParams",
    "generate_waxman",
    "generate_soares",
    "generate_rozenfeld",
    "PhotonicParams",
    "sample_overlay",
    "MetricsReport",
    "full_report",
]
