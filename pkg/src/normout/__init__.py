"""Normalized-output manifold learning and collapse diagnostics."""

from .datasets import (PointCloud, gen_fishbowl, gen_grid, gen_noisy_strip, gen_swissroll,
                       gen_uniform_strip, load_csv, save_csv)
from .diagnostics import DiagnosticsReport, diagnose
from .embedding import EmbeddingResult, embed
from .neighbors import NeighborhoodIndex, build_knn, build_rball, is_connected
from .weights import ALGORITHMS, LocalWeightSet, build_weights

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "DiagnosticsReport", "EmbeddingResult", "LocalWeightSet",
    "NeighborhoodIndex", "PointCloud", "build_knn", "build_rball", "build_weights",
    "diagnose", "embed", "gen_fishbowl", "gen_grid", "gen_noisy_strip", "gen_swissroll",
    "gen_uniform_strip", "is_connected", "load_csv", "save_csv",
]
