"""MIMO OQAM/FBMC preamble design and channel-estimation simulator."""

__version__ = "0.1.0"

from .filterbank import (PrototypeFilter, analyze, design_phydyas, oqam_demap, oqam_map, papr_db,
                         synthesize)
from .interference import (InterferenceTable, build_B, build_table, build_w, full_table,
                           sfb_energy, transmux_matrix, zeta)
from .preamble import Method, PreambleSet, build_fdm_conventional, build_fdm_optimized, build_iam

__all__ = [
    "PrototypeFilter", "analyze", "design_phydyas", "oqam_demap", "oqam_map", "papr_db", "synthesize",
    "InterferenceTable", "build_B", "build_table", "build_w", "full_table", "sfb_energy",
    "transmux_matrix", "zeta", "Method", "PreambleSet", "build_fdm_conventional",
    "build_fdm_optimized", "build_iam",
]
