"""Spectral numerics for the chiral model of twisted multilayer graphene."""
from .lattice import (
    OMEGA,
    G1,
    G2,
    LatticePoint,
    DualPoint,
    SectorLabel,
    MomentumBasis,
    OperatorMatrix,
    build_basis,
    pairing,
    rotation_matrix,
    sector_projector,
)
from .operators import ModelConfig, build_Dn, build_Hk, build_Vn, build_potential

__version__ = "0.1.0"
from .spectra import SpectralSet, birman_schwinger_set, dirac_set, magic_set, flat_band_residual, projector_rank
from .bands import KPath, BandTable, band_values, band_path, crossing_fit, classify
from .jordan import jordan_chain, gauge_fix, cone_coefficients, effective_block
