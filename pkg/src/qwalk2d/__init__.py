"""Two-dimensional discrete-time quantum walks driven by trapping coins."""

from .coins import (
    CoinParams,
    SU2Params,
    cclass_coin,
    grover_coin,
    grover_params,
    marked_coin,
    phase_gate,
    su2_matrix,
    swap_gate,
    tensor_product,
    transformed_grover_params,
)
from .lattice import CoinField, Torus, evolve, localized_state, position_distribution, step
from .spectrum import MomentumGrid, band_structure, flat_band_check, gap_widths, spectral_match, splitstep_u, u_tilde

__all__ = [
    "CoinParams",
    "SU2Params",
    "cclass_coin",
    "grover_coin",
    "grover_params",
    "marked_coin",
    "phase_gate",
    "su2_matrix",
    "swap_gate",
    "tensor_product",
    "transformed_grover_params",
    "CoinField",
    "Torus",
    "evolve",
    "localized_state",
    "position_distribution",
    "step",
    "MomentumGrid",
    "band_structure",
    "flat_band_check",
    "gap_widths",
    "spectral_match",
    "splitstep_u",
    "u_tilde",
]

__version__ = "0.1.0"
