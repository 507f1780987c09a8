"""Decoherence time scales for quadratic open quantum systems.

Gaussian-channel evolution ``(R_t, D_t)`` for quadratic Hamiltonians with
linear Lindblad operators, the Hormander filtration with its
decoherence-free subspace, and the short-time ``t^(2j+1)`` decay laws of
cat-state coherences.
"""

from .decoherence import (DecayPrediction, DecaySeries, FitResult, coherence_exponent, d_coefficient,
                          decay_series, fit_exponent, hs_norm_cat, leading_taylor, predict)
from .errors import (ConvergenceError, DegenerateDiffusionError, FlowRangeError, IntegrityError, ModelError,
                     ModelFileError, UnsupportedStructureError)
from .hormander import DF, HormanderFiltration, chain_order_map, classify_direction, filtration
from .model import (CatCoherence, SystemModel, build_model, load_model, save_model, scenario_chain,
                    scenario_damped_oscillator, scenario_free_particle, scenario_pq,
                    scenario_quadratic_potential)
from .propagation import (GaussianChannel, GridSpec, QuadraticIntegratorConfig, c_form, c_tilde, channel_at,
                          compose, cp_min_eig, diffusion, flow, propagator_kernel, wigner_field)

__all__ = [
    "CatCoherence", "ConvergenceError", "DF", "DecayPrediction", "DecaySeries", "DegenerateDiffusionError",
    "FitResult", "FlowRangeError", "GaussianChannel", "GridSpec", "HormanderFiltration", "IntegrityError",
    "ModelError", "ModelFileError", "QuadraticIntegratorConfig", "SystemModel", "UnsupportedStructureError",
    "build_model", "c_form", "c_tilde", "chain_order_map", "channel_at", "classify_direction",
    "coherence_exponent", "compose", "cp_min_eig", "d_coefficient", "decay_series", "diffusion",
    "filtration", "fit_exponent", "flow", "hs_norm_cat", "leading_taylor", "load_model", "predict",
    "propagator_kernel", "save_model", "scenario_chain", "scenario_damped_oscillator",
    "scenario_free_particle", "scenario_pq", "scenario_quadratic_potential", "wigner_field",
]
