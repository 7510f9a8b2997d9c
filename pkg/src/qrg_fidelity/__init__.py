"""Ground-state fidelity of the ITF and XXZ chains from quantum RG recursions."""
from .errors import (DegeneracyError, DomainError, FitError, InsufficientPointsError,
                     NonPositiveTransformError, PoleError, QrgError, RegimeNotSpannedError,
                     SizeGuardError)
from .itf import (ItfBlockState, ItfCouplings, ItfSusceptibility, FixedPoint, itf_block_overlap,
                  itf_block_state, itf_classify_fixed_point, itf_d_factor, itf_fidelity,
                  itf_fidelity_thermo_limit, itf_pair_fidelity, itf_rg_step, itf_susceptibility)
from .results import FidelityResult, RgLevel, RgTrace
from .xxz import (Divergence, XxzBlockState, XxzCouplings, xxz_block_state, xxz_fidelity,
                  xxz_omega, xxz_pair_fidelity, xxz_rg_step, xxz_susceptibility, xxz_trace)

__version__ = "0.1.0"

__all__ = [
    "DegeneracyError", "DomainError", "FitError", "InsufficientPointsError",
    "NonPositiveTransformError", "PoleError", "QrgError", "RegimeNotSpannedError",
    "SizeGuardError",
    "ItfBlockState", "ItfCouplings", "ItfSusceptibility", "FixedPoint", "itf_block_overlap",
    "itf_block_state", "itf_classify_fixed_point", "itf_d_factor", "itf_fidelity",
    "itf_fidelity_thermo_limit", "itf_pair_fidelity", "itf_rg_step", "itf_susceptibility",
    "FidelityResult", "RgLevel", "RgTrace",
    "Divergence", "XxzBlockState", "XxzCouplings", "xxz_block_state", "xxz_fidelity",
    "xxz_omega", "xxz_pair_fidelity", "xxz_rg_step", "xxz_susceptibility", "xxz_trace",
]
