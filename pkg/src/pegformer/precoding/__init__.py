from .core import (
    DegenerateInputError,
    DomainError,
    HybridPrecoder,
    PowerAllocation,
    Precoder,
    effective_precoder,
    mrt,
    normalize_hybrid,
    normalize_power,
    random_phase_zf,
    se_ratio,
    sum_se,
    sum_se_tensor,
    wmmse,
    zero_forcing,
)
from .structure import structure_recover, structure_recover_precoder

__all__ = [name for name in dir() if not name.startswith("_")]
