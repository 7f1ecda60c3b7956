"""Training, evaluation, sweeps, ablations, and result files."""
from .train import (
    ResultRow,
    TrainConfig,
    TrainResult,
    evaluate,
    evaluate_wmmse,
    hybrid_floor_se,
    model_se,
    reference_se,
    train,
)
