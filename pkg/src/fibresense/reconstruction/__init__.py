from .lsq import LsqEstimate, cauer_fit, invert_model, invert_series, lsq_invert, strain_from_capacitance
from .metrics import Metrics, evaluate, evaluate_columns
from .mlp import (
    JOINT_ARCH,
    JOINT_TRAIN,
    STRAIN_ARCH,
    STRAIN_TRAIN,
    Architecture,
    MLPModel,
    TrainConfig,
    TrainingDiverged,
    mlp_forward,
    mlp_train,
)

__all__ = [
    "Architecture",
    "JOINT_ARCH",
    "JOINT_TRAIN",
    "LsqEstimate",
    "MLPModel",
    "Metrics",
    "STRAIN_ARCH",
    "STRAIN_TRAIN",
    "TrainConfig",
    "TrainingDiverged",
    "cauer_fit",
    "evaluate",
    "evaluate_columns",
    "invert_model",
    "invert_series",
    "lsq_invert",
    "mlp_forward",
    "mlp_train",
    "strain_from_capacitance",
]
