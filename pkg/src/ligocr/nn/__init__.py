"""Small numpy CNN engine: layers, training, serialization, gradient checks."""
from .gradcheck import PrecisionError, generic_point, grad_check
from .io import ModelFileError, load_model, read_history, save_model, write_history
from .layers import (Activation, Conv2D, Dense, Dropout, GlobalAveragePool, MaxPool, Residual, ShapeError,
                     Softmax)
from .losses import weighted_cross_entropy
from .model import Model
from .presets import PRESETS, Preset, get_preset, preset_for
from .train import EpochRecord, TrainConfig, TrainedModel, TrainingDiverged, single_threaded, train

__all__ = [
    "Activation", "Conv2D", "Dense", "Dropout", "EpochRecord", "GlobalAveragePool", "MaxPool", "Model",
    "ModelFileError", "PRESETS", "PrecisionError", "Preset", "Residual", "ShapeError", "Softmax",
    "TrainConfig", "TrainedModel", "TrainingDiverged", "generic_point", "get_preset", "grad_check", "load_model", "preset_for",
    "read_history", "save_model", "single_threaded", "train", "weighted_cross_entropy", "write_history",
]
