"""Domain adaptation with composable, lazily evaluated hooks."""

from .adapters import DANN, MCD, Classifier
from .containers import Adam, ExponentialLR, LRSchedulers, Models, Optimizers, SGD
from .context import Context, extract, parse_key, render_key
from .tensor import Tensor, no_grad
from .trainer import Trainer
from .validators import AccuracyValidator, BNMValidator

__version__ = "0.1.0"

__all__ = [
    "AccuracyValidator", "Adam", "BNMValidator", "Classifier", "Context", "DANN", "ExponentialLR",
    "LRSchedulers", "MCD", "Models", "Optimizers", "SGD", "Tensor", "Trainer", "extract", "no_grad",
    "parse_key", "render_key",
]
