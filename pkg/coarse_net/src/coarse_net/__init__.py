"""Inference adapter emitting roomlayout-format coarse maps."""

from .infer import AdapterConfig, infer_coarse
from .model import TwoBranchNet, init_model, load_model, save_model

__version__ = "0.1.0"
