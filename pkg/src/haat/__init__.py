"""CPU-only super-resolution transformer with a from-scratch autodiff core.

The public surface: tensors and ops (:mod:`haat.autograd`), model
configuration and assembly (:mod:`haat.model`), weight files
(:mod:`haat.weights`), imaging and metrics, and the verification harness.
"""

from . import autograd
from .autograd import GradTape, Tensor, backward, precision
from .errors import (
    BadMagicError,
    ConfigError,
    ContractError,
    DivergenceError,
    EmptyDatasetError,
    HaatError,
    ImageError,
    NumericsError,
    ShapeError,
    TruncatedFileError,
    UnsupportedVersionError,
    WeightFileError,
    WeightMismatchError,
)
from .imaging import (
    ImageBuffer,
    bicubic_resize,
    bicubic_upscaler,
    from_unit_tensor,
    load_image,
    save_image,
    to_unit_tensor,
)
from .metrics import EvalReport, evaluate_folder, psnr, rgb_to_y, ssim
from .model import Haat, ModelConfig, build_model, full_config, toy_config, width_ledger
from .optim import AdamState, adam_step
from .params import ParamStore
from .verification import (
    GradCheckResult,
    TrainCurve,
    finite_diff_grad,
    gradcheck,
    naive_attention_oracle,
    run_gradcheck_suite,
    toy_overfit,
)
from .weights import load_model, load_weights, read_weight_file, save_weights

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BadMagicError",
    "ConfigError",
    "ContractError",
    "DivergenceError",
    "EmptyDatasetError",
    "EvalReport",
    "GradCheckResult",
    "GradTape",
    "Haat",
    "HaatError",
    "ImageBuffer",
    "ImageError",
    "ModelConfig",
    "NumericsError",
    "ParamStore",
    "ShapeError",
    "Tensor",
    "TrainCurve",
    "TruncatedFileError",
    "UnsupportedVersionError",
    "WeightFileError",
    "WeightMismatchError",
    "adam_step",
    "autograd",
    "backward",
    "bicubic_resize",
    "bicubic_upscaler",
    "build_model",
    "evaluate_folder",
    "finite_diff_grad",
    "from_unit_tensor",
    "full_config",
    "gradcheck",
    "load_image",
    "load_model",
    "load_weights",
    "naive_attention_oracle",
    "precision",
    "psnr",
    "read_weight_file",
    "rgb_to_y",
    "run_gradcheck_suite",
    "save_image",
    "save_weights",
    "ssim",
    "to_unit_tensor",
    "toy_config",
    "toy_overfit",
    "width_ledger",
]
