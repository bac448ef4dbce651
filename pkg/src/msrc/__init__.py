"""Lossless image coding as a lossy reconstruction plus an iteratively masked residual."""

from .codec import EncodeResult, decode_image, encode_image
from .estimator import DEFAULT_PARAMS, EstimatorParams
from .lossy import LossyBackend
from .pixio import Image, generate_synthetic, load_image, save_image
from .sampler import MaskSchedule

__all__ = [
    "DEFAULT_PARAMS",
    "EncodeResult",
    "EstimatorParams",
    "Image",
    "LossyBackend",
    "MaskSchedule",
    "decode_image",
    "encode_image",
    "generate_synthetic",
    "load_image",
    "save_image",
]
