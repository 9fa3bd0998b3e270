"""Learned lossy point cloud geometry codec."""

from ._core import (
    DpccError,
    Model,
    __version__,
    bd_psnr,
    bd_rate,
    chamfer_distance,
    compute_bpp,
    d1_psnr,
    decode,
    encode,
    evaluate,
    load_checkpoint,
    load_weights,
    make_model,
    save_checkpoint,
    train,
)

__all__ = [
    "DpccError",
    "Model",
    "__version__",
    "bd_psnr",
    "bd_rate",
    "chamfer_distance",
    "compute_bpp",
    "d1_psnr",
    "decode",
    "encode",
    "evaluate",
    "load_checkpoint",
    "load_weights",
    "make_model",
    "save_checkpoint",
    "train",
]
