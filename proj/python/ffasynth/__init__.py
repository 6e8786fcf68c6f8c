from ._ffasynth import (
    DataError,
    NumericFault,
    ParameterError,
    compute_saliency,
    gaussian_filter,
    load_png,
    lr_schedule,
    median_filter,
    mse,
    psnr,
    receptive_field,
    save_png,
    score_map_size,
    ssim,
    synth_phantoms,
    translate,
)

__all__ = [
    "DataError",
    "NumericFault",
    "ParameterError",
    "compute_saliency",
    "gaussian_filter",
    "load_png",
    "lr_schedule",
    "median_filter",
    "mse",
    "psnr",
    "receptive_field",
    "save_png",
    "score_map_size",
    "ssim",
    "synth_phantoms",
    "translate",
]
