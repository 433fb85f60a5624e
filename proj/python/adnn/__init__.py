"""Background subtraction toolkit built on arithmetic distribution layers.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its surface.
"""

from ._core import (
    BINS,
    Model,
    bin_center,
    confusion,
    gaussian_approx,
    generate_synthetic,
    load_model,
    nearest_bin,
    product_backward,
    product_forward,
    re_pr_fm,
    refine,
    rgb_to_lab,
    subtraction_histogram,
    sum_backward,
    sum_forward,
    train,
)

__all__ = [
    "BINS",
    "Model",
    "bin_center",
    "confusion",
    "gaussian_approx",
    "generate_synthetic",
    "load_model",
    "nearest_bin",
    "product_backward",
    "product_forward",
    "re_pr_fm",
    "refine",
    "rgb_to_lab",
    "subtraction_histogram",
    "sum_backward",
    "sum_forward",
    "train",
]
