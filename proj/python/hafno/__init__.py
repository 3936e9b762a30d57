"""Hierarchical attention neural operator: C++ core with Python bindings."""

from ._core import (
    HafnoError,
    Model,
    check_fourier_group_commutation,
    evaluate,
    generate,
    gradcheck_suite,
    irfft2,
    nmse,
    read_dataset,
    rfft2,
    run_cli,
    spectral_error_map,
    train,
)

__all__ = [
    "HafnoError",
    "Model",
    "check_fourier_group_commutation",
    "evaluate",
    "generate",
    "gradcheck_suite",
    "irfft2",
    "nmse",
    "read_dataset",
    "rfft2",
    "run_cli",
    "spectral_error_map",
    "train",
]
