"""Multivariate log-Gaussian Cox process case-control models."""

from ._core import (  # noqa: F401
    ConsistencyError,
    InputError,
    NumericalError,
    Point,
    PointPattern,
    Window,
    fit,
    kernel_intensity,
    matern_cov,
    parse_window,
    pattern_csv,
    read_pattern,
    read_window,
    run,
    sha256,
    simulate,
    synthetic_study_area,
)

__version__ = "0.1.0"
