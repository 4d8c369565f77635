"""Continuous turn-taking prediction with multiscale recurrent networks."""

from turntaking._core import (
    FRAME_MS,
    HIDDEN_BUDGET,
    HORIZON,
    ConfigurationError,
    DataFormatError,
    NumericError,
    compare,
    evaluate,
    find_onsets,
    find_pauses,
    generate,
    gradient_check,
    grid_search,
    majority_f1,
    train,
    weighted_f1,
    welch_ttest,
)

__all__ = [
    "FRAME_MS",
    "HIDDEN_BUDGET",
    "HORIZON",
    "ConfigurationError",
    "DataFormatError",
    "NumericError",
    "compare",
    "evaluate",
    "find_onsets",
    "find_pauses",
    "generate",
    "gradient_check",
    "grid_search",
    "majority_f1",
    "train",
    "weighted_f1",
    "welch_ttest",
]

__version__ = "0.1.0"
