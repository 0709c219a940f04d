"""Multi-task aesthetic score distribution toolkit (C++ core bindings)."""

from ._core import (
    NUM_LEVELS,
    NUM_TASKS,
    InvalidInputError,
    NumericFailureError,
    SolverReport,
    __version__,
    cdf,
    emd_grad_logits,
    emd_loss,
    frank_wolfe_min_norm,
    mean_score,
    min_norm_2,
    multi_patch,
    pad_and_rescale,
    pcc,
    rmse,
    scc,
    softmax,
    synth_scores,
)

__all__ = [
    "NUM_LEVELS",
    "NUM_TASKS",
    "InvalidInputError",
    "NumericFailureError",
    "SolverReport",
    "__version__",
    "cdf",
    "emd_grad_logits",
    "emd_loss",
    "frank_wolfe_min_norm",
    "mean_score",
    "min_norm_2",
    "multi_patch",
    "pad_and_rescale",
    "pcc",
    "rmse",
    "scc",
    "softmax",
    "synth_scores",
]
