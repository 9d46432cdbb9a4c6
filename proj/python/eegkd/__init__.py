"""Similarity-keeping knowledge distillation for low-density EEG decoding.

Thin wrapper over the C++ core. The heavy lifting (training loops, studies,
the CLI) lives in the `eegkd` command-line tool; this module exposes the
numeric operations for scripting and validation.
"""

from ._core import (  # noqa: F401
    EegkdError,
    __version__,
    bandpass,
    hkd_loss,
    load_epoched,
    plv,
    resample,
    save_epoched,
    similarity_matrix,
    sk_loss,
    total_loss,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
    zero_center,
)

__all__ = [
    "EegkdError",
    "bandpass",
    "hkd_loss",
    "load_epoched",
    "plv",
    "resample",
    "save_epoched",
    "similarity_matrix",
    "sk_loss",
    "total_loss",
    "wilcoxon_rank_sum",
    "wilcoxon_signed_rank",
    "zero_center",
]
