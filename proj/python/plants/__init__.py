"""PLanTS: periodicity-aware self-supervised representations for multivariate time series."""

from plants._core import (
    Model,
    amplitude_spectrum,
    classify_probe,
    dtw_distance,
    gen_hmm,
    kl_identity,
    mxcorr,
    mxcorr_global,
    mxcorr_local,
    periods,
    segment,
    trajectory_pca,
)

__all__ = [
    "Model",
    "amplitude_spectrum",
    "classify_probe",
    "dtw_distance",
    "gen_hmm",
    "kl_identity",
    "mxcorr",
    "mxcorr_global",
    "mxcorr_local",
    "periods",
    "segment",
    "trajectory_pca",
]
