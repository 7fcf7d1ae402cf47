"""Energy-constrained operator norms, channel norms and channel distances on truncated spaces."""

__version__ = "0.1.0"

from .channel import (
    Dilation,
    KrausMap,
    TwoOperatorMap,
    amplitude_damping,
    annihilation,
    dephasing_channel,
    identity_channel,
    kraus_from_stinespring,
    random_kraus,
    reset_channel,
    stinespring_from_kraus,
)
from .distance import (
    AscentConfig,
    DistanceReport,
    bures,
    bures_e_distance,
    common_dilation_optimize,
    ecd_distance,
    ecd_norm_cp,
    fidelity,
    ksw_chain,
)
from .energy import DensityOperator, EnergyObservable, number_observable, sample_constrained
from .enorm import ENormCertificate, e_norm, e_norm_graded
from .truncate import TruncationStudy, bound30_check, tail_norm_check, truncate_map

__all__ = [
    "AscentConfig",
    "DensityOperator",
    "Dilation",
    "DistanceReport",
    "ENormCertificate",
    "EnergyObservable",
    "KrausMap",
    "TruncationStudy",
    "TwoOperatorMap",
    "amplitude_damping",
    "annihilation",
    "bound30_check",
    "bures",
    "bures_e_distance",
    "common_dilation_optimize",
    "dephasing_channel",
    "e_norm",
    "e_norm_graded",
    "ecd_distance",
    "ecd_norm_cp",
    "fidelity",
    "identity_channel",
    "kraus_from_stinespring",
    "ksw_chain",
    "number_observable",
    "random_kraus",
    "reset_channel",
    "sample_constrained",
    "stinespring_from_kraus",
    "tail_norm_check",
    "truncate_map",
]
