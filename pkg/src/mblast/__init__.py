"""Uplink massive-MIMO detection library.

Implements the M-BLAST iterative detector (soft parallel interference
cancellation plus an Onsager correction of the residual) together with the
classical baselines it is benchmarked against: matched filter, ZF, MMSE,
ZF/MMSE-based successive cancellation (V-BLAST) and plain soft PIC.  A
Monte-Carlo harness reproduces error-rate, convergence, complexity and
throughput comparisons at desk scale.
"""

from .channel import (
    ComplexChannel,
    CsiConfig,
    PowerProfile,
    RealModel,
    UnsupportedLoadError,
    generate_channel,
    generate_powers,
    impair_csi,
    lift_to_real,
    perturb_noise_variance,
    transmit,
)
from .detectors import (
    DetectorInput,
    IterativeState,
    IterativeTrajectory,
    SingularMatrixError,
    SinrEstimationError,
    SoftOutput,
    extract_llr,
    hard_decision,
    m_blast,
    matched_filter,
    measure_sinr,
    mmse_detect,
    sic_detect,
    soft_pic,
    zf_detect,
)
from .coding import ConvCode, conv_encode, viterbi_decode_soft
from .complexity import MacModel, instrumented_ratio, mac_formula
from .montecarlo import ExperimentConfig, run_ber_sweep, run_convergence_study, run_sinr_study
from .throughput import SinrCdf, percentile_sinr, relative_gain, shannon_rate

__version__ = "0.1.0"

__all__ = [
    "ComplexChannel",
    "ConvCode",
    "CsiConfig",
    "DetectorInput",
    "ExperimentConfig",
    "IterativeState",
    "IterativeTrajectory",
    "MacModel",
    "PowerProfile",
    "RealModel",
    "SingularMatrixError",
    "SinrCdf",
    "SinrEstimationError",
    "SoftOutput",
    "UnsupportedLoadError",
    "conv_encode",
    "extract_llr",
    "generate_channel",
    "generate_powers",
    "hard_decision",
    "impair_csi",
    "instrumented_ratio",
    "lift_to_real",
    "m_blast",
    "mac_formula",
    "matched_filter",
    "measure_sinr",
    "mmse_detect",
    "percentile_sinr",
    "perturb_noise_variance",
    "relative_gain",
    "run_ber_sweep",
    "run_convergence_study",
    "run_sinr_study",
    "shannon_rate",
    "sic_detect",
    "soft_pic",
    "transmit",
    "viterbi_decode_soft",
    "zf_detect",
]
