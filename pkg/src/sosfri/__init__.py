"""Sum-of-sincs sub-Nyquist sampling and recovery of pulse streams."""

from .bursts import BurstPlan, PlanReport, segment_and_recover, validate_plan
from .errors import (
    BurstSpacingError,
    ConditioningWarning,
    GridResolutionError,
    KernelDomainError,
    RankDeficientError,
    SosFriError,
    SupportMismatchError,
    WaterfillingError,
)
from .kernels import (
    LowpassKernel,
    PeriodicExtensionKernel,
    SosKernel,
    eval_kernel_freq,
    eval_kernel_time,
    hamming_coefficients,
    make_periodic_extension,
    verify_condition,
)
from .recovery import (
    CoefficientSystem,
    RecoveryResult,
    annihilating_filter,
    annihilating_filter_tls,
    cadzow_denoise,
    deconvolve_pulse,
    extract_coefficients,
    recover,
)
from .sampling import AcquisitionConfig, SampleSet, acquire, add_noise
from .signal import FineGrid, FourierCoeffVector, PulseShape, PulseStream, ctft_pulse, evaluate_stream, exact_fourier_coeffs
from .waterfilling import optimal_coefficients, waterfill

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig",
    "BurstPlan",
    "BurstSpacingError",
    "CoefficientSystem",
    "ConditioningWarning",
    "FineGrid",
    "FourierCoeffVector",
    "GridResolutionError",
    "KernelDomainError",
    "LowpassKernel",
    "PeriodicExtensionKernel",
    "PlanReport",
    "PulseShape",
    "PulseStream",
    "RankDeficientError",
    "RecoveryResult",
    "SampleSet",
    "SosFriError",
    "SosKernel",
    "SupportMismatchError",
    "WaterfillingError",
    "acquire",
    "add_noise",
    "annihilating_filter",
    "annihilating_filter_tls",
    "cadzow_denoise",
    "ctft_pulse",
    "deconvolve_pulse",
    "eval_kernel_freq",
    "eval_kernel_time",
    "evaluate_stream",
    "exact_fourier_coeffs",
    "extract_coefficients",
    "hamming_coefficients",
    "make_periodic_extension",
    "optimal_coefficients",
    "recover",
    "segment_and_recover",
    "validate_plan",
    "verify_condition",
    "waterfill",
]
