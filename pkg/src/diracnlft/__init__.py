"""Nonlinear Fourier analysis of real Dirac systems on the half-line.

Exact piecewise-constant transfer matrices with tracked determinants, the
Hermite-Biehler pair (E, Etilde) and its inner function theta, scattering
coefficients a/b/r with an energy (Parseval) check, resonance location and
tracking in the upper half-plane, reproducing-kernel universality probes,
and long-horizon convergence experiments.
"""

from .errors import (
    AliasingError,
    BoundaryNearZeroError,
    DerivativeDegenerateError,
    DiracNLFTError,
    DomainTooSmallError,
    FitError,
    InstabilityError,
    InvariantViolation,
    NumericalError,
    OverflowRangeError,
    PoleProximityError,
    PreconditionError,
    QuadratureError,
    RangeError,
    UsageError,
    ValidationError,
)
from .potential import (
    PotentialSpec,
    SampledPotential,
    SigmaInterval,
    cell_cover,
    integral,
    l2_norm_sq,
    load_potential,
    restrict,
    sample,
    save_potential,
    sigma_intervals,
)
from .propagator import (
    AugmentedTransfer,
    BatchTransfer,
    HermiteBiehlerPair,
    TransferMatrix,
    cell_propagator,
    hermite_biehler,
    theta,
    theta_derivs,
    transfer,
    transfer_batch,
    transfer_checkpoints,
    transfer_derivative,
    transfer_derivative_batch,
)
from .riccati import arg_mod_E_evolve, riccati_evolve_moebius, riccati_evolve_rk
from .nlft import (
    ParsevalReport,
    ScatteringData,
    arg_a_branch,
    hilbert_consistency,
    hilbert_transform,
    interval_scattering,
    interval_scattering_grid,
    nlft_forward,
    parseval_check,
)
from .resonance import (
    Box,
    EigenTrack,
    HorizonSample,
    MotionSegment,
    ResonanceTrack,
    classify_track,
    find_zeros,
    track_eigenvalue,
    track_resonance,
    zero_free_horizon,
)
from .debranges import (
    KernelProbe,
    SineFit,
    estimate_w,
    gamma_factor,
    hb_exp_fit,
    hb_sine_fit,
    kernel_K,
    kernel_probe,
    kernel_sinc,
    universality_gap,
)
from .experiments import (
    ConvergenceTable,
    LimitReport,
    box_sample_points,
    limit_identities,
    run_convergence,
)

__version__ = "0.1.0"
