"""Spectral Monte-Carlo simulator for the drifted rearranged stochastic heat
equation: a diffusion on one-dimensional probability laws represented by
symmetric non-increasing quantile fields on the circle."""

__version__ = "0.1.0"

from .drift import (
    AssumptionReport,
    DoubleWellDrift,
    DriftSpec,
    InteractionDrift,
    InteractionKernel,
    LinearDrift,
    WassersteinQuadraticDrift,
    ZeroDrift,
    check_assumptions,
    eval_drift,
    eval_potential,
    load_kernel_csv,
)
from .errors import (
    BlowUpError,
    ConfigError,
    DissipativityError,
    InvalidInputError,
    InvalidParameterError,
    KernelRangeError,
    RsheError,
    StepSizeError,
    SymmetryError,
    UnsupportedVariantError,
)
from .experiments import (
    CouplingReport,
    ErgodicityReport,
    ExitTimeReport,
    run_coupling,
    run_exit_times,
    run_lyapunov,
)
from .grid import (
    GridField,
    GridSpec,
    constant_field,
    inner,
    mean_value,
    norm_l2,
    norm_l2_sq,
    norm_lp,
    sample_cosine,
    symmetrize,
    symmetry_defect,
)
from .integrator import (
    EnergyLedger,
    SimState,
    StepConfig,
    energy_residual,
    simulate,
    step,
)
from .measures import (
    EmpiricalMeasure,
    normal_quantile_field,
    quantile_of,
    samples_to_quantile,
    w2,
)
from .noise import (
    MetastableSpectrum,
    NoiseIncrement,
    NoiseSpectrum,
    PowerLawSpectrum,
    c_lambda,
    eigenvalues,
    replica_rng,
    sample_increment,
)
from .rearrange import RearrangeReport, is_admissible, random_admissible, rearrange
from .spectral import (
    SpectralField,
    grad_norm_sq,
    heat_propagate,
    random_symmetric,
    to_grid,
    to_spectral,
)
