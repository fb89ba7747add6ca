"""Small-deviation asymptotics of weighted L2 norms of stationary Gaussian
processes: closed-form spectral constants, operator eigenvalue numerics, a
saddle-point oracle, and Monte Carlo, cross-validating each other."""

from .deviations import (
    ChernoffBound,
    McEstimate,
    SmallBallPrediction,
    b_r,
    chernoff_logprob,
    constant_continuous_proper,
    constant_continuous_real,
    constant_fou,
    constant_periodic_proper,
    constant_periodic_real,
    constant_sequence,
    logprob_from_fit,
    mc_smallball,
    prediction_from_fit,
    rescale_epsilon,
)
from .eigensolve import (
    EigenSequence,
    PlateauEstimate,
    PowerLawFit,
    delta_theta,
    eigenvalues,
    fit_power_law,
    proper_doubling,
    synthetic_sequence,
)
from .errors import (
    DivergenceError,
    InputError,
    NonConvergenceError,
    NumericalError,
    OperatorError,
    SmallBallError,
    SpectrumError,
    WeightError,
)
from .operators import (
    OperatorMatrix,
    assemble_nystrom,
    assemble_periodic,
    assemble_sequence,
    kernel_from_discrete,
)
from .sampling import (
    PathSample,
    batch_norms,
    sample_proper_periodic,
    sample_real_periodic,
    weighted_norm_sq,
)
from .spectra import (
    ContinuousSpectrum,
    DiscreteSpectrum,
    TailDescriptor,
    bogoliubov_spectrum,
    discrete_total_mass,
    fou_density_step,
    fou_spectrum,
    fou_tail,
    integrated_bridge_spectrum,
    model_from_json,
)
from .weights import (
    Weight,
    constant_weight,
    exponential_weight,
    fourier_coefficients_sqrt_q,
    indicator_weight,
    integral_q_power,
    log_pullback_weight,
    q_r_seminorm,
    scale_weight,
    tabulated_weight,
    weight_from_json,
)

__version__ = "0.1.0"
