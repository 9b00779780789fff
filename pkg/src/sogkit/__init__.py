"""sogkit: sum-of-Gaussians approximation of radial kernels.

Ladder approximants come from de la Vallee-Poussin sums after a change of
variables (`build_sog`); balanced truncation compresses them to a few
Gaussians with modest weights (`reduce`).
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    InvalidInput,
    NumericalFailure,
    SogError,
)
from .numerics import HiPrec, default_precision, workprec  # noqa: E402
from .kernels import (  # noqa: E402
    KernelSpec,
    LocalizedKernel,
    bessel_k,
    custom_kernel,
    ewald_kernel,
    exponential_kernel,
    gaussian_kernel,
    imq_kernel,
    localize,
    make_kernel,
    matern_kernel,
)
from .vp import (  # noqa: E402
    FourierCoeffs,
    SogApproximant,
    VpConfig,
    build_sog,
    evaluate,
    evaluate_chebyshev_form,
    fourier_cosine_coeffs,
    map_t_to_x,
    map_x_to_t,
    vp_weights,
)
from .reduction import (  # noqa: E402
    PoleSystem,
    ReducedSog,
    balanced_truncate,
    evaluate_reduced,
    gramians,
    reduce,
    to_pole_system,
    to_reduced_sog,
)
from .diagnostics import (  # noqa: E402
    ErrorReport,
    SweepResult,
    max_relative_error,
    rate_at_zero,
    sweep_bandwidth,
    sweep_p,
)
