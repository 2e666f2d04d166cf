"""Regularized (forward/backward/symmetric) stochastic integration and a
stochastic heat equation with anticipating initial data."""
from .cylindrical import (
    VQProcess,
    check_proposition1,
    isometry_diagnostic,
    ito_series_integral,
    rv_cylindrical_forward,
)
from .errors import (
    BlowUpError,
    DimensionError,
    GridMismatchError,
    InvalidParameterError,
    LadderTooFineError,
    ModeDivergenceError,
    OutOfRangeError,
    TruncationInadmissibleError,
)
from .heat_kernel import HeatKernel, apply_kernel, check_lp_bound, kernel_eval
from .paths import (
    CovarianceSpec,
    CylindricalWienerPath,
    SamplePath,
    SpaceGrid,
    TimeGrid,
    make_space_grid,
    make_time_grid,
    replica_seed,
    simulate_brownian,
    simulate_brownian_ensemble,
    simulate_cylindrical,
    simulate_cylindrical_ensemble,
)
from .regularization import (
    EpsilonLadder,
    eps_backward,
    eps_covariation,
    eps_forward,
    eps_symmetric,
    estimate_ucp_limit,
)
from .spde import (
    FieldPath,
    SpdeProblem,
    ZGrid,
    lipschitz_diagnostic,
    lookup,
    solve_auxiliary,
    solve_substitution,
    verify_mild,
)

__version__ = "0.1.0"
