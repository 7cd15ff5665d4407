"""Resonance theory of a qubit register coupled to a thermal bosonic reservoir."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AmbiguousGroupingError,
    DegenerateBasisError,
    EigensolverError,
    GenericityError,
    IncompleteModelError,
    InvalidInputError,
    QuadratureError,
    QubitBathError,
    ResourceLimitError,
)
from .register import (  # noqa: E402
    EnergyGroup,
    RegisterParams,
    SpectralTable,
    build_spectral_table,
    energy,
    energy_diff,
    group_structure,
)
from .reservoir import (  # noqa: E402
    CouplingScalars,
    FormFactor,
    ThermalEnv,
    angular_density,
    coupling_scalars,
    gamma_plus,
    pv_integral,
)
from .resonance import (  # noqa: E402
    LevelShiftData,
    build_level_shift,
    decoherence_rates,
    gamma0_interacting,
    interacting_shift,
    rate_coefficients,
    site_coefficients,
)
from .oracle import (  # noqa: E402
    NumericLevelShift,
    OracleKernels,
    build_level_shift_numeric,
    crosscheck,
    dual_basis,
    eig_dense_nonhermitian,
)
from .dynamics import (  # noqa: E402
    ReducedState,
    Trajectory,
    ergodic_mean,
    propagate_effective,
    resonance_model,
    resonance_weights,
    scaling_sweep,
)
