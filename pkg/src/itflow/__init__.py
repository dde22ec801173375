"""itflow: imaginary-time operator flow laboratory.

Generates adiabatic Hamiltonians whose instantaneous ground states track
exact imaginary time evolution, by integrating operator-valued ODEs in a
Pauli-string representation, and verifies the trajectories against dense
exact diagonalization at small system size.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    AdiabaticState,
    FlowEngine,
    GeneratorVariant,
    WidthSchedule,
    evolve,
    evolve_iter,
    gauge_term,
    rhs_naive,
    rhs_per_term,
    rk2_substep,
    sweep_step,
)
from .errors import (  # noqa: F401
    ConfigError,
    IntegrationDivergedError,
    ResourceLimitError,
    SchemaError,
)
from .models import (  # noqa: F401
    LocalTerm,
    ModelSpec,
    build_initial_adiabatic,
    build_xxz,
    initial_state,
    parity_operator,
)
from .pauli import (  # noqa: F401
    PauliString,
    PauliSum,
    PhasedString,
    anticommutator,
    commutator,
    commutes_strings,
    hermiticity_residual,
    modified_anticommutator,
    mul_strings,
    prune,
    sum_combine,
    sum_multiply,
)
