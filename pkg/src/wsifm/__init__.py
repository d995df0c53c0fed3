"""wsifm: trapped-atom interferometry in a vertical lattice near a surface.

Pipeline: configure the trap (potentials), solve the surface-modified
Wannier-Stark states (solver), evaluate probe couplings (couplings),
integrate pulse dynamics (dynamics), assemble and calibrate interferometer
schemes (sequence), and scan fringes (analysis).  The wsifm command-line
tool exposes all of it.
"""

from .analysis import (
    FringeScan,
    analytic_fringe_frequency,
    analytic_phase,
    contrast_vs_well,
    fit_fringe,
    scan_fringes,
)
from .couplings import (
    CouplingTable,
    coupling_element,
    coupling_table,
    microwave_table,
    rabi_vs_depth_scan,
)
from .dynamics import (
    AmplitudeSet,
    Pulse,
    Tone,
    evolve_free,
    evolve_pulse,
    population_of,
    populations,
)
from .errors import (
    CalibrationError,
    ConfigurationError,
    IntegrationError,
    LocalizationError,
    SolverError,
    UsageError,
    WsifmError,
)
from .integrate import integrate_adaptive
from .potentials import (
    GridSpec,
    LatticeConfig,
    SurfacePotentialParams,
    lattice_gravity_potential,
    surface_potential,
    total_potential,
)
from .sequence import (
    CalibrationStore,
    FreeEvolution,
    InitialCondition,
    PulseProgram,
    butterfly_program,
    calibrate_duration,
    calibrate_scheme,
    run_program,
    symmetric_program,
)
from .solver import (
    WSBasis,
    WSState,
    build_hamiltonian,
    load_basis,
    save_basis,
    solve_states,
    well_index_of,
)

__version__ = "0.1.0"
