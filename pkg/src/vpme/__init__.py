"""Ion kinetics on the torus with massless thermalized electrons.

The package couples a particle discretization of the phase-space
transport equation to a nonlinear elliptic field solve, and ships the
optimal-transport machinery used to compare runs: exact and entropic
couplings, the logarithmically weighted kinetic distance, and the
envelope monitors that track how perturbations propagate as the
screening parameter epsilon shrinks.
"""

__version__ = "0.1.0"

from .dynamics import (
    SimParams,
    TrajectorySet,
    b_function,
    b_inverse_bound,
    gather_field,
    growth_envelope,
    q_increment,
    q_star,
    simulate,
    step,
    verify_2d_growth,
    verify_density_bound,
)
from .errors import VpmeError
from .field import (
    FieldSplit1D,
    PotentialField,
    field_log_lipschitz_modulus,
    solve_poisson_boltzmann,
    split_field_1d,
    verify_1d_regular_stability,
    verify_field_stability,
    verify_lp_bound,
)
from .geometry import torus_displacement, torus_distance, wrap, wrap_coords
from .harness import (
    ExperimentConfig,
    InitialDataSpec,
    load_config,
    make_initial_data,
    perturb,
    run_quasineutral_cauchy,
    run_stability_experiment,
    verify_initial_energy,
)
from .measures import (
    GridDensity,
    ParticleEnsemble,
    analytic_norm,
    deposit_density,
    energy,
    moment,
    penrose_functional,
    penrose_sweep,
)
from .ot import (
    KineticDistanceState,
    TransportPlan,
    circle_w1,
    kinetic_distance,
    stability_monitor_2d,
    verify_wp_inequalities,
    wasserstein,
    weak_strong_bound_1d,
)
from .records import RunRecord, read_ensemble, write_ensemble

__all__ = [
    "__version__", "VpmeError",
    "SimParams", "TrajectorySet", "simulate", "step", "gather_field",
    "q_star", "q_increment", "growth_envelope", "b_function",
    "b_inverse_bound", "verify_density_bound", "verify_2d_growth",
    "PotentialField", "FieldSplit1D", "solve_poisson_boltzmann",
    "split_field_1d", "verify_lp_bound", "verify_field_stability",
    "verify_1d_regular_stability", "field_log_lipschitz_modulus",
    "torus_distance", "torus_displacement", "wrap", "wrap_coords",
    "ExperimentConfig", "InitialDataSpec", "load_config",
    "make_initial_data", "perturb", "run_stability_experiment",
    "run_quasineutral_cauchy", "verify_initial_energy",
    "ParticleEnsemble", "GridDensity", "deposit_density", "moment",
    "energy", "analytic_norm", "penrose_functional", "penrose_sweep",
    "TransportPlan", "KineticDistanceState", "wasserstein", "circle_w1",
    "verify_wp_inequalities", "kinetic_distance", "stability_monitor_2d",
    "weak_strong_bound_1d",
    "RunRecord", "read_ensemble", "write_ensemble",
]
