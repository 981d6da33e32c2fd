"""Simulator for trapped-ion remote entanglement generation with
alternating-handedness excitation pulses and Lindbladian repumping."""

from .angular import HalfInt, clebsch_gordan, wigner3j
from .dynamics import (
    DensityOperator,
    EvolutionResult,
    backend_name,
    evolve,
    lindblad_rhs,
    steady_state_distance,
)
from .excitation import Handedness, PulseChannel, wrong_excitation_probability
from .juggle import (
    REGEstimate,
    ShotConfig,
    estimate_reg,
    fidelity,
    herald_probability,
    reg_rate,
    run_shots,
    steady_state_stats,
)
from .species import (
    SpeciesModel,
    available_species,
    collapse_operators,
    load_species,
    repump_hamiltonian,
)
from .sweep import (
    Scenario,
    SweepResult,
    emit_csv,
    emit_plot,
    ideal_scenario,
    max_rate_at_fidelity,
    realistic_scenario,
    run_sweep,
)

__version__ = "0.1.0"
