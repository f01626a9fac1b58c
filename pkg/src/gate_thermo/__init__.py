"""Average gate fidelity and entropy production of qubit gates under GKSL dynamics."""
from .bounds import BoundResult, RelationInputs, evaluate_relation
from .channel import ChannelRep, average_dissipation_mc, average_fidelity, choi_of_model, state_fidelity
from .dynamics import (
    GateModel,
    HamiltonianProtocol,
    JumpProcess,
    Trajectory,
    interaction_frame,
    lindblad_evolve,
    propagator,
)
from .qcore import HaarSampler, fluctuation, haar_pair_average, haar_state, principal_log_unitary, spectral_norm
from .thermo import activity, energy_change, entropy_production, entropy_rate_spectral, gamma_coefficients

__version__ = "0.1.0"

__all__ = [
    "BoundResult", "ChannelRep", "GateModel", "HaarSampler", "HamiltonianProtocol", "JumpProcess",
    "RelationInputs", "Trajectory", "activity", "average_dissipation_mc", "average_fidelity", "choi_of_model",
    "energy_change", "entropy_production", "entropy_rate_spectral", "evaluate_relation", "fluctuation",
    "gamma_coefficients", "haar_pair_average", "haar_state", "interaction_frame", "lindblad_evolve",
    "principal_log_unitary", "propagator", "spectral_norm", "state_fidelity",
]
