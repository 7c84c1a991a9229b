"""State-vector simulator for the NV-cavity hyper-CPF and hyper-parity gates."""
from .cavity import (IDEAL, CavityParams, InvalidParameterError, ScatteringCoeffs,
                     preset_realistic, scattering_coeffs, transition_table)
from .circuit import (MeasurementOutcome, ProtocolConfig, ProtocolResult, run_hyper_cpf,
                      run_hyper_parity)
from .hilbert import PhotonInputSpec, StateVector, make_initial_state

__version__ = "0.1.0"

__all__ = [
    "IDEAL", "CavityParams", "InvalidParameterError", "ScatteringCoeffs", "preset_realistic",
    "scattering_coeffs", "transition_table", "MeasurementOutcome", "ProtocolConfig",
    "ProtocolResult", "run_hyper_cpf", "run_hyper_parity", "PhotonInputSpec", "StateVector",
    "make_initial_state",
]
