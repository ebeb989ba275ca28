"""Numerical laboratory for conditional-Fourier bosonic noise suppression."""

__version__ = "0.1.0"

from .fock import FockSpace, FockOperator, HybridState
from .codes import BosonicCode, Parity, binomial_code, cat_code, gkp_code, build_code
from .channels import (
    KrausChannel,
    ThermalParams,
    amp_channel,
    depolarizing,
    gdn_channel,
    loss_channel,
    noisy_bell,
    qubit_damping,
    thermal_channel,
)
from .suppression import (
    GateNoise,
    SuppressionConfig,
    Variant,
    average_fidelity,
    average_success,
    closed_form_F_supp,
    closed_form_F_unsupp,
    closed_form_p_succ,
    hybrid_entangled_suppression,
    run_suppression,
    suppression_unitary,
)
from .communication import (
    CommConfig,
    Herald,
    closed_form_p_succ_comm,
    run_communication,
    teleportation_baseline,
    teleportation_simulate,
)
from .optimize import GateSequence, cf_point, optimize_sequence
from .haar import haar_average, haar_sample
