"""Quantum Fisher information toolkit: SLDs, channels and broadcasting checks."""

__version__ = "0.1.0"

from .broadcast import (
    BroadcastReport,
    BroadcastVerdict,
    CloningAuditPoint,
    UniformnessReport,
    UniformVerdict,
    broadcast_report,
    check_reduced_commutativity,
    check_sld_lift,
    check_uniform,
    infinite_broadcast_channel,
    is_qfi_broadcast,
    no_cloning_audit,
    qfi_brute_force_qubit,
    statistical_distance_brute_force_qubit,
)
from .channels import (
    KrausChannel,
    adjoint_apply,
    apply,
    channel_tensor,
    compose,
    hadamard_cnot_broadcaster,
    is_cptp,
    measure_prepare_channel,
    outcome_broadcast_channel,
    pullback,
    pushforward,
)
from .errors import QfiError
from .families import (
    BUILTIN_FAMILIES,
    builtin_classical,
    builtin_equatorial,
    builtin_equatorial_broadcast,
    builtin_piecewise_xyz,
)
from .fisher import (
    POVM,
    ParametricFamily,
    bhattacharyya_angle,
    classical_fisher,
    crb,
    optimal_measurement,
    qfi,
    simulate_estimation,
    sld,
    statistical_distance,
)
from .qmat import DEFAULT_TOL, DensityMatrix, ToleranceConfig, fidelity, partial_trace, tensor

__all__ = [name for name in dir() if not name.startswith("_")]
