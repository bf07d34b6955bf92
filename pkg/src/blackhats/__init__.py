"""Simulation and verification lab for black-hats online minimization problems."""

from .adversaries import (
    AdversaryFailure,
    ConfusionTriple,
    DistinguishingCertificate,
    build_fooling_input,
    find_confusion_triple,
    unbounded_adversary,
)
from .algorithms import (
    OnlineAlgorithm,
    build_algorithm,
    build_bh_partialmod_single_qubit,
    build_constant_baseline,
    build_random_guess,
    compose_bh_quantum,
    compose_bh_randomized,
)
from .analysis import (
    CompetitiveReport,
    bound_c1,
    bound_c2,
    bound_det_unbounded,
    bound_quantum,
    empirical_ratio,
    expected_cost_oracle,
    state_lower_bound,
)
from .automata import (
    DeterministicMachine,
    ExactMode,
    ProbabilisticMachine,
    QuantumMachine,
    QuantumState,
    SampledMode,
    apply_unitary,
    measure,
    reset_work_register,
    run_online,
    step_deterministic,
)
from .functions import (
    FingerprintConfig,
    FunctionSpec,
    build_eq_fingerprint_quantum,
    build_eq_fingerprint_randomized,
    build_partialmod_counter,
    build_partialmod_quantum,
    eq_value,
    measure_error,
    partialmod_value,
)
from .problem import (
    BHInstance,
    BHParams,
    OutputTrace,
    cost,
    decode_stream,
    encode_instance,
    guardian_positions,
    offline_optimum,
)

__version__ = "0.1.0"
