"""Online streaming algorithms for black-hats instances.

Every algorithm implements the same branching-step protocol as the machine
programs in :mod:`blackhats.automata`: consume one symbol, optionally emit a
guardian answer when the symbol is a separator.  The guess-and-XOR
compositions guess the first answer uniformly, then run a per-block
subroutine machine and fold its result into the carried answer bit; the
final block is consumed but skipped (identity transitions), since the
carried bit already determines every remaining answer.
"""

from __future__ import annotations

import hashlib
import math
from typing import Mapping, Optional, Sequence

import numpy as np

from .automata import (
    PRUNE_EPS,
    DeterministicMachine,
    ExactMode,
    ProbabilisticMachine,
    QuantumMachine,
    exact_run,
    sample_run,
    trial_rng,
)
from .functions import FunctionSpec, build_partialmod_counter, build_partialmod_quantum
from .problem import SEPARATOR, BHParams


class OnlineAlgorithm:
    """Base protocol: kind, reported memory, and a branching step function."""

    kind = "deterministic"
    algorithm_id = "?"
    memory_bits: float = 0.0
    block_error_rates: Optional[tuple[float, ...]] = None

    def initial_config(self):
        raise NotImplementedError

    def step(self, config, symbol, position):
        raise NotImplementedError


def _per_block_oracles(oracles, params: BHParams, expect_cls) -> tuple:
    """Resolve a machine family to one subroutine per processed block.

    Accepts a single machine, a mapping keyed by block length, or an explicit
    sequence (length k-1 or k; a k-th entry is ignored because the last block
    is skipped).  Machines that declare an input length must match the block
    they are assigned to.
    """
    k = params.k
    if isinstance(oracles, expect_cls):
        resolved = [oracles] * (k - 1)
    elif isinstance(oracles, Mapping):
        try:
            resolved = [oracles[params.m[i]] for i in range(k - 1)]
        except KeyError as exc:
            raise ValueError(f"no subroutine machine for block length {exc}") from exc
    else:
        seq = list(oracles)
        if len(seq) not in (k - 1, k):
            raise ValueError(f"need {k - 1} subroutine machines, got {len(seq)}")
        resolved = seq[:k - 1]
    for i, machine in enumerate(resolved):
        if not isinstance(machine, expect_cls):
            raise TypeError(f"subroutine {i} is not a {expect_cls.__name__}")
        if machine.input_length is not None and machine.input_length != params.m[i]:
            raise ValueError(
                f"block {i} has length {params.m[i]} but its machine expects "
                f"{machine.input_length}")
    return tuple(resolved)


class ConstantAlgorithm(OnlineAlgorithm):
    """Outputs a fixed bit at every guardian; the weakest deterministic baseline."""

    def __init__(self, bit: int):
        self.bit = int(bit)
        self.algorithm_id = f"const{self.bit}"

    def initial_config(self):
        return ()

    def step(self, config, symbol, position):
        out = self.bit if symbol == SEPARATOR else None
        return ((1.0, config, out),)


class RandomGuessAlgorithm(OnlineAlgorithm):
    """Every guardian answer is an independent fair coin."""

    kind = "randomized"
    algorithm_id = "guess"
    memory_bits = 1.0

    def __init__(self, params: BHParams):
        self.params = params

    def initial_config(self):
        return ()

    def step(self, config, symbol, position):
        if symbol != SEPARATOR:
            return ((1.0, config, None),)
        return ((0.5, config, 0), (0.5, config, 1))

    def sample_answer_matrix(self, trials: int, seed: int) -> np.ndarray:
        """Vectorized sampler: one substream per trial, k coin flips each."""
        k = self.params.k
        out = np.empty((trials, k), dtype=np.int64)
        for i in range(trials):
            rng = trial_rng(seed, i)
            out[i] = (rng.random(k) >= 0.5).astype(np.int64)
        return out


class RandomizedGuessXor(OnlineAlgorithm):
    """Guess the first answer, then XOR each block subroutine's result into it.

    Between separators the current subroutine's state distribution is
    propagated without branching; its output is read (and branched on) only
    when the next separator arrives, after which the subroutine is discarded.
    """

    kind = "randomized"

    def __init__(self, oracles, params: BHParams):
        self.params = params
        self.oracles = _per_block_oracles(oracles, params, ProbabilisticMachine)
        states = max((o.n_states for o in self.oracles), default=1)
        self.memory_bits = math.ceil(math.log2(max(states, 2))) + 1
        rates = [o.error_rate for o in self.oracles]
        self.block_error_rates = tuple(r if r is not None else float("nan") for r in rates)
        self.algorithm_id = "bh-rand"

    def initial_config(self):
        # (separators seen, carried answer bit, live subroutine distribution)
        return (0, 0, None)

    def step(self, config, symbol, position):
        seen, p, dist = config
        if symbol != SEPARATOR:
            if dist is not None:
                dist = self.oracles[seen - 1].evolve(dist, symbol)
            return ((1.0, (seen, p, dist), None),)
        j = seen + 1
        k = self.params.k
        if j == 1:
            fresh = self.oracles[0].initial if k > 1 else None
            return ((0.5, (1, 0, fresh), 0), (0.5, (1, 1, fresh), 1))
        branches = []
        masses = self.oracles[j - 2].output_masses(dist)
        fresh = self.oracles[j - 1].initial if j <= k - 1 else None
        for out in sorted(masses):
            mass = masses[out]
            if mass <= PRUNE_EPS:
                continue
            answer = p ^ (out & 1)
            branches.append((mass, (j, answer, fresh), answer))
        return tuple(branches)


def _coupling_permutation(oracle: QuantumMachine) -> np.ndarray:
    """Permutation XOR-ing the subroutine's result map into the answer qubit.

    Basis layout is (work register, answer qubit), answer last; for machines
    whose result is a single qubit's value this is a plain controlled-NOT.
    """
    dim = oracle.dim * 2
    perm = np.empty(dim, dtype=np.int64)
    for idx in range(dim):
        u, a = idx >> 1, idx & 1
        perm[idx] = (u << 1) | (a ^ (oracle.result[u] & 1))
    return perm


class QuantumGuessXor(OnlineAlgorithm):
    """Quantum variant: the answer lives in one extra qubit.

    The answer qubit starts uniform and is measured for the first answer.
    After each processed block the subroutine's result is folded into the
    answer qubit by a result-controlled NOT, the answer qubit is measured and
    emitted, and the work register is measured, reset to |0..0> and re-prepared
    for the next block.
    """

    kind = "quantum"

    def __init__(self, oracles, params: BHParams):
        self.params = params
        self.oracles = _per_block_oracles(oracles, params, QuantumMachine)
        work = max((o.n_qubits for o in self.oracles), default=1)
        if any(o.n_qubits != work for o in self.oracles):
            raise ValueError("all subroutine machines must use the same register size")
        self.work_qubits = work
        self.memory_bits = work + 1
        rates = [o.error_rate for o in self.oracles]
        self.block_error_rates = tuple(r if r is not None else float("nan") for r in rates)
        self.algorithm_id = "bh-quantum"
        self._couplings = [_coupling_permutation(o) for o in self.oracles]

    def _reset_joint(self, oracle: Optional[QuantumMachine], answer_bit: int) -> np.ndarray:
        """Joint state |work initial> x |answer_bit>."""
        dim = (1 << self.work_qubits) * 2
        amps = np.zeros(dim, dtype=complex)
        if oracle is None:
            amps[answer_bit] = 1.0
        else:
            amps[answer_bit::2] = oracle.initial
        return amps

    def initial_config(self):
        # (separators seen, position inside current block, joint amplitudes)
        dim = (1 << self.work_qubits) * 2
        amps = np.zeros(dim, dtype=complex)
        amps[0] = amps[1] = 1.0 / math.sqrt(2.0)
        return (0, 0, amps)

    def step(self, config, symbol, position):
        seen, pos, amps = config
        k = self.params.k
        if symbol != SEPARATOR:
            if 1 <= seen <= k - 1:
                u = self.oracles[seen - 1].unitary_for(pos, symbol)
                amps = (np.kron(u, np.eye(2)) @ amps)
                pos += 1
            return ((1.0, (seen, pos, amps), None),)
        j = seen + 1
        if j == 1:
            masses = (float(np.sum(np.abs(amps[0::2]) ** 2)),
                      float(np.sum(np.abs(amps[1::2]) ** 2)))
            branches = []
            for a, p in enumerate(masses):
                if p <= PRUNE_EPS:
                    continue
                nxt = self._reset_joint(self.oracles[0] if k > 1 else None, a)
                branches.append((p, (1, 0, nxt), a))
            return tuple(branches)
        oracle = self.oracles[j - 2]
        if oracle.pre_measure_unitary is not None:
            amps = np.kron(oracle.pre_measure_unitary, np.eye(2)) @ amps
        amps = amps[self._couplings[j - 2]]
        masses = (float(np.sum(np.abs(amps[0::2]) ** 2)),
                  float(np.sum(np.abs(amps[1::2]) ** 2)))
        nxt_oracle = self.oracles[j - 1] if j <= k - 1 else None
        branches = []
        for a, p in enumerate(masses):
            if p <= PRUNE_EPS:
                continue
            branches.append((p, (j, 0, self._reset_joint(nxt_oracle, a)), a))
        return tuple(branches)


class SingleQubitRotationChain(OnlineAlgorithm):
    """One-qubit algorithm for PartialMOD instances.

    Start in the uniform superposition; measure at the first separator for
    the guessed answer, rotate by pi/2^(beta+1) per one-symbol inside each
    processed block, and measure again at each following separator,
    continuing from the collapsed state.  Feasible blocks rotate by exact
    multiples of pi/2, so every subsequent answer deterministically carries
    the block parity.
    """

    kind = "quantum"
    memory_bits = 1

    def __init__(self, params: BHParams, beta: int):
        self.params = params
        self.beta = beta
        angle = math.pi / (1 << (beta + 1))
        c, s = math.cos(angle), math.sin(angle)
        self.rot = np.array([[c, -s], [s, c]], dtype=complex)
        self.block_error_rates = tuple(0.0 for _ in range(params.k - 1))
        self.algorithm_id = "bh-pm-1qubit"

    def initial_config(self):
        return (0, np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0))

    def step(self, config, symbol, position):
        seen, amps = config
        k = self.params.k
        if symbol != SEPARATOR:
            if symbol == 1 and 1 <= seen <= k - 1:
                amps = self.rot @ amps
            return ((1.0, (seen, amps), None),)
        masses = (float(abs(amps[0]) ** 2), float(abs(amps[1]) ** 2))
        branches = []
        for a, p in enumerate(masses):
            if p <= PRUNE_EPS:
                continue
            collapsed = np.zeros(2, dtype=complex)
            collapsed[a] = amps[a] / math.sqrt(p)
            branches.append((p, (seen + 1, collapsed), a))
        return tuple(branches)


class MachineAlgorithm(OnlineAlgorithm):
    """A plain deterministic machine driven as an online algorithm."""

    def __init__(self, machine: DeterministicMachine, algorithm_id: str = "machine"):
        self.machine = machine
        self.memory_bits = math.log2(max(machine.n_states, 2))
        self.algorithm_id = algorithm_id

    def initial_config(self):
        return self.machine.initial

    def step(self, config, symbol, position):
        nxt, out = self.machine.step(config, symbol)
        return ((1.0, nxt, out if symbol == SEPARATOR else None),)


class FullMemoryChain(OnlineAlgorithm):
    """Reference algorithm that actually computes the function per block.

    Answers 0 at the first guardian and XORs each block's true function value
    into the carried answer afterwards.  Its guardian answers reveal the
    function value of the preceding block, so no confusion triple exists
    against it.
    """

    def __init__(self, function: FunctionSpec, params: BHParams):
        self.function = function
        self.params = params
        self.algorithm_id = "xor-chain"
        self.memory_bits = float(max(params.m) + 1)

    def initial_config(self):
        # (separators seen, carried answer, bits of the current block)
        return (0, 0, ())

    def step(self, config, symbol, position):
        seen, p, bits = config
        if symbol != SEPARATOR:
            return ((1.0, (seen, p, bits + (symbol,)), None),)
        if seen == 0:
            return ((1.0, (1, 0, ()), 0),)
        value = self.function.value("".join(map(str, bits)))
        if value is None:
            value = 0  # off-domain blocks carry no constraint
        answer = p ^ value
        return ((1.0, (seen + 1, answer, ()), answer),)


class HistoryHashAlgorithm(OnlineAlgorithm):
    """Deterministic but history-dependent: answers hash the whole prefix.

    Stands in for an unbounded-memory adversary target; the same input always
    produces the same answers.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.algorithm_id = f"history:{seed}"
        self.memory_bits = float("inf")

    def initial_config(self):
        return ()

    def step(self, config, symbol, position):
        history = config + (symbol,)
        if symbol != SEPARATOR:
            return ((1.0, history, None),)
        digest = hashlib.sha256(f"{self.seed}:{history}".encode()).digest()
        return ((1.0, history, digest[0] & 1),)


# ---------------------------------------------------------------------------
# Builders and registry
# ---------------------------------------------------------------------------


def compose_bh_randomized(oracles, params: BHParams) -> RandomizedGuessXor:
    """Guess-and-XOR composition around probabilistic subroutine machines."""
    return RandomizedGuessXor(oracles, params)


def compose_bh_quantum(oracles, params: BHParams) -> QuantumGuessXor:
    """Guess-and-XOR composition around quantum subroutine machines."""
    return QuantumGuessXor(oracles, params)


def build_bh_partialmod_single_qubit(params: BHParams, beta: int) -> SingleQubitRotationChain:
    return SingleQubitRotationChain(params, beta)


def build_random_guess(params: BHParams) -> RandomGuessAlgorithm:
    return RandomGuessAlgorithm(params)


def build_constant_baseline(bit: int, params: BHParams) -> ConstantAlgorithm:
    return ConstantAlgorithm(bit)


def build_xor_chain(function: FunctionSpec, params: BHParams) -> FullMemoryChain:
    return FullMemoryChain(function, params)


def random_deterministic_machine(n_states: int, rng: np.random.Generator) -> DeterministicMachine:
    """Uniformly random transition table and binary output map."""
    transitions = {sym: tuple(int(x) for x in rng.integers(0, n_states, size=n_states))
                   for sym in (0, 1, 2)}
    result = tuple(int(x) for x in rng.integers(0, 2, size=n_states))
    return DeterministicMachine(n_states=n_states, initial=0,
                                transitions=transitions, result=result)


def random_machine_algorithm(n_states: int, seed: int) -> MachineAlgorithm:
    machine = random_deterministic_machine(n_states, np.random.default_rng(seed))
    return MachineAlgorithm(machine, algorithm_id=f"seeded:{n_states}:{seed}")


def history_hash_algorithm(seed: int) -> HistoryHashAlgorithm:
    return HistoryHashAlgorithm(seed)


def build_algorithm(algorithm_id: str, params: BHParams, function: Optional[FunctionSpec] = None,
                    eps: float = 0.0) -> OnlineAlgorithm:
    """Resolve a registry name to a ready algorithm.

    Names: ``const0``, ``const1``, ``guess``, ``bh-pm-1qubit``,
    ``bh-rand:partialmod``, ``bh-rand:eq``, ``bh-quantum:partialmod``,
    ``bh-quantum:eq``, ``xor-chain``, ``seeded:<n_states>:<seed>``,
    ``history:<seed>``.  ``eps`` sets the designed error of partialmod
    subroutines.
    """
    from .functions import (  # local import keeps module load light
        FingerprintConfig,
        build_eq_fingerprint_quantum,
        build_eq_fingerprint_randomized,
        build_noisy_oracle,
    )

    if algorithm_id == "const0":
        return ConstantAlgorithm(0)
    if algorithm_id == "const1":
        return ConstantAlgorithm(1)
    if algorithm_id == "guess":
        return RandomGuessAlgorithm(params)
    if algorithm_id.startswith("seeded:"):
        _, n_states, seed = algorithm_id.split(":")
        return random_machine_algorithm(int(n_states), int(seed))
    if algorithm_id.startswith("history:"):
        return history_hash_algorithm(int(algorithm_id.split(":")[1]))

    def need_function(name: str) -> FunctionSpec:
        if function is None or function.name != name:
            raise ValueError(f"algorithm {algorithm_id!r} needs a {name} instance")
        return function

    if algorithm_id == "xor-chain":
        if function is None:
            raise ValueError("xor-chain needs the instance function")
        return FullMemoryChain(function, params)
    if algorithm_id == "bh-pm-1qubit":
        fn = need_function("partialmod")
        return SingleQubitRotationChain(params, fn.beta)
    if algorithm_id == "bh-rand:partialmod":
        fn = need_function("partialmod")
        oracle = build_noisy_oracle(build_partialmod_counter(fn.beta), eps)
        return RandomizedGuessXor(oracle, params)
    if algorithm_id == "bh-quantum:partialmod":
        fn = need_function("partialmod")
        oracle = build_partialmod_quantum(fn.beta, error_rate=eps)
        return QuantumGuessXor(oracle, params)
    if algorithm_id == "bh-rand:eq":
        need_function("eq")
        machines = {m: build_eq_fingerprint_randomized(m, FingerprintConfig())
                    for m in set(params.m[:params.k - 1])}
        return RandomizedGuessXor(machines, params)
    if algorithm_id == "bh-quantum:eq":
        need_function("eq")
        machines = {m: build_eq_fingerprint_quantum(m, FingerprintConfig())
                    for m in set(params.m[:params.k - 1])}
        return QuantumGuessXor(machines, params)
    raise ValueError(f"unknown algorithm id: {algorithm_id!r}")


# ---------------------------------------------------------------------------
# Running algorithms over streams
# ---------------------------------------------------------------------------


def guardian_answers(outputs: Sequence, stream: Sequence[int]) -> tuple[int, ...]:
    """Extract the answers emitted at separator positions."""
    answers = tuple(out for sym, out in zip(stream, outputs) if sym == SEPARATOR)
    if any(a is None for a in answers):
        raise RuntimeError("algorithm failed to answer at a separator")
    return answers


def exact_answer_distribution(alg: OnlineAlgorithm, stream: Sequence[int],
                              mode: Optional[ExactMode] = None) -> dict[tuple[int, ...], float]:
    """Exact probability of every answer sequence the algorithm can emit."""
    dist: dict[tuple[int, ...], float] = {}
    for trace in exact_run(alg, stream, mode):
        answers = guardian_answers(trace.outputs, stream)
        dist[answers] = dist.get(answers, 0.0) + trace.probability
    return dist


def sample_answers(alg: OnlineAlgorithm, stream: Sequence[int],
                   rng: np.random.Generator) -> tuple[int, ...]:
    return guardian_answers(sample_run(alg, stream, rng), stream)


def run_prefix(alg: OnlineAlgorithm, symbols: Sequence[int], config=None):
    """Deterministically advance over symbols; returns (config, outputs).

    Only valid for algorithms whose every step has a single branch; this is
    what adversaries use to replay prefixes against a black-box algorithm.
    """
    if config is None:
        config = alg.initial_config()
    outputs = []
    for pos, sym in enumerate(symbols):
        branches = alg.step(config, sym, pos)
        if len(branches) != 1:
            raise ValueError("run_prefix needs a deterministic algorithm")
        _, config, out = branches[0]
        outputs.append(out)
    return config, outputs


def deterministic_answers(alg: OnlineAlgorithm, stream: Sequence[int]) -> tuple[int, ...]:
    _, outputs = run_prefix(alg, stream)
    return guardian_answers(outputs, stream)
