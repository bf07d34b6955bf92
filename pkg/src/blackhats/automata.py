"""Execution engines for deterministic, probabilistic and quantum one-way machines.

All three machine kinds share one run protocol: a *program* exposes an initial
configuration and a ``step(config, symbol, position)`` method that returns a
list of weighted branches.  Deterministic programs always return one branch;
probabilistic and quantum programs branch where an output is observed or a
measurement happens.  ``exact_run`` enumerates the whole branch tree with
exact probabilities, ``sample_run`` draws a single trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

ALPHABET = (0, 1, 2)

UNITARY_TOL = 1e-9
NORM_TOL = 1e-9
STOCHASTIC_TOL = 1e-12
DEGENERACY_TOL = 1e-12
# Branches below this absolute probability are numerically-zero float dust;
# dropping them loses at most (branch count) * PRUNE_EPS of total mass.
PRUNE_EPS = 1e-20

RNG_ID = "philox4x64:key=seed,counter=[trial,0,0,0]"


class ModelValidationError(ValueError):
    """Machine description violates its structural invariants."""


class BranchCapError(RuntimeError):
    """Exact enumeration exceeded the branch cap; use sampled mode instead."""


class DegenerateStateError(RuntimeError):
    """A state vector lost essentially all of its norm."""


class ResetContractError(RuntimeError):
    """Register reset was asked for an outcome the state is not consistent with."""


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-derived RNG substream for one Monte Carlo trial.

    The master seed keys a Philox counter-based generator and the trial index
    selects the counter block, so trials are independent and reproducible
    regardless of scheduling order.
    """
    return np.random.Generator(np.random.Philox(key=np.uint64(seed), counter=[trial, 0, 0, 0]))


# ---------------------------------------------------------------------------
# Machine descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeterministicMachine:
    """Finite one-way machine: transition table per symbol plus an output map."""

    n_states: int
    initial: int
    transitions: Mapping[int, tuple[int, ...]]
    result: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.initial < self.n_states:
            raise ModelValidationError("initial state out of range")
        for sym in ALPHABET:
            row = self.transitions.get(sym)
            if row is None or len(row) != self.n_states:
                raise ModelValidationError(f"transition table not total for symbol {sym}")
            if any(not 0 <= s < self.n_states for s in row):
                raise ModelValidationError("transition target out of range")
        if len(self.result) != self.n_states:
            raise ModelValidationError("output map not total")

    def step(self, state: int, symbol: int) -> tuple[int, int]:
        nxt = self.transitions[symbol][state]
        return nxt, self.result[nxt]


def step_deterministic(machine: DeterministicMachine, state: int, symbol: int) -> tuple[int, int]:
    """Advance one symbol; returns (next state, emitted output)."""
    return machine.step(state, symbol)


class ProbabilisticMachine:
    """Distribution-over-states machine with column-stochastic transition matrices.

    ``transitions[symbol]`` may be dense ndarray or scipy sparse; column j
    holds the outgoing probabilities of state j.  ``result`` maps each state
    to its output symbol.
    """

    def __init__(self, initial, transitions, result, input_length=None, error_rate=None):
        self.initial = np.asarray(initial, dtype=float)
        self.transitions = dict(transitions)
        self.result = np.asarray(result, dtype=np.int64)
        self.input_length = input_length
        self.error_rate = error_rate
        self.validate()

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    def validate(self):
        n = self.n_states
        if abs(self.initial.sum() - 1.0) > STOCHASTIC_TOL or (self.initial < -STOCHASTIC_TOL).any():
            raise ModelValidationError("initial distribution must be a probability vector")
        if self.result.shape != (n,):
            raise ModelValidationError("output map not total")
        for sym in ALPHABET:
            mat = self.transitions.get(sym)
            if mat is None or mat.shape != (n, n):
                raise ModelValidationError(f"missing or misshaped transition matrix for symbol {sym}")
            colsums = np.asarray(mat.sum(axis=0)).ravel()
            if np.abs(colsums - 1.0).max() > STOCHASTIC_TOL:
                raise ModelValidationError(f"columns of symbol-{sym} matrix must each sum to 1")

    def evolve(self, dist: np.ndarray, symbol: int) -> np.ndarray:
        return np.asarray(self.transitions[symbol] @ dist).ravel()

    def output_masses(self, dist: np.ndarray) -> dict[int, float]:
        masses: dict[int, float] = {}
        for out in np.unique(self.result):
            masses[int(out)] = float(dist[self.result == out].sum())
        return masses


class QuantumMachine:
    """Pure-state machine: per-symbol unitaries plus a measurement schedule.

    ``unitaries[symbol]`` is the uniform per-symbol operator; ``per_step``
    optionally overrides it with a position-indexed table (needed for
    machines whose rotation angle depends on the input position).
    ``measure_after[symbol]`` lists qubits measured right after that symbol's
    unitary.  ``result`` maps a measurement outcome index to an output.
    ``prepare_unitary``, when present, maps |0..0> to the initial state and is
    what a host algorithm re-applies after resetting the register.
    """

    def __init__(self, n_qubits, initial, unitaries, per_step=None, measure_after=None,
                 pre_measure_unitary=None, prepare_unitary=None, result=None,
                 input_length=None, error_rate=None):
        self.n_qubits = int(n_qubits)
        self.dim = 1 << self.n_qubits
        self.initial = np.asarray(initial, dtype=complex)
        self.unitaries = {s: np.asarray(u, dtype=complex) for s, u in dict(unitaries).items()}
        self.per_step = None
        if per_step is not None:
            self.per_step = [
                {s: np.asarray(u, dtype=complex) for s, u in entry.items()} for entry in per_step
            ]
        self.measure_after = dict(measure_after or {})
        self.pre_measure_unitary = (
            None if pre_measure_unitary is None else np.asarray(pre_measure_unitary, dtype=complex)
        )
        self.prepare_unitary = (
            None if prepare_unitary is None else np.asarray(prepare_unitary, dtype=complex)
        )
        self.result = tuple(result) if result is not None else tuple(range(self.dim))
        self.input_length = input_length
        self.error_rate = error_rate
        self.validate()

    def validate(self):
        if self.initial.shape != (self.dim,):
            raise ModelValidationError("initial vector has wrong dimension")
        if abs(np.linalg.norm(self.initial) - 1.0) > NORM_TOL:
            raise ModelValidationError("initial vector is not normalized")
        for name, u in self._all_unitaries():
            if u.shape != (self.dim, self.dim):
                raise ModelValidationError(f"{name}: wrong shape")
            defect = np.abs(u.conj().T @ u - np.eye(self.dim)).max()
            if defect > UNITARY_TOL:
                raise ModelValidationError(f"{name}: not unitary (defect {defect:.2e})")
        if self.prepare_unitary is not None:
            e0 = np.zeros(self.dim, dtype=complex)
            e0[0] = 1.0
            if np.abs(self.prepare_unitary @ e0 - self.initial).max() > NORM_TOL:
                raise ModelValidationError("prepare_unitary does not produce the initial state")
        for sym, qubits in self.measure_after.items():
            if any(not 0 <= q < self.n_qubits for q in qubits):
                raise ModelValidationError(f"measurement schedule for symbol {sym} out of range")

    def _all_unitaries(self):
        for s, u in self.unitaries.items():
            yield f"unitary[{s}]", u
        if self.per_step is not None:
            for j, entry in enumerate(self.per_step):
                for s, u in entry.items():
                    yield f"per_step[{j}][{s}]", u
        if self.pre_measure_unitary is not None:
            yield "pre_measure_unitary", self.pre_measure_unitary
        if self.prepare_unitary is not None:
            yield "prepare_unitary", self.prepare_unitary

    def unitary_for(self, position: int, symbol: int) -> np.ndarray:
        if self.per_step is not None and position < len(self.per_step):
            entry = self.per_step[position]
            if symbol in entry:
                return entry[symbol]
        try:
            return self.unitaries[symbol]
        except KeyError:
            raise ModelValidationError(f"no unitary for symbol {symbol} at position {position}")


# ---------------------------------------------------------------------------
# Quantum state operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuantumState:
    """Amplitude vector over 2^q basis states; treated as immutable."""

    amps: np.ndarray

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.amps.shape[0]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @classmethod
    def zero(cls, n_qubits: int) -> "QuantumState":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)


def _outcome_indices(dim: int, n_qubits: int, qubits: Sequence[int]) -> np.ndarray:
    """Outcome index of every basis state for the given measured-qubit order."""
    idx = np.arange(dim)
    out = np.zeros(dim, dtype=np.int64)
    for j, q in enumerate(qubits):
        bit = (idx >> (n_qubits - 1 - q)) & 1
        out |= bit << (len(qubits) - 1 - j)
    return out


def apply_unitary(state: QuantumState, u: np.ndarray) -> QuantumState:
    """Apply a unitary; the result must keep unit norm within tolerance."""
    amps = np.asarray(u, dtype=complex) @ state.amps
    if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
        raise DegenerateStateError("unitary application broke normalization")
    return QuantumState(amps)


def measurement_branches(state: QuantumState, qubits: Sequence[int],
                         prune: float = PRUNE_EPS) -> list[tuple[int, float, QuantumState]]:
    """All measurement outcomes with positive probability, collapsed and renormalized."""
    if not qubits:
        raise ValueError("measurement needs at least one qubit")
    n = state.n_qubits
    outcome_of = _outcome_indices(state.amps.shape[0], n, qubits)
    weights = np.abs(state.amps) ** 2
    total = weights.sum()
    if total < DEGENERACY_TOL:
        raise DegenerateStateError("state norm degenerate before measurement")
    branches = []
    for u in range(1 << len(qubits)):
        mask = outcome_of == u
        p = float(weights[mask].sum())
        if p <= prune:
            continue
        collapsed = np.where(mask, state.amps, 0.0) / np.sqrt(p)
        branches.append((u, p, QuantumState(collapsed)))
    return branches


def measure(state: QuantumState, qubits: Sequence[int],
            rng: np.random.Generator) -> tuple[int, QuantumState, float]:
    """Sample one measurement outcome; returns (outcome, collapsed state, probability)."""
    branches = measurement_branches(state, qubits)
    r = rng.random()
    acc = 0.0
    for u, p, collapsed in branches:
        acc += p
        if r < acc:
            return u, collapsed, p
    u, p, collapsed = branches[-1]
    return u, collapsed, p


def reset_work_register(state: QuantumState, qubits: Sequence[int],
                        known_outcome: int) -> QuantumState:
    """Rotate just-measured qubits back to |0..0>, leaving the rest untouched.

    The state must already be consistent with ``known_outcome`` on those
    qubits (it was just measured); the reset is then a product of X gates on
    the qubits whose outcome bit is 1.
    """
    n = state.n_qubits
    dim = state.amps.shape[0]
    outcome_of = _outcome_indices(dim, n, qubits)
    inconsistent = float((np.abs(state.amps) ** 2)[outcome_of != known_outcome].sum())
    if inconsistent > NORM_TOL:
        raise ResetContractError(
            f"state carries {inconsistent:.2e} probability outside outcome {known_outcome}")
    flip = 0
    for j, q in enumerate(qubits):
        if (known_outcome >> (len(qubits) - 1 - j)) & 1:
            flip |= 1 << (n - 1 - q)
    idx = np.arange(dim)
    amps = state.amps[idx ^ flip]
    # zero out the residual inconsistent dust so the invariant is exact
    amps = np.where(_outcome_indices(dim, n, qubits) == 0, amps, 0.0)
    nrm = np.linalg.norm(amps)
    if nrm < DEGENERACY_TOL:
        raise DegenerateStateError("reset left a degenerate state")
    return QuantumState(amps / nrm)


# ---------------------------------------------------------------------------
# Run modes and the branching-walk engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactMode:
    branch_cap: int = 1 << 20
    prune: float = PRUNE_EPS


@dataclass(frozen=True)
class SampledMode:
    trials: int
    seed: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("sampled mode needs trials >= 1")


class ExactTrace(NamedTuple):
    probability: float
    outputs: tuple


def exact_run(program, stream: Sequence[int], mode: Optional[ExactMode] = None) -> list[ExactTrace]:
    """Enumerate every branch of the run with its exact probability.

    Raises BranchCapError when the frontier exceeds the cap; callers should
    fall back to sampled mode in that case.
    """
    mode = mode or ExactMode()
    frontier: list[tuple[float, Any, tuple]] = [(1.0, program.initial_config(), ())]
    for position, symbol in enumerate(stream):
        nxt = []
        for prob, config, outputs in frontier:
            for bp, cfg2, out in program.step(config, symbol, position):
                p2 = prob * bp
                if p2 > mode.prune:
                    nxt.append((p2, cfg2, outputs + (out,)))
        if len(nxt) > mode.branch_cap:
            raise BranchCapError(
                f"exact enumeration exceeded {mode.branch_cap} branches at position "
                f"{position}; use sampled mode")
        frontier = nxt
    return [ExactTrace(p, outs) for p, _, outs in frontier]


def sample_run(program, stream: Sequence[int], rng: np.random.Generator) -> tuple:
    """Walk a single trajectory, choosing branches by their probabilities."""
    config = program.initial_config()
    outputs = []
    for position, symbol in enumerate(stream):
        branches = program.step(config, symbol, position)
        if len(branches) == 1:
            _, config, out = branches[0]
        else:
            r = rng.random()
            acc = 0.0
            chosen = branches[-1]
            for b in branches:
                acc += b[0]
                if r < acc:
                    chosen = b
                    break
            _, config, out = chosen
        outputs.append(out)
    return tuple(outputs)


class _DeterministicProgram:
    def __init__(self, machine: DeterministicMachine):
        self.machine = machine

    def initial_config(self):
        return self.machine.initial

    def step(self, config, symbol, position):
        nxt, out = self.machine.step(config, symbol)
        return ((1.0, nxt, out),)


class _ProbabilisticProgram:
    """Propagates the full state distribution, branching only where observed."""

    def __init__(self, machine: ProbabilisticMachine, observe_at: frozenset[int]):
        self.machine = machine
        self.observe_at = observe_at

    def initial_config(self):
        return self.machine.initial

    def step(self, config, symbol, position):
        dist = self.machine.evolve(config, symbol)
        if position not in self.observe_at:
            return ((1.0, dist, None),)
        branches = []
        for out, mass in sorted(self.machine.output_masses(dist).items()):
            if mass <= PRUNE_EPS:
                continue
            conditioned = np.where(self.machine.result == out, dist, 0.0) / mass
            branches.append((mass, conditioned, out))
        return tuple(branches)


class _QuantumProgram:
    def __init__(self, machine: QuantumMachine):
        self.machine = machine

    def initial_config(self):
        return QuantumState(self.machine.initial)

    def step(self, config, symbol, position):
        u = self.machine.unitary_for(position, symbol)
        state = QuantumState(u @ config.amps)
        qubits = self.machine.measure_after.get(symbol, ())
        if not qubits:
            return ((1.0, state, None),)
        branches = []
        for outcome, p, collapsed in measurement_branches(state, qubits):
            out = self.machine.result[outcome] if outcome < len(self.machine.result) else outcome
            branches.append((p, collapsed, out))
        return tuple(branches)


def _program_for(machine, observe_at):
    if isinstance(machine, DeterministicMachine):
        return _DeterministicProgram(machine)
    if isinstance(machine, ProbabilisticMachine):
        return _ProbabilisticProgram(machine, observe_at)
    if isinstance(machine, QuantumMachine):
        return _QuantumProgram(machine)
    raise TypeError(f"not a machine: {machine!r}")


def run_online(machine, stream: Sequence[int], mode, observe_at: Optional[Iterable[int]] = None):
    """Run a machine over a symbol stream.

    Returns a list of ExactTrace (exact mode) or a list of per-trial output
    tuples (sampled mode).  ``observe_at`` gives the 0-based positions where a
    probabilistic machine's output is read (default: the final position);
    deterministic machines record outputs everywhere and quantum machines at
    their scheduled measurements, with None at non-measurement steps.
    """
    observed = frozenset(observe_at) if observe_at is not None else frozenset({len(stream) - 1})
    program = _program_for(machine, observed)
    if isinstance(mode, ExactMode):
        return exact_run(program, stream, mode)
    if isinstance(mode, SampledMode):
        return [sample_run(program, stream, trial_rng(mode.seed, i)) for i in range(mode.trials)]
    raise TypeError(f"unknown run mode: {mode!r}")


def output_distribution(machine, bits: Sequence[int]) -> dict[int, float]:
    """End-of-input output distribution of a machine run as a function automaton.

    Quantum machines get their pre-measurement unitary (if any) applied and
    then a full measurement; probabilistic machines report the output masses
    of the final distribution.
    """
    if isinstance(machine, DeterministicMachine):
        state = machine.initial
        out = machine.result[state]
        for b in bits:
            state, out = machine.step(state, b)
        return {int(out): 1.0}
    if isinstance(machine, ProbabilisticMachine):
        dist = machine.initial
        for b in bits:
            dist = machine.evolve(dist, b)
        return {k: v for k, v in machine.output_masses(dist).items() if v > 0.0}
    if isinstance(machine, QuantumMachine):
        amps = machine.initial
        for pos, b in enumerate(bits):
            amps = machine.unitary_for(pos, b) @ amps
        if machine.pre_measure_unitary is not None:
            amps = machine.pre_measure_unitary @ amps
        probs = np.abs(amps) ** 2
        dist: dict[int, float] = {}
        for u, p in enumerate(probs):
            if p > 0.0:
                out = machine.result[u]
                dist[out] = dist.get(out, 0.0) + float(p)
        return dist
    raise TypeError(f"not a machine: {machine!r}")


# ---------------------------------------------------------------------------
# JSON machine descriptions
# ---------------------------------------------------------------------------


def _matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def _matrix_to_json(mat):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat, dtype=complex)]


def machine_from_json(obj) -> DeterministicMachine | ProbabilisticMachine | QuantumMachine:
    """Build and validate a machine from its JSON description."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj.get("kind")
    if kind == "deterministic":
        return DeterministicMachine(
            n_states=obj["states"],
            initial=obj["initial"],
            transitions={int(s): tuple(row) for s, row in obj["delta"].items()},
            result=tuple(obj["result"]),
        )
    if kind == "probabilistic":
        return ProbabilisticMachine(
            initial=np.array(obj["initial"], dtype=float),
            transitions={int(s): np.array(m, dtype=float) for s, m in obj["transitions"].items()},
            result=obj["result"],
        )
    if kind == "quantum":
        return QuantumMachine(
            n_qubits=obj["qubits"],
            initial=np.array([complex(re, im) for re, im in obj["initial"]]),
            unitaries={int(s): _matrix_from_json(m) for s, m in obj["unitaries"].items()},
            measure_after={int(s): tuple(q) for s, q in obj.get("measure_after", {}).items()},
            pre_measure_unitary=(
                _matrix_from_json(obj["pre_measure_unitary"])
                if "pre_measure_unitary" in obj else None),
            result=obj.get("result"),
        )
    raise ModelValidationError(f"unknown machine kind: {kind!r}")


def machine_to_json(machine) -> dict:
    if isinstance(machine, DeterministicMachine):
        return {
            "kind": "deterministic",
            "states": machine.n_states,
            "initial": machine.initial,
            "delta": {str(s): list(row) for s, row in machine.transitions.items()},
            "result": list(machine.result),
        }
    if isinstance(machine, ProbabilisticMachine):
        return {
            "kind": "probabilistic",
            "initial": [float(x) for x in machine.initial],
            "transitions": {
                str(s): np.asarray(m.todense() if hasattr(m, "todense") else m).tolist()
                for s, m in machine.transitions.items()},
            "result": [int(x) for x in machine.result],
        }
    if isinstance(machine, QuantumMachine):
        out = {
            "kind": "quantum",
            "qubits": machine.n_qubits,
            "initial": [[float(z.real), float(z.imag)] for z in machine.initial],
            "unitaries": {str(s): _matrix_to_json(u) for s, u in machine.unitaries.items()},
            "measure_after": {str(s): list(q) for s, q in machine.measure_after.items()},
            "result": list(machine.result),
        }
        if machine.pre_measure_unitary is not None:
            out["pre_measure_unitary"] = _matrix_to_json(machine.pre_measure_unitary)
        return out
    raise TypeError(f"not a machine: {machine!r}")
