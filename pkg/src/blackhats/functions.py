"""Concrete Boolean functions and the machines that compute them.

PartialMOD counts ones in units of 2^beta and reports the parity of the
multiplier; it has a deterministic modular counter and an exact single-qubit
rotation machine.  EQ tests equality of the two input halves; it gets a
prime-modulus fingerprint machine (randomized) and a superposed-prime phase
fingerprint (quantum).  Fingerprint error rates are always measured
exhaustively, never assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sparse

from .automata import (
    DeterministicMachine,
    ProbabilisticMachine,
    QuantumMachine,
)

DEFAULT_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23)

ENUMERATION_CAP = 16  # largest block length whose 2^m inputs we enumerate


class EnumerationCapError(RuntimeError):
    """Domain too large for exhaustive enumeration."""


# ---------------------------------------------------------------------------
# Function specs and reference evaluators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionSpec:
    """A (possibly partial) Boolean function family, one evaluator per length.

    ``name`` is one of ``partialmod`` (needs ``beta``), ``eq``, or
    ``oracle-table`` (explicit truth table over length ``table_m``, entries
    may be None for undefined inputs).
    """

    name: str
    beta: Optional[int] = None
    table: Optional[tuple] = None
    table_m: Optional[int] = None

    def __post_init__(self):
        if self.name == "partialmod":
            if self.beta is None or self.beta < 0:
                raise ValueError("partialmod needs beta >= 0")
        elif self.name == "eq":
            pass
        elif self.name == "oracle-table":
            if self.table is None or self.table_m is None:
                raise ValueError("oracle-table needs table and table_m")
            if len(self.table) != 1 << self.table_m:
                raise ValueError("table length must be 2^table_m")
        else:
            raise ValueError(f"unknown function name: {self.name!r}")

    def value(self, block: str) -> Optional[int]:
        """Function value on a bit-string, or None where undefined."""
        if self.name == "partialmod":
            return partialmod_value(block, self.beta)
        if self.name == "eq":
            return eq_value(block)
        if len(block) != self.table_m:
            raise ValueError(f"oracle-table is defined for length {self.table_m}")
        return self.table[int(block, 2)] if block else self.table[0]

    def feasible(self, block: str) -> bool:
        return self.value(block) is not None

    def to_json(self) -> dict:
        if self.name == "partialmod":
            return {"name": "partialmod", "beta": self.beta}
        if self.name == "eq":
            return {"name": "eq"}
        return {"name": "oracle-table", "m": self.table_m,
                "table": [v for v in self.table]}

    @classmethod
    def from_json(cls, obj: dict) -> "FunctionSpec":
        name = obj["name"]
        if name == "partialmod":
            return cls("partialmod", beta=int(obj["beta"]))
        if name == "eq":
            return cls("eq")
        if name == "oracle-table":
            return cls("oracle-table", table=tuple(obj["table"]), table_m=int(obj["m"]))
        raise ValueError(f"unknown function name: {name!r}")


def partialmod_value(block: str, beta: int) -> Optional[int]:
    """v mod 2 when the number of ones is v * 2^beta with v >= 2, else None."""
    ones = block.count("1")
    unit = 1 << beta
    if ones % unit:
        return None
    v = ones // unit
    return None if v < 2 else v % 2


def eq_value(block: str) -> int:
    """1 iff the first floor(n/2) bits equal the remaining bits.

    Odd lengths therefore always give 0 (the halves have different lengths);
    the empty string gives 1.
    """
    half = len(block) // 2
    return 1 if block[:half] == block[half:] else 0


def feasible_one_counts(beta: int, m: int) -> list[int]:
    unit = 1 << beta
    return [c for c in range(m + 1) if c % unit == 0 and c // unit >= 2]


def domain_blocks(fn: FunctionSpec, m: int) -> Iterator[str]:
    """All length-m blocks in the function's domain, lexicographic order.

    PartialMOD domains are enumerated by choosing positions for the feasible
    one-counts, which avoids scanning all 2^m strings.
    """
    if fn.name == "partialmod":
        seen = set()
        for count in feasible_one_counts(fn.beta, m):
            for positions in combinations(range(m), count):
                bits = ["0"] * m
                for p in positions:
                    bits[p] = "1"
                seen.add("".join(bits))
        yield from sorted(seen)
        return
    if m > ENUMERATION_CAP:
        raise EnumerationCapError(f"cannot enumerate 2^{m} blocks")
    for x in range(1 << m):
        block = format(x, f"0{m}b") if m else ""
        if fn.feasible(block):
            yield block


def blocks_with_value(fn: FunctionSpec, m: int, value: int, limit: Optional[int] = None) -> list[str]:
    out = []
    for block in domain_blocks(fn, m):
        if fn.value(block) == value:
            out.append(block)
            if limit is not None and len(out) >= limit:
                break
    return out


# ---------------------------------------------------------------------------
# PartialMOD machines
# ---------------------------------------------------------------------------


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def build_partialmod_counter(beta: int) -> DeterministicMachine:
    """Reference machine: counts ones modulo 2^(beta+1).

    On feasible inputs the counter lands on 0 or 2^beta, encoding the
    multiplier parity; remaining states are off-domain and map to output 0.
    """
    n = 1 << (beta + 1)
    unit = 1 << beta
    step = tuple((s + 1) % n for s in range(n))
    stay = tuple(range(n))
    result = tuple((s >> beta) & 1 if s % unit == 0 else 0 for s in range(n))
    return DeterministicMachine(
        n_states=n, initial=0,
        transitions={0: stay, 1: step, 2: stay},
        result=result,
    )


def build_partialmod_quantum(beta: int, error_rate: float = 0.0) -> QuantumMachine:
    """Single-qubit machine: rotate by pi/2^(beta+1) per one-symbol.

    Feasible inputs accumulate a total angle of v*pi/2, leaving the qubit on a
    basis state (up to sign), so the final measurement gives the multiplier
    parity with probability 1.  A nonzero ``error_rate`` tilts the start state
    so every feasible input is answered wrongly with exactly that probability
    (used to build designed-error oracles).
    """
    if not 0.0 <= error_rate < 0.5:
        raise ValueError("error_rate must lie in [0, 0.5)")
    tilt = math.asin(math.sqrt(error_rate))
    angle = math.pi / (1 << (beta + 1))
    eye = np.eye(2)
    return QuantumMachine(
        n_qubits=1,
        initial=np.array([math.cos(tilt), math.sin(tilt)], dtype=complex),
        unitaries={0: eye, 1: rotation(angle), 2: eye},
        prepare_unitary=rotation(tilt),
        result=(0, 1),
        error_rate=error_rate,
    )


def build_noisy_oracle(base: DeterministicMachine, error_rate: float) -> ProbabilisticMachine:
    """Probabilistic wrapper that flips the base machine's output with a fixed rate.

    A flip flag is drawn once at the start, so every input is answered wrongly
    with probability exactly ``error_rate``.
    """
    if not 0.0 <= error_rate < 0.5:
        raise ValueError("error_rate must lie in [0, 0.5)")
    n = base.n_states * 2
    initial = np.zeros(n)
    initial[base.initial * 2] = 1.0 - error_rate
    initial[base.initial * 2 + 1] = error_rate
    transitions = {}
    for sym, row in base.transitions.items():
        mat = np.zeros((n, n))
        for s in range(base.n_states):
            for flag in (0, 1):
                mat[row[s] * 2 + flag, s * 2 + flag] = 1.0
        transitions[sym] = mat
    result = np.array([base.result[s] ^ flag for s in range(base.n_states) for flag in (0, 1)])
    return ProbabilisticMachine(initial, transitions, result, error_rate=error_rate)


# ---------------------------------------------------------------------------
# EQ fingerprint machines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FingerprintConfig:
    """Prime moduli used by the equality fingerprints."""

    primes: tuple[int, ...] = DEFAULT_PRIMES

    def __post_init__(self):
        if len(set(self.primes)) != len(self.primes):
            raise ValueError("primes must be pairwise distinct")
        if any(p <= 2 for p in self.primes):
            raise ValueError("primes must be odd and > 2")

    @property
    def d(self) -> int:
        return len(self.primes)


def halves_difference(block: str) -> int:
    """Integer value of the first half minus the second half (even length)."""
    half = len(block) // 2
    a = int(block[:half], 2) if half else 0
    b = int(block[half:], 2) if half else 0
    return a - b


def eq_randomized_error(delta: int, primes) -> float:
    """Fraction of primes dividing the halves difference (false-accept rate)."""
    if delta == 0:
        return 0.0
    return sum(1 for p in primes if delta % p == 0) / len(primes)


def eq_quantum_accept_probability(delta: int, primes) -> float:
    """Closed-form acceptance probability of the phase fingerprint."""
    d = len(primes)
    return (sum(math.cos(2 * math.pi * delta / p) for p in primes) / d) ** 2


def build_eq_fingerprint_randomized(m: int, config: FingerprintConfig = FingerprintConfig()) -> ProbabilisticMachine:
    """Pick a prime uniformly, stream both halves modulo it, accept iff equal.

    The state tracks (position, prime index, first-half residue, second-half
    residue); transitions are deterministic once the prime is chosen, so the
    machine is a uniform mixture of d deterministic counters.  Accepting
    inputs with equal halves is certain; unequal halves are accepted exactly
    when the chosen prime divides their difference.
    """
    if m % 2:
        raise ValueError("fingerprint machines need even m")
    primes = config.primes
    d = config.d
    half = m // 2
    bases = []
    offset = 0
    for p in primes:
        bases.append(offset)
        offset += p * p
    span = offset
    n = (m + 1) * span

    def state_id(pos, i, a, b):
        return pos * span + bases[i] + a * primes[i] + b

    initial = np.zeros(n)
    for i in range(d):
        initial[state_id(0, i, 0, 0)] = 1.0 / d

    rows = {0: [], 1: []}
    cols = {0: [], 1: []}
    for pos in range(m + 1):
        nxt = min(pos + 1, m)  # absorbing once the input is consumed
        for i, p in enumerate(primes):
            for a in range(p):
                for b in range(p):
                    src = state_id(pos, i, a, b)
                    for x in (0, 1):
                        if pos >= m:
                            dst = src
                        elif pos < half:
                            dst = state_id(nxt, i, (2 * a + x) % p, b)
                        else:
                            dst = state_id(nxt, i, a, (2 * b + x) % p)
                        rows[x].append(dst)
                        cols[x].append(src)
    transitions = {}
    for x in (0, 1):
        transitions[x] = sparse.csc_matrix(
            (np.ones(len(rows[x])), (rows[x], cols[x])), shape=(n, n))
    transitions[2] = sparse.identity(n, format="csc")

    result = np.zeros(n, dtype=np.int64)
    for i, p in enumerate(primes):
        for a in range(p):
            result[state_id(m, i, a, a)] = 1
    return ProbabilisticMachine(initial, transitions, result, input_length=m)


def build_eq_fingerprint_quantum(m: int, config: FingerprintConfig = FingerprintConfig()) -> QuantumMachine:
    """Phase fingerprint over a superposition of prime moduli.

    The index register holds log2(d) qubits in uniform superposition; each
    one-bit rotates the target qubit by +/- 2*pi*2^j / p_i controlled on the
    index, with the sign flipping between halves.  The final step undoes the
    index preparation and accepts on the all-zero outcome, so equal halves
    are accepted with certainty and unequal halves with probability
    ((1/d) * sum_i cos(2*pi*delta/p_i))^2.
    """
    if m % 2:
        raise ValueError("fingerprint machines need even m")
    primes = config.primes
    d = config.d
    ld = d.bit_length() - 1
    if 1 << ld != d:
        raise ValueError("quantum fingerprint needs a power-of-two prime count")
    half = m // 2
    q = ld + 1
    dim = 1 << q

    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    prep_index = np.array([[1.0]])
    for _ in range(ld):
        prep_index = np.kron(prep_index, hadamard)
    prepare = np.kron(prep_index, np.eye(2))

    def controlled_rotations(position):
        exponent = (half - 1 - position) if position < half else (m - 1 - position)
        sign = 1.0 if position < half else -1.0
        u = np.zeros((dim, dim))
        for i in range(d):
            theta = sign * 2.0 * math.pi * (1 << exponent) / primes[i]
            u[2 * i:2 * i + 2, 2 * i:2 * i + 2] = rotation(theta)
        return u

    per_step = [{0: np.eye(dim), 1: controlled_rotations(j)} for j in range(m)]
    initial = prepare @ np.eye(dim, 1).ravel()
    result = tuple(1 if u == 0 else 0 for u in range(dim))
    return QuantumMachine(
        n_qubits=q,
        initial=initial,
        unitaries={2: np.eye(dim)},
        per_step=per_step,
        pre_measure_unitary=prepare.T.conj(),
        prepare_unitary=prepare,
        result=result,
        input_length=m,
    )


# ---------------------------------------------------------------------------
# Exhaustive error measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    epsilon: float
    one_sided: bool
    false_accept: float   # worst error on f = 0 inputs
    false_reject: float   # worst error on f = 1 inputs
    domain_size: int
    worst_input: str


def _input_bits(m: int) -> np.ndarray:
    idx = np.arange(1 << m)
    return ((idx[:, None] >> (m - 1 - np.arange(m))) & 1).astype(np.int8)


def _deterministic_columns(machine: ProbabilisticMachine):
    """Next-state arrays per symbol when every column is a unit mass, else None."""
    tables = {}
    for sym in (0, 1):
        mat = machine.transitions[sym]
        csc = sparse.csc_matrix(mat) if not sparse.issparse(mat) else mat.tocsc()
        if np.any(np.diff(csc.indptr) != 1) or not np.allclose(csc.data, 1.0):
            return None
        tables[sym] = csc.indices.copy()
    return tables


def _acceptance_vector(machine, m: int) -> np.ndarray:
    """P(output = 1) for every length-m input, exact."""
    count = 1 << m
    bits = _input_bits(m)
    if isinstance(machine, DeterministicMachine):
        states = np.full(count, machine.initial, dtype=np.int64)
        tables = {s: np.array(machine.transitions[s]) for s in (0, 1)}
        for j in range(m):
            b = bits[:, j]
            states = np.where(b == 1, tables[1][states], tables[0][states])
        return (np.array(machine.result)[states] == 1).astype(float)
    if isinstance(machine, ProbabilisticMachine):
        tables = _deterministic_columns(machine)
        if tables is not None:
            accept = np.zeros(count)
            support = np.nonzero(machine.initial)[0]
            for s0 in support:
                weight = machine.initial[s0]
                states = np.full(count, s0, dtype=np.int64)
                for j in range(m):
                    b = bits[:, j]
                    states = np.where(b == 1, tables[1][states], tables[0][states])
                accept += weight * (machine.result[states] == 1)
            return accept
        accept = np.zeros(count)
        for x in range(count):
            dist = machine.initial
            for j in range(m):
                dist = machine.evolve(dist, int(bits[x, j]))
            accept[x] = dist[machine.result == 1].sum()
        return accept
    if isinstance(machine, QuantumMachine):
        states = np.tile(machine.initial, (count, 1))
        for j in range(m):
            b = bits[:, j] == 1
            u0 = machine.unitary_for(j, 0)
            u1 = machine.unitary_for(j, 1)
            states[~b] = states[~b] @ u0.T
            states[b] = states[b] @ u1.T
        if machine.pre_measure_unitary is not None:
            states = states @ machine.pre_measure_unitary.T
        probs = np.abs(states) ** 2
        accept_mask = np.array([machine.result[u] == 1 for u in range(states.shape[1])])
        return probs[:, accept_mask].sum(axis=1)
    raise TypeError(f"not a machine: {machine!r}")


def measure_error(machine, fn: FunctionSpec, m: int) -> ErrorReport:
    """Worst-case error over the function's whole length-m domain, exact.

    Acceptance probabilities come from exact propagation of the machine, not
    from any claimed formula.  The report flags one-sidedness: whether all
    errors sit on a single function value.
    """
    if m > ENUMERATION_CAP:
        raise EnumerationCapError(f"cannot enumerate 2^{m} inputs")
    accept = _acceptance_vector(machine, m)
    worst = 0.0
    worst_input = ""
    false_accept = 0.0
    false_reject = 0.0
    domain = 0
    for x in range(1 << m):
        block = format(x, f"0{m}b")
        fv = fn.value(block)
        if fv is None:
            continue
        domain += 1
        err = 1.0 - accept[x] if fv == 1 else accept[x]
        if fv == 1:
            false_reject = max(false_reject, err)
        else:
            false_accept = max(false_accept, err)
        if err > worst:
            worst, worst_input = err, block
    side_tol = 1e-9
    one_sided = false_reject <= side_tol or false_accept <= side_tol
    return ErrorReport(worst, one_sided, false_accept, false_reject, domain, worst_input)
