"""Black-hats problem family: parameters, instances, streams and scoring.

An instance interleaves k guardian separators with k prisoner blocks:
``2 X_1 2 X_2 ... 2 X_k`` over the alphabet {0, 1, 2}.  Each guardian's
correct answer is the suffix parity of the function values of the blocks
from its own position onward.  Answers are scored in t blocks of z = k/t
consecutive guardians: a block costs r when every answer in it is correct
and w > r otherwise.

Positions are 1-based in prose and 0-based in code and serialized artifacts
(artifacts carry an explicit ``"indexing": "0"`` marker).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .functions import FunctionSpec, feasible_one_counts

SEPARATOR = 2

INSTANCE_FORMAT_VERSION = 1


class InvalidInstanceError(ValueError):
    """Structurally broken parameters, blocks or instance files."""


class InfeasibleInstanceError(ValueError):
    """A block falls outside the partial function's domain."""


@dataclass(frozen=True)
class BHParams:
    """Problem parameters: k guardians in t blocks, costs r < w, block lengths m.

    k must be a multiple of t so every scoring block covers z = k/t guardians.
    """

    k: int
    t: int
    r: int
    w: int
    m: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))
        if self.k < 1 or self.t < 1:
            raise InvalidInstanceError("k and t must be positive")
        if self.k % self.t:
            raise InvalidInstanceError("k must be a multiple of t")
        if not (isinstance(self.r, int) and isinstance(self.w, int)):
            raise InvalidInstanceError("costs r, w must be integers")
        if self.r < 1 or self.w <= self.r:
            raise InvalidInstanceError("costs must satisfy 1 <= r < w")
        if len(self.m) != self.k:
            raise InvalidInstanceError("need one block length per guardian")
        if any(x < 1 for x in self.m):
            raise InvalidInstanceError("block lengths must be positive")

    @property
    def z(self) -> int:
        return self.k // self.t

    @property
    def stream_length(self) -> int:
        return sum(self.m) + self.k


@dataclass(frozen=True)
class BHInstance:
    """Parameters plus concrete blocks; the symbol stream is derived, never stored."""

    params: BHParams
    blocks: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if len(self.blocks) != self.params.k:
            raise InvalidInstanceError("need exactly k blocks")
        for i, (block, length) in enumerate(zip(self.blocks, self.params.m)):
            if len(block) != length:
                raise InvalidInstanceError(
                    f"block {i} has length {len(block)}, expected {length}")
            if block.strip("01"):
                raise InvalidInstanceError(f"block {i} contains non-bit characters")
        stream = []
        for block in self.blocks:
            stream.append(SEPARATOR)
            stream.extend(int(c) for c in block)
        object.__setattr__(self, "stream", tuple(stream))

    stream: tuple[int, ...] = field(init=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.stream)

    def instance_id(self) -> str:
        payload = json.dumps({"k": self.params.k, "t": self.params.t, "r": self.params.r,
                              "w": self.params.w, "m": list(self.params.m),
                              "blocks": list(self.blocks)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def encode_instance(params: BHParams, blocks: Sequence[str],
                    function: Optional[FunctionSpec] = None) -> BHInstance:
    """Build an instance from blocks, optionally checking domain feasibility.

    Feasibility is an instance-construction error, not a run-time one: the
    problem only quantifies over inputs inside the function's domain.
    """
    instance = BHInstance(params, tuple(blocks))
    if function is not None:
        for i, block in enumerate(instance.blocks):
            if not function.feasible(block):
                raise InfeasibleInstanceError(
                    f"block {i} ({block!r}) is outside the function domain")
    return instance


def decode_stream(stream: Sequence[int]) -> tuple[str, ...]:
    """Recover the blocks from a symbol stream (inverse of encoding)."""
    if not stream or stream[0] != SEPARATOR:
        raise InvalidInstanceError("stream must start with a separator")
    blocks: list[str] = []
    current: Optional[list[str]] = None
    for sym in stream:
        if sym == SEPARATOR:
            if current is not None:
                blocks.append("".join(current))
            current = []
        elif sym in (0, 1):
            current.append(str(sym))
        else:
            raise InvalidInstanceError(f"unknown symbol {sym}")
    blocks.append("".join(current))
    return tuple(blocks)


def guardian_positions(params: BHParams) -> tuple[int, ...]:
    """0-based stream indices of the k separators.

    Guardian j (1-based) sits at sum of (m_i + 1) over the earlier blocks,
    i.e. one less than the classic 1-based position j + sum_{i<j} m_i.
    """
    positions = []
    pos = 0
    for length in params.m:
        positions.append(pos)
        pos += length + 1
    return tuple(positions)


def block_values(instance: BHInstance, function: FunctionSpec) -> tuple[int, ...]:
    """Function value of every block; infeasible blocks are an error."""
    values = []
    for i, block in enumerate(instance.blocks):
        v = function.value(block)
        if v is None:
            raise InfeasibleInstanceError(
                f"block {i} ({block!r}) is outside the function domain")
        values.append(v)
    return tuple(values)


def offline_optimum(instance: BHInstance, function: FunctionSpec) -> tuple[int, ...]:
    """The correct guardian answers: suffix parities of the block values.

    Answer j is the XOR of the function values of blocks j..k; answering all
    of them costs t*r, the offline optimum.
    """
    values = block_values(instance, function)
    answers = [0] * len(values)
    parity = 0
    for j in range(len(values) - 1, -1, -1):
        parity ^= values[j]
        answers[j] = parity
    return tuple(answers)


@dataclass(frozen=True)
class OutputTrace:
    """Scored answers of one run: per-guardian correctness and block costs."""

    answers: tuple[int, ...]
    correctness: tuple[bool, ...]
    block_costs: tuple[int, ...]
    total_cost: int


def cost(instance: BHInstance, answers: Sequence[int], function: FunctionSpec) -> OutputTrace:
    """Score an answer sequence: a block costs r iff all its answers are correct."""
    params = instance.params
    if len(answers) != params.k:
        raise InvalidInstanceError(f"need {params.k} answers, got {len(answers)}")
    optimum = offline_optimum(instance, function)
    correctness = tuple(int(a) == g for a, g in zip(answers, optimum))
    z = params.z
    block_costs = []
    for b in range(params.t):
        ok = all(correctness[b * z:(b + 1) * z])
        block_costs.append(params.r if ok else params.w)
    return OutputTrace(tuple(int(a) for a in answers), correctness,
                       tuple(block_costs), sum(block_costs))


# ---------------------------------------------------------------------------
# Instance files and random generation
# ---------------------------------------------------------------------------


def instance_to_json(instance: BHInstance, function: FunctionSpec) -> dict:
    p = instance.params
    return {
        "version": INSTANCE_FORMAT_VERSION,
        "indexing": "0",
        "k": p.k, "t": p.t, "r": p.r, "w": p.w, "m": list(p.m),
        "function": function.to_json(),
        "blocks": list(instance.blocks),
    }


def instance_from_json(obj) -> tuple[BHInstance, FunctionSpec]:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        params = BHParams(k=int(obj["k"]), t=int(obj["t"]), r=int(obj["r"]),
                          w=int(obj["w"]), m=tuple(obj["m"]))
        function = FunctionSpec.from_json(obj["function"])
        blocks = tuple(obj["blocks"])
    except (KeyError, TypeError) as exc:
        raise InvalidInstanceError(f"malformed instance file: {exc}") from exc
    return encode_instance(params, blocks, function), function


def load_instance(path) -> tuple[BHInstance, FunctionSpec]:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInstanceError(f"invalid JSON: {exc}") from exc
    return instance_from_json(obj)


def generate_instance(function: FunctionSpec, params: BHParams, seed: int) -> BHInstance:
    """Random feasible instance.

    PartialMOD blocks draw a one-count v * 2^beta with v uniform in
    [2, v_max] and shuffle the positions; EQ and table functions sample
    uniformly from their domain.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for length in params.m:
        if function.name == "partialmod":
            counts = feasible_one_counts(function.beta, length)
            if not counts:
                raise InfeasibleInstanceError(
                    f"no feasible one-count for length {length}, beta={function.beta}")
            ones = int(rng.choice(counts))
            bits = np.zeros(length, dtype=np.int64)
            bits[rng.permutation(length)[:ones]] = 1
            blocks.append("".join(str(b) for b in bits))
        elif function.name == "eq":
            bits = rng.integers(0, 2, size=length)
            blocks.append("".join(str(b) for b in bits))
        else:
            for _ in range(10_000):
                bits = rng.integers(0, 2, size=length)
                block = "".join(str(b) for b in bits)
                if function.feasible(block):
                    blocks.append(block)
                    break
            else:
                raise InfeasibleInstanceError("could not sample a feasible block")
    return encode_instance(params, blocks, function)
