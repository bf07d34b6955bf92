"""Constructive adversaries against deterministic online algorithms.

The fooling-input builder walks the stream stage by stage: at each stage it
brute-forces a *confusion triple*, two candidate blocks with opposite
function values on which the algorithm announces the same next answer.
Because that answer is independent of the choice, the adversary can pick the
block whose function value makes the announced answer wrong, and commit it
before moving on.  When every stage yields a triple the final instance makes
every guardian answer wrong.  The unbounded-power adversary instead feeds
zero-valued blocks, watches all answers, and picks the last block against
the answer majority.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from .algorithms import OnlineAlgorithm, deterministic_answers, guardian_answers, run_prefix
from .functions import FunctionSpec, blocks_with_value, domain_blocks
from .problem import SEPARATOR, BHInstance, BHParams, encode_instance, offline_optimum


class AdversaryFailure(RuntimeError):
    """Triple search failed: the algorithm separates the function at a stage."""

    def __init__(self, stage: int, reason: str):
        super().__init__(f"stage {stage}: {reason}")
        self.stage = stage
        self.reason = reason


class PoolError(ValueError):
    """A candidate pool is missing a required function value."""


@dataclass(frozen=True)
class ConfusionTriple:
    """Two blocks the algorithm cannot tell apart at this stage.

    ``answer`` is the guardian answer emitted right after either block;
    ``block_zero``/``block_one`` carry function values 0 and 1. ``config`` is
    the configuration the algorithm had when the stage began (0-based stage).
    """

    stage: int
    answer: int
    block_zero: str
    block_one: str
    config: Any = None


@dataclass(frozen=True)
class DistinguishingCertificate:
    """Evidence that no triple exists: the stage's answers separate the function."""

    stage: int
    reason: str


def find_confusion_triple(alg: OnlineAlgorithm, prefix: Sequence[int], m: int,
                          function: FunctionSpec, stage: int = 1):
    """Brute-force a confusion triple after the given committed prefix.

    The prefix excludes the stage's separator; each candidate block is fed as
    ``2, X, 2`` and grouped by the answer at the trailing separator.  Returns
    the lexicographically smallest triple, or a DistinguishingCertificate
    when every answer group is pure (the algorithm computes the function or
    its negation here) or the domain carries only one function value.
    """
    base_config, _ = run_prefix(alg, tuple(prefix) + (SEPARATOR,))
    groups: dict[int, dict[int, str]] = {}
    seen_values = set()
    for block in domain_blocks(function, m):
        value = function.value(block)
        seen_values.add(value)
        symbols = tuple(int(c) for c in block) + (SEPARATOR,)
        _, outputs = run_prefix(alg, symbols, config=base_config)
        answer = outputs[-1]
        slot = groups.setdefault(answer, {})
        slot.setdefault(value, block)  # lexicographic enumeration keeps the smallest
    if seen_values != {0, 1}:
        return DistinguishingCertificate(stage, "domain carries a single function value")
    candidates = [
        ConfusionTriple(stage, answer, slot[0], slot[1], config=base_config)
        for answer, slot in groups.items() if 0 in slot and 1 in slot
    ]
    if not candidates:
        return DistinguishingCertificate(stage, "answers separate the function values")
    return min(candidates, key=lambda tr: (tr.block_zero, tr.block_one))


@dataclass(frozen=True)
class FoolingReport:
    """Successful fooling construction with everything needed to re-derive it."""

    instance: BHInstance
    answers: tuple[int, ...]
    sigma: tuple[int, ...]
    triples: tuple[ConfusionTriple, ...]


def build_fooling_input(alg: OnlineAlgorithm, params: BHParams,
                        function: FunctionSpec) -> FoolingReport:
    """Construct an instance on which every guardian answer is wrong.

    Stage i commits a block before stage i+1 is explored, so each triple is
    found under the true prefix.  Writing sigma_i for the committed block's
    function value, the choice sigma_i = y_i XOR y_{i+1} (and sigma_k = NOT
    y_k for the final, triple-free stage) makes every suffix parity disagree
    with the announced answer; this is the solved form of the backward
    recurrence sigma_i = y_i XOR 1 XOR (XOR of later sigmas).

    Raises AdversaryFailure when a stage admits no triple, which certifies
    that the algorithm separates the function values there.
    """
    committed: list[int] = []
    blocks: list[str] = []
    sigma: list[int] = []
    triples: list[ConfusionTriple] = []
    announced: list[int] = []
    for stage in range(1, params.k + 1):
        _, outputs = run_prefix(alg, tuple(committed) + (SEPARATOR,))
        y_here = outputs[-1]
        announced.append(y_here)
        m = params.m[stage - 1]
        if stage < params.k:
            found = find_confusion_triple(alg, tuple(committed), m, function, stage=stage)
            if isinstance(found, DistinguishingCertificate):
                raise AdversaryFailure(stage, found.reason)
            triples.append(found)
            want = y_here ^ found.answer
            block = found.block_zero if want == 0 else found.block_one
        else:
            want = 1 - y_here
            pool = blocks_with_value(function, m, want, limit=1)
            if not pool:
                raise AdversaryFailure(stage, f"domain has no block with value {want}")
            block = pool[0]
        sigma.append(want)
        blocks.append(block)
        committed.extend([SEPARATOR] + [int(c) for c in block])

    instance = encode_instance(params, blocks, function)
    answers = deterministic_answers(alg, instance.stream)
    optimum = offline_optimum(instance, function)
    if any(a == g for a, g in zip(answers, optimum)):
        raise AdversaryFailure(0, "construction failed its own soundness check")
    return FoolingReport(instance, answers, tuple(sigma), tuple(triples))


def _pool_lookup(pool, m: int) -> list[str]:
    if isinstance(pool, Mapping):
        return list(pool.get(m, ()))
    return [b for b in pool if len(b) == m]


def unbounded_adversary(alg: OnlineAlgorithm, params: BHParams, function: FunctionSpec,
                        zero_pool, one_pool) -> BHInstance:
    """Majority-vote adversary that works against any deterministic algorithm.

    Feeds zero-valued blocks for the first k-1 prisoners, reads all k
    announced answers, and picks the last block so its function value (which
    then equals every correct answer) disagrees with the answer majority.
    At least floor((k+1)/2) guardians end up wrong.
    """
    k = params.k
    blocks: list[str] = []
    prefix: list[int] = []
    for i in range(k - 1):
        candidates = [b for b in _pool_lookup(zero_pool, params.m[i])
                      if function.value(b) == 0]
        if not candidates:
            raise PoolError(f"zero pool has no value-0 block of length {params.m[i]}")
        blocks.append(candidates[0])
        prefix.extend([SEPARATOR] + [int(c) for c in candidates[0]])
    prefix.append(SEPARATOR)
    _, outputs = run_prefix(alg, tuple(prefix))
    answers = guardian_answers(outputs, tuple(prefix))
    majority = 1 if sum(answers) >= (k + 1) // 2 else 0
    want = 1 - majority
    source = one_pool if want == 1 else zero_pool
    candidates = [b for b in _pool_lookup(source, params.m[k - 1])
                  if function.value(b) == want]
    if not candidates:
        raise PoolError(f"pool has no value-{want} block of length {params.m[k - 1]}")
    blocks.append(candidates[0])
    return encode_instance(params, blocks, function)


def adversary_report(kind: str, alg: OnlineAlgorithm, params: BHParams,
                     function: FunctionSpec, instance: BHInstance,
                     extras: Optional[dict] = None) -> dict:
    """JSON-ready record of an adversary run, with costs recomputed from scratch."""
    from .problem import cost  # late import avoids a cycle at module load

    answers = deterministic_answers(alg, instance.stream)
    optimum = offline_optimum(instance, function)
    trace = cost(instance, answers, function)
    wrong = sum(1 for a, g in zip(answers, optimum) if a != g)
    report = {
        "kind": kind,
        "algorithm": alg.algorithm_id,
        "indexing": "0",
        "k": params.k, "t": params.t, "r": params.r, "w": params.w,
        "answers": list(answers),
        "optimum": list(optimum),
        "wrong_count": wrong,
        "blocks": list(instance.blocks),
        "cost": trace.total_cost,
        "opt_cost": params.t * params.r,
        "ratio": trace.total_cost / (params.t * params.r),
    }
    if extras:
        report.update(extras)
    return report
