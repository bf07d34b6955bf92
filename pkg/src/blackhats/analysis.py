"""Competitive-ratio measurement, closed-form bounds and brute-force oracles.

Ratios are reported with the additive slack fixed to zero, so a report is a
plain number: expected cost divided by the offline optimum t*r.  Exact mode
compares at 1e-9; sampled comparisons use 3-sigma acceptance and 4-sigma
invariant thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .algorithms import OnlineAlgorithm, exact_answer_distribution, sample_answers
from .automata import RNG_ID, ExactMode, SampledMode, trial_rng
from .functions import ENUMERATION_CAP, EnumerationCapError, FunctionSpec
from .problem import BHInstance, BHParams, cost, offline_optimum

EXACT_TOL = 1e-9

CSV_COLUMNS = (
    "algorithm", "instance_id", "k", "t", "z", "r", "w", "mode", "trials", "seed",
    "mean_cost", "stderr", "exact_cost", "opt_cost", "ratio",
    "c1", "c2", "cq", "c_det_unbounded", "epsilon_list", "rng_id",
)


# ---------------------------------------------------------------------------
# Closed-form bounds
# ---------------------------------------------------------------------------


def bound_c1(r: int, w: int) -> float:
    """Cost ratio floor for weak deterministic streaming algorithms: w/r."""
    if not r < w:
        raise ValueError("bounds need r < w")
    return w / r


def bound_c2(z: int, r: int, w: int) -> float:
    """Guessing floor for weak randomized algorithms: 2^-z + (1 - 2^-z) w/r."""
    if z < 1:
        raise ValueError("z must be >= 1")
    return 2.0 ** -z + (1.0 - 2.0 ** -z) * w / r


def bound_quantum(eps: float, z: int, r: int, w: int) -> float:
    """Expected ratio of the guess-and-XOR composition with per-block error eps."""
    if not 0.0 <= eps < 0.5:
        raise ValueError("eps must lie in [0, 0.5)")
    return (0.5 * (1.0 - eps) ** (z - 1) * (r - w) + w) / r


def bound_det_unbounded(t: int, r: int, w: int) -> float:
    """Majority-adversary floor for deterministic algorithms of any power."""
    if t < 1:
        raise ValueError("t must be >= 1")
    wrong = (t + 1) // 2
    return (wrong * w + (t - wrong) * r) / (t * r)


# ---------------------------------------------------------------------------
# Brute-force expected-cost oracle
# ---------------------------------------------------------------------------


def expected_cost_oracle(per_prisoner_eps: Sequence[float], params: BHParams) -> float:
    """Exact expected cost by summing all 2^k guess/error patterns.

    Pattern bit 0 is a wrong first guess (probability 0.5); bit i >= 1 is an
    error of prisoner i (probability eps_i).  Guardian j is correct iff the
    number of pattern bits among {guess, prisoners < j} is even.  This stays
    independent of the exact-mode engine and of the closed form it checks.
    """
    eps = tuple(float(e) for e in per_prisoner_eps)
    if len(eps) != params.k - 1:
        raise ValueError(f"need {params.k - 1} prisoner error rates, got {len(eps)}")
    if params.k > 20:
        raise EnumerationCapError("pattern oracle capped at k <= 20")
    k, z = params.k, params.z
    total = 0.0
    for pattern in product((0, 1), repeat=k):
        prob = 0.5
        for bit, e in zip(pattern[1:], eps):
            prob *= e if bit else 1.0 - e
        if prob == 0.0:
            continue
        wrong_so_far = 0
        correct = []
        for j in range(k):
            wrong_so_far += pattern[j]  # guess bit for j=0, prisoner j errors before guardian j+1
            correct.append(wrong_so_far % 2 == 0)
        run_cost = 0
        for b in range(params.t):
            ok = all(correct[b * z:(b + 1) * z])
            run_cost += params.r if ok else params.w
        total += prob * run_cost
    return total


def composition_closed_form(eps: float, params: BHParams) -> float:
    """Expected cost 0.5 (1-eps)^(z-1) t (r - w) + t w of the composition."""
    z, t, r, w = params.z, params.t, params.r, params.w
    return 0.5 * (1.0 - eps) ** (z - 1) * t * (r - w) + t * w


# ---------------------------------------------------------------------------
# Empirical competitive ratio
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompetitiveReport:
    algorithm: str
    instance_id: str
    k: int
    t: int
    z: int
    r: int
    w: int
    mode: str
    trials: Optional[int]
    seed: Optional[int]
    branch_count: Optional[int]
    mean_cost: Optional[float]
    stderr: Optional[float]
    exact_cost: Optional[float]
    opt_cost: int
    ratio: float
    c1: float
    c2: float
    cq: float
    c_det_unbounded: float
    epsilon_list: tuple[float, ...]
    rng_id: Optional[str]

    def to_row(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        values = {
            "algorithm": self.algorithm, "instance_id": self.instance_id,
            "k": self.k, "t": self.t, "z": self.z, "r": self.r, "w": self.w,
            "mode": self.mode, "trials": self.trials, "seed": self.seed,
            "mean_cost": self.mean_cost, "stderr": self.stderr,
            "exact_cost": self.exact_cost, "opt_cost": self.opt_cost,
            "ratio": self.ratio, "c1": self.c1, "c2": self.c2, "cq": self.cq,
            "c_det_unbounded": self.c_det_unbounded,
            "epsilon_list": ";".join(repr(e) for e in self.epsilon_list),
            "rng_id": self.rng_id,
        }
        return [fmt(values[c]) for c in CSV_COLUMNS]

    def to_dict(self) -> dict:
        out = {c: v for c, v in zip(CSV_COLUMNS, self.to_row())}
        out["branch_count"] = self.branch_count
        return out


def exact_expected_cost(alg: OnlineAlgorithm, instance: BHInstance, function: FunctionSpec,
                        mode: Optional[ExactMode] = None):
    """Exact expected cost plus the answer distribution it came from."""
    dist = exact_answer_distribution(alg, instance.stream, mode)
    expected = 0.0
    for answers, prob in dist.items():
        expected += prob * cost(instance, answers, function).total_cost
    return expected, dist


def monte_carlo_costs(alg: OnlineAlgorithm, instance: BHInstance, function: FunctionSpec,
                      trials: int, seed: int) -> np.ndarray:
    """Per-trial costs under counter-derived RNG substreams.

    Algorithms exposing ``sample_answer_matrix`` get a vectorized path whose
    scoring is done in numpy; everything else walks the generic sampler.
    """
    optimum = np.array(offline_optimum(instance, function))
    p = instance.params
    sampler = getattr(alg, "sample_answer_matrix", None)
    if sampler is not None:
        answers = sampler(trials, seed)
        correct = answers == optimum[None, :]
        ok_blocks = correct.reshape(trials, p.t, p.z).all(axis=2)
        return np.where(ok_blocks, p.r, p.w).sum(axis=1).astype(float)
    costs = np.empty(trials)
    for i in range(trials):
        answers = sample_answers(alg, instance.stream, trial_rng(seed, i))
        costs[i] = cost(instance, answers, function).total_cost
    return costs


def empirical_ratio(alg: OnlineAlgorithm, instance: BHInstance, function: FunctionSpec,
                    mode) -> CompetitiveReport:
    """Measure the expected competitive ratio and attach every relevant bound.

    The quantum/randomized composition bound is evaluated at the largest
    per-block error the algorithm reports (0 when it reports none).
    """
    p = instance.params
    opt_cost = p.t * p.r
    eps_list = tuple(alg.block_error_rates or ())
    known = [e for e in eps_list if not math.isnan(e)]
    eps_for_bound = max(known) if known else 0.0
    common = dict(
        algorithm=alg.algorithm_id, instance_id=instance.instance_id(),
        k=p.k, t=p.t, z=p.z, r=p.r, w=p.w, opt_cost=opt_cost,
        c1=bound_c1(p.r, p.w), c2=bound_c2(p.z, p.r, p.w),
        cq=bound_quantum(eps_for_bound, p.z, p.r, p.w),
        c_det_unbounded=bound_det_unbounded(p.t, p.r, p.w),
        epsilon_list=eps_list,
    )
    if isinstance(mode, ExactMode):
        expected, dist = exact_expected_cost(alg, instance, function, mode)
        return CompetitiveReport(
            mode="exact", trials=None, seed=None, branch_count=len(dist),
            mean_cost=None, stderr=None, exact_cost=expected,
            ratio=expected / opt_cost, rng_id=None, **common)
    if isinstance(mode, SampledMode):
        costs = monte_carlo_costs(alg, instance, function, mode.trials, mode.seed)
        mean = float(costs.mean())
        stderr = float(costs.std(ddof=1) / math.sqrt(mode.trials)) if mode.trials > 1 else 0.0
        return CompetitiveReport(
            mode="mc", trials=mode.trials, seed=mode.seed, branch_count=None,
            mean_cost=mean, stderr=stderr, exact_cost=None,
            ratio=mean / opt_cost, rng_id=RNG_ID, **common)
    raise TypeError(f"unknown run mode: {mode!r}")


# ---------------------------------------------------------------------------
# Minimal-state oracle
# ---------------------------------------------------------------------------


def function_table(function: FunctionSpec, m: int) -> np.ndarray:
    """Values over all 2^m inputs as int8, -1 where undefined."""
    if m > ENUMERATION_CAP:
        raise EnumerationCapError(f"cannot tabulate 2^{m} inputs")
    table = np.empty(1 << m, dtype=np.int8)
    for x in range(1 << m):
        v = function.value(format(x, f"0{m}b"))
        table[x] = -1 if v is None else v
    return table


def _max_clique(conflict: np.ndarray) -> int:
    n = conflict.shape[0]
    if n <= 1:
        return n
    graph = nx.from_numpy_array(conflict.astype(int))
    if n <= 40:
        clique, _ = nx.max_weight_clique(graph, weight=None)
        return len(clique)
    # greedy fallback for large graphs: still a valid lower bound
    order = sorted(range(n), key=lambda v: -int(conflict[v].sum()))
    chosen: list[int] = []
    for v in order:
        if all(conflict[v, u] for u in chosen):
            chosen.append(v)
    return len(chosen)


def state_lower_bound(function: FunctionSpec, m: int) -> int:
    """States any deterministic machine needs for the length-m function.

    Total functions: the largest per-level count of distinct prefix residual
    functions, which is the exact minimal width of a level-synchronized
    machine and hence a valid minimal state count.  Partial functions: the
    largest set of same-level prefixes that are pairwise distinguishable
    (some shared suffix keeps both in-domain with differing values).  That is
    only a certified lower bound; pairwise-mergeable partial residuals may
    still be globally inconsistent.
    """
    table = function_table(function, m)
    total = not (table == -1).any()
    best = 1
    for level in range(m + 1):
        rows = table.reshape(1 << level, 1 << (m - level))
        unique = np.unique(rows, axis=0)
        if total:
            best = max(best, unique.shape[0])
            continue
        defined = unique >= 0
        n = unique.shape[0]
        conflict = np.zeros((n, n), dtype=bool)
        for i in range(n):
            both = defined[i] & defined[i + 1:]
            differ = (unique[i] != unique[i + 1:]) & both
            hits = differ.any(axis=1)
            conflict[i, i + 1:] = hits
            conflict[i + 1:, i] = hits
        best = max(best, _max_clique(conflict))
    return int(best)


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def reports_to_csv(reports: Sequence[CompetitiveReport], metadata: dict) -> str:
    lines = [f"# {key}={value}" for key, value in sorted(metadata.items())]
    lines.append(",".join(CSV_COLUMNS))
    for report in reports:
        lines.append(",".join(report.to_row()))
    return "\n".join(lines) + "\n"


def reports_to_json(reports: Sequence[CompetitiveReport], metadata: dict) -> str:
    payload = dict(metadata)
    payload["reports"] = [r.to_dict() for r in reports]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
