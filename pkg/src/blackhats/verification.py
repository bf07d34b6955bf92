"""Acceptance checks: every criterion as a named, self-contained pass/fail run.

Each check pins its own tolerances and returns a CheckResult; the CLI verify
command and the acceptance test module both drive this registry.
"""

from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import adversaries, algorithms, analysis, functions, problem
from .automata import ExactMode, QuantumState, apply_unitary, measure
from .functions import FingerprintConfig, FunctionSpec

EXACT_TOL = 1e-9

FOOLING_FAMILY_SEED = 20260809
UNBOUNDED_FAMILY_SEED = 31337
GUESS_MC_SEED = 42


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0


def _check(name: str):
    def wrap(fn: Callable[[], tuple[bool, str]]):
        fn.check_name = name
        return fn
    return wrap


def _partialmod_params(k: int, t: int, m: int, r: int = 1, w: int = 3) -> problem.BHParams:
    return problem.BHParams(k=k, t=t, r=r, w=w, m=(m,) * k)


@_check("partialmod-exact")
def check_partialmod_exact() -> tuple[bool, str]:
    """Single-qubit machine answers every feasible input with certainty.

    All beta in {0..3} and all feasible inputs of length <= 14, exact state
    propagation, tolerance 1e-9.
    """
    worst = 0.0
    checked = 0
    for beta in range(4):
        machine = functions.build_partialmod_quantum(beta)
        for m in range(1, 15):
            counts = functions.feasible_one_counts(beta, m)
            if not counts:
                continue
            accept = functions._acceptance_vector(machine, m)
            idx = np.arange(1 << m)
            ones = np.zeros(1 << m, dtype=np.int64)
            for j in range(m):
                ones += (idx >> j) & 1
            for c in counts:
                mask = ones == c
                want = (c >> beta) % 2
                prob_correct = accept[mask] if want == 1 else 1.0 - accept[mask]
                worst = max(worst, float(np.abs(prob_correct - 1.0).max()))
                checked += int(mask.sum())
    ok = worst <= EXACT_TOL
    return ok, f"{checked} feasible inputs, worst deviation {worst:.2e}"


def _composition_cases():
    shapes = {1: (6, 6), 2: (8, 4), 4: (12, 3)}
    for eps in (0.0, 0.1, 0.25):
        for z, (k, t) in shapes.items():
            yield eps, z, k, t


@_check("guess-xor-cost-formula")
def check_guess_xor_cost_formula() -> tuple[bool, str]:
    """Exact composition cost equals the closed form and the pattern oracle.

    Designed-error oracles, eps in {0, 0.1, 0.25}, z in {1, 2, 4}, r=1, w=3,
    k <= 12, both comparisons at 1e-9.
    """
    fn = FunctionSpec("partialmod", beta=1)
    worst = 0.0
    for eps, z, k, t in _composition_cases():
        params = _partialmod_params(k, t, 6)
        instance = problem.generate_instance(fn, params, seed=1000 + k + int(eps * 100))
        oracle = functions.build_noisy_oracle(functions.build_partialmod_counter(1), eps)
        alg = algorithms.compose_bh_randomized(oracle, params)
        exact, _ = analysis.exact_expected_cost(alg, instance, fn)
        closed = analysis.composition_closed_form(eps, params)
        brute = analysis.expected_cost_oracle([eps] * (k - 1), params)
        worst = max(worst, abs(exact - closed), abs(exact - brute))
    ok = worst <= EXACT_TOL
    return ok, f"9 configurations, worst deviation {worst:.2e}"


@_check("guardian-marginal-half")
def check_guardian_marginal_half() -> tuple[bool, str]:
    """Every guardian answer is marginally correct with probability exactly 0.5.

    Includes a heterogeneous per-block error profile; exact mode, 1e-9.
    """
    fn = FunctionSpec("partialmod", beta=1)
    worst = 0.0
    profiles = [
        [0.0] * 5, [0.25] * 5, [0.0, 0.1, 0.25, 0.4, 0.3],
    ]
    params = problem.BHParams(k=6, t=3, r=1, w=3, m=(6,) * 6)
    instance = problem.generate_instance(fn, params, seed=77)
    optimum = problem.offline_optimum(instance, fn)
    counter = functions.build_partialmod_counter(1)
    for eps_list in profiles:
        oracles = [functions.build_noisy_oracle(counter, e) for e in eps_list]
        alg = algorithms.compose_bh_randomized(oracles, params)
        dist = algorithms.exact_answer_distribution(alg, instance.stream)
        for j in range(params.k):
            marginal = sum(p for ans, p in dist.items() if ans[j] == optimum[j])
            worst = max(worst, abs(marginal - 0.5))
    ok = worst <= EXACT_TOL
    return ok, f"3 error profiles x 6 guardians, worst |P(correct) - 0.5| = {worst:.2e}"


def _fooling_family(count: int = 100):
    for i in range(count):
        n_states = 1 + (i % 2)
        machine = algorithms.random_deterministic_machine(
            n_states, np.random.default_rng([FOOLING_FAMILY_SEED, i]))
        yield algorithms.MachineAlgorithm(machine, algorithm_id=f"seeded:{n_states}:{i}")


@_check("separation-demo")
def check_separation_demo() -> tuple[bool, str]:
    """Quantum exact 2.0, guess Monte Carlo 2.875, fooled machines exactly 3.0.

    r=1, w=3, z=4, beta=1, k=8; Monte Carlo at N=1e5 within 3 standard
    errors, exact figures at 1e-9.
    """
    fn = FunctionSpec("partialmod", beta=1)
    params = _partialmod_params(k=8, t=2, m=8)
    instance = problem.generate_instance(fn, params, seed=2024)

    quantum = algorithms.build_bh_partialmod_single_qubit(params, beta=1)
    q_report = analysis.empirical_ratio(quantum, instance, fn, ExactMode())
    if abs(q_report.ratio - 2.0) > EXACT_TOL:
        return False, f"quantum exact ratio {q_report.ratio!r} != 2.0"

    guess = algorithms.build_random_guess(params)
    g_report = analysis.empirical_ratio(
        guess, instance, fn, analysis.SampledMode(trials=100_000, seed=GUESS_MC_SEED))
    sigma = g_report.stderr / g_report.opt_cost
    if abs(g_report.ratio - 2.875) > 3 * sigma:
        return False, (f"guess MC ratio {g_report.ratio:.4f} off 2.875 "
                       f"by more than 3 sigma ({sigma:.2e})")

    c1 = analysis.bound_c1(params.r, params.w)
    for alg in _fooling_family():
        report = adversaries.build_fooling_input(alg, params, fn)
        trace = problem.cost(report.instance, report.answers, fn)
        ratio = trace.total_cost / (params.t * params.r)
        if abs(ratio - c1) > EXACT_TOL:
            return False, f"{alg.algorithm_id}: fooled ratio {ratio} != {c1}"
    return True, (f"quantum 2.0 exact; guess {g_report.ratio:.4f} +/- {sigma:.4f} "
                  f"(seed {GUESS_MC_SEED}); 100 fooled machines at ratio 3.0")


def _unbounded_family(count: int = 100):
    for i in range(count):
        if i < count // 2:
            n_states = 2 + (i % 5)
            machine = algorithms.random_deterministic_machine(
                n_states, np.random.default_rng([UNBOUNDED_FAMILY_SEED, i]))
            yield algorithms.MachineAlgorithm(machine, algorithm_id=f"seeded:{n_states}:{i}")
        else:
            yield algorithms.history_hash_algorithm(i)


@_check("unbounded-adversary")
def check_unbounded_adversary() -> tuple[bool, str]:
    """Majority adversary wrongs at least floor((k+1)/2) guardians, every time.

    100 seeded deterministic algorithms (finite-state and history-keyed),
    k = t = 5; per-instance ratio at least the unbounded deterministic bound.
    """
    fn = FunctionSpec("partialmod", beta=1)
    params = _partialmod_params(k=5, t=5, m=6)
    zero_pool = {6: functions.blocks_with_value(fn, 6, 0)}
    one_pool = {6: functions.blocks_with_value(fn, 6, 1)}
    need_wrong = (params.k + 1) // 2
    floor_ratio = analysis.bound_det_unbounded(params.t, params.r, params.w)
    worst_wrong = params.k
    for alg in _unbounded_family():
        instance = adversaries.unbounded_adversary(alg, params, fn, zero_pool, one_pool)
        answers = algorithms.deterministic_answers(alg, instance.stream)
        optimum = problem.offline_optimum(instance, fn)
        wrong = sum(1 for a, g in zip(answers, optimum) if a != g)
        worst_wrong = min(worst_wrong, wrong)
        if wrong < need_wrong:
            return False, f"{alg.algorithm_id}: only {wrong} wrong answers"
        ratio = problem.cost(instance, answers, fn).total_cost / (params.t * params.r)
        if ratio < floor_ratio - EXACT_TOL:
            return False, f"{alg.algorithm_id}: ratio {ratio} below {floor_ratio}"
    return True, f"100 algorithms, minimum wrong count {worst_wrong} >= {need_wrong}"


@_check("fooling-soundness")
def check_fooling_soundness() -> tuple[bool, str]:
    """Successful fooling runs survive independent re-derivation of the optimum.

    The suffix parities are recomputed from the chosen blocks (not from the
    recurrence); every answer must be wrong and the cost exactly t*w.  The
    full-memory reference must instead fail with a certificate.
    """
    fn = FunctionSpec("partialmod", beta=1)
    params = _partialmod_params(k=8, t=2, m=8)
    successes = 0
    for alg in _fooling_family():
        report = adversaries.build_fooling_input(alg, params, fn)
        optimum = problem.offline_optimum(report.instance, fn)
        if any(a == g for a, g in zip(report.answers, optimum)):
            return False, f"{alg.algorithm_id}: a guardian answer matches the optimum"
        trace = problem.cost(report.instance, report.answers, fn)
        if trace.total_cost != params.t * params.w:
            return False, f"{alg.algorithm_id}: cost {trace.total_cost} != t*w"
        successes += 1
    reference = algorithms.build_xor_chain(fn, params)
    try:
        adversaries.build_fooling_input(reference, params, fn)
        return False, "full-memory reference was fooled"
    except adversaries.AdversaryFailure as exc:
        return True, (f"{successes} sound fooling runs; reference rejected at "
                      f"stage {exc.stage} ({exc.reason})")


@_check("eq-fingerprints")
def check_eq_fingerprints() -> tuple[bool, str]:
    """Fingerprints never reject equal halves; measured errors and state floors.

    m in {6, 8, 10, 12}: one-sided at 1e-9 for both machines; randomized
    worst-case error at most 0.25 with the default 8-prime set; the quantum
    worst case is recorded (it is larger for tiny half-differences); the
    state floor is at least 2^(m/2).
    """
    fn = FunctionSpec("eq")
    config = FingerprintConfig()
    details = []
    for m in (6, 8, 10, 12):
        rand_report = functions.measure_error(
            functions.build_eq_fingerprint_randomized(m, config), fn, m)
        quant_report = functions.measure_error(
            functions.build_eq_fingerprint_quantum(m, config), fn, m)
        if rand_report.false_reject > EXACT_TOL:
            return False, f"m={m}: randomized false rejection {rand_report.false_reject:.2e}"
        if quant_report.false_reject > EXACT_TOL:
            return False, f"m={m}: quantum false rejection {quant_report.false_reject:.2e}"
        if rand_report.epsilon > 0.25 + EXACT_TOL:
            return False, f"m={m}: randomized worst error {rand_report.epsilon} > 0.25"
        floor = analysis.state_lower_bound(fn, m)
        if floor < 1 << (m // 2):
            return False, f"m={m}: state floor {floor} < {1 << (m // 2)}"
        details.append(f"m={m}: rand eps={rand_report.epsilon:.4f} "
                       f"quant eps={quant_report.epsilon:.4f} states>={floor}")
    return True, "; ".join(details)


def _random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    gaussian = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(gaussian)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@_check("engine-invariants")
def check_engine_invariants() -> tuple[bool, str]:
    """Norm preservation, exact-mode mass, and sampled-vs-exact agreement.

    1e4 random unitary/measure operations keep |norm - 1| <= 1e-9; exact
    branch probabilities sum to 1 +/- 1e-9 on the composition grid; sampled
    means stay within 4 standard errors of the exact expectations.
    """
    rng = np.random.default_rng(99)
    worst_norm = 0.0
    ops = 0
    state = None
    while ops < 10_000:
        if state is None or rng.random() < 0.05:
            q = int(rng.integers(1, 4))
            state = QuantumState.zero(q)
        if rng.random() < 0.7:
            state = apply_unitary(state, _random_unitary(rng, state.amps.shape[0]))
        else:
            qubits = tuple(sorted(rng.choice(state.n_qubits,
                                             size=rng.integers(1, state.n_qubits + 1),
                                             replace=False).tolist()))
            _, state, _ = measure(state, qubits, rng)
        worst_norm = max(worst_norm, abs(state.norm() - 1.0))
        ops += 1
    if worst_norm > EXACT_TOL:
        return False, f"norm drift {worst_norm:.2e} after random operations"

    fn = FunctionSpec("partialmod", beta=1)
    counter = functions.build_partialmod_counter(1)
    worst_mass = 0.0
    worst_sigmas = 0.0
    for eps, z, k, t in _composition_cases():
        params = _partialmod_params(k, t, 6)
        instance = problem.generate_instance(fn, params, seed=500 + k)
        alg = algorithms.compose_bh_randomized(
            functions.build_noisy_oracle(counter, eps), params)
        dist = algorithms.exact_answer_distribution(alg, instance.stream)
        worst_mass = max(worst_mass, abs(sum(dist.values()) - 1.0))
        exact = sum(p * problem.cost(instance, a, fn).total_cost for a, p in dist.items())
        trials = 3000
        costs = analysis.monte_carlo_costs(alg, instance, fn, trials, seed=7000 + k)
        stderr = costs.std(ddof=1) / math.sqrt(trials)
        worst_sigmas = max(worst_sigmas, abs(costs.mean() - exact) / stderr)
    params = _partialmod_params(k=8, t=2, m=8)
    instance = problem.generate_instance(fn, params, seed=2024)
    quantum = algorithms.build_bh_partialmod_single_qubit(params, beta=1)
    dist = algorithms.exact_answer_distribution(quantum, instance.stream)
    worst_mass = max(worst_mass, abs(sum(dist.values()) - 1.0))
    exact = sum(p * problem.cost(instance, a, fn).total_cost for a, p in dist.items())
    costs = analysis.monte_carlo_costs(quantum, instance, fn, 3000, seed=7777)
    worst_sigmas = max(worst_sigmas, abs(costs.mean() - exact) / (costs.std(ddof=1) / math.sqrt(3000)))
    if worst_mass > EXACT_TOL:
        return False, f"branch probabilities off unit mass by {worst_mass:.2e}"
    if worst_sigmas > 4.0:
        return False, f"sampled mean {worst_sigmas:.2f} sigma from exact expectation"
    return True, (f"norm drift {worst_norm:.2e}; unit-mass defect {worst_mass:.2e}; "
                  f"sampled-vs-exact worst {worst_sigmas:.2f} sigma")


@_check("reproducibility")
def check_reproducibility() -> tuple[bool, str]:
    """The same seeded Monte Carlo invocation writes byte-identical CSV."""
    from . import cli

    with tempfile.TemporaryDirectory() as tmp:
        args = ["run", "--gen", "fn=partialmod,beta=1,k=8,t=2,r=1,w=3,m=8,seed=5",
                "--algorithm", "guess", "--mode", "mc", "--trials", "20000",
                "--seed", "42", "--format", "csv"]
        out1, out2 = os.path.join(tmp, "a.csv"), os.path.join(tmp, "b.csv")
        code1 = cli.main(args + ["--out", out1])
        code2 = cli.main(args + ["--out", out2])
        if code1 != 0 or code2 != 0:
            return False, f"cli exits {code1}/{code2}"
        with open(out1, "rb") as fh:
            first = fh.read()
        with open(out2, "rb") as fh:
            second = fh.read()
    if first != second:
        return False, "repeated run produced different bytes"
    return True, f"two runs, {len(first)} identical bytes"


ALL_CHECKS = [
    check_partialmod_exact,
    check_guess_xor_cost_formula,
    check_guardian_marginal_half,
    check_separation_demo,
    check_unbounded_adversary,
    check_fooling_soundness,
    check_eq_fingerprints,
    check_engine_invariants,
    check_reproducibility,
]

RUNTIME_BUDGETS = {
    "partialmod-exact": 10.0,
    "guess-xor-cost-formula": 30.0,
    "separation-demo": 60.0,
    "eq-fingerprints": 60.0,
}


def run_check(fn) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failure, not an error
        return CheckResult(fn.check_name, False, f"crashed: {exc!r}",
                           time.perf_counter() - start)
    elapsed = time.perf_counter() - start
    budget = RUNTIME_BUDGETS.get(fn.check_name)
    if passed and budget is not None and elapsed > budget:
        passed = False
        detail += f"; runtime {elapsed:.1f}s exceeded {budget:.0f}s budget"
    return CheckResult(fn.check_name, passed, detail, elapsed)


def run_suite(name_filter: Optional[str] = None, echo: bool = True) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        if name_filter and name_filter not in fn.check_name:
            continue
        result = run_check(fn)
        results.append(result)
        if echo:
            status = "PASS" if result.passed else "FAIL"
            print(f"{status} {result.name} [{result.elapsed:.1f}s] {result.detail}")
    return results
