import math

import numpy as np
import pytest

from blackhats.algorithms import (
    build_algorithm,
    build_bh_partialmod_single_qubit,
    build_constant_baseline,
    build_random_guess,
    build_xor_chain,
    compose_bh_quantum,
    compose_bh_randomized,
    deterministic_answers,
    exact_answer_distribution,
    history_hash_algorithm,
    random_machine_algorithm,
    sample_answers,
)
from blackhats.analysis import (
    composition_closed_form,
    exact_expected_cost,
    expected_cost_oracle,
)
from blackhats.automata import trial_rng
from blackhats.functions import (
    FunctionSpec,
    build_eq_fingerprint_quantum,
    build_noisy_oracle,
    build_partialmod_counter,
    build_partialmod_quantum,
    eq_quantum_accept_probability,
    halves_difference,
)
from blackhats.problem import BHParams, cost, generate_instance, offline_optimum

PM1 = FunctionSpec("partialmod", beta=1)


def pm_params(k, t, m=6, r=1, w=3):
    return BHParams(k=k, t=t, r=r, w=w, m=(m,) * k)


def pm_instance(k, t, m=6, seed=1, r=1, w=3):
    return generate_instance(PM1, pm_params(k, t, m, r, w), seed)


class TestRandomizedCompose:
    def test_perfect_oracle_keeps_the_xor_chain(self):
        params = pm_params(4, 2)
        inst = pm_instance(4, 2, seed=8)
        oracle = build_noisy_oracle(build_partialmod_counter(1), 0.0)
        alg = compose_bh_randomized(oracle, params)
        values = [PM1.value(b) for b in inst.blocks]
        for answers, prob in exact_answer_distribution(alg, inst.stream).items():
            assert prob == pytest.approx(0.5, abs=1e-12)
            for j in range(params.k - 1):
                assert answers[j + 1] == values[j] ^ answers[j]

    def test_perfect_oracle_ratio_two(self):
        params = pm_params(6, 2)
        inst = pm_instance(6, 2, seed=9)
        alg = compose_bh_randomized(build_noisy_oracle(build_partialmod_counter(1), 0.0), params)
        expected, _ = exact_expected_cost(alg, inst, PM1)
        assert expected / (params.t * params.r) == pytest.approx(2.0, abs=1e-9)

    def test_quarter_error_block_cost(self):
        params = pm_params(4, 2)  # z = 2
        inst = pm_instance(4, 2, seed=10)
        alg = compose_bh_randomized(build_noisy_oracle(build_partialmod_counter(1), 0.25), params)
        expected, _ = exact_expected_cost(alg, inst, PM1)
        assert expected / params.t == pytest.approx(2.25, abs=1e-9)
        assert expected == pytest.approx(expected_cost_oracle([0.25] * 3, params), abs=1e-9)

    def test_memory_reported(self):
        params = pm_params(4, 2)
        alg = compose_bh_randomized(build_noisy_oracle(build_partialmod_counter(1), 0.1), params)
        assert alg.memory_bits == 4  # 8-state oracle plus the carried bit

    def test_block_length_mismatch_rejected(self):
        from blackhats.functions import build_eq_fingerprint_randomized

        params = BHParams(k=2, t=1, r=1, w=3, m=(6, 6))
        wrong_length = build_eq_fingerprint_randomized(8)
        with pytest.raises(ValueError):
            compose_bh_randomized(wrong_length, params)

    def test_family_resolved_by_block_length(self):
        from blackhats.functions import build_eq_fingerprint_randomized

        params = BHParams(k=3, t=3, r=1, w=3, m=(4, 6, 4))
        family = {m: build_eq_fingerprint_randomized(m) for m in (4, 6)}
        alg = compose_bh_randomized(family, params)
        assert alg.oracles[0].input_length == 4
        assert alg.oracles[1].input_length == 6


class TestQuantumCompose:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_matches_single_qubit_chain(self, seed):
        for k, t in ((2, 1), (4, 2), (8, 2)):
            params = pm_params(k, t)
            inst = pm_instance(k, t, seed=seed)
            composed = compose_bh_quantum(build_partialmod_quantum(1), params)
            direct = build_bh_partialmod_single_qubit(params, beta=1)
            da = exact_answer_distribution(composed, inst.stream)
            db = exact_answer_distribution(direct, inst.stream)
            assert set(da) == set(db)
            for key in da:
                assert da[key] == pytest.approx(db[key], abs=1e-9)

    def test_perfect_oracle_keeps_the_xor_chain(self):
        params = pm_params(4, 2)
        inst = pm_instance(4, 2, seed=4)
        alg = compose_bh_quantum(build_partialmod_quantum(1), params)
        values = [PM1.value(b) for b in inst.blocks]
        for answers, prob in exact_answer_distribution(alg, inst.stream).items():
            for j in range(params.k - 1):
                assert answers[j + 1] == values[j] ^ answers[j]

    def test_designed_error_matches_closed_form(self):
        params = pm_params(6, 3)
        inst = pm_instance(6, 3, seed=5)
        alg = compose_bh_quantum(build_partialmod_quantum(1, error_rate=0.25), params)
        expected, _ = exact_expected_cost(alg, inst, PM1)
        assert expected == pytest.approx(composition_closed_form(0.25, params), abs=1e-9)

    def test_eq_subroutine_matches_pattern_oracle(self):
        # data-dependent per-block error rates, fed to the independent oracle
        eq = FunctionSpec("eq")
        params = BHParams(k=3, t=3, r=1, w=3, m=(4, 4, 4))
        inst = generate_instance(eq, params, seed=21)
        machine = build_eq_fingerprint_quantum(4)
        alg = compose_bh_quantum(machine, params)
        expected, _ = exact_expected_cost(alg, inst, eq)
        from blackhats.functions import FingerprintConfig

        primes = FingerprintConfig().primes
        eps = []
        for block in inst.blocks[:params.k - 1]:
            accept = eq_quantum_accept_probability(halves_difference(block), primes)
            truth = eq.value(block)
            eps.append(1.0 - accept if truth == 1 else accept)
        assert expected == pytest.approx(expected_cost_oracle(eps, params), abs=1e-9)


class TestRandomGuess:
    def test_expected_block_cost_z1(self):
        params = pm_params(2, 2)
        inst = pm_instance(2, 2, seed=6)
        alg = build_random_guess(params)
        expected, _ = exact_expected_cost(alg, inst, PM1)
        assert expected / params.t == pytest.approx(2.0, abs=1e-9)

    def test_expected_block_cost_z4(self):
        params = pm_params(4, 1)
        inst = pm_instance(4, 1, seed=6)
        alg = build_random_guess(params)
        expected, _ = exact_expected_cost(alg, inst, PM1)
        closed = (1 - 2.0 ** -4) * 3 + 2.0 ** -4 * 1
        assert expected == pytest.approx(closed, abs=1e-9)
        assert closed == 2.875

    def test_exact_enumeration_has_uniform_support(self):
        params = pm_params(3, 3)
        inst = pm_instance(3, 3, seed=6)
        dist = exact_answer_distribution(build_random_guess(params), inst.stream)
        assert len(dist) == 8
        assert all(p == pytest.approx(0.125, abs=1e-12) for p in dist.values())

    def test_vectorized_sampler_is_reproducible(self):
        alg = build_random_guess(pm_params(4, 2))
        a = alg.sample_answer_matrix(50, seed=3)
        b = alg.sample_answer_matrix(50, seed=3)
        assert (a == b).all()


class TestBaselines:
    def test_constant_matches_all_zero_optimum(self):
        params = pm_params(4, 2)
        inst = generate_instance(PM1, params, seed=30)
        # force an instance whose optimum is all zeros: every block value 0
        blocks = tuple("001111" for _ in range(4))
        from blackhats.problem import encode_instance
        inst = encode_instance(params, blocks, PM1)
        alg = build_constant_baseline(0, params)
        answers = deterministic_answers(alg, inst.stream)
        assert cost(inst, answers, PM1).total_cost == params.t * params.r

    def test_constant_is_reproducible(self):
        params = pm_params(3, 3)
        inst = pm_instance(3, 3, seed=31)
        alg = build_constant_baseline(1, params)
        assert deterministic_answers(alg, inst.stream) == (1, 1, 1)
        assert deterministic_answers(alg, inst.stream) == (1, 1, 1)

    def test_history_algorithm_is_deterministic(self):
        params = pm_params(3, 3)
        inst = pm_instance(3, 3, seed=32)
        alg = history_hash_algorithm(5)
        assert deterministic_answers(alg, inst.stream) == \
            deterministic_answers(alg, inst.stream)

    def test_seeded_machine_emits_k_answers(self):
        params = pm_params(5, 5)
        inst = pm_instance(5, 5, seed=33)
        alg = random_machine_algorithm(2, seed=12)
        assert len(deterministic_answers(alg, inst.stream)) == 5


class TestInvariants:
    def test_marginal_correctness_is_half(self):
        params = pm_params(4, 2)
        inst = pm_instance(4, 2, seed=40)
        optimum = offline_optimum(inst, PM1)
        counter = build_partialmod_counter(1)
        oracles = [build_noisy_oracle(counter, e) for e in (0.1, 0.3, 0.45)]
        dist = exact_answer_distribution(compose_bh_randomized(oracles, params), inst.stream)
        for j in range(params.k):
            marginal = sum(p for a, p in dist.items() if a[j] == optimum[j])
            assert marginal == pytest.approx(0.5, abs=1e-9)

    def test_block_correctness_probability_heterogeneous(self):
        params = pm_params(6, 2)  # z = 3
        inst = pm_instance(6, 2, seed=41)
        optimum = offline_optimum(inst, PM1)
        eps = (0.0, 0.1, 0.2, 0.3, 0.4)
        counter = build_partialmod_counter(1)
        alg = compose_bh_randomized([build_noisy_oracle(counter, e) for e in eps], params)
        dist = exact_answer_distribution(alg, inst.stream)
        z = params.z
        block_probs = []
        for b in range(params.t):
            span = range(b * z, (b + 1) * z)
            p_ok = sum(p for a, p in dist.items()
                       if all(a[j] == optimum[j] for j in span))
            block_probs.append(p_ok)
            interior = eps[b * z:(b + 1) * z - 1]  # prisoners strictly inside the block
            predicted = 0.5 * math.prod(1.0 - e for e in interior)
            assert p_ok == pytest.approx(predicted, abs=1e-9)
        expected = sum(p * cost(inst, a, PM1).total_cost for a, p in dist.items())
        identity = (params.r - params.w) * sum(block_probs) + params.t * params.w
        assert expected == pytest.approx(identity, abs=1e-9)

    def test_emits_exactly_k_answers(self):
        params = pm_params(5, 5)
        inst = pm_instance(5, 5, seed=42)
        for alg in (build_random_guess(params), build_constant_baseline(0, params)):
            answers = sample_answers(alg, inst.stream, trial_rng(1, 0))
            assert len(answers) == params.k


class TestRegistry:
    def test_known_names_resolve(self):
        params = pm_params(4, 2)
        for name in ("const0", "const1", "guess", "bh-pm-1qubit",
                     "bh-rand:partialmod", "bh-quantum:partialmod", "xor-chain"):
            alg = build_algorithm(name, params, PM1)
            assert alg.algorithm_id.startswith(name.split(":")[0])

    def test_eq_names_resolve(self):
        eq = FunctionSpec("eq")
        params = BHParams(k=2, t=1, r=1, w=3, m=(4, 4))
        for name in ("bh-rand:eq", "bh-quantum:eq"):
            build_algorithm(name, params, eq)

    def test_function_mismatch_rejected(self):
        params = pm_params(2, 1)
        with pytest.raises(ValueError):
            build_algorithm("bh-pm-1qubit", params, FunctionSpec("eq"))

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            build_algorithm("bogus", pm_params(2, 1), PM1)


class TestSingleQubitChain:
    def test_wrong_guess_branch_costs_t_w(self):
        params = pm_params(2, 2)
        inst = pm_instance(2, 2, seed=50)
        alg = build_bh_partialmod_single_qubit(params, beta=1)
        dist = exact_answer_distribution(alg, inst.stream)
        costs = sorted(cost(inst, a, PM1).total_cost for a in dist)
        assert costs == [params.t * params.r, params.t * params.w]

    def test_uniform_first_answer(self):
        params = pm_params(3, 3)
        inst = pm_instance(3, 3, seed=51)
        dist = exact_answer_distribution(
            build_bh_partialmod_single_qubit(params, beta=1), inst.stream)
        first = {}
        for a, p in dist.items():
            first[a[0]] = first.get(a[0], 0.0) + p
        assert first[0] == pytest.approx(0.5, abs=1e-9)
        assert first[1] == pytest.approx(0.5, abs=1e-9)
