import pytest

from blackhats.adversaries import (
    AdversaryFailure,
    ConfusionTriple,
    DistinguishingCertificate,
    PoolError,
    build_fooling_input,
    find_confusion_triple,
    unbounded_adversary,
)
from blackhats.algorithms import (
    build_constant_baseline,
    build_xor_chain,
    deterministic_answers,
    random_machine_algorithm,
    run_prefix,
)
from blackhats.functions import FunctionSpec, blocks_with_value
from blackhats.problem import BHParams, cost, offline_optimum

PM1 = FunctionSpec("partialmod", beta=1)


def pm_params(k, t, m=6, r=1, w=3):
    return BHParams(k=k, t=t, r=r, w=w, m=(m,) * k)


class TestConfusionTriple:
    def test_constant_baseline_is_confused(self):
        params = pm_params(2, 1)
        alg = build_constant_baseline(0, params)
        found = find_confusion_triple(alg, (), 6, PM1)
        assert isinstance(found, ConfusionTriple)
        assert PM1.value(found.block_zero) == 0
        assert PM1.value(found.block_one) == 1
        assert found.answer == 0

    def test_triple_answers_really_collide(self):
        params = pm_params(3, 3, m=8)
        alg = random_machine_algorithm(2, seed=4)
        found = find_confusion_triple(alg, (), 8, PM1)
        assert isinstance(found, ConfusionTriple)
        for block in (found.block_zero, found.block_one):
            symbols = (2,) + tuple(int(c) for c in block) + (2,)
            _, outputs = run_prefix(alg, symbols)
            assert outputs[-1] == found.answer

    def test_full_memory_reference_distinguishes(self):
        params = pm_params(2, 1)
        alg = build_xor_chain(PM1, params)
        found = find_confusion_triple(alg, (), 6, PM1)
        assert isinstance(found, DistinguishingCertificate)

    def test_one_sided_domain_certificate(self):
        # at m=4, beta=1 the only feasible count is 4 ones (v=2, value 0),
        # so the domain never takes value 1
        params = pm_params(2, 1, m=4)
        alg = build_constant_baseline(0, params)
        found = find_confusion_triple(alg, (), 4, PM1)
        assert isinstance(found, DistinguishingCertificate)
        assert "single function value" in found.reason

    def test_lexicographic_tie_break(self):
        params = pm_params(2, 1)
        alg = build_constant_baseline(0, params)
        a = find_confusion_triple(alg, (), 6, PM1)
        b = find_confusion_triple(alg, (), 6, PM1)
        assert (a.block_zero, a.block_one) == (b.block_zero, b.block_one)
        assert a.block_zero == "001111"  # smallest 4-ones block


class TestFoolingInput:
    def test_const0_two_guardians_hand_recurrence(self):
        params = BHParams(k=2, t=1, r=1, w=2, m=(6, 6))
        alg = build_constant_baseline(0, params)
        report = build_fooling_input(alg, params, PM1)
        assert report.answers == (0, 0)
        assert report.sigma == (0, 1)
        assert offline_optimum(report.instance, PM1) == (1, 1)
        assert cost(report.instance, report.answers, PM1).total_cost == params.t * params.w

    @pytest.mark.parametrize("seed", range(8))
    def test_seeded_machines_forced_to_ratio_w_over_r(self, seed):
        params = pm_params(4, 2, m=8)
        alg = random_machine_algorithm(1 + seed % 2, seed=seed)
        report = build_fooling_input(alg, params, PM1)
        total = cost(report.instance, report.answers, PM1).total_cost
        assert total / (params.t * params.r) == params.w / params.r

    def test_soundness_recomputed_independently(self):
        params = pm_params(4, 2, m=8)
        alg = random_machine_algorithm(2, seed=77)
        report = build_fooling_input(alg, params, PM1)
        replayed = deterministic_answers(alg, report.instance.stream)
        assert replayed == report.answers
        optimum = offline_optimum(report.instance, PM1)
        assert all(a != g for a, g in zip(replayed, optimum))

    def test_full_memory_reference_fails_with_stage(self):
        params = pm_params(3, 3)
        alg = build_xor_chain(PM1, params)
        with pytest.raises(AdversaryFailure) as err:
            build_fooling_input(alg, params, PM1)
        assert err.value.stage == 1

    def test_repeated_runs_are_identical(self):
        params = pm_params(3, 3, m=8)
        alg = random_machine_algorithm(2, seed=5)
        first = build_fooling_input(alg, params, PM1)
        second = build_fooling_input(alg, params, PM1)
        assert first.instance == second.instance
        assert first.sigma == second.sigma


class TestUnboundedAdversary:
    def pools(self, m=6):
        return ({m: blocks_with_value(PM1, m, 0)}, {m: blocks_with_value(PM1, m, 1)})

    def test_const0_all_wrong(self):
        params = pm_params(3, 3)
        alg = build_constant_baseline(0, params)
        zero, one = self.pools()
        inst = unbounded_adversary(alg, params, PM1, zero, one)
        answers = deterministic_answers(alg, inst.stream)
        optimum = offline_optimum(inst, PM1)
        wrong = sum(a != g for a, g in zip(answers, optimum))
        assert wrong == 3 >= 2

    def test_const1_majority_one(self):
        params = pm_params(3, 3)
        alg = build_constant_baseline(1, params)
        zero, one = self.pools()
        inst = unbounded_adversary(alg, params, PM1, zero, one)
        # all announced answers are 1, so the last block gets value 0 and
        # every correct answer is 0
        assert offline_optimum(inst, PM1) == (0, 0, 0)
        answers = deterministic_answers(alg, inst.stream)
        assert sum(a != g for a, g in zip(answers, offline_optimum(inst, PM1))) == 3

    @pytest.mark.parametrize("seed", range(10))
    def test_wrong_count_floor_holds(self, seed):
        params = pm_params(5, 5)
        alg = random_machine_algorithm(2 + seed % 4, seed=seed)
        zero, one = self.pools()
        inst = unbounded_adversary(alg, params, PM1, zero, one)
        answers = deterministic_answers(alg, inst.stream)
        optimum = offline_optimum(inst, PM1)
        assert sum(a != g for a, g in zip(answers, optimum)) >= 3

    def test_missing_pool_value_raises(self):
        params = pm_params(2, 1)
        alg = build_constant_baseline(0, params)
        with pytest.raises(PoolError):
            unbounded_adversary(alg, params, PM1, {6: []}, {6: ["111111"]})

    def test_repeated_runs_identical(self):
        params = pm_params(5, 5)
        alg = random_machine_algorithm(3, seed=2)
        zero, one = self.pools()
        assert unbounded_adversary(alg, params, PM1, zero, one) == \
            unbounded_adversary(alg, params, PM1, zero, one)
