import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blackhats.functions import FunctionSpec
from blackhats.problem import (
    BHParams,
    InfeasibleInstanceError,
    InvalidInstanceError,
    cost,
    decode_stream,
    encode_instance,
    generate_instance,
    guardian_positions,
    instance_from_json,
    instance_to_json,
    offline_optimum,
)

PM1 = FunctionSpec("partialmod", beta=1)
EQ = FunctionSpec("eq")

# convenient partialmod beta=1 blocks: 4 ones -> value 0, 6 ones -> value 1
B0 = "001111"
B1 = "111111"


def params_for(blocks, t=1, r=1, w=2):
    return BHParams(k=len(blocks), t=t, r=r, w=w, m=tuple(len(b) for b in blocks))


class TestEncoding:
    def test_two_block_stream(self):
        params = BHParams(k=2, t=1, r=1, w=2, m=(2, 2))
        inst = encode_instance(params, ("01", "11"))
        assert inst.stream == (2, 0, 1, 2, 1, 1)

    def test_single_block_stream(self):
        params = BHParams(k=1, t=1, r=1, w=2, m=(1,))
        assert encode_instance(params, ("0",)).stream == (2, 0)

    def test_stream_length(self):
        params = BHParams(k=3, t=3, r=1, w=2, m=(3, 1, 4))
        inst = encode_instance(params, ("010", "1", "0011"))
        assert inst.n == sum(params.m) + params.k == params.stream_length

    def test_separator_at_every_guardian_position(self):
        params = BHParams(k=3, t=3, r=1, w=2, m=(3, 1, 4))
        inst = encode_instance(params, ("010", "1", "0011"))
        for pos in guardian_positions(params):
            assert inst.stream[pos] == 2

    def test_length_mismatch_rejected(self):
        params = BHParams(k=2, t=1, r=1, w=2, m=(2, 2))
        with pytest.raises(InvalidInstanceError):
            encode_instance(params, ("011", "11"))
        with pytest.raises(InvalidInstanceError):
            encode_instance(params, ("01",))

    def test_non_bit_characters_rejected(self):
        params = BHParams(k=1, t=1, r=1, w=2, m=(2,))
        with pytest.raises(InvalidInstanceError):
            encode_instance(params, ("0x",))

    def test_infeasible_block_rejected_at_construction(self):
        params = BHParams(k=1, t=1, r=1, w=2, m=(3,))
        with pytest.raises(InfeasibleInstanceError):
            encode_instance(params, ("111",), PM1)  # 3 ones is not a multiple of 2


class TestGuardianPositions:
    # the classic 1-based positions are j + sum of earlier lengths; internally
    # everything is 0-based, hence the +1 in the comparisons
    @pytest.mark.parametrize("m, one_based", [
        ((3, 2), (1, 5)),
        ((1, 1, 1), (1, 3, 5)),
        ((4,), (1,)),
    ])
    def test_matches_documented_formula(self, m, one_based):
        params = BHParams(k=len(m), t=1, r=1, w=2, m=m)
        zero_based = guardian_positions(params)
        assert tuple(p + 1 for p in zero_based) == one_based
        assert list(zero_based) == sorted(zero_based)


class TestParams:
    def test_k_must_divide_by_t(self):
        with pytest.raises(InvalidInstanceError):
            BHParams(k=3, t=2, r=1, w=2, m=(1, 1, 1))

    def test_costs_must_be_ordered(self):
        with pytest.raises(InvalidInstanceError):
            BHParams(k=1, t=1, r=2, w=2, m=(1,))

    def test_z(self):
        assert BHParams(k=8, t=2, r=1, w=3, m=(4,) * 8).z == 4


class TestOfflineOptimum:
    def test_suffix_xor_101(self):
        inst = encode_instance(params_for((B1, B0, B1)), (B1, B0, B1))
        assert offline_optimum(inst, PM1) == (0, 1, 1)

    def test_all_zero_values(self):
        inst = encode_instance(params_for((B0, B0)), (B0, B0))
        assert offline_optimum(inst, PM1) == (0, 0)

    def test_eq_halves(self):
        blocks = ("0101", "0001")
        inst = encode_instance(params_for(blocks), blocks)
        assert offline_optimum(inst, EQ) == (1, 0)

    def test_infeasible_block_raises(self):
        inst = encode_instance(params_for(("111000",)), ("111000",))
        with pytest.raises(InfeasibleInstanceError):
            offline_optimum(inst, PM1)


class TestCost:
    def test_one_wrong_block_of_two(self):
        blocks = (B0, B1)
        inst = encode_instance(params_for(blocks, t=2, r=1, w=3), blocks)
        g = offline_optimum(inst, PM1)
        trace = cost(inst, (g[0], 1 - g[1]), PM1)
        assert trace.total_cost == 4
        assert trace.block_costs == (1, 3)

    def test_optimum_answers_cost_t_r(self):
        blocks = (B0, B1, B1, B0)
        inst = encode_instance(params_for(blocks, t=2, r=1, w=3), blocks)
        g = offline_optimum(inst, PM1)
        assert cost(inst, g, PM1).total_cost == 2 * 1

    def test_single_block_any_wrong_answer_costs_w(self):
        blocks = (B0, B1)
        inst = encode_instance(params_for(blocks, t=1, r=1, w=3), blocks)
        g = offline_optimum(inst, PM1)
        assert cost(inst, (1 - g[0], g[1]), PM1).total_cost == 3

    def test_wrong_answer_count_must_match_k(self):
        blocks = (B0,)
        inst = encode_instance(params_for(blocks), blocks)
        with pytest.raises(InvalidInstanceError):
            cost(inst, (0, 1), PM1)


# -- randomized properties ---------------------------------------------------

bits = st.sampled_from("01")


@st.composite
def random_instances(draw):
    k = draw(st.integers(1, 6))
    t = draw(st.sampled_from([d for d in range(1, k + 1) if k % d == 0]))
    r = draw(st.integers(1, 3))
    w = draw(st.integers(r + 1, r + 4))
    m = tuple(draw(st.integers(1, 5)) for _ in range(k))
    blocks = tuple("".join(draw(st.lists(bits, min_size=length, max_size=length)))
                   for length in m)
    params = BHParams(k=k, t=t, r=r, w=w, m=m)
    return encode_instance(params, blocks)


@given(random_instances())
def test_encode_decode_round_trip(inst):
    assert decode_stream(inst.stream) == inst.blocks


@given(random_instances())
def test_optimum_costs_t_r(inst):
    trace = cost(inst, offline_optimum(inst, EQ), EQ)
    assert trace.total_cost == inst.params.t * inst.params.r
    assert all(trace.correctness)


@given(random_instances())
def test_g_recurrence(inst):
    g = offline_optimum(inst, EQ)
    values = [EQ.value(b) for b in inst.blocks]
    for j in range(inst.params.k - 1):
        assert g[j] == values[j] ^ g[j + 1]
    assert g[-1] == values[-1]


@given(random_instances(), st.data())
def test_single_flip_raises_cost_by_w_minus_r(inst, data):
    g = offline_optimum(inst, EQ)
    j = data.draw(st.integers(0, inst.params.k - 1))
    flipped = tuple(a ^ (1 if i == j else 0) for i, a in enumerate(g))
    base = cost(inst, g, EQ).total_cost
    bumped = cost(inst, flipped, EQ).total_cost
    assert bumped - base == inst.params.w - inst.params.r


class TestJson:
    def test_round_trip(self):
        blocks = (B0, B1)
        inst = encode_instance(params_for(blocks, t=2, r=1, w=3), blocks)
        obj = instance_to_json(inst, PM1)
        assert obj["version"] == 1
        assert obj["indexing"] == "0"
        again, fn = instance_from_json(json.dumps(obj))
        assert again == inst
        assert fn == PM1

    def test_malformed_file_rejected(self):
        with pytest.raises(InvalidInstanceError):
            instance_from_json({"k": 2})


class TestGeneration:
    def test_partialmod_instances_are_feasible(self):
        params = BHParams(k=6, t=2, r=1, w=3, m=(8,) * 6)
        inst = generate_instance(PM1, params, seed=5)
        assert all(PM1.feasible(b) for b in inst.blocks)

    def test_same_seed_same_instance(self):
        params = BHParams(k=4, t=2, r=1, w=3, m=(6,) * 4)
        assert generate_instance(PM1, params, 9) == generate_instance(PM1, params, 9)
