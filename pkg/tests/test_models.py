from __future__ import annotations

import math

import pytest

import shiftlab as sl
from shiftlab.core import check_extendable, check_factorial
from shiftlab.errors import EmptyLanguageError, ExpansionUncertainError

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2
LOG_GOLDEN = math.log(GOLDEN_RATIO)
TRIBONACCI = 1.8392867552141612


# -- SFTs ---------------------------------------------------------------------

def test_full_shift_counts(full2):
    assert [full2.count(n) for n in range(1, 6)] == [2, 4, 8, 16, 32]


def test_golden_fibonacci_counts(golden):
    assert [golden.count(n) for n in range(1, 5)] == [2, 3, 5, 8]


def test_forbid_20_21_keeps_two_as_sink():
    # the three-letter SFT where the coded core is strictly smaller than X
    x = sl.sft_from_forbidden(sl.SftSpec.from_strings("012", ["20", "21"]))
    a = x.alphabet
    assert x.contains(a.word("22"))
    assert x.contains(a.word("012"))
    assert not x.contains(a.word("210"))
    assert check_extendable(x, 6) == []


def test_stranded_symbol_pruned():
    # 0 has no right continuation once 00 and 01 are forbidden
    x = sl.sft_from_forbidden(sl.SftSpec.from_strings("01", ["00", "01"]))
    a = x.alphabet
    assert not x.contains(a.word("0"))
    assert x.contains(a.word("111"))
    assert check_extendable(x, 6) == []


def test_empty_language_raises():
    with pytest.raises(EmptyLanguageError):
        sl.sft_from_forbidden(sl.SftSpec.from_strings("01", ["00", "01", "10", "11"]))


def test_entropy_oracles(golden, forbid111):
    assert sl.sft_entropy_exact(sl.full_shift(3)) == pytest.approx(math.log(3), abs=1e-11)
    assert sl.sft_entropy_exact(golden) == pytest.approx(LOG_GOLDEN, abs=1e-11)
    assert sl.sft_entropy_exact(forbid111) == pytest.approx(math.log(TRIBONACCI), abs=1e-11)


def test_entropy_cross_check_against_counts(golden):
    # (1/n) log #L_n approaches the Perron value from above
    h = sl.sft_entropy_exact(golden)
    rate = math.log(golden.count(22)) / 22
    assert h <= rate <= h + 2e-2


# -- cycle SFT ----------------------------------------------------------------

def test_cycle_sft_follower_counts():
    c4 = sl.cycle_sft(4)
    assert c4.count(2) == 8  # each symbol has exactly two followers


def test_cycle_sft_entropy_log2(cycle5):
    assert sl.sft_entropy_exact(cycle5) == pytest.approx(math.log(2), abs=1e-11)


def test_cycle_sft_needs_k_at_least_4():
    with pytest.raises(ValueError):
        sl.cycle_sft(3)


def test_cycle_avoid_symbol_rate_bound():
    c8 = sl.cycle_sft(8)
    ws = sl.avoid_symbol_set(c8, "1")
    rep = sl.pressure_estimate(ws, sl.Potential.zero(c8.alphabet), 18, fekete=False)
    assert rep.point_estimate >= (1 - 4 / 8) * math.log(2) - 0.02


def test_avoid_symbol_count_hook_matches_enumeration(cycle5):
    ws = sl.avoid_symbol_set(cycle5, "3")
    for n in range(1, 7):
        assert ws.count(n) == len(ws.at(n))


# -- beta shifts ----------------------------------------------------------------

def test_quasi_greedy_golden():
    z = sl.quasi_greedy_expansion(GOLDEN_RATIO, 6)
    assert z == (1, 0, 1, 0, 1, 0)


def test_quasi_greedy_base_two():
    assert sl.quasi_greedy_expansion(2.0, 4) == (1, 1, 1, 1)


def test_quasi_greedy_first_digit_small_beta():
    z = sl.quasi_greedy_expansion(1.1, 8)
    assert z[0] == 1


def test_quasi_greedy_uncertain_near_boundary():
    # perturb the golden ratio into the unresolvable zone between the snap
    # tolerance and the guard
    with pytest.raises(ExpansionUncertainError):
        sl.quasi_greedy_expansion(GOLDEN_RATIO + 1e-11, 8)


def test_beta_spec_sum_check():
    spec = sl.BetaSpec.from_beta(GOLDEN_RATIO, 20)
    assert spec.z_period == (1, 0)
    assert spec.expansion_sums_to_one()


def test_beta_golden_equals_golden_sft(golden):
    spec = sl.BetaSpec.from_beta(GOLDEN_RATIO, 24)
    b = sl.beta_shift(spec, 20)
    for n in range(1, 21):
        assert b.words(n) == golden.words(n)


def test_beta_two_is_full_shift():
    spec = sl.BetaSpec.from_beta(2.0, 24)
    b = sl.beta_shift(spec, 12)
    assert all(b.count(n) == 2 ** n for n in range(1, 10))


def test_beta_driving_sequence_admissible():
    for beta in (GOLDEN_RATIO, 1.8, 2.5, math.pi):
        spec = sl.BetaSpec.from_beta(beta, 24)
        b = sl.beta_shift(spec, 20)
        for n in (5, 12, 20):
            assert b.contains(spec.prefix(n))


def test_beta_factorial_extendable():
    spec = sl.BetaSpec.from_beta(1.8, 24)
    b = sl.beta_shift(spec, 16)
    assert check_factorial(b, 6) == []
    assert check_extendable(b, 6) == []


# -- S-gap shifts ---------------------------------------------------------------

def test_sgap_membership_examples(sgap12):
    a = sgap12.alphabet
    assert sgap12.contains(a.word("101001"))
    assert not sgap12.contains(a.word("11"))  # gap 0 not in S


def test_sgap_naturals_allows_adjacent_ones():
    s = sl.s_gap_shift(sl.SGapSpec.naturals())
    assert s.contains(s.alphabet.word("11"))


def test_sgap_entropy_root(sgap12):
    # x^{-2} + x^{-3} = 1 has root x^3 = x + 1
    root = 1.3247179572447460
    rep = sl.pressure_estimate(sl.WordSet.language(sgap12), sl.Potential.zero(sgap12.alphabet), 22)
    assert rep.point_estimate == pytest.approx(math.log(root), abs=1e-2)


def test_sgap_boundary_runs(sgap12):
    a = sgap12.alphabet
    assert sgap12.contains(a.word("00"))      # inside a gap of length 2
    assert not sgap12.contains(a.word("000"))  # no gap of length >= 3


# -- coded shifts ----------------------------------------------------------------

def test_coded_full_shift():
    c = sl.coded_shift(sl.CodedSpec.from_strings("01", ["0", "1"]))
    assert all(c.count(n) == 2 ** n for n in range(1, 8))


def test_coded_matches_sgap(sgap12):
    c = sl.coded_shift(sl.CodedSpec.from_strings("01", ["10", "100"]))
    for n in range(1, 17):
        assert c.words(n) == sgap12.words(n)


def test_coded_balanced_blocks():
    gens = ["01", "0011", "000111", "00001111", "0000011111", "000000111111"]
    c = sl.coded_shift(sl.CodedSpec.from_strings("01", gens, truncated=True))
    assert c.contains(c.alphabet.word("000111"))
    assert c.coded_truncated


# -- cocyclic shifts ---------------------------------------------------------------

def test_cocyclic_identity_full_shift():
    c = sl.cocyclic_shift(sl.CocyclicSpec.from_lists([[[1, 0], [0, 1]], [[1, 0], [0, 1]]]))
    assert all(c.count(n) == 2 ** n for n in range(1, 8))


def test_cocyclic_dimension_one():
    c = sl.cocyclic_shift(sl.CocyclicSpec.from_lists([[[1]], [[1]]]))
    assert c.count(4) == 16


def test_cocyclic_projection_example():
    c = sl.cocyclic_shift(sl.CocyclicSpec.from_lists(
        [[[1, 0], [0, 0]], [[0, 1], [0, 0]]]
    ))
    a = c.alphabet
    assert not c.contains(a.word("22"))
    assert c.contains(a.word("12"))


def test_cocyclic_commuting_projections_reproduce_sft(cocyclic_runs):
    sft = sl.sft_from_forbidden(sl.SftSpec.from_strings("12", ["12", "21"]))
    for n in range(1, 11):
        assert [cocyclic_runs.alphabet.text(w) for w in cocyclic_runs.words(n)] == [
            sft.alphabet.text(w) for w in sft.words(n)
        ]


def test_cocyclic_swap_is_not_window_local(cocyclic_swap):
    a = cocyclic_swap.alphabet
    # a single swap symbol flips which projection can follow
    assert not cocyclic_swap.contains(a.word("131"))
    assert cocyclic_swap.contains(a.word("1331"))
    assert check_factorial(cocyclic_swap, 6) == []
    assert check_extendable(cocyclic_swap, 6) == []


# -- sliding block codes -------------------------------------------------------------

def test_factor_identity(golden):
    code = sl.BlockCode(0, {(0,): 0, (1,): 1}, golden.alphabet)
    fac = sl.sliding_block_factor(golden, code)
    for n in range(1, 9):
        assert fac.words(n) == golden.words(n)


def test_factor_relabel_full_shift(full2):
    code = sl.BlockCode(0, {(0,): 1, (1,): 0}, full2.alphabet)
    fac = sl.sliding_block_factor(full2, code)
    assert all(fac.count(n) == 2 ** n for n in range(1, 7))


def test_factor_xor_counts(golden):
    code = sl.BlockCode(1, {w: w[1] ^ w[2] for w in golden.words(3)}, golden.alphabet)
    fac = sl.sliding_block_factor(golden, code)
    # frozen via image enumeration of L_{n+2}: 010 needs an inadmissible
    # alternating preimage, so the image at length 3 misses exactly one word
    assert [fac.count(n) for n in range(1, 6)] == [2, 4, 7, 12, 20]
    assert not fac.contains(golden.alphabet.word("010"))


def test_factor_composition(golden):
    from shiftlab.models import compose_block_codes

    inner = sl.BlockCode(1, {w: w[1] ^ w[2] for w in golden.words(3)}, golden.alphabet)
    mid = sl.sliding_block_factor(golden, inner)
    outer = sl.BlockCode(1, {w: w[0] ^ w[1] ^ w[2] for w in mid.words(3)}, golden.alphabet)
    two_step = sl.sliding_block_factor(mid, outer)
    combined = sl.sliding_block_factor(golden, compose_block_codes(golden, inner, outer))
    for n in range(1, 7):
        assert two_step.words(n) == combined.words(n)
