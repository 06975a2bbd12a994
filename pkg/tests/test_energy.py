import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriedit.energy import EnergyBreakdown, EnergyWeights, hamming, pi_ratio, total_energy
from veriedit.state import build_evidence, make_state


class FixedFluency:
    def __init__(self, value):
        self.value = value

    def pseudo_loglik(self, seq):
        return self.value


class FixedVerifier:
    def __init__(self, prob):
        self.prob = prob

    def support_prob(self, seq, evidence):
        return self.prob


def state_of(text, original=None):
    tokens = tuple(text.split())
    ev = build_evidence([], tokens)
    st_ = make_state(tuple((original or text).split()), ev)
    from veriedit.state import EditState, segment

    return EditState(
        tokens=tokens,
        segmentation=segment(tokens, ev.sorted_gazetteer),
        original=st_.original,
        evidence=ev,
    )


class TestHamming:
    def test_identity(self):
        assert hamming(("a", "b", "c"), ("a", "b", "c")) == 0

    def test_single_substitution(self):
        assert hamming(("a", "x", "c"), ("a", "b", "c")) == 1

    def test_length_difference_convention(self):
        assert hamming(("a", "b"), ("a", "b", "c", "d")) == 2

    @given(
        st.lists(st.sampled_from("abc"), max_size=6).map(tuple),
        st.lists(st.sampled_from("abc"), max_size=6).map(tuple),
    )
    def test_symmetry(self, a, b):
        assert hamming(a, b) == hamming(b, a)

    @given(st.lists(st.sampled_from("abc"), max_size=6).map(tuple))
    def test_zero_iff_equal(self, a):
        assert hamming(a, a) == 0


class TestTotalEnergy:
    def test_arithmetic_example(self):
        st_ = state_of("a x c", original="a b c")
        got = total_energy(st_, FixedFluency(-2.0), FixedVerifier(0.5), EnergyWeights())
        assert got.e_lm == pytest.approx(2.0)
        assert got.e_v == pytest.approx(math.log(2.0), abs=1e-12)
        assert got.e_h == 1.0
        assert got.total == pytest.approx(2.0 + math.log(2.0) + 1.0, abs=1e-12)

    def test_unchanged_claim_has_zero_hamming(self):
        st_ = state_of("a b c")
        got = total_energy(st_, FixedFluency(-1.0), FixedVerifier(0.9))
        assert got.e_h == 0.0

    def test_weight_masking(self):
        st_ = state_of("a x c", original="a b c")
        got = total_energy(st_, FixedFluency(-2.0), FixedVerifier(0.5), EnergyWeights(0, 1, 0))
        assert got.total == pytest.approx(got.e_v, abs=1e-15)

    def test_purity(self):
        st_ = state_of("a x c", original="a b c")
        a = total_energy(st_, FixedFluency(-2.0), FixedVerifier(0.5))
        b = total_energy(st_, FixedFluency(-2.0), FixedVerifier(0.5))
        assert a == b


class TestWeights:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            EnergyWeights(-1, 1, 1)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            EnergyWeights(0, 0, 0)


def breakdown(total):
    return EnergyBreakdown(e_lm=total, e_v=0.0, e_h=0.0, total=total)


class TestPiRatio:
    def test_equal_totals(self):
        assert pi_ratio(breakdown(3.0), breakdown(3.0)) == 1.0

    def test_downhill(self):
        assert pi_ratio(breakdown(1.0), breakdown(2.0)) == pytest.approx(math.e, abs=1e-12)

    def test_uphill(self):
        assert pi_ratio(breakdown(2.0), breakdown(1.0)) == pytest.approx(1 / math.e, abs=1e-12)

    def test_overflow_clamped(self):
        assert math.isfinite(pi_ratio(breakdown(-1e6), breakdown(1e6)))

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_reciprocal(self, a, b):
        x, y = breakdown(a), breakdown(b)
        assert pi_ratio(x, y) * pi_ratio(y, x) == pytest.approx(1.0, abs=1e-12)
