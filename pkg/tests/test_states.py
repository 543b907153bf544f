import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clickcount.errors import DomainError, ValidationError
from clickcount.states import (
    NORM_EPS,
    PhotonNumberDistribution,
    coherent_pnd,
    fock_pnd,
    load_pnd,
    odd_coherent_pnd,
    squeezed_vacuum_pnd,
)


def _assert_valid(pnd, tol):
    assert np.all(pnd.probs >= 0)
    assert abs(pnd.probs.sum() - 1) <= pnd.tail_bound + NORM_EPS
    assert pnd.tail_bound <= tol


class TestFock:
    def test_vacuum(self):
        assert fock_pnd(0).probs.tolist() == [1.0]

    @pytest.mark.parametrize("n", [8, 9])
    def test_delta(self, n):
        p = fock_pnd(n)
        assert p.n_max == n
        assert p.probs[n] == 1.0
        assert p.probs[:n].sum() == 0.0
        assert p.tail_bound == 0.0

    def test_negative(self):
        with pytest.raises(DomainError):
            fock_pnd(-1)


class TestCoherent:
    def test_vacuum(self):
        assert coherent_pnd(0.0).probs.tolist() == [1.0]

    def test_mean_20_peak(self):
        p = coherent_pnd(20.0)
        expected = math.exp(-20) * 20**20 / math.factorial(20)
        assert p.probs[20] == pytest.approx(expected, rel=1e-12)
        assert p.probs[20] == pytest.approx(0.0888, abs=5e-5)

    def test_vacuum_weight(self):
        assert coherent_pnd(1.0).probs[0] == pytest.approx(math.exp(-1), rel=1e-15)

    def test_tail_bound_is_an_upper_bound(self):
        from scipy.stats import poisson

        for a in (0.3, 5.0, 20.0, 300.0):
            p = coherent_pnd(a, 1e-10)
            assert poisson.sf(p.n_max, a) <= p.tail_bound * (1 + 1e-9)

    def test_minimal_truncation(self):
        # one entry fewer would leave more than the tolerance uncovered
        from scipy.stats import poisson

        p = coherent_pnd(20.0, 1e-12)
        assert poisson.sf(p.n_max - 2, 20.0) > 1e-12

    def test_negative(self):
        with pytest.raises(DomainError):
            coherent_pnd(-1.0)

    def test_large_mean_does_not_overflow(self):
        p = coherent_pnd(2000.0)
        assert np.all(np.isfinite(p.probs))
        assert p.mean() == pytest.approx(2000.0, rel=1e-11)


class TestSqueezed:
    def test_vacuum(self):
        assert squeezed_vacuum_pnd(0.0).probs.tolist() == [1.0]

    def test_xi_one(self):
        p = squeezed_vacuum_pnd(1.0)
        assert p.probs[0] == pytest.approx(1 / math.cosh(1), rel=1e-14)
        assert p.probs[0] == pytest.approx(0.6481, abs=5e-5)
        assert p.probs[1] == 0.0
        assert p.probs[1::2].sum() == 0.0
        assert abs(p.probs[::2].sum() - 1) <= p.tail_bound + NORM_EPS

    def test_matches_amplitude_squared(self):
        # direct evaluation of |<2m|xi>|^2 with exact factorials
        xi = 0.7
        p = squeezed_vacuum_pnd(xi)
        t = math.tanh(xi)
        for m in range(10):
            amp = (t / 2) ** m * math.sqrt(math.factorial(2 * m)) / math.factorial(m) / math.sqrt(math.cosh(xi))
            assert p.probs[2 * m] == pytest.approx(amp**2, rel=1e-12)

    def test_strong_squeezing_stays_finite(self):
        p = squeezed_vacuum_pnd(3.0, 1e-8)
        assert p.n_max > 170
        assert np.all(np.isfinite(p.probs))
        assert p.mean() == pytest.approx(math.sinh(3.0) ** 2, rel=1e-6)


class TestOddCoherent:
    def test_alpha2_4(self):
        p = odd_coherent_pnd(4.0)
        norm2 = 1 / (2 * (1 - math.exp(-8)))
        assert p.probs[1] == pytest.approx(4 * norm2 * 4 * math.exp(-4), rel=1e-13)
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_even_entries_vanish(self):
        assert odd_coherent_pnd(2.5).probs[::2].sum() == 0.0

    def test_small_amplitude_limit(self):
        assert odd_coherent_pnd(1e-9).probs[1] == pytest.approx(1.0, abs=1e-8)

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            odd_coherent_pnd(0.0)


class TestLoad:
    def test_vacuum(self):
        p = load_pnd({"probabilities": [1.0]})
        assert p.probs.tolist() == [1.0]
        assert p.tail_bound == 0.0

    def test_two_level(self):
        assert load_pnd({"probabilities": [0.5, 0.5]}).n_max == 1

    def test_not_normalized(self):
        with pytest.raises(ValidationError, match="sum"):
            load_pnd({"probabilities": [0.5, 0.6]})

    def test_negative_reports_index(self):
        with pytest.raises(ValidationError) as info:
            load_pnd({"probabilities": [0.5, 0.7, -0.2]})
        assert info.value.index == 2

    def test_empty(self):
        with pytest.raises(ValidationError):
            load_pnd({"probabilities": []})

    def test_extra_fields_rejected(self):
        with pytest.raises(ValidationError, match="unexpected"):
            load_pnd({"probabilities": [1.0], "comment": "x"})

    def test_declared_tail(self):
        p = load_pnd({"probabilities": [0.5, 0.4], "tail_bound": 0.1})
        assert p.tail_bound == pytest.approx(0.1)

    def test_file_round_trip(self, tmp_path):
        original = coherent_pnd(3.0)
        path = tmp_path / "state.json"
        path.write_text(json.dumps(original.to_document()))
        loaded = load_pnd(path)
        np.testing.assert_array_equal(loaded.probs, original.probs)
        assert loaded.tail_bound >= original.tail_bound

    def test_immutable(self):
        p = fock_pnd(2)
        with pytest.raises(ValueError):
            p.probs[0] = 1.0

    def test_direct_construction_validates(self):
        with pytest.raises(ValidationError):
            PhotonNumberDistribution(np.array([0.2, 0.2]))


constructors = st.one_of(
    st.tuples(st.just(coherent_pnd), st.floats(0, 200)),
    st.tuples(st.just(squeezed_vacuum_pnd), st.floats(0, 2.5)),
    st.tuples(st.just(odd_coherent_pnd), st.floats(1e-6, 200)),
)


@settings(max_examples=60, deadline=None)
@given(constructors, st.sampled_from([1e-6, 1e-9, 1e-12, 1e-14]))
def test_constructor_invariants(ctor_param, tol):
    ctor, param = ctor_param
    _assert_valid(ctor(param, tol), tol)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 30), st.floats(1e-15, 1e-6))
def test_prefix_stability(xi_or_a, tol):
    for ctor in (coherent_pnd, odd_coherent_pnd, squeezed_vacuum_pnd):
        x = xi_or_a if ctor is not squeezed_vacuum_pnd else xi_or_a / 15
        loose = ctor(x, 1e-6)
        tight = ctor(x, min(tol, 1e-6))
        assert tight.n_max >= loose.n_max
        np.testing.assert_array_equal(tight.probs[: loose.n_max + 1], loose.probs)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 500))
def test_coherent_mean(a):
    assert abs(coherent_pnd(a, 1e-14).mean() - a) <= 1e-9 * (1 + a)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.01, 50))
def test_disjoint_parity(xi, a):
    sq = squeezed_vacuum_pnd(xi)
    odd = odd_coherent_pnd(a)
    size = max(sq.probs.size, odd.probs.size)
    sq_p = np.pad(sq.probs, (0, size - sq.probs.size))
    odd_p = np.pad(odd.probs, (0, size - odd.probs.size))
    assert np.all(sq_p * odd_p == 0)
