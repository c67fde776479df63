import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaoscover.measures import (
    BernoulliDriver,
    MarkovDriver,
    cylinder_measure,
    decay_violations,
    estimate_decay_constants,
    joint_cylinder_measure,
    pushforward_sample,
    reversed_cylinder_measure,
    sample_path,
)
from chaoscover.symbolic import cantor_ifs, reverse_word

from conftest import MARKOV_EXAMPLE

prob_vectors = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=4).map(lambda v: np.array(v) / sum(v))


def words_upto(n_sym, k):
    for length in range(k + 1):
        yield from itertools.product(range(n_sym), repeat=length)


class TestCylinders:
    def test_fair(self):
        assert cylinder_measure(BernoulliDriver([0.5, 0.5]), (0, 1, 0)) == pytest.approx(1 / 8)

    def test_biased(self):
        assert cylinder_measure(BernoulliDriver([1 / 3, 2 / 3]), (1, 1)) == pytest.approx(4 / 9)

    def test_markov(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        np.testing.assert_allclose(d.stationary, [2 / 3, 1 / 3], atol=1e-12)
        assert cylinder_measure(d, (0, 1)) == pytest.approx(2 / 3 * 0.1)

    def test_empty(self):
        assert cylinder_measure(MarkovDriver(MARKOV_EXAMPLE), ()) == 1.0
        assert reversed_cylinder_measure(BernoulliDriver([0.2, 0.8]), ()) == 1.0

    def test_reversed(self):
        b = BernoulliDriver([1 / 3, 2 / 3])
        assert reversed_cylinder_measure(b, (0, 1)) == pytest.approx(2 / 9) == cylinder_measure(b, (0, 1))
        d = MarkovDriver(MARKOV_EXAMPLE)
        assert reversed_cylinder_measure(d, (0, 1)) == pytest.approx(1 / 3 * 0.2)

    def test_long_words_log_domain(self):
        b = BernoulliDriver([0.5, 0.5])
        w = (0,) * 200
        assert math.log(cylinder_measure(b, w)) == pytest.approx(200 * math.log(0.5))

    def test_validation(self):
        with pytest.raises(ValueError):
            BernoulliDriver([1.0, 0.0])
        with pytest.raises(ValueError):
            BernoulliDriver([0.5, 0.6])
        with pytest.raises(ValueError):
            MarkovDriver([[1.0, 0.0], [0.5, 0.5]])
        with pytest.raises(ValueError):
            MarkovDriver([[0.5, 0.6], [0.5, 0.5]])

    @pytest.mark.parametrize("drv", [BernoulliDriver([0.2, 0.3, 0.5]),
                                     MarkovDriver([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]])])
    def test_shift_invariance(self, drv):
        for w in words_upto(3, 5):
            total = sum(drv.cylinder((j,) + w) for j in range(3))
            assert total == pytest.approx(drv.cylinder(w), rel=1e-12)
            right = sum(drv.cylinder(w + (j,)) for j in range(3))
            assert right == pytest.approx(drv.cylinder(w), rel=1e-12)

    def test_reversed_chain(self):
        d = MarkovDriver([[0.5, 0.3, 0.2], [0.1, 0.6, 0.3], [0.3, 0.3, 0.4]])
        rev = d.reversed()
        for w in words_upto(3, 6):
            assert rev.cylinder(w) == pytest.approx(d.cylinder(reverse_word(w)), rel=1e-12)
            assert reversed_cylinder_measure(rev, w) == pytest.approx(d.cylinder(w), rel=1e-12)

    @given(prob_vectors, st.lists(st.integers(0, 1), max_size=8))
    def test_bernoulli_reversal(self, p, w):
        b = BernoulliDriver(p)
        assert reversed_cylinder_measure(b, w) == pytest.approx(cylinder_measure(b, w), rel=1e-12)


class TestSampling:
    def test_fair_frequency(self):
        path = np.array(sample_path(BernoulliDriver([0.5, 0.5]), 10**6, np.random.default_rng(1)))
        assert 0.498 <= (path == 0).mean() <= 0.502

    def test_near_degenerate(self):
        path = sample_path(BernoulliDriver([1 - 1e-9, 1e-9]), 1000, np.random.default_rng(1))
        assert set(path) == {0}

    def test_markov_transitions(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        path = np.asarray(sample_path(d, 10**6, np.random.default_rng(2)))
        a, b = path[:-1], path[1:]
        for i in range(2):
            for j in range(2):
                freq = np.mean(b[a == i] == j)
                assert abs(freq - MARKOV_EXAMPLE[i][j]) < 0.005

    def test_stream_matches_vectorised_law(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        paths = d.sample_paths(20000, 3, np.random.default_rng(3))
        for w in itertools.product(range(2), repeat=3):
            freq = np.mean(np.all(paths == np.array(w), axis=1))
            assert abs(freq - d.cylinder(w)) < 0.01

    def test_seeded(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        a = sample_path(d, 500, np.random.default_rng(9))
        b = sample_path(d, 500, np.random.default_rng(9))
        assert a == b

    def test_stream_chunks_continue(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        s1 = d.stream(np.random.default_rng(4))
        whole = np.concatenate([s1.draw(7), s1.draw(13)])
        s2 = d.stream(np.random.default_rng(4))
        np.testing.assert_array_equal(whole, s2.draw(20))


class TestPushforward:
    def test_cantor_half(self):
        pts = pushforward_sample(cantor_ifs(), BernoulliDriver([0.5, 0.5]), 20, 10**5, np.random.default_rng(5))
        assert abs(np.mean(pts[:, 0] <= 1 / 3) - 0.5) < 0.01

    def test_degenerate(self):
        pts = pushforward_sample(cantor_ifs(), BernoulliDriver([1 - 1e-12, 1e-12]), 15, 100, np.random.default_rng(6))
        assert np.all(np.abs(pts[:, 0]) <= 3.0**-15)

    def test_markov_reversed_cylinders(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        pts = pushforward_sample(cantor_ifs(), d, 20, 10**5, np.random.default_rng(7))[:, 0]
        # the level-2 cylinder [w] occupies an interval of length 1/9
        for w in itertools.product(range(2), repeat=2):
            left = (2 / 3) * w[0] + (2 / 9) * w[1]
            frac = np.mean((pts >= left - 1e-12) & (pts <= left + 1 / 9 + 1e-12))
            assert abs(frac - reversed_cylinder_measure(d, w)) < 0.01


class TestDecay:
    def test_bernoulli_kappa_zero(self):
        b = BernoulliDriver([0.3, 0.7])
        dc = estimate_decay_constants(b, 10, 3)
        assert dc.kappa == 0.0
        for u in words_upto(2, 3):
            for v in words_upto(2, 3):
                for n in range(len(u), len(u) + 5):
                    assert joint_cylinder_measure(b, u, v, n) == b.cylinder(u) * b.cylinder(v)

    def test_equal_rows(self):
        d = MarkovDriver([[0.3, 0.7], [0.3, 0.7]])
        assert estimate_decay_constants(d, 10, 3).kappa == pytest.approx(0.0, abs=1e-12)

    def test_epsilon(self):
        dc = estimate_decay_constants(MarkovDriver(MARKOV_EXAMPLE), 10, 3)
        assert dc.epsilon == pytest.approx(-math.log2(0.7))
        assert dc.kappa > 0

    def test_certified(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        dc = estimate_decay_constants(d, 10, 3)
        assert decay_violations(d, dc, 10, 3) == []

    def test_joint_matches_enumeration(self):
        d = MarkovDriver(MARKOV_EXAMPLE)
        u, v = (0, 1), (1, 0)
        for n in range(2, 6):
            gap = n - len(u)
            total = sum(d.cylinder(u + mid + v) for mid in itertools.product(range(2), repeat=gap))
            assert joint_cylinder_measure(d, u, v, n) == pytest.approx(total, rel=1e-12)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            joint_cylinder_measure(MarkovDriver(MARKOV_EXAMPLE), (0, 1), (1,), 1)
