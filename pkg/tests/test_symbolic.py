import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoscover.symbolic import (
    AffineMap,
    apply_map,
    build_packing,
    cantor_ifs,
    invariant_ball_diameter,
    make_ifs,
    natural_project,
    packing_transition,
    reverse_word,
    similarity_ifs,
    uniform_packing,
    word_length_bound,
    SymbolicPacking,
)


def two_ratio_ifs():
    return similarity_ifs([0.5, 0.25], [0.0, 0.75], diameter_bound=1.0)


class TestApplyMap:
    def test_identity(self):
        m = AffineMap.from_arrays(np.eye(2) * 0.5, [0, 0])
        ident = AffineMap(np.eye(2), np.zeros(2), 0.5)  # bypasses validation on purpose
        np.testing.assert_allclose(apply_map(ident, [1, 2]), [1, 2])
        np.testing.assert_allclose(m([2, 4]), [1, 2])

    def test_translation_only_at_origin(self):
        m = AffineMap.from_arrays(np.diag([1 / 2, 1 / 3]), [1, 0])
        np.testing.assert_allclose(apply_map(m, [0, 0]), [1, 0])

    def test_scalar(self):
        m = AffineMap.from_arrays([[1 / 3]], [0.0])
        assert apply_map(m, 1.0)[0] == pytest.approx(1 / 3)

    def test_batch(self):
        m = AffineMap.from_arrays(np.diag([1 / 2, 1 / 3]), [1, 0])
        pts = np.array([[0, 0], [2, 3]])
        np.testing.assert_allclose(apply_map(m, pts), [[1, 0], [2, 1]])

    def test_rejects_non_contraction(self):
        with pytest.raises(ValueError):
            AffineMap.from_arrays([[1.0]], [0.0])
        with pytest.raises(ValueError):
            AffineMap.from_arrays(np.diag([0.5, 0.5]), [0.0])
        with pytest.raises(ValueError):
            AffineMap.from_arrays([[0.5]], [0.0], contraction=0.4)

    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
    def test_lipschitz(self, xs):
        m = AffineMap.from_arrays([[0.3, 0.2], [-0.1, 0.4]], [1.0, -2.0])
        x, y = np.array(xs[:2]), np.array(xs[2:])
        assert np.linalg.norm(m(x) - m(y)) <= m.contraction * np.linalg.norm(x - y) + 1e-12


class TestWords:
    @given(st.lists(st.integers(0, 4), max_size=20))
    def test_reverse_involution(self, w):
        assert reverse_word(reverse_word(w)) == tuple(w)
        assert len(reverse_word(w)) == len(w)


class TestIfs:
    def test_invariant_ball_contains_orbit(self, rng):
        maps = [AffineMap.from_arrays(np.diag([0.5, 0.3]), [0, 0]),
                AffineMap.from_arrays(np.diag([0.5, 0.3]), [0.5, 0.7]),
                AffineMap.from_arrays([[0.2, 0.1], [0.0, 0.4]], [0.8, 0.1])]
        ifs = make_ifs(maps)
        assert ifs.diameter_source == "invariant-ball"
        x = np.zeros(2)
        pts = []
        for s in rng.integers(0, 3, 20000):
            x = apply_map(maps[s], x)
            pts.append(x)
        pts = np.array(pts[50:])
        from scipy.spatial.distance import pdist

        assert pdist(pts[::20]).max() <= ifs.diameter_bound

    def test_invariant_ball_maps_into_itself(self):
        maps = [AffineMap.from_arrays([[0.4]], [0.0]), AffineMap.from_arrays([[0.4]], [1.0])]
        d = invariant_ball_diameter(maps)
        c = 0.5 * (0 + 1 / 0.6)
        for m in maps:
            for x in (c - d / 2, c + d / 2):
                assert abs(m([x])[0] - c) <= d / 2 + 1e-12

    def test_single_point_attractor_rejected(self):
        with pytest.raises(ValueError):
            make_ifs([AffineMap.from_arrays([[0.5]], [0.0]), AffineMap.from_arrays([[0.25]], [0.0])])


class TestNaturalProjection:
    def test_all_left(self):
        x, err = natural_project(cantor_ifs(), (0,) * 20, base=[1.0])
        assert 0 <= x[0] <= 3.0**-20
        assert err == pytest.approx(3.0**-20)

    def test_all_right(self):
        x, _ = natural_project(cantor_ifs(), (1,) * 20, base=[1.0])
        assert abs(x[0] - 1) <= 3.0**-20

    def test_two_letters(self):
        x, _ = natural_project(cantor_ifs(), (0, 1), base=[0.0])
        assert x[0] == pytest.approx(2 / 9)

    def test_empty_word_rejected(self):
        with pytest.raises(ValueError):
            natural_project(cantor_ifs(), ())

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=12), st.lists(st.integers(0, 1), min_size=5, max_size=5))
    def test_extension_error(self, w, u):
        ifs = cantor_ifs()
        base = [0.0]
        x, err = natural_project(ifs, w, base)
        y, _ = natural_project(ifs, tuple(w) + tuple(u), base)
        assert abs(x[0] - y[0]) <= err + 1e-15


class TestWordLength:
    def test_cantor(self):
        assert word_length_bound(cantor_ifs(), 3.0**-5) == pytest.approx(6)

    def test_half(self):
        ifs = similarity_ifs([0.5, 0.5], [0.0, 0.5], diameter_bound=1.0)
        assert word_length_bound(ifs, 1.0) == pytest.approx(1)

    def test_bounds_packing(self):
        ifs = cantor_ifs()
        pk = build_packing(ifs, 3.0**-5)
        assert pk.max_length <= word_length_bound(ifs, 3.0**-5) + 1e-9

    @pytest.mark.parametrize("n", range(1, 13))
    def test_bounds_packing_dyadic(self, n):
        ifs = two_ratio_ifs()
        r = 2.0**-n
        assert build_packing(ifs, r).max_length <= word_length_bound(ifs, r) + 1e-9


class TestPacking:
    def test_cantor_depth_two(self):
        pk = build_packing(cantor_ifs(), 1 / 9)
        assert set(pk.words) == set(itertools.product(range(2), repeat=2))

    def test_unequal_ratios(self):
        pk = build_packing(two_ratio_ifs(), 0.25)
        assert set(pk.words) == {(0, 0), (0, 1), (1,)}

    def test_one_level(self):
        ifs = similarity_ifs([0.3, 0.4, 0.2], [0.0, 0.3, 0.8], diameter_bound=1.0)
        pk = build_packing(ifs, 0.5)
        assert set(pk.words) == {(0,), (1,), (2,)}

    def test_rejects(self):
        with pytest.raises(ValueError):
            build_packing(cantor_ifs(), 1.0)
        with pytest.raises(ValueError):
            build_packing(cantor_ifs(), 0.0)

    def test_from_words_validation(self):
        with pytest.raises(ValueError):
            SymbolicPacking.from_words([(0,), (0, 1), (1,)], 2)
        with pytest.raises(ValueError):
            SymbolicPacking.from_words([(0,)], 2)

    @given(st.integers(2, 12), st.lists(st.integers(0, 1), min_size=40, max_size=40))
    def test_unique_prefix(self, n, seq):
        pk = build_packing(two_ratio_ifs(), 2.0**-n)
        hits = [w for w in pk.words if tuple(seq[: len(w)]) == w]
        assert len(hits) == 1
        assert pk.lookup(seq) == hits[0]

    def test_product_condition(self):
        ifs = two_ratio_ifs()
        r = 2.0**-7
        for w in build_packing(ifs, r).words:
            lam = math.prod(ifs.ratios[s] for s in w)
            assert lam <= r * (1 + 1e-12) < lam / ifs.ratios[w[-1]]


class TestTransition:
    def test_cantor(self):
        pk = build_packing(cantor_ifs(), 1 / 9)
        assert packing_transition(pk, (0, 1), 1) == (1, 0)

    def test_unequal(self):
        pk = build_packing(two_ratio_ifs(), 0.25)
        assert packing_transition(pk, (1,), 1) == (1,)

    def test_uniform_is_shift(self):
        pk = uniform_packing(3, 4)
        for w in pk.words:
            for j in range(3):
                assert packing_transition(pk, w, j) == ((j,) + w)[:4]

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_closure(self, n):
        pk = build_packing(two_ratio_ifs(), 2.0**-n)
        words = set(pk.words)
        for w in pk.words:
            for j in range(2):
                assert packing_transition(pk, w, j) in words
