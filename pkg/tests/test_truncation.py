import numpy as np
import pytest

from concavereg import DomainError
from concavereg.truncation import (check_contractive, check_structure, default_level,
                                   level_set_cardinalities, truncate)
from oracles import random_concave, random_monotone_concave


def test_inside_band_is_untouched():
    star = np.array([0.0, 1.0, 2.0])
    theta = np.array([0.5, 1.0, 1.2])
    res = truncate(theta, star, 1.0)
    np.testing.assert_array_equal(res.truncated, theta)
    assert res.S1.size == 0 and res.S2.size == 0
    assert check_contractive(theta, star, res) == pytest.approx(-np.min(np.abs(theta - star)))


def test_worked_example():
    star = np.array([0.0, 1.0, 2.0])
    theta = np.array([-3.0, 5.0, 0.0])
    res = truncate(theta, star, 1.0)
    np.testing.assert_array_equal(res.truncated, [-1.0, 3.0, 0.0])
    assert res.S1.tolist() == [0] and res.S2.tolist() == [1]
    assert (res.lower_clamp, res.upper_clamp) == (-1.0, 3.0)
    assert check_contractive(theta, star, res) == pytest.approx(-1.0)
    assert check_structure(theta, star, res, k=2) == []


def test_worked_example_level_sets():
    star = np.array([0.0, 1.0, 2.0])
    theta = np.array([-3.0, 5.0, 0.0])
    t = float(np.sqrt(29.0))
    rep = level_set_cardinalities(theta, star, t, 1.0, k=2)
    assert rep.ok
    j2 = list(rep.levels).index(4.0)
    assert rep.counts[j2] == 0 and rep.caps[j2] == pytest.approx(29 / 16)


def test_equal_sequences_have_empty_level_sets():
    star = np.array([0.0, 1.0, 1.5, 1.75])
    rep = level_set_cardinalities(star, star, 0.0, 1.0)
    assert rep.ok and np.all(rep.counts == 0)


def test_level_sets_need_norm_bound():
    with pytest.raises(DomainError):
        level_set_cardinalities([0.0, 3.0, 0.0], [0.0, 1.0, 2.0], 1.0, 1.0)


def test_input_validation():
    with pytest.raises(DomainError):
        truncate([0.0, 1.0, 0.0], [0.0, 1.0, 0.0], 1.0)  # reference not monotone
    with pytest.raises(DomainError):
        truncate([0.0, 0.0, 1.0], [0.0, 1.0, 2.0], 1.0)  # theta not concave
    with pytest.raises(DomainError):
        truncate([0.0, 1.0, 0.0], [0.0, 1.0, 2.0], 0.0)


def test_reversal_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(3, 25))
        star = random_monotone_concave(rng, n)
        theta = random_concave(rng, n, 5.0, k=int(rng.integers(1, n + 1)))
        L = float(rng.uniform(0.1, 2.0))
        a = truncate(theta, star, L)
        b = truncate(theta[::-1], star[::-1], L)
        np.testing.assert_array_equal(a.truncated, b.truncated[::-1])
        assert sorted(n - 1 - b.S1) == a.S1.tolist()


def test_breakpoints_come_from_lower_set():
    star = np.linspace(0.0, 1.0, 8)
    theta = np.array([-9.0, -4.0, 0.0, 2.0, 2.5, 1.0, -3.0, -8.0])
    res = truncate(theta, star, 1.0)
    assert res.breakpoints == (2, 7)
    assert check_structure(theta, star, res, k=5) == []


def test_default_level():
    assert default_level(0.5) == 64.0
