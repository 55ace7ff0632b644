import numpy as np
import pytest

from concavereg import ConeSpec, DomainError, is_member, mode_index, project_affine, range_V
from concavereg.cones import (find_three_block_breakpoints, is_monotone_concave,
                              second_differences)


def test_second_differences_examples():
    np.testing.assert_array_equal(second_differences([0, 1, 0]), [-2.0])
    np.testing.assert_array_equal(second_differences([1, 2, 3, 4]), [0.0, 0.0])
    assert second_differences([0, 0, 1])[0] == 1.0
    assert not is_member([0, 0, 1], ConeSpec.full_concave())


def test_second_differences_needs_three():
    with pytest.raises(DomainError):
        second_differences([1.0, 2.0])


def test_membership_examples():
    assert is_member([0, 1, 0], ConeSpec.full_concave(), tol=0)
    assert not is_member([0, 1, 0], ConeSpec.mode_constrained(1), tol=0)
    assert is_member([5, 0, 5], ConeSpec.three_block(1, 3), tol=0)


def test_three_block_union_membership():
    assert is_member([5, 0, 5, 4, 3], ConeSpec.three_block())
    # four alternating bumps cannot be split into three concave blocks
    assert not is_member([0, 1, 0, 1, 0, 1, 0, 1, 0], ConeSpec.three_block())


def test_three_block_breakpoints_are_valid():
    theta = np.array([0.0, 2.0, 1.0, 5.0, 6.0, 5.0, 9.0, 8.0])
    m = find_three_block_breakpoints(theta)
    assert m is not None
    assert is_member(theta, ConeSpec.three_block(*m))


def test_cone_spec_validation():
    with pytest.raises(DomainError):
        ConeSpec.mode_constrained(0)
    with pytest.raises(DomainError):
        ConeSpec.three_block(3, 3)
    with pytest.raises(DomainError):
        ConeSpec.bounded_concave(-1.0)
    with pytest.raises(DomainError):
        is_member([0.0, 1.0, 0.0], ConeSpec.mode_constrained(4))
    with pytest.raises(DomainError):
        is_member([0.0, 1.0], ConeSpec.full_concave())


def test_project_affine_examples():
    np.testing.assert_allclose(project_affine([1, 2, 3]), [1, 2, 3], atol=1e-12)
    np.testing.assert_allclose(project_affine([0, 0, 3]), [-0.5, 1.0, 2.5], atol=1e-12)


def test_project_affine_orthogonality_and_idempotence():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 40):
        theta = rng.normal(size=n)
        p = project_affine(theta)
        r = theta - p
        assert abs(r.sum()) < 1e-10
        assert abs(r @ np.arange(1, n + 1)) < 1e-10
        np.testing.assert_allclose(project_affine(p), p, atol=1e-12)
        assert theta @ theta == pytest.approx(p @ p + r @ r, rel=1e-9)


def test_range_examples():
    assert range_V([0, 1, 0]) == 1.0
    assert range_V([3.0] * 5) == 0.0
    theta = np.array([0.3, -1.2, 4.0])
    assert range_V(theta + 7.5) == pytest.approx(range_V(theta))


def test_mode_index_examples():
    assert mode_index([0, 1, 0]) == 2
    assert mode_index([3, 2, 1]) == 1
    assert mode_index([1, 1, 0]) == 1
    with pytest.raises(DomainError):
        mode_index([0, 0, 1])


def test_mode_index_splits_into_monotone_halves():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(3, 30))
        theta = np.cumsum(np.sort(rng.normal(size=n))[::-1])
        k = mode_index(theta)
        assert is_member(theta, ConeSpec.mode_constrained(k))
        assert np.all(np.diff(theta[:k]) >= -1e-12)
        assert np.all(np.diff(theta[k - 1:]) <= 1e-12)
        if k >= 3:
            assert is_monotone_concave(theta[:k]) == 1
        if n - k + 1 >= 3:
            assert is_monotone_concave(theta[k - 1:]) in (-1, 1)


def test_affine_shift_stays_concave():
    theta = -np.linspace(-1, 1, 9) ** 2
    assert is_member(theta + 3.0 - 2.0 * np.arange(9), ConeSpec.full_concave())
