import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from poissonlab.eigensolver import symmetric_eig


def _sym(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    return (a + a.T) / 2


@pytest.mark.parametrize("n", [1, 2, 3, 10, 57, 200])
def test_matches_lapack(n):
    a = _sym(n, n)
    vals, vecs = symmetric_eig(a)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-11)
    assert np.abs(a @ vecs - vecs * vals).max() < 1e-11
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)


def test_values_only():
    a = _sym(30, 1)
    vals, vecs = symmetric_eig(a, want_vectors=False)
    assert vecs is None
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 16])
def test_path_spectrum_closed_form(n):
    # tridiagonal -1 off-diagonal: eigenvalues -2 cos(pi k / (n+1))
    a = -(np.eye(n, k=1) + np.eye(n, k=-1))
    vals, _ = symmetric_eig(a)
    k = np.arange(1, n + 1)
    np.testing.assert_allclose(vals, np.sort(-2 * np.cos(np.pi * k / (n + 1))), atol=1e-13)


def test_degenerate_spectrum():
    # the complete graph K_5 has eigenvalue 1 with multiplicity 4
    a = -(np.ones((5, 5)) - np.eye(5))
    vals, vecs = symmetric_eig(a)
    np.testing.assert_allclose(vals, [-4, 1, 1, 1, 1], atol=1e-13)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(5), atol=1e-13)


def test_diagonal_input_sorted():
    vals, vecs = symmetric_eig(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(vals, [-1.0, 2.0, 3.0])
    np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [1, 2, 0]])


def test_rejects_non_square():
    with pytest.raises(ValueError):
        symmetric_eig(np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (8, 8), elements=st.floats(-10, 10)))
def test_property_residual_and_orthogonality(m):
    a = (m + m.T) / 2
    vals, vecs = symmetric_eig(a)
    scale = max(1.0, np.abs(a).sum(axis=1).max())
    assert np.all(np.diff(vals) >= 0)
    assert np.abs(a @ vecs - vecs * vals).max() <= 1e-12 * scale * 10
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(8), atol=1e-12)
    np.testing.assert_allclose(vals.sum(), np.trace(a), atol=1e-10 * scale)
