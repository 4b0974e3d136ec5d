import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anderson_edge.eigen import eig_hermitian, eig_smallest_k, eigvalsh, tridiagonalize
from anderson_edge.errors import NonFiniteEntry

from conftest import random_hermitian


def charpoly_roots(m, grid=200_001):
    """Eigenvalues as sign changes of det(M - xI), refined by bisection."""
    n = m.shape[0]
    bound = np.max(np.sum(np.abs(m), axis=1)) + 1.0
    xs = np.linspace(-bound, bound, grid)
    eye = np.eye(n)

    def p(x):
        return np.linalg.det(m[None] - np.asarray(x)[:, None, None] * eye).real

    vals = p(xs)
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    roots = []
    for i in idx:
        a, b = xs[i], xs[i + 1]
        fa = vals[i]
        for _ in range(80):
            mid = 0.5 * (a + b)
            fm = p([mid])[0]
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    return np.array(roots)


@pytest.mark.parametrize("seed", range(10))
def test_5x5_matches_characteristic_polynomial(seed):
    m = random_hermitian(np.random.default_rng(seed), 5)
    oracle = charpoly_roots(m)
    assert oracle.size == 5
    np.testing.assert_allclose(eigvalsh(m), oracle, atol=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 33, 64])
def test_residual_orthonormality_trace(rng, n):
    m = random_hermitian(rng, n)
    dec = eig_hermitian(m)
    v, w = dec.vectors, dec.values
    frob = np.linalg.norm(m)
    assert np.all(np.diff(w) >= 0)
    assert np.linalg.norm(m @ v - v * w, axis=0).max() <= 1e-10 * frob
    assert np.abs(v.conj().T @ v - np.eye(n)).max() <= 1e-10
    assert abs(w.sum() - np.trace(m).real) <= 1e-9 * frob


def test_two_by_two_closed_form():
    a, c, b = 1.3, -0.4, 0.7 - 0.2j
    m = np.array([[a, b], [np.conj(b), c]])
    mean, rad = (a + c) / 2, np.hypot((a - c) / 2, abs(b))
    np.testing.assert_allclose(eigvalsh(m), [mean - rad, mean + rad], atol=1e-14)


def test_degenerate_cluster_gives_orthonormal_basis(rng):
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    lam = np.array([-1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 5.0, 7.0])
    m = (q * lam) @ q.conj().T
    dec = eig_hermitian(m)
    np.testing.assert_allclose(dec.values, lam, atol=1e-12)
    assert np.abs(dec.vectors.conj().T @ dec.vectors - np.eye(8)).max() < 1e-12
    assert np.linalg.norm(m @ dec.vectors - dec.vectors * dec.values, axis=0).max() < 1e-12


def test_identity_and_diagonal():
    np.testing.assert_array_equal(eigvalsh(np.eye(4)), np.ones(4))
    np.testing.assert_allclose(eigvalsh(np.diag([3.0, -1.0, 2.0])), [-1.0, 2.0, 3.0])


def test_input_is_symmetrised(rng):
    m = random_hermitian(rng, 6)
    skew = rng.normal(size=(6, 6))
    skew = 1e-3 * (skew - skew.T)
    np.testing.assert_allclose(eigvalsh(m + skew), eigvalsh(m), atol=1e-13)


def test_non_finite_rejected():
    m = np.eye(3)
    m[1, 2] = np.nan
    with pytest.raises(NonFiniteEntry):
        eig_hermitian(m)
    with pytest.raises(NonFiniteEntry):
        eig_smallest_k(np.diag([1.0, np.inf]), 1)


def test_tridiagonal_form(rng):
    m = random_hermitian(rng, 9)
    d, e, q = tridiagonalize(m)
    t = q.conj().T @ m @ q
    expected = np.diag(d) + np.diag(e[:-1], 1) + np.diag(e[:-1], -1)
    np.testing.assert_allclose(t, expected, atol=1e-12)
    assert np.all(e >= 0)


@pytest.mark.parametrize("n,k", [(5, 1), (20, 3), (64, 10), (40, 40)])
def test_smallest_k_matches_full(rng, n, k):
    m = random_hermitian(rng, n)
    full = eig_hermitian(m)
    part = eig_smallest_k(m, k)
    np.testing.assert_allclose(part.values, full.values[:k], atol=1e-11)
    assert np.linalg.norm(m @ part.vectors - part.vectors * part.values, axis=0).max() < 1e-10 * np.linalg.norm(m)
    assert np.abs(part.vectors.conj().T @ part.vectors - np.eye(k)).max() < 1e-10


def test_smallest_k_tight_cluster(rng):
    q, _ = np.linalg.qr(rng.normal(size=(30, 30)))
    lam = np.concatenate([[1.0, 1.0 + 1e-13, 1.0 + 2e-13], np.linspace(2, 5, 27)])
    m = (q * lam) @ q.T
    dec = eig_smallest_k(m, 3)
    assert np.abs(dec.vectors.conj().T @ dec.vectors - np.eye(3)).max() < 1e-10
    assert np.linalg.norm(m @ dec.vectors - dec.vectors * dec.values, axis=0).max() < 1e-10


def test_smallest_k_bounds(rng):
    with pytest.raises(ValueError):
        eig_smallest_k(np.eye(3), 0)
    with pytest.raises(ValueError):
        eig_smallest_k(np.eye(3), 4)


hermitian = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, 2**31 - 1), st.floats(-5, 5))
)


@settings(max_examples=40, deadline=None)
@given(hermitian)
def test_shift_and_permutation_properties(args):
    n, seed, shift = args
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, n)
    base = eigvalsh(m)
    np.testing.assert_allclose(eigvalsh(m + shift * np.eye(n)), base + shift, atol=1e-11)
    perm = rng.permutation(n)
    np.testing.assert_allclose(eigvalsh(m[np.ix_(perm, perm)]), base, atol=1e-11)
    np.testing.assert_allclose(eigvalsh(-m), -base[::-1], atol=1e-11)


def test_deterministic(rng):
    m = random_hermitian(rng, 24)
    a, b = eig_hermitian(m), eig_hermitian(m.copy())
    assert np.array_equal(a.values, b.values) and np.array_equal(a.vectors, b.vectors)
