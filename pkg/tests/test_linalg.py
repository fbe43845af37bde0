import numpy as np
import pytest

from chainrule import linalg as la


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def _naive_partial_trace(m, dims, keep):
    """Explicit index loop over every basis element."""
    n = len(dims)
    kd = [dims[k] for k in keep]
    out = np.zeros((int(np.prod(kd)), int(np.prod(kd))), dtype=complex)
    for row in np.ndindex(*dims):
        for col in np.ndindex(*dims):
            if any(row[i] != col[i] for i in range(n) if i not in keep):
                continue
            r = np.ravel_multi_index([row[k] for k in keep], kd) if keep else 0
            c = np.ravel_multi_index([col[k] for k in keep], kd) if keep else 0
            out[r, c] += m[np.ravel_multi_index(row, dims), np.ravel_multi_index(col, dims)]
    return out


def test_eig_of_diagonal_matrix_is_sorted():
    e = la.hermitian_eig(np.diag([1.0, 3.0, 2.0]))
    assert np.allclose(e.eigenvalues, [3, 2, 1])
    assert np.allclose(np.abs(e.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_pauli_x_spectrum():
    e = la.hermitian_eig(np.array([[0, 1], [1, 0]]))
    assert np.allclose(e.eigenvalues, [1, -1])
    assert np.allclose(e.reconstruct(), [[0, 1], [1, 0]])


@pytest.mark.parametrize("dim", [2, 3, 5, 8])
def test_lapack_matches_jacobi(rng, dim):
    m = la.random_hermitian(dim, rng)
    a, b = la.hermitian_eig(m), la.jacobi_eig(m)
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
    assert np.allclose(b.reconstruct(), m, atol=1e-12)
    # columns agree once phases are fixed (spectrum is simple with probability one)
    assert np.allclose(a.eigenvectors, b.eigenvectors, atol=1e-9)


def test_jacobi_degenerate_spectrum(rng):
    u = la.random_unitary(4, rng)
    m = u @ np.diag([2.0, 2.0, -1.0, 0.0]) @ u.conj().T
    e = la.jacobi_eig(m)
    assert np.allclose(e.eigenvalues, [2, 2, 0, -1], atol=1e-12)
    assert np.allclose(e.reconstruct(), m, atol=1e-12)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError, match="Hermitian"):
        la.hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_non_finite_rejected():
    with pytest.raises(ValueError, match="non-finite"):
        la.hermitian_eig(np.array([[np.nan, 0], [0, 1]]))


def test_matrix_log_of_projector_on_support():
    p = np.diag([1.0, 0.0])
    assert np.allclose(la.matrix_fn(p, "log", on_support=True), 0)
    with pytest.raises(ValueError, match="undefined"):
        la.matrix_fn(p, "log")


def test_matrix_fn_inverse_and_sqrt(rng):
    rho = la.random_density(4, rng)
    assert np.allclose(la.matrix_fn(rho, "inv") @ rho, np.eye(4), atol=1e-9)
    s = la.matrix_fn(rho, "sqrt")
    assert np.allclose(s @ s, rho, atol=1e-12)
    assert np.allclose(la.psd_sqrt(rho), s, atol=1e-12)


def test_matrix_log_base_two():
    assert np.allclose(la.matrix_fn(np.diag([4.0, 0.5]), "log"), np.diag([2.0, -1.0]))
    assert np.allclose(la.matrix_fn(np.diag([np.e, 1.0]), "ln"), np.diag([1.0, 0.0]))


def test_psd_sqrt_rejects_negative():
    with pytest.raises(ValueError, match="PSD"):
        la.psd_sqrt(np.diag([1.0, -0.5]))


def test_support_projector():
    p = la.support_projector(np.diag([0.5, 1e-15, 0.2]))
    assert np.allclose(p, np.diag([1, 0, 1]))


@pytest.mark.parametrize("dims,keep", [([2, 3], [0]), ([2, 3], [1]), ([2, 2, 3], [0, 2]),
                                       ([3, 2, 2], [1]), ([2, 2], [])])
def test_partial_trace_matches_loop(rng, dims, keep):
    m = la.random_hermitian(int(np.prod(dims)), rng)
    assert np.allclose(la.partial_trace(m, dims, keep), _naive_partial_trace(m, dims, keep))


def test_partial_trace_of_product(rng):
    a, b = la.random_density(2, rng), la.random_density(3, rng)
    ab = la.kron(a, b)
    assert np.allclose(la.partial_trace(ab, [2, 3], [0]), a)
    assert np.allclose(la.partial_trace(ab, [2, 3], [1]), b)


def test_partial_trace_bad_dims():
    with pytest.raises(ValueError, match="incompatible"):
        la.partial_trace(np.eye(4), [2, 3], [0])


def test_permute_systems_swaps_factors(rng):
    a, b, c = (la.random_density(d, rng) for d in (2, 3, 2))
    m = la.kron(a, b, c)
    assert np.allclose(la.permute_systems(m, [2, 3, 2], [2, 0, 1]), la.kron(c, a, b))


def test_trace_norm():
    assert la.trace_norm(np.diag([1.0, -2.0])) == pytest.approx(3.0)
    assert la.trace_norm(np.array([[0, 1], [0, 0]])) == pytest.approx(1.0)


def test_random_density_properties(rng):
    rho = la.random_density(5, rng, rank=2)
    w = la.hermitian_eig(rho).eigenvalues
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.all(w > -1e-12) and np.sum(w > 1e-10) == 2


def test_random_unitary(rng):
    u = la.random_unitary(4, rng)
    assert np.allclose(u @ u.conj().T, np.eye(4))
