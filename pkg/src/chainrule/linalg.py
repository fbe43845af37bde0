"""Dense Hermitian linear algebra used by every other module.

Matrices are plain ``numpy`` arrays. Functions validate their inputs and
return new arrays; nothing here mutates its arguments.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

HERMITIAN_ATOL = 1e-10
SUPPORT_RTOL = 1e-12
JACOBI_RTOL = 1e-13


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending with matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a finite 2-D array, raising ``ValueError`` otherwise."""
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def is_hermitian(m, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.all(np.abs(a - a.conj().T) <= atol))


def check_hermitian(m, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not is_hermitian(a, atol):
        dev = np.max(np.abs(a - a.conj().T))
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return a


def support_threshold(eigenvalues: np.ndarray) -> float:
    """Eigenvalues at or below this magnitude are treated as exactly zero."""
    top = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return SUPPORT_RTOL * max(top, 1.0)


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    # make the largest-magnitude entry of each column real and positive
    idx = np.argmax(np.abs(vecs), axis=0)
    pivots = vecs[idx, np.arange(vecs.shape[1])]
    phases = np.where(np.abs(pivots) > 0, pivots / np.abs(pivots), 1.0)
    return vecs / phases


def hermitian_eig(m, fix_phases: bool = True) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Backed by LAPACK (``numpy.linalg.eigh``); :func:`jacobi_eig` is the
    self-contained alternative and is used to cross-check this routine.
    With ``fix_phases`` each eigenvector's largest entry is made real
    positive, so the output is reproducible; callers that only need
    spectral projections can skip it.

    Raises:
        ValueError: if ``m`` is not Hermitian within ``HERMITIAN_ATOL``.
    """
    a = check_hermitian(m)
    a = (a + a.conj().T) / 2
    w, v = np.linalg.eigh(a)
    order = np.argsort(-w, kind="stable")
    v = v[:, order]
    return EigenDecomposition(w[order], _fix_phases(v) if fix_phases else v)


def jacobi_eig(m, rtol: float = JACOBI_RTOL, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Sweeps over all off-diagonal pairs until the off-diagonal Frobenius mass
    drops below ``rtol * ||m||_F``. Each rotation first removes the phase of
    the pivot entry, then applies a real Givens rotation.
    """
    a = check_hermitian(m).astype(complex)
    a = (a + a.conj().T) / 2
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    tol = rtol * scale if scale > 0 else 0.0
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.linalg.norm(a) ** 2 - np.sum(np.abs(np.diag(a)) ** 2), 0.0))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # G = diag(1, conj(phase)) @ [[c, s], [-s, c]] on the (p, q) plane
                gpp, gpq = c, s
                gqp, gqq = -s * np.conj(phase), c * np.conj(phase)
                colp, colq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = colp * gpp + colq * gqp
                a[:, q] = colp * gpq + colq * gqq
                rowp, rowq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = np.conj(gpp) * rowp + np.conj(gqp) * rowq
                a[q, :] = np.conj(gpq) * rowp + np.conj(gqq) * rowq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * gpp + vq * gqp
                v[:, q] = vp * gpq + vq * gqq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.real(np.diag(a))
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], _fix_phases(v[:, order]))


def _log_base(base: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: np.log(x) / np.log(base)


_NAMED: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sqrt": np.sqrt,
    "log": _log_base(2.0),
    "log2": np.log2,
    "ln": np.log,
    "inv": lambda x: 1.0 / x,
    "inv_sqrt": lambda x: 1.0 / np.sqrt(x),
    "abs": np.abs,
}


def matrix_fn(
    m,
    f: Union[str, Callable[[np.ndarray], np.ndarray]],
    on_support: bool = False,
) -> np.ndarray:
    """Apply a scalar function to the spectrum of a Hermitian matrix.

    Args:
        m: Hermitian matrix.
        f: a callable acting elementwise on eigenvalues, or one of
            ``"sqrt"``, ``"log"`` (base 2), ``"log2"``, ``"ln"``, ``"inv"``,
            ``"inv_sqrt"``, ``"abs"``.
        on_support: when set, eigenvalues within the support threshold are
            mapped to 0 instead of being passed to ``f``. This is how
            logarithms and inverses of rank-deficient operators are taken.

    Raises:
        ValueError: if ``f`` is undefined (NaN or infinite) at an eigenvalue
            that is not discarded by the support convention.
    """
    fn = _NAMED[f] if isinstance(f, str) else f
    eig = hermitian_eig(m)
    w = eig.eigenvalues
    thr = support_threshold(w)
    small = np.abs(w) <= thr
    args = np.where(small, 0.0, w)
    keep = ~small if on_support else np.ones_like(small)
    out = np.zeros_like(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(fn(args[keep]), dtype=complex)
    if not np.all(np.isfinite(vals)):
        bad = args[keep][~np.isfinite(vals)]
        raise ValueError(f"function undefined at eigenvalue(s) {bad}")
    if np.any(np.abs(vals.imag) > 1e-12):
        raise ValueError("function returned complex values on the spectrum")
    out[keep] = vals.real
    v = eig.eigenvectors
    res = (v * out) @ v.conj().T
    if np.isrealobj(np.asarray(m)):
        res = res.real
    return (res + res.conj().T) / 2


def psd_sqrt(m) -> np.ndarray:
    """Square root of a PSD matrix, clipping round-off negatives to zero."""
    eig = hermitian_eig(m)
    w = eig.eigenvalues
    thr = support_threshold(w)
    if np.any(w < -max(thr, 1e-10)):
        raise ValueError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    v = eig.eigenvectors
    res = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    if np.isrealobj(np.asarray(m)):
        res = res.real
    return res


def support_projector(m) -> np.ndarray:
    eig = hermitian_eig(m)
    v = eig.eigenvectors[:, eig.eigenvalues > support_threshold(eig.eigenvalues)]
    return v @ v.conj().T


def kron(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor first."""
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> None:
    if int(np.prod(dims)) != m.shape[0] or m.shape[0] != m.shape[1]:
        raise ValueError(f"dims {list(dims)} incompatible with matrix shape {m.shape}")


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every tensor factor not listed in ``keep``.

    ``dims`` lists the factor dimensions, first factor most significant.
    Kept factors stay in their original relative order.
    """
    a = as_matrix(m)
    dims = [int(d) for d in dims]
    _check_dims(a, dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} factors")
    n = len(dims)
    t = a.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract traced factors pairwise, highest index first so positions stay valid
    for count, i in enumerate(sorted(traced, reverse=True)):
        remaining = n - count
        t = np.trace(t, axis1=i, axis2=i + remaining)
    kd = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(kd, kd)


def permute_systems(m, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor ``j`` is input factor ``perm[j]``."""
    a = as_matrix(m)
    dims = [int(d) for d in dims]
    _check_dims(a, dims)
    n = len(dims)
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} factors")
    t = a.reshape(dims + dims)
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(a.shape)


def trace_norm(m) -> float:
    """Sum of singular values."""
    return float(np.sum(np.linalg.svd(as_matrix(m), compute_uv=False)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble of the given rank."""
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))
