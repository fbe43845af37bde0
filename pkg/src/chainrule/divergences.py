"""State divergences: relative entropy, max-relative entropy and its smoothing,
Belavkin-Staszewski, hypothesis testing, fidelities and conditional entropy.

Divergences return ``math.inf`` when a support condition fails. Logarithms are
base 2 unless a ``base`` argument says otherwise.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .linalg import (
    check_hermitian,
    hermitian_eig,
    kron,
    matrix_fn,
    partial_trace,
    permute_systems,
    psd_sqrt,
    support_threshold,
    trace_norm,
)

PSD_ATOL = 1e-10
TRACE_ATOL = 1e-9
SUPPORT_ATOL = 1e-9


def check_psd(m, name: str = "operator") -> np.ndarray:
    a = check_hermitian(m)
    w = hermitian_eig(a).eigenvalues
    if w.size and w[-1] < -PSD_ATOL * max(1.0, abs(w[0])):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[-1]:.3e})")
    return a


def check_density(m, name: str = "state") -> np.ndarray:
    a = check_psd(m, name)
    tr = np.trace(a).real
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"{name} must have unit trace, got {tr:.12g}")
    return a


def check_subnormalized(m, name: str = "state") -> np.ndarray:
    a = check_psd(m, name)
    tr = np.trace(a).real
    if tr > 1.0 + TRACE_ATOL:
        raise ValueError(f"{name} must have trace at most one, got {tr:.12g}")
    return a


def _kernel_weight(rho: np.ndarray, sigma: np.ndarray) -> float:
    eig = hermitian_eig(sigma)
    ker = eig.eigenvectors[:, eig.eigenvalues <= support_threshold(eig.eigenvalues)]
    if ker.shape[1] == 0:
        return 0.0
    return float(np.real(np.trace(ker.conj().T @ rho @ ker)))


def support_included(rho, sigma, atol: float = SUPPORT_ATOL) -> bool:
    """True iff supp(rho) lies in supp(sigma), tested as tr(P_ker(sigma) rho) <= atol."""
    return _kernel_weight(np.asarray(rho), np.asarray(sigma)) <= atol


def _xlogx(w: np.ndarray, base: float) -> float:
    w = w[w > support_threshold(w)]
    return float(np.sum(w * np.log(w)) / math.log(base))


def entropy(rho, base: float = 2) -> float:
    """von Neumann entropy."""
    w = hermitian_eig(check_psd(rho)).eigenvalues
    return -_xlogx(w, base)


def _psd_eig(m, name: str):
    """Eigendecomposition that doubles as the PSD check."""
    eig = hermitian_eig(m, fix_phases=False)
    w = eig.eigenvalues
    if w.size and w[-1] < -PSD_ATOL * max(1.0, abs(w[0])):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[-1]:.3e})")
    return eig


def rel_entropy(rho, sigma, base: float = 2) -> float:
    """Umegaki relative entropy tr rho (log rho - log sigma), or inf off support."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    er = _psd_eig(rho, "rho")
    es = _psd_eig(sigma, "sigma")
    on = es.eigenvalues > support_threshold(es.eigenvalues)
    v = es.eigenvectors
    # rho in the sigma eigenbasis: diagonal gives kernel weight and cross term
    diag = np.real(np.einsum("ij,jk,ki->i", v.conj().T, rho, v))
    if np.sum(diag[~on]) > SUPPORT_ATOL:
        return math.inf
    cross = float(np.sum(diag[on] * np.log(es.eigenvalues[on]))) / math.log(base)
    return _xlogx(er.eigenvalues, base) - cross


def dmax(rho, sigma, base: float = 2) -> float:
    """Max-relative entropy log of the largest eigenvalue of sigma^-1/2 rho sigma^-1/2."""
    rho = check_psd(rho, "rho")
    sigma = check_psd(sigma, "sigma")
    if not support_included(rho, sigma):
        return math.inf
    s = matrix_fn(sigma, "inv_sqrt", on_support=True)
    top = hermitian_eig(s @ rho @ s).eigenvalues[0]
    if top <= 0:
        return -math.inf
    return math.log(_polish_dmax(rho, sigma, top)) / math.log(base)


def _polish_dmax(rho, sigma, lam: float, steps: int = 4) -> float:
    """Newton steps on the smallest eigenvalue of lam*sigma - rho on supp(sigma).

    The initial estimate from sigma^-1/2 rho sigma^-1/2 loses accuracy in
    proportion to the condition number of sigma; the pencil lam*sigma - rho
    does not involve an inverse. The smallest eigenvalue is concave and
    increasing in lam, so Newton iterates approach the root from below.
    """
    w, v = np.linalg.eigh(sigma)
    basis = v[:, w > support_threshold(w)]
    s_red = basis.conj().T @ sigma @ basis
    r_red = basis.conj().T @ rho @ basis
    best = lam
    for _ in range(steps):
        mu, vec = np.linalg.eigh(lam * s_red - r_red)
        u = vec[:, 0]
        slope = float(np.real(u.conj() @ s_red @ u))
        if slope <= 0:
            break
        step = mu[0] / slope
        lam -= step
        if not lam > 0:
            return best
        best = lam
        if abs(step) <= 1e-15 * lam:
            break
    return best


def fidelity_root(rho, sigma) -> float:
    """||sqrt(rho) sqrt(sigma)||_1, the square root of the fidelity."""
    return trace_norm(psd_sqrt(rho) @ psd_sqrt(sigma))


def fidelity(rho, sigma) -> float:
    return fidelity_root(rho, sigma) ** 2


def generalized_fidelity(rho, sigma) -> float:
    rho = check_subnormalized(rho, "rho")
    sigma = check_subnormalized(sigma, "sigma")
    slack = max(1.0 - np.trace(rho).real, 0.0) * max(1.0 - np.trace(sigma).real, 0.0)
    return (fidelity_root(rho, sigma) + math.sqrt(slack)) ** 2


def purified_distance(rho, sigma) -> float:
    return math.sqrt(max(0.0, 1.0 - generalized_fidelity(rho, sigma)))


# --- smooth max-relative entropy -------------------------------------------


def _best_smoothing_mass(p, q, w, lam):
    """Closest (in generalized fidelity) sub-normalized p' with p' <= 2**lam q.

    Row-wise over a batch. The optimum has the form p' = min(2**lam q, k p); the
    scale k is where the marginal gain of extra mass in the overlap term equals
    its marginal cost in the trace-deficit term, found exactly by walking the
    sorted breakpoints of the piecewise-linear mass function.
    Returns the square root of the generalized fidelity and p'.
    """
    caps = np.exp2(lam)[:, None] * q
    pos = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        brk = np.where(pos, caps / np.where(pos, p, 1.0), np.inf)
    order = np.argsort(brk, axis=1, kind="stable")
    b = np.take_along_axis(brk, order, axis=1)
    wc = np.take_along_axis(np.where(pos, w * caps, 0.0), order, axis=1)
    wp = np.take_along_axis(w * p, order, axis=1)
    t = np.sum(w * p, axis=1)
    deficit = np.clip(1.0 - t, 0.0, None)
    cum_c = np.cumsum(wc, axis=1)
    above = t[:, None] - np.cumsum(wp, axis=1)
    finite = np.isfinite(b)
    with np.errstate(invalid="ignore"):
        phi = np.where(finite, 1.0 - cum_c - b * (above + deficit[:, None]), 1.0)
    neg = phi < 0
    has_root = neg.any(axis=1)
    k = np.argmax(neg, axis=1)
    rows = np.arange(p.shape[0])
    prev_c = np.where(k > 0, cum_c[rows, np.maximum(k - 1, 0)], 0.0)
    prev_above = np.where(k > 0, above[rows, np.maximum(k - 1, 0)], t)
    kappa_root = (1.0 - prev_c) / (prev_above + deficit)
    bmax = np.max(np.where(finite, b, 0.0), axis=1)
    kappa = np.where(has_root, kappa_root, bmax)
    ptilde = np.where(pos, np.minimum(caps, kappa[:, None] * p), 0.0)
    mass = np.sum(w * ptilde, axis=1)
    overlap = np.sum(w * np.sqrt(ptilde * p), axis=1)
    root_f = overlap + np.sqrt(np.clip(1.0 - mass, 0.0, None) * deficit)
    return root_f, ptilde


def smooth_dmax_diagonal_batch(p, q, eps: float, weights=None, base: float = 2,
                               tol: float = 1e-12) -> np.ndarray:
    """Exact smooth max-relative entropy for commuting pairs, one per row.

    ``p`` and ``q`` are arrays of shape ``(n, d)`` holding the diagonals of
    ``rho`` (sub-normalized) and ``sigma``. ``weights`` gives optional
    multiplicities for repeated entries (used for i.i.d. products grouped by
    type). The smoothing ball uses the purified distance.
    Returns an array of values, possibly ``inf`` or ``-inf``.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    w = np.ones_like(p) if weights is None else np.broadcast_to(np.asarray(weights, float), p.shape)
    if np.any(p < -PSD_ATOL) or np.any(q < -PSD_ATOL):
        raise ValueError("diagonals must be nonnegative")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    p = np.clip(p, 0.0, None)
    q = np.clip(q, 0.0, None)
    target = math.sqrt(1.0 - eps * eps) - 1e-15
    n = p.shape[0]
    out = np.empty(n)
    t = np.sum(w * p, axis=1)
    if np.any(t > 1.0 + TRACE_ATOL):
        raise ValueError("rows of p must have total weight at most one")

    # upper end: p restricted to supp(q) scaled freely
    onq = (q > 0) & (p > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(onq, p / np.where(onq, q, 1.0), 0.0)
    top = np.max(ratio, axis=1)
    hi = np.where(top > 0, np.log2(np.where(top > 0, top, 1.0)), 0.0)
    hi = np.minimum(hi + 64.0, 900.0)
    feas_hi = _best_smoothing_mass(p, q, w, hi)[0] >= target
    trivially_small = (1.0 - t) >= 1.0 - eps * eps
    out[~feas_hi] = math.inf
    out[trivially_small] = -math.inf
    act = feas_hi & ~trivially_small
    if not act.any():
        return out / math.log2(base) if base != 2 else out

    pa, qa, wa, hia = p[act], q[act], w[act], hi[act]
    lo = hia - 128.0
    for _ in range(20):
        feas_lo = _best_smoothing_mass(pa, qa, wa, lo)[0] >= target
        if not feas_lo.any():
            break
        lo = np.where(feas_lo, lo - 128.0, lo)
    while True:
        mid = (lo + hia) / 2
        feas = _best_smoothing_mass(pa, qa, wa, mid)[0] >= target
        hia = np.where(feas, mid, hia)
        lo = np.where(feas, lo, mid)
        if np.all(hia - lo <= tol * np.maximum(1.0, np.abs(hia))):
            break
    out[act] = hia
    if base != 2:
        out = out / math.log2(base)
    return out


def smooth_dmax_diagonal(p, q, eps: float, weights=None, base: float = 2) -> float:
    return float(smooth_dmax_diagonal_batch([p], [q], eps, None if weights is None else [weights],
                                            base=base)[0])


def is_diagonal(m, atol: float = 1e-10) -> bool:
    a = np.asarray(m)
    return bool(np.all(np.abs(a - np.diag(np.diag(a))) <= atol))


def commute(a, b, atol: float = 1e-10) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(np.abs(a @ b - b @ a) <= atol))


def _clipped_candidate(rho, sigma, lam):
    s_half = psd_sqrt(sigma)
    s_inv = matrix_fn(sigma, "inv_sqrt", on_support=True)
    proj = s_half @ s_inv
    rho_s = proj @ rho @ proj.conj().T
    gamma = s_inv @ rho_s @ s_inv
    eig = hermitian_eig(gamma)
    clipped = np.minimum(eig.eigenvalues, 2.0 ** lam)
    v = eig.eigenvectors
    g = (v * np.clip(clipped, 0.0, None)) @ v.conj().T
    cand = s_half @ g @ s_half
    return (cand + cand.conj().T) / 2


def smooth_dmax(rho, sigma, eps: float, mode: str = "exact-diagonal", base: float = 2) -> float:
    """Smooth max-relative entropy over the purified-distance ball of radius ``eps``.

    Modes:
        ``"exact-diagonal"``: exact value; requires both operators to be
            diagonal in a common basis (they must commute).
        ``"heuristic-upper"``: clips the spectrum of sigma^-1/2 rho sigma^-1/2
            and bisects on the clipping level; the returned value is the
            max-relative entropy of a candidate verified to lie in the ball, so
            it is an upper bound on the true value.
    """
    rho = check_subnormalized(rho, "rho")
    sigma = check_psd(sigma, "sigma")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if mode == "exact-diagonal":
        if not commute(rho, sigma):
            raise ValueError("exact-diagonal mode needs commuting rho and sigma")
        if is_diagonal(rho) and is_diagonal(sigma):
            p, q = np.real(np.diag(rho)), np.real(np.diag(sigma))
        else:
            # common eigenbasis: diagonalize a generic combination
            eig = hermitian_eig(rho + math.pi * sigma)
            v = eig.eigenvectors
            p = np.real(np.diag(v.conj().T @ rho @ v))
            q = np.real(np.diag(v.conj().T @ sigma @ v))
        return smooth_dmax_diagonal(p, q, eps, base=base)
    if mode != "heuristic-upper":
        raise ValueError(f"unknown mode {mode!r}")

    hi = dmax(rho, sigma) if support_included(rho, sigma) else None
    if hi is None:
        rho_s = _clipped_candidate(rho, sigma, 1e3)
        if purified_distance(rho_s, rho) > eps:
            return math.inf
        hi = dmax(rho_s, sigma)
    if hi == -math.inf:
        return -math.inf
    lo = hi - 64.0
    for _ in range(100):
        mid = (lo + hi) / 2
        if purified_distance(_clipped_candidate(rho, sigma, mid), rho) <= eps:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-10:
            break
    cand = _clipped_candidate(rho, sigma, hi)
    if purified_distance(cand, rho) > eps + 1e-12:
        raise RuntimeError("smoothing candidate left the ball")
    return dmax(cand, sigma, base=base)


# --- other divergences -----------------------------------------------------


def bs_rel_entropy(rho, sigma, base: float = 2) -> float:
    """Belavkin-Staszewski relative entropy tr rho log(rho^1/2 sigma^-1 rho^1/2)."""
    rho = check_psd(rho, "rho")
    sigma = check_psd(sigma, "sigma")
    if not support_included(rho, sigma):
        return math.inf
    r = psd_sqrt(rho)
    inner = r @ matrix_fn(sigma, "inv", on_support=True) @ r
    inner = (inner + inner.conj().T) / 2
    log_inner = matrix_fn(inner, "ln", on_support=True)
    return float(np.real(np.trace(rho @ log_inner))) / math.log(base)


def neyman_pearson(rho, sigma, eps: float, rtol: float = 1e-13):
    """Optimal test for  min tr(sigma Q)  s.t.  0 <= Q <= I, tr(rho Q) >= 1 - eps.

    The dual problem  max_u  u (1 - eps) - tr(u rho - sigma)_+  is a concave
    one-dimensional maximization; its derivative ``(1 - eps) - tr(rho P_u)``,
    with ``P_u`` the projector onto the positive part of ``u rho - sigma``,
    is nonincreasing, so ``u`` is found by bisection. The primal test is
    ``P_u`` plus the boundary eigenspace mixed in with the weight that meets
    the type-I constraint exactly.

    Returns:
        (beta, Q): the minimal type-II error and an optimal test.
    """
    rho = check_psd(rho, "rho")
    sigma = check_psd(sigma, "sigma")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    need = 1.0 - eps
    # projecting onto ker(sigma) costs nothing in type-II error
    eig_s = hermitian_eig(sigma)
    ker = eig_s.eigenvectors[:, eig_s.eigenvalues <= support_threshold(eig_s.eigenvalues)]
    if ker.shape[1] and np.real(np.trace(ker.conj().T @ rho @ ker)) >= need:
        return 0.0, ker @ ker.conj().T

    def split(u):
        eig = hermitian_eig(u * rho - sigma)
        w, v = eig.eigenvalues, eig.eigenvectors
        thr = 1e-12 * max(1.0, float(np.max(np.abs(w))))
        return w, v, thr

    def type1(w, v, thr):
        vp = v[:, w > thr]
        return float(np.real(np.einsum("ij,ik,kj->", vp.conj(), rho, vp)))

    lo, hi = 0.0, 1.0
    while type1(*split(hi)) < need:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            raise RuntimeError("failed to bracket the Neyman-Pearson threshold")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if type1(*split(mid)) < need:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    w, v, thr = split(hi)
    # eigenvectors that crossed the threshold between lo and hi have the
    # smallest positive eigenvalues; trim them until tr(rho Q) = 1 - eps
    idx = np.flatnonzero(w > thr)[::-1]
    weights = np.ones(idx.size)
    rho_w = np.real(np.einsum("ij,ik,kj->j", v[:, idx].conj(), rho, v[:, idx]))
    excess = float(np.sum(rho_w)) - need
    for j in range(idx.size):
        if excess <= 0:
            break
        cut = min(1.0, excess / rho_w[j]) if rho_w[j] > 0 else 0.0
        weights[j] -= cut
        excess -= cut * rho_w[j]
    vs = v[:, idx]
    q = (vs * weights) @ vs.conj().T
    beta = float(np.real(np.trace(sigma @ q)))
    return max(beta, 0.0), q


def hypothesis_testing_div(rho, sigma, eps: float, base: float = 2) -> float:
    """-log min{tr(sigma Q) : 0 <= Q <= I, tr(rho Q) >= 1 - eps}."""
    beta, _ = neyman_pearson(rho, sigma, eps)
    if beta <= 0.0:
        return math.inf
    return -math.log(beta) / math.log(base)


# --- conditional entropy ---------------------------------------------------


def embed_identity(op_d, dims: Sequence[int], cond: Sequence[int]) -> np.ndarray:
    """Return I_C (x) op_D laid out in the original factor order."""
    dims = list(dims)
    cond = list(cond)
    free = [i for i in range(len(dims)) if i not in cond]
    dc = int(np.prod([dims[i] for i in free])) if free else 1
    full = kron(np.eye(dc), op_d)
    ordered = free + cond
    # factor at output position j comes from position ordered.index(j)
    perm = [ordered.index(j) for j in range(len(dims))]
    return permute_systems(full, [dims[i] for i in ordered], perm)


def cond_entropy(rho, dims: Sequence[int], cond: Sequence[int], base: float = 2) -> float:
    """H(C|D) = -D(rho_CD || I_C (x) rho_D) where ``cond`` indexes the D factors."""
    rho = check_density(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"dims {dims} incompatible with state of dimension {rho.shape[0]}")
    cond = sorted(set(int(c) for c in cond))
    if any(c < 0 or c >= len(dims) for c in cond):
        raise ValueError(f"conditioning indices {cond} out of range")
    rho_d = partial_trace(rho, dims, cond) if cond else np.ones((1, 1))
    sigma = embed_identity(rho_d, dims, cond)
    return -rel_entropy(rho, sigma, base=base)
