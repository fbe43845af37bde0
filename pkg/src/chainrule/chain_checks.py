"""Numerical checks of chain-rule statements for relative entropies.

Each check evaluates both sides of an inequality (or equality) on a concrete
instance and returns a :class:`CheckResult`. ``run_suites`` draws the seeded
random instance families used by the ``check`` CLI command.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import channel_div as cd
from . import divergences as dv
from .channels import (
    Channel,
    apply,
    choi,
    compose,
    identity,
    partial_trace_channel,
    random_channel,
    replacer,
    scaled,
)
from .linalg import matrix_fn, partial_trace, permute_systems, psd_sqrt, random_density

DEFAULT_TOL = 1e-8


@dataclass
class CheckResult:
    """Outcome of one check: ``passed`` iff ``slack = rhs - lhs >= -tolerance``.

    A ``+inf`` right-hand side is a vacuous pass. The ``remark_counterexample``
    check sets ``passed`` from its three claims (see that function).
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    tolerance: float = DEFAULT_TOL
    instance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        for key in ("lhs", "rhs", "slack"):
            d[key] = _jsonable_float(d[key])
        return d


def _jsonable_float(x: float):
    if x is None or math.isfinite(x):
        return x
    if math.isnan(x):
        return "nan"
    return "inf" if x > 0 else "-inf"


def make_result(name: str, lhs: float, rhs: float, tol: float = DEFAULT_TOL,
                instance: dict | None = None) -> CheckResult:
    if rhs == math.inf or lhs == -math.inf:
        slack = math.inf
    else:
        slack = rhs - lhs
    return CheckResult(name, float(lhs), float(rhs), float(slack), bool(slack >= -tol), tol,
                       instance or {})


def digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=complex)).tobytes())
    return h.hexdigest()[:16]


def _serialize(a) -> dict:
    a = np.asarray(a)
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def _with_data(res: CheckResult, **arrays) -> CheckResult:
    """Attach the full instance to a failing result so it can be reproduced."""
    if not res.passed:
        res.instance["data"] = {k: _serialize(v) for k, v in arrays.items()}
    return res


# --- classical chain rule --------------------------------------------------


def _kl(p: np.ndarray, q: np.ndarray, base: float = 2) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])) / math.log(base))


def classical_chain_rule(p_xy, q_xy, base: float = 2) -> tuple[CheckResult, CheckResult, CheckResult]:
    """Check the classical chain rule and its min/max relaxations.

    ``p_xy`` is a normalized joint distribution indexed ``[x, y]``; ``q_xy``
    is nonnegative and need not be normalized. Returns the equality check
    (lhs = D(P_XY||Q_XY), rhs = D(P_X||Q_X) + sum_x P_X(x) D(P_Y|x||Q_Y|x),
    slack = -|difference|, tolerance 1e-10), the lower bound and the upper
    bound. Conditionals with P_X(x) = 0 carry no weight and are skipped.
    """
    p = np.asarray(p_xy, dtype=float)
    q = np.asarray(q_xy, dtype=float)
    if p.shape != q.shape or p.ndim != 2:
        raise ValueError("P and Q must be matrices of equal shape")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("distributions must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("P must be normalized")
    joint = _kl(p.ravel(), q.ravel(), base)
    if math.isinf(joint):
        inf = math.inf
        return tuple(CheckResult(n, inf, inf, inf, True, t, {"vacuous": True})  # type: ignore[return-value]
                     for n, t in (("classical_chain_equality", 1e-10),
                                  ("classical_chain_lower", DEFAULT_TOL),
                                  ("classical_chain_upper", DEFAULT_TOL)))
    px, qx = p.sum(axis=1), q.sum(axis=1)
    marg = _kl(px, qx, base)
    conds = []
    for x in np.flatnonzero(px > 0):
        conds.append(_kl(p[x] / px[x], q[x] / qx[x], base))
    conds = np.array(conds)
    avg = float(np.sum(px[px > 0] * conds))
    resid = abs(joint - (marg + avg))
    eq = CheckResult("classical_chain_equality", joint, marg + avg, -resid, resid <= 1e-10, 1e-10)
    lower = make_result("classical_chain_lower", marg + conds.min(), joint)
    upper = make_result("classical_chain_upper", joint, marg + conds.max())
    return eq, lower, upper


# --- max-relative entropy chain rule ---------------------------------------


def factorizes(f: Channel, r: Channel, g: Channel, atol: float = 1e-9) -> bool:
    """True iff F = R o G, compared through Choi matrices."""
    if r.dim_in != g.dim_out or (f.dim_in, f.dim_out) != (g.dim_in, r.dim_out):
        return False
    return bool(np.max(np.abs(choi(f) - choi(compose(r, g))), initial=0.0) <= atol)


def dmax_chain_check(e: Channel, f: Channel, g: Channel, r: Channel, rho, sigma,
                     tol: float = DEFAULT_TOL, instance: dict | None = None) -> CheckResult:
    """Dmax(E(rho)||F(sigma)) <= Dmax(G(rho)||G(sigma)) + Dmax(E(rho)||F(rho)) given F = R o G."""
    if not factorizes(f, r, g):
        raise ValueError("F does not factor as R o G")
    lhs = dv.dmax(e(rho), f(sigma))
    first = dv.dmax(g(rho), g(sigma))
    second = dv.dmax(e(rho), f(rho))
    rhs = first + second if not (math.isinf(first) or math.isinf(second)) else math.inf
    inst = dict(instance or {})
    inst.update(g_term=_jsonable_float(first), channel_term=_jsonable_float(second))
    return make_result("dmax_chain", lhs, rhs, tol, inst)


# --- smooth chain rule on commuting instances ------------------------------


def classical_matrix(ch: Channel) -> np.ndarray:
    """Transition matrix W[b, a] = <b| ch(|a><a|) |b> of a classical channel."""
    cols = []
    for a in range(ch.dim_in):
        x = np.zeros((ch.dim_in, ch.dim_in))
        x[a, a] = 1.0
        cols.append(np.real(np.diag(ch(x))))
    return np.array(cols).T


def _iid_power(v: np.ndarray, m: int) -> np.ndarray:
    """Row-wise m-fold Kronecker power of a batch of vectors."""
    out = v
    for _ in range(m - 1):
        out = np.einsum("ni,nj->nij", out, v).reshape(v.shape[0], -1)
    return out


def simplex_grid(d: int, step: float) -> np.ndarray:
    k = int(round(1.0 / step))
    pts = []
    for combo in itertools.combinations(range(k + d - 1), d - 1):
        prev, parts = -1, []
        for c in combo:
            parts.append(c - prev - 1)
            prev = c
        parts.append(k + d - 2 - prev)
        pts.append(parts)
    return np.array(pts, dtype=float) / k


def prop2_smooth_check(w_e, w_r, p, q, dims: Sequence[int], eps: float, eps_prime: float,
                       m: int = 1, grid_step: float = 0.02, instance: dict | None = None,
                       tol: float = 1e-6) -> CheckResult:
    """Smoothed Dmax chain rule with G the partial trace over A1, commuting case.

    ``w_e`` is the transition matrix of E : A1A2 -> B, ``w_r`` that of
    R : A2 -> B (so F = R o tr_A1), ``p`` and ``q`` the diagonals of rho and
    sigma on A1A2 with ``dims = (d1, d2)``. The maximum over input states nu
    is replaced by a maximum over a simplex grid plus nu = rho; that can only
    lower the right-hand side, so a pass is conclusive.
    """
    w_e, w_r = np.asarray(w_e, float), np.asarray(w_r, float)
    p, q = np.asarray(p, float), np.asarray(q, float)
    d1, d2 = dims
    if p.size != d1 * d2 or q.size != d1 * d2:
        raise ValueError("p and q must live on A1 (x) A2")
    if w_e.shape[1] != d1 * d2 or w_r.shape[1] != d2 or w_e.shape[0] != w_r.shape[0]:
        raise ValueError("channel matrices do not match the system dimensions")
    if d1 * d2 > 4:
        raise ValueError("the input-state grid is limited to total input dimension 4")
    marg = lambda v: v.reshape(-1, d1, d2).sum(axis=1)
    delta = m * eps + math.sqrt(m * eps) + eps_prime
    inst = dict(instance or {})
    inst.update(m=m, eps=eps, eps_prime=eps_prime, smoothing=delta)
    if delta >= 1.0:
        # the ball then contains the zero operator
        return make_result("prop2_smooth", -math.inf, 0.0, tol, inst)
    lhs = dv.smooth_dmax_diagonal(_iid_power((w_e @ p)[None], m)[0],
                                  _iid_power((w_r @ marg(q[None])[0])[None], m)[0], delta)
    pa2, qa2 = marg(p[None])[0], marg(q[None])[0]
    first = m * dv.smooth_dmax_diagonal(pa2, qa2, eps)
    nus = np.vstack([simplex_grid(d1 * d2, grid_step), p[None]])
    out_e = _iid_power(nus @ w_e.T, m)
    out_f = _iid_power(marg(nus) @ w_r.T, m)
    best = float(np.max(dv.smooth_dmax_diagonal_batch(out_e, out_f, eps_prime)))
    rhs = first + best - m * math.log2(1.0 - eps)
    inst.update(first=_jsonable_float(first), max_term=_jsonable_float(best))
    return make_result("prop2_smooth", lhs, rhs, tol, inst)


def remark_counterexample(eps: float, eps_prime: float, eta: float | None = None) -> CheckResult:
    """Evaluate the counterexample to a smoothed chain rule with a general G.

    Setting: E = id, F = eta id on a qubit, rho = |0><0|, sigma = |1><1| and
    G(X) = (1 - eta)|2><2| tr X + eta X mapping the qubit into a qutrit, so
    F = R o G with R the compression of the qutrit back onto span{|0>, |1>}.
    ``eta`` defaults to ``eps``. Three claims are evaluated exactly (all
    operators are diagonal):

    * the smoothed left side D^{eps+eps'}_max(E(rho) || F(sigma)) is +inf;
    * the channel term satisfies D_max(E || F) <= log(1/eta);
    * D^eps_max(G(rho) || G(sigma)) <= 0.

    ``lhs`` holds the finite right side of the would-be chain rule and
    ``rhs`` the smoothed left side, so the recorded inequality is the
    violation. ``passed`` is True iff all three claims hold.
    """
    if not (0 < eps and 0 < eps_prime and eps + eps_prime < 0.5):
        raise ValueError("need eps, eps_prime > 0 with eps + eps_prime < 0.5")
    eta = eps if eta is None else eta
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    rho = np.diag([1.0, 0.0])
    sigma = np.diag([0.0, 1.0])
    e = identity(2)
    f = scaled(identity(2), eta)
    embed = np.eye(3)[:, :2]
    shelf = np.diag([0.0, 0.0, 1.0])
    g_rho = (1 - eta) * shelf + eta * embed @ rho @ embed.T
    g_sigma = (1 - eta) * shelf + eta * embed @ sigma @ embed.T
    r = Channel.from_kraus([embed.T], tp=False)
    g = Channel.from_kraus(
        [math.sqrt(eta) * embed]
        + [math.sqrt(1 - eta) * np.outer([0, 0, 1], np.eye(2)[i]) for i in range(2)],
        tp=True,
    )
    if not factorizes(f, r, g):
        raise RuntimeError("internal: F != R o G")
    if np.max(np.abs(g(rho) - g_rho)) > 1e-12:
        raise RuntimeError("internal: G(rho) mismatch")
    lhs_smooth = dv.smooth_dmax(e(rho), f(sigma), eps + eps_prime)
    chan = cd.channel_dmax(e, f)
    g_term = dv.smooth_dmax(g_rho, g_sigma, eps)
    claims = {
        "lhs_infinite": lhs_smooth == math.inf,
        "channel_term_le_log_inv_eta": chan <= math.log2(1.0 / eta) + 1e-12,
        "g_term_nonpositive": g_term <= 1e-12,
    }
    rhs_pieces = g_term + chan - math.log2(1.0 - eps)
    inst = {
        "eps": eps,
        "eps_prime": eps_prime,
        "eta": eta,
        "channel_dmax": chan,
        "g_term": _jsonable_float(g_term),
        "claims": claims,
        # smallest eta for which (1-eta)|2><2| lies in the eps-ball of G(rho)
        "eta_max_for_claim3": 1.0 - math.sqrt(1.0 - eps * eps),
    }
    if math.isinf(rhs_pieces) and math.isinf(lhs_smooth):
        slack = math.nan
    else:
        slack = lhs_smooth - rhs_pieces
    return CheckResult("remark_counterexample", rhs_pieces, lhs_smooth, slack,
                       all(claims.values()), 0.0, inst)


# --- AEP bound ------------------------------------------------------------


def iid_types(p, q, n: int):
    """Distinct entries of p^(x)n and q^(x)n with their multiplicities."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    d = p.size
    ps, qs, ws = [], [], []
    for combo in itertools.combinations_with_replacement(range(d), n):
        counts = np.bincount(combo, minlength=d)
        mult = math.factorial(n)
        for c in counts:
            mult //= math.factorial(int(c))
        ps.append(float(np.prod(p ** counts)))
        qs.append(float(np.prod(q ** counts)))
        ws.append(float(mult))
    return np.array(ps), np.array(qs), np.array(ws)


def aep_mu(p, q) -> float:
    p, q = np.asarray(p, float), np.asarray(q, float)
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(1.0 + np.sum(p[mask] ** 1.5 * q[mask] ** -0.5) + np.sum(np.sqrt(p * q)))


def aep_bound_eval(p, q, eps: float, n: int, instance: dict | None = None,
                   tol: float = DEFAULT_TOL) -> CheckResult:
    """(1/n) D^eps_max(rho^n || sigma^n) <= D(rho||sigma) + 4 log(mu) sqrt(g(eps)) / sqrt(n).

    ``p`` and ``q`` are the diagonals of a commuting pair. g(eps) = log(2/eps^2).
    The inequality is asserted only when n >= 2 g(eps); otherwise the result is
    a pass marked ``applicable: False`` (both sides are still reported).
    The variant without the square root on g(eps) and the gap to D(rho||sigma)
    (the finite-n side of the matching lower bound) are reported too.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    g = math.log2(2.0 / eps ** 2)
    applicable = n >= 2 * g
    d = _kl(p, q)
    mu = aep_mu(p, q)
    inst = dict(instance or {})
    inst.update(n=n, eps=eps, g=g, mu=_jsonable_float(mu), applicable=applicable,
                d=_jsonable_float(d))
    if math.isinf(d):
        return make_result("aep_upper", math.inf, math.inf, tol, inst)
    pt, qt, wt = iid_types(p, q, n)
    lhs = float(dv.smooth_dmax_diagonal_batch(pt[None], qt[None], eps, weights=wt[None])[0]) / n
    rhs = d + 4 * math.log2(mu) * math.sqrt(g) / math.sqrt(n)
    inst.update(rhs_without_sqrt=d + 4 * math.log2(mu) * g / math.sqrt(n),
                finite_n_gap=lhs - d)
    res = make_result("aep_upper", lhs, rhs, tol, inst)
    if not applicable:
        res.instance["holds"] = res.passed
        res.passed = True
    return res


# --- single-letter chain rule for replacer channels ------------------------


def replacer_chain_check(e: Channel, omega, rho_ra, sigma_ra, dim_r: int,
                         restarts: int = 8, seed: int = 0, tol: float = 1e-4,
                         min_step: float = 1e-6, instance: dict | None = None) -> CheckResult:
    """D(E(rho)||F(sigma)) <= D(rho||sigma) + D(E||F) with F the replacer to omega.

    D(E||F) is the multistart lower bound (seeded with the transposed
    marginals of both inputs), so a pass is a genuine observation; a coarser
    ``min_step`` only weakens that bound.
    """
    f = replacer(omega, e.dim_in)
    dims = [dim_r, e.dim_in]
    lhs = dv.rel_entropy(apply(e, rho_ra, dims, 1), apply(f, sigma_ra, dims, 1))
    d_in = dv.rel_entropy(rho_ra, sigma_ra)
    inst = dict(instance or {})
    if math.isinf(d_in):
        return make_result("replacer_chain", lhs, math.inf, tol, inst)
    seeds = [partial_trace(rho_ra, dims, [1]).T, partial_trace(sigma_ra, dims, [1]).T]
    rep = cd.channel_rel_entropy(e, f, cd.InputAnsatz("general-multistart", 3, restarts, seed, min_step),
                                 seeds=seeds)
    inst.update(channel_lower_bound=rep.value, input_divergence=d_in)
    return make_result("replacer_chain", lhs, d_in + rep.value, tol, inst)


# --- conditional entropy chain rule ---------------------------------------


def conditional_operator(rho, dims: Sequence[int]) -> np.ndarray:
    """rho_{C2|C1D} = rho_{C1D}^-1/2 rho rho_{C1D}^-1/2 for rho on C1 (x) D (x) C2."""
    c1, d, c2 = dims
    rho_c1d = partial_trace(rho, dims, [0, 1])
    inv = np.kron(matrix_fn(rho_c1d, "inv_sqrt"), np.eye(c2))
    return inv @ rho @ inv


def cond_entropy_chain_check(rho, dims: Sequence[int], nus: Sequence[np.ndarray],
                             instance: dict | None = None) -> tuple[CheckResult, CheckResult]:
    """Chain rule H(C1C2|D) = H(C1|D) + H(C2|C1D) and its min-over-Y relaxation.

    ``rho`` is a full-rank state on C1 (x) C2 (x) D, ``dims = (c1, c2, d)``.
    ``nus`` are candidate states nu_{C1D}; the state rho_{C1D} itself is always
    added so the sampled minimum upper-bounds H(C2|C1D)_rho.
    """
    c1, c2, d = dims
    rho = dv.check_density(rho)
    if hermitian_min_eig(rho) <= 1e-12:
        raise ValueError("rho must be full rank")
    h12 = dv.cond_entropy(rho, dims, [2])
    rho_c1d_layout = partial_trace(rho, dims, [0, 2])
    h1 = dv.cond_entropy(rho_c1d_layout, [c1, d], [1])
    h2 = dv.cond_entropy(rho, dims, [0, 2])
    resid = abs(h12 - (h1 + h2))
    inst = dict(instance or {})
    eq = CheckResult("cond_entropy_chain_equality", h12, h1 + h2, -resid, resid <= 1e-8, 1e-8,
                     dict(inst))
    vals = [dv.cond_entropy(y_member(rho, dims, nu), [c1, d, c2], [0, 1])
            for nu in list(nus) + [rho_c1d_layout]]
    best = min(vals)
    inst.update(samples=len(vals), min_conditional=best)
    ineq = make_result("cond_entropy_chain_relaxed", h1 + best, h12, 1e-8, inst)
    return eq, ineq


def hermitian_min_eig(m) -> float:
    return float(np.linalg.eigvalsh((np.asarray(m) + np.asarray(m).conj().T) / 2)[0])


def y_member(rho, dims: Sequence[int], nu_c1d) -> np.ndarray:
    """The state nu_{C1D}^1/2 rho_{C2|C1D} nu_{C1D}^1/2 on C1 (x) D (x) C2."""
    c1, c2, d = dims
    # reorder to C1 D C2 so C1D is a contiguous block
    r = permute_systems(rho, [c1, c2, d], [0, 2, 1])
    cond = conditional_operator(r, [c1, d, c2])
    half = np.kron(psd_sqrt(nu_c1d), np.eye(c2))
    return half @ cond @ half


# --- channel discrimination -----------------------------------------------


def stein_convergence(e: Channel, f: Channel, rho_r, eps: float, n_max: int):
    """Non-adaptive Stein rates (1/n) D_H^eps for n = 1..n_max and the single-letter D."""
    return cd.stein_rates(e, f, rho_r, eps, n_max)


# --- property suites ------------------------------------------------------


def _rng(seed: int, suite: str, trial: int) -> np.random.Generator:
    key = int.from_bytes(hashlib.sha256(suite.encode()).digest()[:4], "little")
    return np.random.default_rng([seed, key, trial])


def _prob(rng, shape, zero_frac: float = 0.0) -> np.ndarray:
    v = rng.random(shape) + 1e-3
    if zero_frac:
        v = np.where(rng.random(shape) < zero_frac, 0.0, v)
        if v.sum() == 0:
            v.flat[0] = 1.0
    return v / v.sum()


def suite_classical(seed: int, trials: int = 1000) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "classical", t)
        nx, ny = rng.integers(1, 9, size=2)
        p = _prob(rng, (nx, ny), zero_frac=0.2)
        q = rng.random((nx, ny)) * rng.uniform(0.2, 3.0) + 1e-3
        for res in classical_chain_rule(p, q):
            res.instance = {"suite": "classical", "seed": seed, "trial": t, "digest": digest(p, q)}
            yield _with_data(res, p=p, q=q)


def suite_dmax_chain(seed: int, trials: int = 500) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "dmax_chain", t)
        inst = {"suite": "dmax_chain", "seed": seed, "trial": t}
        if t % 2 == 0:
            d = 2
            e = random_channel(d, d, rng)
            f = random_channel(d, d, rng)
            g, r = identity(d), f
            rho = random_density(d, rng)
            sigma = random_density(d, rng) * rng.uniform(0.2, 2.0)
        else:
            # G = tr_A1 on A1 (x) A2 qubits, F = R o G
            e = random_channel(4, 2, rng)
            r = random_channel(2, 2, rng)
            g = partial_trace_channel([2, 2], [1])
            f = compose(r, g)
            rho = random_density(4, rng)
            sigma = random_density(4, rng) * rng.uniform(0.2, 2.0)
        inst["digest"] = digest(choi(e), choi(f), rho, sigma)
        res = dmax_chain_check(e, f, g, r, rho, sigma, instance=inst)
        yield _with_data(res, choi_e=choi(e), choi_g=choi(g), choi_r=choi(r), rho=rho, sigma=sigma)


def suite_prop2(seed: int, trials: int = 50) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "prop2", t)
        m = 1 if t % 2 == 0 else 2
        d1, d2 = ((2, 2), (1, 3), (1, 2), (2, 2))[t % 4]
        db = int(rng.integers(2, 4)) if m == 1 else 2
        w_e = rng.random((db, d1 * d2)) + 1e-2
        w_e /= w_e.sum(axis=0)
        w_r = rng.random((db, d2)) + 1e-2
        w_r /= w_r.sum(axis=0)
        p = _prob(rng, d1 * d2)
        q = _prob(rng, d1 * d2) * rng.uniform(0.5, 2.0)
        eps, eps_p = (0.05, 0.05) if m == 1 else (0.01, 0.05)
        inst = {"suite": "prop2", "seed": seed, "trial": t, "dims": [d1, d2], "dim_b": db,
                "digest": digest(w_e, w_r, p, q)}
        res = prop2_smooth_check(w_e, w_r, p, q, (d1, d2), eps, eps_p, m, instance=inst)
        yield _with_data(res, w_e=w_e, w_r=w_r, p=p, q=q)


def suite_counterexample(seed: int) -> Iterator[CheckResult]:
    for eps, eps_p in ((0.1, 0.1), (0.25, 0.1)):
        res = remark_counterexample(eps, eps_p)
        res.instance.update(suite="counterexample", seed=seed, variant="eta=eps")
        yield res


def suite_counterexample_corrected(seed: int) -> Iterator[CheckResult]:
    for eps, eps_p in ((0.1, 0.1), (0.25, 0.1)):
        eta = 1.0 - math.sqrt(1.0 - eps * eps)
        res = remark_counterexample(eps, eps_p, eta=eta)
        res.name = "remark_counterexample_corrected"
        res.instance.update(suite="counterexample_corrected", seed=seed, variant="eta=1-sqrt(1-eps^2)")
        yield res


def suite_aep(seed: int, trials: int = 50) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "aep", t)
        d = 2 if t % 3 else 3
        eps = float(rng.uniform(0.05, 0.5)) if d == 2 else float(rng.uniform(0.2, 0.5))
        g = math.log2(2.0 / eps ** 2)
        n = int(math.ceil(2 * g)) + int(rng.integers(0, 4))
        p = _prob(rng, d)
        q = _prob(rng, d)
        inst = {"suite": "aep", "seed": seed, "trial": t, "digest": digest(p, q)}
        yield _with_data(aep_bound_eval(p, q, eps, n, instance=inst), p=p, q=q)


def suite_cond_entropy(seed: int, trials: int = 100, samples: int = 16) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "cond_entropy", t)
        rho = random_density(8, rng)
        nus = [random_density(4, rng, rank=int(rng.integers(1, 5))) for _ in range(samples)]
        inst = {"suite": "cond_entropy", "seed": seed, "trial": t, "digest": digest(rho)}
        for res in cond_entropy_chain_check(rho, (2, 2, 2), nus, instance=inst):
            yield _with_data(res, rho=rho, **{f"nu{i}": nu for i, nu in enumerate(nus)})


def suite_replacer(seed: int, trials: int = 200, restarts: int = 1,
                   min_step: float = 1e-3) -> Iterator[CheckResult]:
    for t in range(trials):
        rng = _rng(seed, "replacer", t)
        e = random_channel(2, 2, rng) if t % 10 else identity(2)
        omega = random_density(2, rng)
        rho = random_density(4, rng)
        sigma = rho if t % 7 == 0 else random_density(4, rng)
        inst = {"suite": "replacer", "seed": seed, "trial": t,
                "digest": digest(choi(e), omega, rho, sigma)}
        res = replacer_chain_check(e, omega, rho, sigma, 2, restarts=restarts, seed=t,
                                   min_step=min_step, instance=inst)
        yield _with_data(res, choi_e=choi(e), omega=omega, rho=rho, sigma=sigma)


def _random_cptp(rng, d_in):
    d_out = int(rng.integers(2, 5))
    return random_channel(d_in, d_out, rng, rank=int(rng.integers(-(-d_in // d_out), 5)))


def suite_divergence_properties(seed: int, trials: int = 200) -> Iterator[CheckResult]:
    """Data processing, orderings and triangle inequalities on random instances."""
    for t in range(trials):
        rng = _rng(seed, "properties", t)
        d = int(rng.integers(2, 5))
        rho = random_density(d, rng)
        sigma = random_density(d, rng)
        tau = random_density(d, rng)
        n_ch = _random_cptp(rng, d)
        inst = {"suite": "properties", "seed": seed, "trial": t, "digest": digest(rho, sigma, tau)}

        def emit(name, lhs, rhs):
            res = make_result(name, lhs, rhs, instance=dict(inst))
            return _with_data(res, rho=rho, sigma=sigma, tau=tau, choi_n=choi(n_ch))

        nr, ns = n_ch(rho), n_ch(sigma)
        yield emit("dpi_rel_entropy", dv.rel_entropy(nr, ns), dv.rel_entropy(rho, sigma))
        yield emit("dpi_dmax", dv.dmax(nr, ns), dv.dmax(rho, sigma))
        a, b = rho * rng.uniform(0.3, 1.0), sigma * rng.uniform(0.3, 1.0)
        yield emit("dpi_purified_distance", dv.purified_distance(n_ch(a), n_ch(b)),
                   dv.purified_distance(a, b))
        d_rel = dv.rel_entropy(rho, sigma)
        yield emit("order_rel_le_dmax", d_rel, dv.dmax(rho, sigma))
        yield emit("order_rel_le_bs", d_rel, dv.bs_rel_entropy(rho, sigma))
        s2, s3 = sigma * rng.uniform(0.2, 3.0), tau * rng.uniform(0.2, 3.0)
        yield emit("triangle_dmax", dv.dmax(rho, s3), dv.dmax(rho, s2) + dv.dmax(s2, s3))
        c = tau * rng.uniform(0.3, 1.0)
        yield emit("triangle_purified_distance", dv.purified_distance(a, c),
                   dv.purified_distance(a, b) + dv.purified_distance(b, c))
        # commuting pair: smoothing is monotone in eps and never exceeds Dmax
        p, q = _prob(rng, d), _prob(rng, d)
        e1, e2 = sorted(rng.uniform(0.01, 0.9, size=2))
        s_lo = dv.smooth_dmax_diagonal(p, q, e1)
        s_hi = dv.smooth_dmax_diagonal(p, q, e2)
        yield emit("smooth_dmax_monotone", s_hi, s_lo)
        yield emit("smooth_dmax_le_dmax", s_lo, _dmax_diag(p, q))
        yield emit("hypothesis_testing_monotone", dv.hypothesis_testing_div(rho, sigma, e1),
                   dv.hypothesis_testing_div(rho, sigma, e2))


def _dmax_diag(p, q) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.log2(np.max(p[mask] / q[mask])))


SUITES: dict[str, Callable[..., Iterator[CheckResult]]] = {
    "classical": suite_classical,
    "dmax_chain": suite_dmax_chain,
    "prop2": suite_prop2,
    "counterexample": suite_counterexample,
    "counterexample_corrected": suite_counterexample_corrected,
    "aep": suite_aep,
    "cond_entropy": suite_cond_entropy,
    "replacer": suite_replacer,
    "properties": suite_divergence_properties,
}


def _run_one(args) -> list[CheckResult]:
    name, seed, stop_on_failure = args
    out = []
    for res in SUITES[name](seed):
        out.append(res)
        if stop_on_failure and not res.passed:
            break
    return out


def run_suites(seed: int = 42, names: Sequence[str] | None = None, workers: int = 1,
               stop_on_failure: bool = True) -> dict[str, list[CheckResult]]:
    """Run the named suites (all by default); results are keyed in a fixed order.

    With ``stop_on_failure`` a suite stops at its first failing check, whose
    ``instance`` then identifies the trial for reproduction.
    """
    names = list(SUITES) if names is None else list(names)
    for n in names:
        if n not in SUITES:
            raise ValueError(f"unknown suite {n!r}")
    tasks = [(n, seed, stop_on_failure) for n in names]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    return dict(zip(names, results))


__all__ = [
    "CheckResult",
    "aep_bound_eval",
    "classical_chain_rule",
    "cond_entropy_chain_check",
    "dmax_chain_check",
    "prop2_smooth_check",
    "remark_counterexample",
    "replacer_chain_check",
    "run_suites",
    "stein_convergence",
]
