"""Channel divergences and the two-copy non-additivity experiments.

Every optimized channel divergence here is a certified *lower* bound: the
reported value is attained at the reported input state. Only the channel
max-relative entropy is exact, via the Choi matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import divergences as dv
from .linalg import psd_sqrt
from .channels import (
    Channel,
    apply,
    choi,
    gad,
    identity,
    interleaved_to_grouped,
    is_z_covariant,
    parallel,
    pull_through,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
WALK_LIMIT = 16
KINDS = ("diag-1param", "diag-2param-symmetric", "general-multistart")


@dataclass(frozen=True)
class InputAnsatz:
    """Family of reference states searched by the channel-divergence optimizers.

    ``resolution`` is the coarse-grid size: number of grid points in
    ``diag-1param``; points per unit along each axis in
    ``diag-2param-symmetric`` (101 means step 0.01). ``restarts`` and
    ``seed`` drive ``general-multistart``, whose ascent halves its step from
    0.1 down to ``min_step``.
    """

    kind: str = "diag-1param"
    resolution: int = 1001
    restarts: int = 32
    seed: int = 42
    min_step: float = 1e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ansatz kind {self.kind!r}; expected one of {KINDS}")
        if self.resolution < 3:
            raise ValueError("resolution must be at least 3")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not 0 < self.min_step <= 0.1:
            raise ValueError("min_step must lie in (0, 0.1]")


@dataclass
class DivergenceReport:
    value: float
    argmax_state: np.ndarray
    ansatz: InputAnsatz
    iterations: int
    certified: bool = False
    base: float = 2
    extra: dict = field(default_factory=dict)


def _check_pair(e: Channel, f: Channel) -> None:
    if (e.dim_in, e.dim_out) != (f.dim_in, f.dim_out):
        raise ValueError(
            f"channel dimensions differ: ({e.dim_in}->{e.dim_out}) vs ({f.dim_in}->{f.dim_out})"
        )


def channel_dmax(e: Channel, f: Channel, base: float = 2) -> float:
    """Exact channel max-relative entropy, Dmax(J_E || J_F)."""
    _check_pair(e, f)
    return dv.dmax(choi(e), choi(f), base=base)


def _objective(je, jf, dim_b, kernel):
    def value(rho_r):
        # one square root serves both pull-throughs
        s = np.kron(psd_sqrt(rho_r), np.eye(dim_b))
        a, b = s @ je @ s.conj().T, s @ jf @ s.conj().T
        return kernel((a + a.conj().T) / 2, (b + b.conj().T) / 2)
    return value


def fixed_input_rel_entropy(e: Channel, f: Channel, rho_r, base: float = 2) -> float:
    """D(E(phi) || F(phi)) for the purification phi of ``rho_r``."""
    _check_pair(e, f)
    rho_r = np.asarray(rho_r)
    if rho_r.shape != (e.dim_in, e.dim_in):
        raise ValueError(f"reference state must be {e.dim_in}x{e.dim_in}, got {rho_r.shape}")
    return dv.rel_entropy(pull_through(rho_r, choi(e), e.dim_out),
                          pull_through(rho_r, choi(f), f.dim_out), base=base)


def _golden_max(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = c if fc >= fd else d
    return x, max(fc, fd), it


def _finite(v: float) -> float:
    # +inf objective values would swamp the search; they mark support failures
    return v if math.isfinite(v) else -math.inf


def _optimize_diag1(obj, resolution: int):
    ps = np.linspace(0.0, 1.0, resolution)
    raw = np.array([obj(np.diag([p, 1.0 - p])) for p in ps])
    if np.any(raw == math.inf):
        # D = +inf at some input means the channel divergence is infinite
        k = int(np.argmax(raw == math.inf))
        return np.diag([ps[k], 1.0 - ps[k]]), math.inf, resolution
    i = int(np.argmax(raw))
    lo, hi = ps[max(i - 1, 0)], ps[min(i + 1, resolution - 1)]
    p_star, v_star, it = _golden_max(lambda p: obj(np.diag([p, 1.0 - p])), lo, hi)
    if raw[i] > v_star:
        p_star, v_star = ps[i], raw[i]
    return np.diag([p_star, 1.0 - p_star]), float(v_star), resolution + it


def _diag2(p1: float, p2: float) -> np.ndarray:
    return np.diag([p1, p2, p2, max(1.0 - p1 - 2.0 * p2, 0.0)])


def _optimize_diag2(obj, resolution: int, seeds: Sequence[tuple[float, float]] = ()):
    step = 1.0 / (resolution - 1)
    best = (-math.inf, 0.0, 0.0)
    n_eval = 0
    grid1 = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    for p1 in grid1:
        for p2 in grid1[grid1 <= (1.0 - p1) / 2 + 1e-12]:
            v = _finite(obj(_diag2(p1, p2)))
            n_eval += 1
            if v > best[0]:
                best = (v, float(p1), float(p2))
    for p1, p2 in seeds:
        v = _finite(obj(_diag2(p1, p2)))
        n_eval += 1
        if v > best[0]:
            best = (v, float(p1), float(p2))
    v, p1, p2 = best
    width = step
    # coordinate-wise golden refinement, shrinking the bracket each round
    for _ in range(60):
        old = v
        lo, hi = max(p1 - width, 0.0), min(p1 + width, 1.0 - 2.0 * p2)
        if hi > lo:
            x, fx, it = _golden_max(lambda a: _finite(obj(_diag2(a, p2))), lo, hi, tol=1e-11)
            n_eval += it + 2
            if fx > v:
                v, p1 = fx, x
        lo, hi = max(p2 - width, 0.0), min(p2 + width, (1.0 - p1) / 2.0)
        if hi > lo:
            x, fx, it = _golden_max(lambda b: _finite(obj(_diag2(p1, b))), lo, hi, tol=1e-11)
            n_eval += it + 2
            if fx > v:
                v, p2 = fx, x
        width = max(width / 2.0, 1e-9)
        if v - old < 1e-13 and width <= 1e-6:
            break
    return _diag2(p1, p2), v, n_eval


def _factor_from_params(x: np.ndarray, d: int) -> np.ndarray:
    # x holds the real diagonal of a lower-triangular L, then the real and
    # imaginary parts of its strictly lower entries; L is scaled to unit
    # Frobenius norm so that L^dag L is a density matrix
    l = np.diag(x[:d]).astype(complex)
    il = np.tril_indices(d, -1)
    m = len(il[0])
    l[il] = x[d:d + m] + 1j * x[d + m:]
    norm = np.linalg.norm(l)
    if norm == 0:
        return np.eye(d) / math.sqrt(d)
    return l / norm


def _gram(l: np.ndarray) -> np.ndarray:
    return l.conj().T @ l


def _params_from_state(rho: np.ndarray) -> np.ndarray:
    """Parameters whose factor L satisfies L^dag L = rho (after slight regularization)."""
    d = rho.shape[0]
    reg = (rho + 1e-6 * np.eye(d)) / (1 + d * 1e-6)
    rev = np.eye(d)[::-1]
    c = np.linalg.cholesky(rev @ reg @ rev)
    l = rev @ c.conj().T @ rev
    il = np.tril_indices(d, -1)
    return np.concatenate([np.diag(l).real, l[il].real, l[il].imag])


def _optimize_general(obj, d: int, restarts: int, seed: int, seeds: Sequence[np.ndarray] = (),
                      min_step: float = 1e-6):
    """Compass search over lower-triangular factors L; ``obj`` receives L.

    From each start: try +-step per coordinate, keep walking while a
    direction improves, halve the step when no coordinate does. Returns the
    state L^dag L of the best factor.
    """
    rng = np.random.default_rng(seed)
    n_par = d * d
    starts = [_params_from_state(np.asarray(s)) for s in seeds]
    starts.append(_params_from_state(np.eye(d) / d))
    while len(starts) < restarts + len(seeds):
        starts.append(rng.normal(size=n_par))
    best_v, best_x = -math.inf, starts[0]
    n_eval = 0
    for x0 in starts:
        x = np.array(x0, dtype=float)
        v = _finite(obj(_factor_from_params(x, d)))
        n_eval += 1
        step = 0.1
        while step >= min_step:
            improved = False
            for i in range(n_par):
                for sgn in (1.0, -1.0):
                    moved = False
                    # bounded walk: the parameterization is scale invariant, so
                    # an unbounded walk can creep towards a boundary state forever
                    for _ in range(WALK_LIMIT):
                        y = x.copy()
                        y[i] += sgn * step
                        vy = _finite(obj(_factor_from_params(y, d)))
                        n_eval += 1
                        if vy <= v:
                            break
                        x, v, moved = y, vy, True
                    if moved:
                        improved = True
                        break
            if not improved:
                step /= 2.0
        if v > best_v:
            best_v, best_x = v, x
    return _gram(_factor_from_params(best_x, d)), best_v, n_eval


def _factor_objective(je, jf, dim_b, kernel):
    """Objective of a factor L: the outputs on (L (x) I)|Omega>.

    That vector purifies L L^dag on R and leaves L^dag L (transposed) on the
    channel input, so for pure inputs it gives the same value as the square
    root form at rho_R = L^dag L, with no matrix square root needed.
    """
    eye = np.eye(dim_b)

    def value(l):
        s = np.kron(l, eye)
        a, b = s @ je @ s.conj().T, s @ jf @ s.conj().T
        return kernel((a + a.conj().T) / 2, (b + b.conj().T) / 2)
    return value


def _optimize(e: Channel, f: Channel, ansatz: InputAnsatz, kernel, seeds=()):
    _check_pair(e, f)
    je, jf = choi(e), choi(f)
    obj = _objective(je, jf, e.dim_out, kernel)
    if ansatz.kind == "diag-1param":
        if e.dim_in != 2:
            raise ValueError("diag-1param ansatz needs qubit inputs")
        if not (is_z_covariant(e) and is_z_covariant(f)):
            raise ValueError("diag-1param ansatz needs Z-covariant channels")
        return _optimize_diag1(obj, ansatz.resolution)
    if ansatz.kind == "diag-2param-symmetric":
        if e.dim_in != 4:
            raise ValueError("diag-2param-symmetric ansatz needs two-qubit inputs")
        return _optimize_diag2(obj, ansatz.resolution, seeds)
    fobj = _factor_objective(je, jf, e.dim_out, kernel)
    return _optimize_general(fobj, e.dim_in, ansatz.restarts, ansatz.seed, seeds, ansatz.min_step)


def channel_rel_entropy(e: Channel, f: Channel, ansatz: InputAnsatz | None = None,
                        base: float = 2, seeds=()) -> DivergenceReport:
    """Lower bound on the stabilized channel relative entropy over an input family.

    ``seeds`` are extra candidate reference states (for ``general-multistart``)
    or ``(p1, p2)`` pairs (for ``diag-2param-symmetric``) evaluated alongside
    the grid or random starts.
    """
    ansatz = ansatz or InputAnsatz()
    rho, v, it = _optimize(e, f, ansatz, lambda a, b: dv.rel_entropy(a, b, base=base), seeds)
    return DivergenceReport(float(v), rho, ansatz, it, certified=False, base=base)


def bs_channel_rel_entropy(e: Channel, f: Channel, ansatz: InputAnsatz | None = None,
                           base: float = 2, seeds=()) -> DivergenceReport:
    """Lower bound on the Belavkin-Staszewski channel divergence over an input family."""
    ansatz = ansatz or InputAnsatz()
    rho, v, it = _optimize(e, f, ansatz, lambda a, b: dv.bs_rel_entropy(a, b, base=base), seeds)
    return DivergenceReport(float(v), rho, ansatz, it, certified=False, base=base)


def nonstabilized_rel_entropy(e: Channel, f: Channel, restarts: int = 8, seed: int = 42,
                              base: float = 2) -> DivergenceReport:
    """Lower bound on max over inputs (no reference) of D(E(rho) || F(rho))."""
    _check_pair(e, f)
    obj = lambda l: dv.rel_entropy(e(_gram(l)), f(_gram(l)), base=base)
    rho, v, it = _optimize_general(obj, e.dim_in, restarts, seed)
    ansatz = InputAnsatz("general-multistart", 3, restarts, seed)
    return DivergenceReport(float(v), rho, ansatz, it, certified=False, base=base)


def scan(e: Channel, f: Channel, resolution: int = 1001, base: float = 2):
    """Values D(sqrt(rho) J_E sqrt(rho) || sqrt(rho) J_F sqrt(rho)) over rho = diag(p, 1-p)."""
    _check_pair(e, f)
    je, jf = choi(e), choi(f)
    obj = _objective(je, jf, e.dim_out, lambda a, b: dv.rel_entropy(a, b, base=base))
    ps = np.linspace(0.0, 1.0, resolution)
    return ps, np.array([obj(np.diag([p, 1.0 - p])) for p in ps])


@dataclass
class GapResult:
    gap: float
    single: DivergenceReport
    double: DivergenceReport


def two_copy_pair(e: Channel, f: Channel) -> tuple[Channel, Channel]:
    return parallel(e, e), parallel(f, f)


def nonadditivity_gap(e: Channel, f: Channel, two_copy_ansatz: InputAnsatz | None = None,
                      single_ansatz: InputAnsatz | None = None, base: float = 2,
                      upper_slack: float = 0.0, detail: bool = False):
    """Lower bound on D(E(x)E || F(x)F) minus twice the single-copy value.

    The single-copy value uses the Z-covariance reduction, which is exact for
    the one-parameter family up to the golden-section tolerance; ``upper_slack``
    is added to it before doubling. The two-copy search always includes the
    product of the single-copy optimizer, so the gap is never below
    ``-2 * upper_slack`` up to rounding.
    """
    two_copy_ansatz = two_copy_ansatz or InputAnsatz("diag-2param-symmetric", resolution=101)
    single_ansatz = single_ansatz or InputAnsatz("diag-1param", resolution=1001)
    single = channel_rel_entropy(e, f, single_ansatz, base=base)
    p = float(np.real(single.argmax_state[0, 0]))
    e2, f2 = two_copy_pair(e, f)
    double = channel_rel_entropy(e2, f2, two_copy_ansatz, base=base,
                                 seeds=[(p * p, p * (1.0 - p))])
    gap = double.value - 2.0 * (single.value + upper_slack)
    if detail:
        return GapResult(gap, single, double)
    return gap


def _heatmap_cell(args):
    g1, g2, b1, b2, resolution, base = args
    try:
        res = nonadditivity_gap(gad(g1, b1), gad(g2, b2),
                                InputAnsatz("diag-2param-symmetric", resolution=resolution),
                                base=base, detail=True)
        return res.gap
    except (ValueError, FloatingPointError, np.linalg.LinAlgError):
        return math.nan


def heatmap(gamma1_grid, gamma2_grid, beta1: float = 0.0, beta2: float = 0.9,
            resolution: int = 101, base: float = 2, workers: int = 1) -> np.ndarray:
    """Non-additivity gap for gad(g1, beta1) vs gad(g2, beta2) on a grid.

    Rows follow ``gamma1_grid``, columns ``gamma2_grid``. Failed cells hold NaN.
    Cells are independent and computed in a fixed order; results do not depend
    on ``workers``.
    """
    g1s = [float(g) for g in gamma1_grid]
    g2s = [float(g) for g in gamma2_grid]
    for g in g1s + g2s:
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"grid value {g} outside [0, 1]")
    tasks = [(a, b, beta1, beta2, resolution, base) for a in g1s for b in g2s]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(_heatmap_cell, tasks))
    else:
        vals = [_heatmap_cell(t) for t in tasks]
    return np.array(vals, dtype=float).reshape(len(g1s), len(g2s))


def amortized_gap(e: Channel, f: Channel, rho_ra, sigma_ra, dim_r: int | None = None,
                  base: float = 2) -> float:
    """D(E(rho_RA) || F(sigma_RA)) - D(rho_RA || sigma_RA) for one input pair.

    The channels act on the last factor A; ``dim_r`` defaults to the remaining
    dimension. Raises ``ValueError`` when D(rho || sigma) is infinite.
    """
    _check_pair(e, f)
    rho_ra, sigma_ra = np.asarray(rho_ra), np.asarray(sigma_ra)
    d = rho_ra.shape[0]
    if dim_r is None:
        if d % e.dim_in:
            raise ValueError(f"state dimension {d} not divisible by channel input {e.dim_in}")
        dim_r = d // e.dim_in
    if dim_r * e.dim_in != d or sigma_ra.shape != rho_ra.shape:
        raise ValueError("state dimensions do not match the channel input")
    d_in = dv.rel_entropy(rho_ra, sigma_ra, base=base)
    if math.isinf(d_in):
        raise ValueError("D(rho || sigma) is infinite; the amortized gap is undefined")
    d_out = dv.rel_entropy(apply(e, rho_ra, [dim_r, e.dim_in], 1),
                           apply(f, sigma_ra, [dim_r, f.dim_in], 1), base=base)
    return d_out - d_in


@dataclass
class Witness:
    rho: np.ndarray
    sigma: np.ndarray
    margin: float
    output_divergence: float
    input_divergence: float
    channel_divergence: float


def naive_witness(e: Channel, f: Channel, phi2_r=None, single: DivergenceReport | None = None,
                  base: float = 2) -> Witness:
    """States violating D(E(rho)||F(sigma)) <= D(rho||sigma) + D(E||F).

    With phi the purification of the two-copy reference state ``phi2_r``
    (default diag(0.8, 0, 0, 0.2)) on R1 R2 A1 A2, take rho = E_{A1}(phi) and
    sigma = F_{A1}(phi); applying the channels to A2 then reproduces the
    two-copy outputs. The returned state pair lives on R1 R2 B1 A2, and
    ``margin`` is how far the naive chain rule is violated.
    """
    _check_pair(e, f)
    if e.dim_in != e.dim_out:
        raise ValueError("naive_witness needs channels with equal input and output dimension")
    d = e.dim_in
    if phi2_r is None:
        phi2_r = np.diag([0.8, 0.0, 0.0, 0.2])
    phi2_r = np.asarray(phi2_r)
    if phi2_r.shape != (d * d, d * d):
        raise ValueError(f"two-copy reference state must be {d * d}x{d * d}")
    if single is None:
        single = channel_rel_entropy(e, f, _default_ansatz(e, f), base=base)
    # pull-through with grouped Choi of (E (x) id) gives the state on R1 R2 B1 A2
    ji = choi(identity(d))
    def half(ch):
        j2 = interleaved_to_grouped(np.kron(choi(ch), ji), [d, d], [d, d])
        return pull_through(phi2_r, j2, d * d)
    rho, sigma = half(e), half(f)
    d_in = dv.rel_entropy(rho, sigma, base=base)
    if math.isinf(d_in):
        raise ValueError("witness input states violate the support condition")
    out_e = apply(e, rho, [d * d, d, d], 2)
    out_f = apply(f, sigma, [d * d, d, d], 2)
    d_out = dv.rel_entropy(out_e, out_f, base=base)
    if math.isinf(d_out):
        raise ValueError("witness output states violate the support condition")
    margin = d_out - d_in - single.value
    return Witness(rho, sigma, margin, d_out, d_in, single.value)


def _default_ansatz(e: Channel, f: Channel) -> InputAnsatz:
    if e.dim_in == 2 and is_z_covariant(e) and is_z_covariant(f):
        return InputAnsatz("diag-1param")
    return InputAnsatz("general-multistart")


def reproduce_report(e: Channel, f: Channel, report: DivergenceReport) -> float:
    """Re-evaluate a report's value from its argmax state."""
    return fixed_input_rel_entropy(e, f, report.argmax_state, base=report.base)


def stein_rates(e: Channel, f: Channel, rho_r, eps: float, n_max: int, base: float = 2):
    """Rates (1/n) D_H^eps(E(phi)^(x)n || F(phi)^(x)n) for n = 1..n_max, phi purifying rho_r."""
    _check_pair(e, f)
    a = pull_through(rho_r, choi(e), e.dim_out)
    b = pull_through(rho_r, choi(f), f.dim_out)
    if a.shape[0] ** n_max > 4096:
        raise ValueError(f"n_max={n_max} exceeds the 4096-dimension cap for {a.shape[0]}-dim outputs")
    if np.allclose(a.imag, 0) and np.allclose(b.imag, 0):
        a, b = a.real, b.real
    single = dv.rel_entropy(a, b, base=base)
    rates = []
    big_a, big_b = np.ones((1, 1)), np.ones((1, 1))
    for n in range(1, n_max + 1):
        big_a = np.kron(big_a, a)
        big_b = np.kron(big_b, b)
        rates.append((n, dv.hypothesis_testing_div(big_a, big_b, eps, base=base) / n))
    return rates, single


__all__ = [
    "DivergenceReport",
    "GapResult",
    "InputAnsatz",
    "Witness",
    "amortized_gap",
    "bs_channel_rel_entropy",
    "channel_dmax",
    "channel_rel_entropy",
    "fixed_input_rel_entropy",
    "heatmap",
    "naive_witness",
    "nonadditivity_gap",
    "nonstabilized_rel_entropy",
    "reproduce_report",
    "scan",
    "stein_rates",
]
