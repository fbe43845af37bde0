"""Quantum channels as Kraus families, Choi matrices and the built-in families.

Choi matrices use the unnormalized convention J = sum_ij |i><j| (x) E(|i><j|),
with the reference factor first. Multi-copy Choi matrices put all reference
factors before all output factors (R1 R2 ... B1 B2 ...).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import kron, permute_systems, psd_sqrt, random_unitary

TP_ATOL = 1e-9


@dataclass(frozen=True)
class Channel:
    """A completely positive map given by Kraus operators of shape (dim_out, dim_in)."""

    kraus: tuple
    dim_in: int
    dim_out: int
    tp: bool = field(default=False)

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (self.dim_out, self.dim_in):
                raise ValueError(
                    f"Kraus operator shape {k.shape} does not match ({self.dim_out}, {self.dim_in})"
                )
            if not np.all(np.isfinite(k)):
                raise ValueError("Kraus operator has non-finite entries")
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        if self.tp and trace_preservation_error(ops, self.dim_in) > TP_ATOL:
            raise ValueError("Kraus operators are not trace preserving")

    @classmethod
    def from_kraus(cls, kraus: Sequence, tp: bool | None = None) -> "Channel":
        """Build a channel, detecting trace preservation when ``tp`` is None."""
        ops = [np.atleast_2d(np.asarray(k, dtype=complex)) for k in kraus]
        dim_out, dim_in = ops[0].shape
        if tp is None:
            tp = trace_preservation_error(ops, dim_in) <= TP_ATOL
        return cls(tuple(ops), dim_in, dim_out, tp)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def __eq__(self, other):
        if not isinstance(other, Channel):
            return NotImplemented
        return (self.dim_in, self.dim_out) == (other.dim_in, other.dim_out) and np.allclose(
            choi(self), choi(other), atol=1e-12
        )

    __hash__ = None


def trace_preservation_error(kraus, dim_in: int) -> float:
    s = sum(np.asarray(k).conj().T @ np.asarray(k) for k in kraus)
    return float(np.linalg.norm(s - np.eye(dim_in)))


def gad(gamma: float, beta: float) -> Channel:
    """Generalized amplitude damping channel with damping ``gamma`` and thermal weight ``beta``."""
    if not (0.0 <= gamma <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError(f"gad parameters must lie in [0, 1], got gamma={gamma}, beta={beta}")
    a1 = math.sqrt(1 - beta) * np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    a2 = math.sqrt(gamma * (1 - beta)) * np.array([[0, 1], [0, 0]])
    a3 = math.sqrt(beta) * np.array([[math.sqrt(1 - gamma), 0], [0, 1]])
    a4 = math.sqrt(gamma * beta) * np.array([[0, 0], [1, 0]])
    return Channel((a1, a2, a3, a4), 2, 2, True)


def identity(dim: int) -> Channel:
    return Channel((np.eye(dim),), dim, dim, True)


def scaled(ch: Channel, factor: float) -> Channel:
    """The CP map factor * ch (factor >= 0)."""
    if factor < 0:
        raise ValueError("scale factor must be nonnegative")
    r = math.sqrt(factor)
    return Channel.from_kraus([r * k for k in ch.kraus], tp=None)


def replacer(omega, dim_in: int) -> Channel:
    """X -> omega tr(X)."""
    omega = np.asarray(omega, dtype=complex)
    dim_out = omega.shape[0]
    root = psd_sqrt(omega)
    ops = []
    for i in range(dim_in):
        for j in range(dim_out):
            k = np.zeros((dim_out, dim_in), dtype=complex)
            k[:, i] = root[:, j]
            ops.append(k)
    return Channel.from_kraus(ops, tp=None)


def partial_trace_channel(dims: Sequence[int], keep: Sequence[int]) -> Channel:
    """The map X -> tr_{not keep} X as a Kraus family."""
    dims = [int(d) for d in dims]
    keep = sorted(keep)
    traced = [i for i in range(len(dims)) if i not in keep]
    d_in = int(np.prod(dims))
    d_out = int(np.prod([dims[i] for i in keep])) if keep else 1
    ops = []
    for idx in np.ndindex(*[dims[i] for i in traced]):
        k = np.zeros((d_out, d_in), dtype=complex)
        for col in range(d_in):
            digits = np.unravel_index(col, dims)
            if all(digits[t] == v for t, v in zip(traced, idx)):
                row = np.ravel_multi_index([digits[i] for i in keep], [dims[i] for i in keep]) if keep else 0
                k[row, col] = 1.0
        ops.append(k)
    return Channel(tuple(ops), d_in, d_out, True)


def compose(outer: Channel, inner: Channel) -> Channel:
    """outer o inner."""
    if outer.dim_in != inner.dim_out:
        raise ValueError(f"cannot compose: {outer.dim_in} != {inner.dim_out}")
    ops = [a @ b for a in outer.kraus for b in inner.kraus]
    return Channel(tuple(ops), inner.dim_in, outer.dim_out, outer.tp and inner.tp)


def parallel(*chs: Channel) -> Channel:
    """Tensor product of channels, first channel on the most significant factor."""
    ops = [np.eye(1)]
    for ch in chs:
        ops = [np.kron(a, b) for a in ops for b in ch.kraus]
    dim_in = int(np.prod([c.dim_in for c in chs]))
    dim_out = int(np.prod([c.dim_out for c in chs]))
    return Channel(tuple(ops), dim_in, dim_out, all(c.tp for c in chs))


def tensor_pow(ch: Channel, n: int) -> Channel:
    if n < 1:
        raise ValueError("n must be at least 1")
    return parallel(*([ch] * n))


def choi(ch: Channel) -> np.ndarray:
    """Unnormalized Choi matrix on R (x) B, reference factor first."""
    vecs = [k.T.reshape(-1) for k in ch.kraus]  # (I (x) K)|Omega> = vec over (i, b)
    j = sum(np.outer(v, v.conj()) for v in vecs)
    return (j + j.conj().T) / 2


def choi_to_channel(j, dim_in: int, dim_out: int, atol: float = 1e-12) -> Channel:
    w, v = np.linalg.eigh((np.asarray(j) + np.asarray(j).conj().T) / 2)
    ops = []
    for val, vec in zip(w, v.T):
        if val > atol:
            ops.append(math.sqrt(val) * vec.reshape(dim_in, dim_out).T)
    if not ops:
        ops = [np.zeros((dim_out, dim_in))]
    return Channel.from_kraus(ops, tp=None)


def interleaved_to_grouped(j, dims_r: Sequence[int], dims_b: Sequence[int]) -> np.ndarray:
    """Reorder a multi-copy Choi matrix from (R1 B1 R2 B2 ...) to (R1 R2 ... B1 B2 ...)."""
    n = len(dims_r)
    dims = [d for pair in zip(dims_r, dims_b) for d in pair]
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return permute_systems(j, dims, perm)


def grouped_to_interleaved(j, dims_r: Sequence[int], dims_b: Sequence[int]) -> np.ndarray:
    n = len(dims_r)
    dims = list(dims_r) + list(dims_b)
    perm = [x for i in range(n) for x in (i, n + i)]
    return permute_systems(j, dims, perm)


def apply(ch: Channel, state, dims: Sequence[int], target: int) -> np.ndarray:
    """Apply ``ch`` to factor ``target`` of a multipartite operator, identity elsewhere."""
    state = np.asarray(state)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != state.shape[0]:
        raise ValueError(f"dims {dims} incompatible with operator of dimension {state.shape[0]}")
    if not 0 <= target < len(dims):
        raise ValueError(f"target {target} out of range")
    if dims[target] != ch.dim_in:
        raise ValueError(f"target factor has dimension {dims[target]}, channel expects {ch.dim_in}")
    left = int(np.prod(dims[:target]))
    right = int(np.prod(dims[target + 1:]))
    ops = [kron(np.eye(left), k, np.eye(right)) for k in ch.kraus]
    return sum(k @ state @ k.conj().T for k in ops)


def pull_through(rho_r, j, dim_b: int | None = None) -> np.ndarray:
    """(sqrt(rho_R) (x) I_B) J (sqrt(rho_R) (x) I_B), the output on the purification of rho_R."""
    rho_r = np.asarray(rho_r)
    j = np.asarray(j)
    dim_r = rho_r.shape[0]
    if dim_b is None:
        if j.shape[0] % dim_r:
            raise ValueError(f"Choi dimension {j.shape[0]} not divisible by {dim_r}")
        dim_b = j.shape[0] // dim_r
    if dim_r * dim_b != j.shape[0]:
        raise ValueError(f"Choi dimension {j.shape[0]} != {dim_r} * {dim_b}")
    s = np.kron(psd_sqrt(rho_r), np.eye(dim_b))
    out = s @ j @ s.conj().T
    return (out + out.conj().T) / 2


def purification(rho) -> np.ndarray:
    """|phi><phi| with |phi> = (sqrt(rho) (x) I)|Omega> on R (x) A."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    omega = np.eye(d).reshape(-1)
    vec = np.kron(psd_sqrt(rho), np.eye(d)) @ omega
    return np.outer(vec, vec.conj())


def is_z_covariant(ch: Channel, atol: float = 1e-9) -> bool:
    """Check G(Z X Z) = Z G(X) Z on the matrix-unit basis (qubit channels)."""
    if ch.dim_in != 2 or ch.dim_out != 2:
        return False
    z = np.diag([1.0, -1.0])
    for i in range(2):
        for k in range(2):
            x = np.zeros((2, 2))
            x[i, k] = 1.0
            if np.linalg.norm(ch(z @ x @ z) - z @ ch(x) @ z) > atol:
                return False
    return True


def is_classical(ch: Channel, atol: float = 1e-12) -> bool:
    """True if ch maps every matrix unit |i><j| with i != j to 0 and |i><i| to a diagonal."""
    for i in range(ch.dim_in):
        for k in range(ch.dim_in):
            x = np.zeros((ch.dim_in, ch.dim_in))
            x[i, k] = 1.0
            y = ch(x)
            if i != k and np.max(np.abs(y)) > atol:
                return False
            if i == k and np.max(np.abs(y - np.diag(np.diag(y)))) > atol:
                return False
    return True


def classical_channel(stochastic) -> Channel:
    """Measure-and-prepare channel from a column-stochastic (or substochastic) matrix W[b, a]."""
    w = np.asarray(stochastic, dtype=float)
    if np.any(w < 0):
        raise ValueError("transition matrix must be nonnegative")
    d_out, d_in = w.shape
    ops = []
    for a in range(d_in):
        for b in range(d_out):
            if w[b, a] > 0:
                k = np.zeros((d_out, d_in))
                k[b, a] = math.sqrt(w[b, a])
                ops.append(k)
    if not ops:
        ops = [np.zeros((d_out, d_in))]
    return Channel.from_kraus(ops, tp=None)


def random_channel(dim_in: int, dim_out: int, rng: np.random.Generator, rank: int | None = None) -> Channel:
    """Random TPCP map from the first columns of a Haar-like unitary (Stinespring isometry)."""
    k = rank if rank is not None else dim_in * dim_out
    big = dim_out * k
    if big < dim_in:
        raise ValueError("Kraus rank too small for an isometry")
    u = random_unitary(big, rng)
    iso = u[:, :dim_in]  # rows indexed by (b, env)
    t = iso.reshape(dim_out, k, dim_in)
    ops = [t[:, e, :] for e in range(k)]
    return Channel(tuple(ops), dim_in, dim_out, True)


def random_classical_channel(dim_in: int, dim_out: int, rng: np.random.Generator) -> Channel:
    w = rng.random((dim_out, dim_in)) + 1e-3
    return classical_channel(w / w.sum(axis=0, keepdims=True))


# --- serialization ---------------------------------------------------------


def to_json(ch: Channel) -> str:
    data = {
        "dim_in": ch.dim_in,
        "dim_out": ch.dim_out,
        "kraus": [[[[float(z.real), float(z.imag)] for z in row] for row in k] for k in ch.kraus],
    }
    return json.dumps(data)


def from_json(text: str) -> Channel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"channel file is not valid JSON: {exc}") from None
    for key in ("dim_in", "dim_out", "kraus"):
        if key not in data:
            raise ValueError(f"channel file is missing field '{key}'")
    dim_in, dim_out = data["dim_in"], data["dim_out"]
    if not (isinstance(dim_in, int) and isinstance(dim_out, int)) or dim_in < 1 or dim_out < 1:
        raise ValueError("fields 'dim_in' and 'dim_out' must be positive integers")
    ops = []
    for n, k in enumerate(data["kraus"]):
        try:
            arr = np.array(k, dtype=float)
        except (TypeError, ValueError):
            raise ValueError(f"field 'kraus[{n}]' is not a matrix of [re, im] pairs") from None
        if arr.shape != (dim_out, dim_in, 2):
            raise ValueError(f"field 'kraus[{n}]' has shape {arr.shape[:-1]}, expected ({dim_out}, {dim_in})")
        ops.append(arr[..., 0] + 1j * arr[..., 1])
    if not ops:
        raise ValueError("field 'kraus' is empty")
    return Channel.from_kraus(ops, tp=None)


def state_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    mat = data["state"] if isinstance(data, dict) else data
    arr = np.array(mat, dtype=float)
    if arr.ndim == 3:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr


def parse_channel(spec: str) -> Channel:
    """Resolve ``gad:G:B``, ``identity:D``, ``replacer:<statefile>`` or a channel JSON file."""
    kind, _, rest = spec.partition(":")
    if kind == "gad":
        parts = rest.split(":")
        if len(parts) != 2:
            raise ValueError(f"gad spec needs two parameters, got '{spec}'")
        try:
            return gad(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ValueError(f"bad gad spec '{spec}': {exc}") from None
    if kind == "identity":
        try:
            return identity(int(rest))
        except ValueError:
            raise ValueError(f"bad identity dimension in '{spec}'") from None
    if kind == "replacer":
        omega = state_from_json(Path(rest).read_text())
        return replacer(omega, omega.shape[0])
    path = Path(spec)
    if not path.exists():
        raise ValueError(f"unknown channel spec '{spec}'")
    return from_json(path.read_text())
