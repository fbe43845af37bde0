import json
import math

import numpy as np
import pytest

from chainrule import channels as ch
from chainrule.linalg import kron, partial_trace, permute_systems, random_density

J_E = np.array([[1, 0, 0, math.sqrt(0.7)], [0, 0, 0, 0], [0, 0, 0.3, 0], [math.sqrt(0.7), 0, 0, 0.7]])
J_F = np.array([[0.55, 0, 0, math.sqrt(0.5)], [0, 0.45, 0, 0], [0, 0, 0.05, 0],
                [math.sqrt(0.5), 0, 0, 0.95]])


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def _omega(d):
    v = np.eye(d).reshape(-1)
    return np.outer(v, v)


def _apply_oracle(chan, state, dims, target):
    """Kraus sum with explicitly embedded operators I (x) K (x) I."""
    left = int(np.prod(dims[:target]))
    right = int(np.prod(dims[target + 1:]))
    out = 0
    for k in chan.kraus:
        big = kron(np.eye(left), k, np.eye(right))
        out = out + big @ state @ big.conj().T
    return out


# --- construction ----------------------------------------------------------


def test_gad_choi_matrices():
    assert np.allclose(ch.choi(ch.gad(0.3, 0.0)), J_E)
    assert np.allclose(ch.choi(ch.gad(0.5, 0.9)), J_F)


@pytest.mark.parametrize("beta", [0.0, 0.4, 1.0])
def test_gad_zero_damping_is_identity(beta):
    assert np.allclose(ch.choi(ch.gad(0.0, beta)), _omega(2))


def test_gad_is_tp_and_rejects_bad_parameters():
    g = ch.gad(0.2, 0.7)
    assert g.tp and len(g.kraus) == 4
    with pytest.raises(ValueError, match="gad parameters"):
        ch.gad(1.2, 0.0)
    with pytest.raises(ValueError, match="gad parameters"):
        ch.gad(0.5, -0.1)


def test_channel_shape_validation():
    with pytest.raises(ValueError, match="shape"):
        ch.Channel((np.eye(2),), 3, 2)
    with pytest.raises(ValueError, match="trace preserving"):
        ch.Channel((0.5 * np.eye(2),), 2, 2, True)


def test_cp_not_tp_allowed():
    f = ch.scaled(ch.identity(2), 0.1)
    assert not f.tp
    assert np.allclose(ch.choi(f), 0.1 * _omega(2))


def test_from_kraus_detects_tp():
    assert ch.Channel.from_kraus([np.eye(3)]).tp
    assert not ch.Channel.from_kraus([0.9 * np.eye(3)]).tp


def test_choi_trace_and_tp_marginal(rng):
    c = ch.random_channel(3, 2, rng)
    j = ch.choi(c)
    assert np.allclose(partial_trace(j, [3, 2], [0]), np.eye(3), atol=1e-9)
    assert np.linalg.eigvalsh(j).min() > -1e-12


def test_choi_identity_rank_one():
    j = ch.choi(ch.identity(2))
    assert np.allclose(j, _omega(2))
    assert np.linalg.matrix_rank(j) == 1 and np.trace(j) == pytest.approx(2)


def test_choi_replacer(rng):
    omega = random_density(3, rng)
    assert np.allclose(ch.choi(ch.replacer(omega, 2)), kron(np.eye(2), omega))


def test_choi_round_trip(rng):
    c = ch.random_channel(2, 3, rng)
    back = ch.choi_to_channel(ch.choi(c), 2, 3)
    assert back == c
    x = random_density(2, rng)
    assert np.allclose(back(x), c(x))


def test_choi_definition_matches_matrix_units(rng):
    c = ch.random_channel(2, 2, rng)
    j = sum(np.kron(np.outer(np.eye(2)[i], np.eye(2)[k]), c(np.outer(np.eye(2)[i], np.eye(2)[k])))
            for i in range(2) for k in range(2))
    assert np.allclose(ch.choi(c), j)


# --- application -----------------------------------------------------------


def test_apply_identity_leaves_state(rng):
    rho = random_density(6, rng)
    assert np.allclose(ch.apply(ch.identity(3), rho, [2, 3], 1), rho)


def test_apply_replacer_gives_product(rng):
    rho = random_density(4, rng)
    omega = random_density(2, rng)
    out = ch.apply(ch.replacer(omega, 2), rho, [2, 2], 1)
    assert np.allclose(out, kron(partial_trace(rho, [2, 2], [0]), omega))


def test_apply_gad_on_maximally_entangled():
    out = ch.apply(ch.gad(0.3, 0.0), _omega(2) / 2, [2, 2], 1)
    assert np.allclose(out, J_E / 2)


@pytest.mark.parametrize("target", [0, 1, 2])
def test_apply_matches_kraus_oracle(rng, target):
    dims = [2, 3, 2]
    c = ch.random_channel(dims[target], dims[target], rng)
    rho = random_density(12, rng)
    assert np.allclose(ch.apply(c, rho, dims, target), _apply_oracle(c, rho, dims, target))


def test_apply_dimension_mismatch(rng):
    with pytest.raises(ValueError, match="dimension"):
        ch.apply(ch.gad(0.1, 0.1), np.eye(6) / 6, [2, 3], 1)


# --- pull-through ----------------------------------------------------------


def test_pull_through_maximally_mixed():
    assert np.allclose(ch.pull_through(np.eye(2) / 2, J_E), J_E / 2)


def test_pull_through_pure_reference():
    out = ch.pull_through(np.diag([1.0, 0.0]), J_F)
    assert np.allclose(out[:2, :2], J_F[:2, :2])
    assert np.allclose(out[2:, :], 0) and np.allclose(out[:, 2:], 0)


@pytest.mark.parametrize("trial", range(4))
def test_pull_through_equals_channel_on_purification(rng, trial):
    c = ch.random_channel(2, 3, rng)
    rho_r = random_density(2, rng)
    lhs = ch.pull_through(rho_r, ch.choi(c), 3)
    rhs = ch.apply(c, ch.purification(rho_r), [2, 2], 1)
    assert np.allclose(lhs, rhs)
    assert np.trace(lhs).real == pytest.approx(1.0)


def test_purification_marginals(rng):
    rho = random_density(3, rng)
    phi = ch.purification(rho)
    assert np.allclose(partial_trace(phi, [3, 3], [0]), rho)
    assert np.allclose(partial_trace(phi, [3, 3], [1]), rho.T)


def test_pull_through_dimension_mismatch():
    with pytest.raises(ValueError, match="Choi dimension"):
        ch.pull_through(np.eye(3) / 3, J_E, 2)


# --- combinators -----------------------------------------------------------


def test_tensor_pow_identity():
    assert ch.tensor_pow(ch.identity(2), 2) == ch.identity(4)


def test_tensor_square_choi_is_reordered_product():
    j2 = ch.choi(ch.tensor_pow(ch.gad(0.3, 0.0), 2))
    # index-reorder oracle: (R1 B1 R2 B2) -> (R1 R2 B1 B2)
    expected = permute_systems(np.kron(J_E, J_E), [2, 2, 2, 2], [0, 2, 1, 3])
    assert np.allclose(j2, expected)
    assert np.allclose(ch.interleaved_to_grouped(np.kron(J_E, J_E), [2, 2], [2, 2]), j2)
    assert np.allclose(ch.grouped_to_interleaved(j2, [2, 2], [2, 2]), np.kron(J_E, J_E))


def test_layout_converters_are_inverse(rng):
    j = random_density(2 * 3 * 2 * 3, rng)
    g = ch.interleaved_to_grouped(j, [2, 2], [3, 3])
    assert np.allclose(ch.grouped_to_interleaved(g, [2, 2], [3, 3]), j)


def test_compose_and_parallel(rng):
    a, b = ch.random_channel(2, 3, rng), ch.random_channel(3, 2, rng)
    x = random_density(2, rng)
    assert np.allclose(ch.compose(b, a)(x), b(a(x)))
    y = random_density(3, rng)
    p = ch.parallel(a, b)
    assert np.allclose(p(np.kron(x, y)), np.kron(a(x), b(y)))
    assert p.tp
    with pytest.raises(ValueError, match="compose"):
        ch.compose(a, a)


def test_tp_flag_propagates():
    f = ch.scaled(ch.identity(2), 0.5)
    assert not ch.parallel(f, ch.identity(2)).tp
    assert not ch.compose(ch.identity(2), f).tp


def test_partial_trace_channel(rng):
    rho = random_density(6, rng)
    c = ch.partial_trace_channel([2, 3], [1])
    assert np.allclose(c(rho), partial_trace(rho, [2, 3], [1]))


# --- predicates and generators ---------------------------------------------


def test_gad_is_z_covariant(rng):
    assert ch.is_z_covariant(ch.gad(0.3, 0.0))
    assert ch.is_z_covariant(ch.gad(0.5, 0.9))
    assert not ch.is_z_covariant(ch.random_channel(2, 2, rng))


def test_classical_channel(rng):
    w = np.array([[0.9, 0.2], [0.1, 0.8]])
    c = ch.classical_channel(w)
    assert c.tp and ch.is_classical(c)
    assert np.allclose(c(np.diag([0.3, 0.7])), np.diag(w @ [0.3, 0.7]))
    assert not ch.is_classical(ch.random_channel(2, 2, rng))
    assert ch.is_classical(ch.random_classical_channel(3, 2, rng))


def test_random_channel_is_tp(rng):
    for din, dout in [(2, 2), (3, 2), (2, 4)]:
        c = ch.random_channel(din, dout, rng)
        assert ch.trace_preservation_error(c.kraus, din) < 1e-12


# --- serialization ---------------------------------------------------------


def test_json_round_trip(rng):
    c = ch.random_channel(2, 3, rng)
    assert ch.from_json(ch.to_json(c)) == c


@pytest.mark.parametrize("payload,field", [
    ({"dim_out": 2, "kraus": []}, "dim_in"),
    ({"dim_in": 2, "dim_out": 2}, "kraus"),
    ({"dim_in": 2, "dim_out": 2, "kraus": [[[[1, 0]]]]}, "kraus[0]"),
    ({"dim_in": 0, "dim_out": 2, "kraus": []}, "dim_in"),
])
def test_json_errors_name_field(payload, field):
    with pytest.raises(ValueError, match=field.replace("[", r"\[").replace("]", r"\]")):
        ch.from_json(json.dumps(payload))


def test_parse_channel_specs(tmp_path, rng):
    assert ch.parse_channel("gad:0.3:0") == ch.gad(0.3, 0.0)
    assert ch.parse_channel("identity:3") == ch.identity(3)
    omega = random_density(2, rng)
    state_file = tmp_path / "omega.json"
    state_file.write_text(json.dumps({"state": [[[z.real, z.imag] for z in row] for row in omega]}))
    assert ch.parse_channel(f"replacer:{state_file}") == ch.replacer(omega, 2)
    chan_file = tmp_path / "c.json"
    c = ch.random_channel(2, 2, rng)
    chan_file.write_text(ch.to_json(c))
    assert ch.parse_channel(str(chan_file)) == c
    with pytest.raises(ValueError, match="gad"):
        ch.parse_channel("gad:0.3")
    with pytest.raises(ValueError, match="unknown channel spec"):
        ch.parse_channel("nonsense")
