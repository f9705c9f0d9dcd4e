import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhypernet import circuit
from qhypernet.circuit import CircuitSpec

_I2 = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _embed(ops, n):
    out = np.eye(1)
    for j in range(n, 0, -1):
        out = np.kron(out, ops.get(j, _I2))
    return out


def _dense_cx(c, t, n):
    return _embed({c: np.diag([1, 0])}, n) + _embed({c: np.diag([0, 1]), t: _X}, n)


def test_golden_gate_sequence_n4_one_layer():
    seq = CircuitSpec(4, 1).gate_sequence()
    cx = [g for g in seq if g[0] == "CX"]
    assert cx == [("CX", 2, 3), ("CX", 1, 2), ("CX", 3, 4)]
    assert seq[0] == ("RZ", 1, 1) and seq[1] == ("RY", 1, 0)
    assert seq[8] == ("CX", 2, 3)


def test_brick_pattern_odd_n():
    spec = CircuitSpec(5, 1)
    assert spec.cx_pairs(1) == [(2, 3), (4, 5)]
    assert spec.cx_pairs(2) == [(1, 2), (3, 4)]


def test_parameter_counts():
    assert CircuitSpec(17, 0).n_params == 34
    assert CircuitSpec(14, 3).n_params == 2 * 14 * 6
    assert not any(g[0] == "CX" for g in CircuitSpec(3, 0).gate_sequence())


def test_param_index_layout():
    spec = CircuitSpec(3, 2)
    assert spec.param_index("y", 1, 1) == 0
    assert spec.param_index("z", 1, 1) == 1
    assert spec.param_index("y", 2, 1) == 2
    assert spec.param_index("z", 3, 4) == 2 * (3 * 3 + 2) + 1


def test_single_gates_match_matrices():
    rng = np.random.default_rng(3)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    t = 0.7
    assert np.allclose(circuit.apply_ry(psi, 2, t), _embed({2: circuit.ry_matrix(t)}, 3) @ psi, atol=1e-14)
    assert np.allclose(circuit.apply_rz(psi, 3, t), _embed({3: circuit.rz_matrix(t)}, 3) @ psi, atol=1e-14)
    assert np.allclose(circuit.apply_cx(psi, 3, 1), _dense_cx(3, 1, 3) @ psi, atol=1e-14)
    before = psi.copy()
    circuit.apply_ry(psi, 1, t)
    assert np.array_equal(psi, before)


def test_cx_on_basis_state():
    psi = np.zeros(4, dtype=complex)
    psi[1] = 1  # qubit 1 set
    out = circuit.apply_cx(psi, 1, 2)
    assert out[3] == 1


def test_gate_errors():
    psi = circuit.zero_state(2)
    with pytest.raises(ValueError):
        circuit.apply_cx(psi, 1, 1)
    with pytest.raises(ValueError):
        circuit.apply_ry(psi, 3, 0.1)
    with pytest.raises(ValueError):
        circuit.prepare(CircuitSpec(2, 1), np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 3), st.integers(0, 10**6))
def test_fast_path_matches_gatewise(n, layers, seed):
    spec = CircuitSpec(n, layers)
    theta = np.random.default_rng(seed).uniform(0, 2 * np.pi, spec.n_params)
    fast = circuit.prepare(spec, theta)
    slow = circuit.prepare_gatewise(spec, theta)
    assert np.max(np.abs(fast - slow)) < 1e-12
    assert abs(np.vdot(fast, fast).real - 1) < 1e-12


def test_zero_angles_leave_zero_state():
    for layers in (0, 1, 2):
        spec = CircuitSpec(5, layers)
        psi = circuit.prepare(spec, np.zeros(spec.n_params))
        assert abs(psi[0]) == pytest.approx(1.0)


def test_product_state_marginals():
    spec = CircuitSpec(3, 0)
    theta = np.zeros(spec.n_params)
    theta[spec.param_index("y", 2, 1)] = np.pi
    assert abs(circuit.prepare(spec, theta)[2]) == pytest.approx(1.0)


def test_sampling_follows_born_rule():
    spec = CircuitSpec(3, 1)
    theta = np.random.default_rng(0).uniform(0, 2 * np.pi, spec.n_params)
    psi = circuit.prepare(spec, theta)
    idx = circuit.sample_indices(psi, 200_000, seed=1)
    freq = np.bincount(idx, minlength=8) / idx.size
    p = circuit.probabilities(psi)
    assert np.all(np.abs(freq - p) < 5 * np.sqrt(p * (1 - p) / idx.size) + 1e-4)
    assert np.array_equal(idx[:50], circuit.sample_indices(psi, 200_000, seed=1)[:50])
    assert all(len(c) == 3 for c in circuit.sample(psi, 5, seed=0))


def test_expectation_matches_dense():
    rng = np.random.default_rng(9)
    spec = CircuitSpec(6, 2)
    theta = rng.uniform(0, 2 * np.pi, spec.n_params)
    table = rng.normal(size=64)
    psi = circuit.prepare(spec, theta)
    assert circuit.expectation(spec, theta, table) == pytest.approx(float(np.sum(np.abs(psi) ** 2 * table)), abs=1e-13)


@pytest.mark.parametrize("layers", [0, 1, 2, 3])
def test_adjoint_gradient_matches_shift_rule(layers):
    rng = np.random.default_rng(layers)
    spec = CircuitSpec(5, layers)
    table = rng.normal(size=32)
    theta = rng.uniform(0, 2 * np.pi, spec.n_params)
    e, g = circuit.energy_and_gradient(spec, theta, table)
    assert e == pytest.approx(circuit.expectation(spec, theta, table), abs=1e-13)
    shift = np.empty_like(g)
    for p in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[p] += np.pi / 2
        dn[p] -= np.pi / 2
        shift[p] = 0.5 * (circuit.expectation(spec, up, table) - circuit.expectation(spec, dn, table))
    assert np.max(np.abs(g - shift)) < 1e-8


def test_rotation_examples():
    one = circuit.apply_ry(circuit.zero_state(1), 1, np.pi)
    assert np.allclose(one, [0, 1], atol=1e-15)
    plus = circuit.apply_ry(circuit.zero_state(1), 1, np.pi / 2)
    assert np.allclose(plus, [2 ** -0.5, 2 ** -0.5])
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert np.allclose(circuit.apply_ry(circuit.apply_ry(psi, 2, 0.9), 2, -0.9), psi, atol=1e-12)
    phased = circuit.apply_rz(plus, 1, np.pi)
    assert np.allclose(phased, np.array([np.exp(-0.5j * np.pi), np.exp(0.5j * np.pi)]) * 2 ** -0.5)
    a = circuit.apply_rz(circuit.apply_rz(psi, 1, 0.3), 1, 1.1)
    b = circuit.apply_rz(circuit.apply_rz(psi, 1, 1.1), 1, 0.3)
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(circuit.apply_cx(circuit.apply_cx(psi, 1, 3), 1, 3), psi)


@pytest.mark.parametrize("layers", [0, 1, 2])
def test_every_basis_state_is_reachable(layers):
    n = 4
    spec = CircuitSpec(n, layers)
    for target in range(1 << n):
        # only the last rotation round is non-trivial; earlier ladders act on |0...0>
        theta = np.zeros(spec.n_params)
        psi = circuit.prepare(spec, theta)
        assert abs(psi[0]) == pytest.approx(1.0)
        if layers == 0:
            for j in range(1, n + 1):
                if target >> (j - 1) & 1:
                    theta[spec.param_index("y", j, 1)] = np.pi
            assert abs(circuit.prepare(spec, theta)[target]) ** 2 == pytest.approx(1.0)
        else:
            pre = next(i for i in range(1 << n) if _ladder_image(spec, i) == target)
            for j in range(1, n + 1):
                if pre >> (j - 1) & 1:
                    theta[spec.param_index("y", j, spec.n_blocks)] = np.pi
            assert abs(circuit.prepare(spec, theta)[target]) ** 2 == pytest.approx(1.0)


def _ladder_image(spec, idx):
    psi = np.zeros(1 << spec.n, dtype=complex)
    psi[idx] = 1
    for c, t in spec.cx_pairs(spec.n_blocks):
        psi = circuit.apply_cx(psi, c, t)
    return int(np.argmax(np.abs(psi)))


def test_sampling_examples():
    assert set(circuit.sample(circuit.zero_state(3), 20, seed=0)) == {(0, 0, 0)}
    uniform = np.full(4, 0.5, dtype=complex)
    idx = circuit.sample_indices(uniform, 100_000, seed=2)
    assert np.all(np.abs(np.bincount(idx, minlength=4) / idx.size - 0.25) < 0.01)
    assert circuit.sample(uniform, 30, seed=4) == circuit.sample(uniform, 30, seed=4)
