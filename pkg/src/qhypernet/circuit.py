"""Exact statevector simulation of the layered linear-connectivity ansatz.

Gate conventions: ``RY(t) = exp(-i t Y / 2)``, ``RZ(t) = exp(-i t Z / 2)``,
so the pi/2 parameter-shift rule is exact. Qubits are 1-indexed in the public
API, with qubit 1 the least-significant bit of the amplitude index.

A block applies ``RY(j) RZ(j)`` to every qubit (RZ acts first) and then a
ladder of CX gates on neighbouring pairs; block ``k`` starts its ladder at
qubit ``1 + (k mod 2)``, giving the alternating brick pattern. A layer is two
blocks. ``n_layers == 0`` is the product-state ansatz: a single rotation
round and no CX.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .bitcore import index_to_config


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    n_layers: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")

    @property
    def n_blocks(self) -> int:
        return max(2 * self.n_layers, 1)

    @property
    def n_params(self) -> int:
        return 2 * self.n * self.n_blocks

    @property
    def label(self) -> str:
        return "product" if self.n_layers == 0 else f"layers{self.n_layers}"

    def cx_pairs(self, k: int) -> list[tuple[int, int]]:
        """CX (control, target) pairs of block ``k`` (1-indexed), 1-indexed qubits."""
        if self.n_layers == 0:
            return []
        return [(m, m + 1) for m in range(1 + k % 2, self.n, 2)]

    @cached_property
    def ladder_masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << (m - 1) for m, _ in self.cx_pairs(k)) for k in range(1, self.n_blocks + 1))

    def gate_sequence(self) -> list[tuple]:
        """Gates in application order: ``("RZ"|"RY", qubit, param_index)`` or ``("CX", c, t)``."""
        gates: list[tuple] = []
        for k in range(1, self.n_blocks + 1):
            for j in range(1, self.n + 1):
                base = 2 * ((k - 1) * self.n + (j - 1))
                gates.append(("RZ", j, base + 1))
                gates.append(("RY", j, base))
            gates.extend(("CX", c, t) for c, t in self.cx_pairs(k))
        return gates

    def param_index(self, alpha: str, j: int, k: int) -> int:
        """Flat position of theta_{alpha, j, k}: block-major, qubit, then (y, z)."""
        return 2 * ((k - 1) * self.n + (j - 1)) + {"y": 0, "z": 1}[alpha]

    def check_params(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        return theta


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def _check_qubit(psi: np.ndarray, j: int) -> int:
    n = psi.size.bit_length() - 1
    if not 1 <= j <= n:
        raise ValueError(f"qubit {j} out of range for {n} qubits")
    return j - 1


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _rotation(theta_y: float, theta_z: float) -> tuple[complex, complex, complex, complex]:
    """Entries of RY(theta_y) @ RZ(theta_z)."""
    c, s = np.cos(theta_y / 2), np.sin(theta_y / 2)
    em, ep = np.exp(-0.5j * theta_z), np.exp(0.5j * theta_z)
    return c * em, -s * ep, s * em, c * ep


def _split(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    psi = np.asarray(psi, dtype=np.complex128)
    return psi.real.copy(), psi.imag.copy()


def _join(re: np.ndarray, im: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    if out is None:
        out = np.empty(re.size, dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


def _apply_matrix(psi, j, u, inplace):
    q = _check_qubit(psi, j)
    re, im = _split(psi)
    _kernels.apply_1q(re, im, q, *(complex(x) for x in np.ravel(u)))
    return _join(re, im, psi if inplace else None)


def apply_ry(psi: np.ndarray, j: int, theta: float, inplace: bool = False) -> np.ndarray:
    return _apply_matrix(psi, j, ry_matrix(theta), inplace)


def apply_rz(psi: np.ndarray, j: int, theta: float, inplace: bool = False) -> np.ndarray:
    return _apply_matrix(psi, j, rz_matrix(theta), inplace)


def apply_cx(psi: np.ndarray, control: int, target: int, inplace: bool = False) -> np.ndarray:
    if control == target:
        raise ValueError("control and target must differ")
    c, t = _check_qubit(psi, control), _check_qubit(psi, target)
    re, im = _split(psi)
    _kernels.apply_cx(re, im, c, t)
    return _join(re, im, psi if inplace else None)


def _product_state(angles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of RY RZ |0> over qubits; qubit 1 is the fastest index."""
    psi = np.ones(1, dtype=np.complex128)
    for theta_y, theta_z in angles:
        u00, _, u10, _ = _rotation(theta_y, theta_z)
        psi = np.concatenate((psi * u00, psi * u10))
    return psi.real.copy(), psi.imag.copy()


class _Workspace:
    """Scratch buffers reused across calls for one qubit count."""

    def __init__(self, n: int):
        dim = 1 << n
        self.buf = [np.empty(dim) for _ in range(6)]


def _prepare_soa(spec: CircuitSpec, angles: np.ndarray, ws: _Workspace | None = None):
    re, im = _product_state(angles[0])
    ws = ws or _Workspace(spec.n)
    bre, bim = ws.buf[0], ws.buf[1]
    for k in range(spec.n_blocks):
        if k > 0:
            for q in range(spec.n):
                _kernels.apply_1q(re, im, q, *_rotation(*angles[k, q]))
        mask = spec.ladder_masks[k]
        if mask:
            _kernels.apply_ladder(re, im, bre, bim, mask)
            re, bre = bre, re
            im, bim = bim, im
    ws.buf[0], ws.buf[1] = bre, bim
    return re, im


def prepare(spec: CircuitSpec, theta) -> np.ndarray:
    """Return ``U(theta)|0...0>``."""
    angles = spec.check_params(theta).reshape(spec.n_blocks, spec.n, 2)
    # the first rotation round acts on |0...0> so it is just a product state
    return _join(*_prepare_soa(spec, angles))


def prepare_gatewise(spec: CircuitSpec, theta) -> np.ndarray:
    """Slow path: walk ``gate_sequence`` one gate at a time."""
    theta = spec.check_params(theta)
    psi = zero_state(spec.n)
    for gate in spec.gate_sequence():
        name = gate[0]
        if name == "RZ":
            apply_rz(psi, gate[1], theta[gate[2]], inplace=True)
        elif name == "RY":
            apply_ry(psi, gate[1], theta[gate[2]], inplace=True)
        else:
            apply_cx(psi, gate[1], gate[2], inplace=True)
    return psi


def probabilities(psi: np.ndarray) -> np.ndarray:
    return psi.real ** 2 + psi.imag ** 2


def sample_indices(psi: np.ndarray, n_shots: int, seed=None) -> np.ndarray:
    """Basis indices drawn i.i.d. from ``|psi|^2``."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    p = probabilities(psi)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    idx = np.searchsorted(cdf, rng.random(n_shots), side="right")
    return np.minimum(idx, psi.size - 1)


def sample(psi: np.ndarray, n_shots: int, seed=None) -> list[tuple[int, ...]]:
    n = psi.size.bit_length() - 1
    return [index_to_config(int(i), n) for i in sample_indices(psi, n_shots, seed)]


def expectation(spec: CircuitSpec, theta, table: np.ndarray, ws: _Workspace | None = None) -> float:
    """Exact ``<psi|C|psi>`` for a diagonal operator given by ``table``."""
    angles = spec.check_params(theta).reshape(spec.n_blocks, spec.n, 2)
    re, im = _prepare_soa(spec, angles, ws)
    return float(_kernels.expectation(re, im, table))


def energy_and_gradient(spec: CircuitSpec, theta, table: np.ndarray,
                        ws: _Workspace | None = None) -> tuple[float, np.ndarray]:
    """Exact ``<psi|C|psi>`` and its gradient by a reverse-mode (adjoint) sweep.

    Costs one preparation plus one backward pass of comparable size,
    independent of the parameter count.
    """
    angles = spec.check_params(theta).reshape(spec.n_blocks, spec.n, 2)
    ws = ws or _Workspace(spec.n)
    pr, pi = _prepare_soa(spec, angles, ws)
    lr, li = ws.buf[2], ws.buf[3]
    np.multiply(pr, table, out=lr)
    np.multiply(pi, table, out=li)
    energy = float(_kernels.expectation(pr, pi, table))
    grad = np.empty((spec.n_blocks, spec.n, 2))
    b0, b1 = ws.buf[0], ws.buf[1]
    spare = ws.buf[4:6]
    for k in range(spec.n_blocks - 1, -1, -1):
        mask = spec.ladder_masks[k]
        if mask:
            _kernels.apply_ladder(pr, pi, b0, b1, mask)
            pr, b0 = b0, pr
            pi, b1 = b1, pi
            _kernels.apply_ladder(lr, li, spare[0], spare[1], mask)
            lr, spare[0] = spare[0], lr
            li, spare[1] = spare[1], li
        for q in range(spec.n):
            gy, gz = _kernels.adjoint_rotation(pr, pi, lr, li, q, *_rotation(*angles[k, q]))
            grad[k, q, 0] = gy
            grad[k, q, 1] = gz
    return energy, grad.reshape(-1)
