"""Augmented binary neural networks: qubit layout, decoding, forward pass and cost.

A configuration (one bit per qubit) decodes to a network whose weights and
biases are ``2*sigma - 1`` and whose activation function and hidden width
may themselves be selected by dedicated qubits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .bitcore import config_to_spins

PROB_CLIP = 1e-12

# Role tuples used in BinnSpec.qubit_layout, one per qubit (qubit j at position j-1):
#   ("weight", layer, row, col), ("bias", layer, row),
#   ("activation_choice",), ("hidden_width_choice",)
Role = tuple


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} labels")
        if y.size < 1:
            raise ValueError("dataset must contain at least one point")
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs must be finite")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.size

    @property
    def input_dim(self) -> int:
        return self.x.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class BinnSpec:
    """Fixed decoding map from qubits to network roles.

    ``max_hidden == 0`` means logistic regression (no hidden layer). When the
    layout has no activation qubit, ``default_activation`` is used; when it
    has no width qubit the network uses all ``max_hidden`` units.
    """

    input_dim: int
    max_hidden: int
    qubit_layout: tuple[Role, ...]
    output_dim: int = 1
    default_activation: str = "sigmoid"
    loss_kind: str = "binary_cross_entropy"
    output_activation: str = "sigmoid"
    name: str = "custom"

    def __post_init__(self):
        expected = set(_parameter_roles(self.input_dim, self.max_hidden))
        seen = [r for r in self.qubit_layout if r[0] in ("weight", "bias")]
        if len(set(seen)) != len(seen) or set(seen) != expected:
            raise ValueError("qubit layout must assign every weight and bias exactly once")
        for kind in ("activation_choice", "hidden_width_choice"):
            if sum(r[0] == kind for r in self.qubit_layout) > 1:
                raise ValueError(f"at most one {kind} qubit allowed")
        if self.max_hidden == 0 and any(r[0] != "weight" and r[0] != "bias" for r in self.qubit_layout):
            raise ValueError("logistic regression has no architectural qubits")
        if self.has_width_qubit and self.max_hidden < 2:
            raise ValueError("width choice needs max_hidden >= 2")
        if self.output_dim != 1 or self.loss_kind != "binary_cross_entropy":
            raise ValueError("only single-output binary cross-entropy models are supported")

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_layout)

    @property
    def has_width_qubit(self) -> bool:
        return any(r[0] == "hidden_width_choice" for r in self.qubit_layout)

    def qubit_of(self, role: Role) -> int | None:
        """1-indexed qubit carrying ``role`` (``None`` if absent)."""
        for j, r in enumerate(self.qubit_layout):
            if tuple(r) == tuple(role):
                return j + 1
        return None

    def masked_qubits(self, n_hid: int) -> frozenset[int]:
        """Qubits whose value is ignored when only ``n_hid`` hidden units are active."""
        out = set()
        for j, r in enumerate(self.qubit_layout):
            if r[0] == "weight" and ((r[1] == 1 and r[2] >= n_hid) or (r[1] == 2 and r[3] >= n_hid)):
                out.add(j + 1)
            elif r[0] == "bias" and r[1] == 1 and r[2] >= n_hid:
                out.add(j + 1)
        return frozenset(out)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_dim": self.input_dim,
            "max_hidden": self.max_hidden,
            "output_dim": self.output_dim,
            "default_activation": self.default_activation,
            "loss_kind": self.loss_kind,
            "output_activation": self.output_activation,
            "qubit_layout": [list(r) for r in self.qubit_layout],
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _parameter_roles(input_dim: int, max_hidden: int) -> list[Role]:
    if max_hidden == 0:
        return [("weight", 1, 0, c) for c in range(input_dim)] + [("bias", 1, 0)]
    roles: list[Role] = [("weight", 1, r, c) for r in range(max_hidden) for c in range(input_dim)]
    roles += [("bias", 1, r) for r in range(max_hidden)]
    roles += [("weight", 2, 0, r) for r in range(max_hidden)]
    roles.append(("bias", 2, 0))
    return roles


def mlp_spec(input_dim: int, max_hidden: int, activation_qubit: bool = True,
             width_qubit: bool = False, name: str = "custom") -> BinnSpec:
    """One-hidden-layer layout: W1 row-major, b1, W2, b2, activation, width."""
    layout = _parameter_roles(input_dim, max_hidden)
    if activation_qubit:
        layout.append(("activation_choice",))
    if width_qubit:
        layout.append(("hidden_width_choice",))
    return BinnSpec(input_dim=input_dim, max_hidden=max_hidden, qubit_layout=tuple(layout), name=name)


def logreg_spec(input_dim: int, name: str = "custom") -> BinnSpec:
    return BinnSpec(input_dim=input_dim, max_hidden=0,
                    qubit_layout=tuple(_parameter_roles(input_dim, 0)), name=name)


def gaussian_activation_spec() -> BinnSpec:
    """2-3-1 network plus an activation qubit (14 qubits)."""
    return mlp_spec(2, 3, activation_qubit=True, name="gaussian-act")


def gaussian_activation_width_spec() -> BinnSpec:
    """2-{2,3}-1 network with activation and hidden-width qubits (15 qubits)."""
    return mlp_spec(2, 3, activation_qubit=True, width_qubit=True, name="gaussian-act-width")


def mnist_logreg_spec() -> BinnSpec:
    """Logistic regression on 4x4 images: 16 weights and a bias (17 qubits)."""
    return logreg_spec(16, name="mnist-logreg")


@dataclass(frozen=True)
class DecodedBinn:
    input_dim: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None = None
    b2: float | None = None
    activation: str = "sigmoid"
    n_hid: int = 0
    mask: frozenset = field(default_factory=frozenset)


def decode(spec: BinnSpec, config: Sequence[int]) -> DecodedBinn:
    if len(config) != spec.n_qubits:
        raise ValueError(f"configuration has {len(config)} bits, spec needs {spec.n_qubits}")
    spins = config_to_spins(config)
    if spec.max_hidden == 0:
        w = np.zeros((1, spec.input_dim))
        b = np.zeros(1)
        for s, r in zip(spins, spec.qubit_layout):
            if r[0] == "weight":
                w[0, r[3]] = s
            else:
                b[0] = s
        return DecodedBinn(spec.input_dim, w, b)

    h, d = spec.max_hidden, spec.input_dim
    w1, b1, w2 = np.zeros((h, d)), np.zeros(h), np.zeros(h)
    b2 = 0.0
    activation = spec.default_activation
    n_hid = h
    for bit, s, r in zip(config, spins, spec.qubit_layout):
        kind = r[0]
        if kind == "weight" and r[1] == 1:
            w1[r[2], r[3]] = s
        elif kind == "weight":
            w2[r[3]] = s
        elif kind == "bias" and r[1] == 1:
            b1[r[2]] = s
        elif kind == "bias":
            b2 = float(s)
        elif kind == "activation_choice":
            activation = "relu" if bit else "sigmoid"
        elif kind == "hidden_width_choice":
            n_hid = h if bit else h - 1
    return DecodedBinn(d, w1, b1, w2, b2, activation, n_hid, spec.masked_qubits(n_hid))


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return expit(z)


def forward(b: DecodedBinn, x) -> float:
    """Output probability of the decoded network for a single input."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != b.input_dim:
        raise ValueError(f"input has dimension {x.size}, network expects {b.input_dim}")
    if b.w2 is None:
        return float(expit(b.w1[0] @ x + b.b1[0]))
    k = b.n_hid
    hidden = _activate(b.w1[:k] @ x + b.b1[:k], b.activation)
    return float(expit(b.w2[:k] @ hidden + b.b2))


def bce(p, y) -> np.ndarray:
    """Binary cross-entropy with ``p`` clipped to ``[1e-12, 1 - 1e-12]``."""
    p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def cost(spec: BinnSpec, config: Sequence[int], data: LabeledDataset) -> float:
    """Mean binary cross-entropy of the decoded network over ``data``."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    net = decode(spec, config)
    p = np.array([forward(net, x) for x in data.x])
    return float(np.mean(bce(p, data.y)))


def batch_logits(spec: BinnSpec, bits: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Output logits for many configurations at once.

    ``bits`` has shape ``(C, N)``; returns shape ``(C, N_s)``.
    """
    spins = 2.0 * bits.astype(float) - 1.0
    layout = spec.qubit_layout
    if spec.max_hidden == 0:
        w = np.zeros((bits.shape[0], spec.input_dim))
        b = np.zeros(bits.shape[0])
        for j, r in enumerate(layout):
            if r[0] == "weight":
                w[:, r[3]] = spins[:, j]
            else:
                b = spins[:, j]
        return w @ x.T + b[:, None]

    c, h, d = bits.shape[0], spec.max_hidden, spec.input_dim
    w1, b1, w2 = np.zeros((c, h, d)), np.zeros((c, h)), np.zeros((c, h))
    b2 = np.zeros(c)
    relu = np.zeros(c, dtype=bool) if spec.default_activation == "sigmoid" else np.ones(c, dtype=bool)
    n_hid = np.full(c, h)
    for j, r in enumerate(layout):
        kind = r[0]
        if kind == "weight" and r[1] == 1:
            w1[:, r[2], r[3]] = spins[:, j]
        elif kind == "weight":
            w2[:, r[3]] = spins[:, j]
        elif kind == "bias" and r[1] == 1:
            b1[:, r[2]] = spins[:, j]
        elif kind == "bias":
            b2 = spins[:, j]
        elif kind == "activation_choice":
            relu = bits[:, j].astype(bool)
        elif kind == "hidden_width_choice":
            n_hid = np.where(bits[:, j].astype(bool), h, h - 1)
    active = np.arange(h)[None, :] < n_hid[:, None]
    pre = np.einsum("chd,sd->chs", w1, x) + b1[:, :, None]
    hidden = np.where(relu[:, None, None], np.maximum(pre, 0.0), expit(pre))
    return np.einsum("ch,chs->cs", w2 * active, hidden) + b2[:, None]


def batch_cost(spec: BinnSpec, bits: np.ndarray, data: LabeledDataset) -> np.ndarray:
    """Vectorized ``cost`` for each row of ``bits``."""
    if bits.shape[1] != spec.n_qubits:
        raise ValueError(f"configurations have {bits.shape[1]} bits, spec needs {spec.n_qubits}")
    if data.input_dim != spec.input_dim:
        raise ValueError(f"dataset has dimension {data.input_dim}, spec expects {spec.input_dim}")
    p = expit(batch_logits(spec, bits, data.x))
    return bce(p, data.y[None, :]).mean(axis=1)
