"""Variational objective ``E(theta) = <psi_theta| C |psi_theta>`` and its gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import circuit
from .circuit import CircuitSpec
from .oracle import CostTable

SHIFT = np.pi / 2


@dataclass
class ObjectiveContext:
    """Circuit, cost table and estimator mode.

    ``shots=None`` selects exact expectation values; an integer selects the
    sampled estimator ``mean(C(sigma_i))`` over that many measurements, seeded
    from ``seed``.
    """

    spec: CircuitSpec
    table: CostTable
    shots: int | None = None
    seed: int = 0
    _ws: circuit._Workspace = field(init=False, repr=False)

    def __post_init__(self):
        if self.spec.n != self.table.n:
            raise ValueError(f"circuit has {self.spec.n} qubits, cost table {self.table.n}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")
        self._ws = circuit._Workspace(self.spec.n)

    @property
    def exact(self) -> bool:
        return self.shots is None


def energy(ctx: ObjectiveContext, theta, seed=None) -> float:
    theta = ctx.spec.check_params(theta)
    if ctx.exact:
        return circuit.expectation(ctx.spec, theta, ctx.table.values, ctx._ws)
    psi = circuit.prepare(ctx.spec, theta)
    idx = circuit.sample_indices(psi, ctx.shots, ctx.seed if seed is None else seed)
    return float(ctx.table.values[idx].mean())


def gradient_parameter_shift(ctx: ObjectiveContext, theta) -> np.ndarray:
    """``dE/dtheta_p = (E(theta + pi/2 e_p) - E(theta - pi/2 e_p)) / 2`` for every p.

    Uses ``2 * n_params`` circuit preparations. In shot mode every shifted
    evaluation draws from its own seed, so the result is a stochastic estimate.
    """
    theta = ctx.spec.check_params(theta)
    grad = np.empty(theta.size)
    shifted = theta.copy()
    for p in range(theta.size):
        shifted[p] = theta[p] + SHIFT
        plus = energy(ctx, shifted, seed=None if ctx.exact else (ctx.seed, p, 0))
        shifted[p] = theta[p] - SHIFT
        minus = energy(ctx, shifted, seed=None if ctx.exact else (ctx.seed, p, 1))
        shifted[p] = theta[p]
        grad[p] = 0.5 * (plus - minus)
    return grad


def energy_and_gradient(ctx: ObjectiveContext, theta) -> tuple[float, np.ndarray]:
    """Exact value and gradient in one adjoint sweep (agrees with the shift rule)."""
    if not ctx.exact:
        return energy(ctx, theta), gradient_parameter_shift(ctx, theta)
    return circuit.energy_and_gradient(ctx.spec, theta, ctx.table.values, ctx._ws)
