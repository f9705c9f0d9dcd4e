"""N-bit configurations and their integer indices.

Global convention: qubit 1 is the least-significant bit of the basis-state
index, qubit ``j`` is bit ``j - 1``. The statevector, cost table and Walsh
spectrum are all indexed this way.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

MAX_QUBITS = 30


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


def index_to_config(idx: int, n: int) -> tuple[int, ...]:
    """Return ``(sigma_1, ..., sigma_n)`` for basis index ``idx``."""
    _check_n(n)
    idx = int(idx)
    if not 0 <= idx < (1 << n):
        raise ValueError(f"index {idx} out of range for n={n}")
    return tuple((idx >> i) & 1 for i in range(n))


def config_to_index(config: Sequence[int]) -> int:
    idx = 0
    for i, bit in enumerate(config):
        if bit not in (0, 1):
            raise ValueError(f"configuration entries must be 0 or 1, got {bit!r}")
        idx |= int(bit) << i
    return idx


def config_to_spins(config: Sequence[int]) -> tuple[int, ...]:
    """Map each bit to ``2*sigma - 1`` so that 0 -> -1 and 1 -> +1."""
    return tuple(2 * int(b) - 1 for b in config)


def all_configs(n: int) -> np.ndarray:
    """Bit matrix of shape ``(2**n, n)``; row ``idx`` is ``index_to_config(idx, n)``."""
    _check_n(n)
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.int8)


def popcount(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    counts = np.zeros(values.shape, dtype=np.int64)
    v = values.copy()
    while np.any(v):
        counts += v & 1
        v >>= 1
    return counts
