"""Walsh (diagonal Pauli-Z) expansion of a cost table.

``C(sigma) = sum_T f_T prod_{i in T} (2 sigma_i - 1)``, where subset ``T`` is a
bit mask over qubits (bit ``i-1`` set when qubit ``i`` carries a Z). Note the
sign convention: sigma = 0 maps to -1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bitcore import popcount
from .oracle import DEFAULT_MAX_QUBITS, CostTable


@dataclass(frozen=True)
class WalshSpectrum:
    coefficients: np.ndarray
    n: int


def _butterfly(values: np.ndarray, n: int, inverse: bool = False) -> np.ndarray:
    """Forward: ``out[T] = sum_x v[x] chi_T(x)``. Inverse: ``out[x] = sum_T v[T] chi_T(x)``.

    ``chi_T(x) = prod_{i in T}(2 x_i - 1)``; the two differ because chi is not
    symmetric in (T, x) under this sign convention.
    """
    out = np.array(values, dtype=np.float64)
    for q in range(n):
        v = out.reshape(-1, 2, 1 << q)
        lo, hi = v[:, 0, :].copy(), v[:, 1, :].copy()
        if inverse:
            v[:, 0, :] = lo - hi
            v[:, 1, :] = lo + hi
        else:
            v[:, 0, :] = lo + hi
            v[:, 1, :] = hi - lo
    return out


def walsh_transform(table: CostTable, max_qubits: int = DEFAULT_MAX_QUBITS) -> WalshSpectrum:
    """Fourier coefficients of the table in O(N 2^N)."""
    if table.n > max_qubits:
        raise ValueError(f"{table.n} qubits exceeds the limit of {max_qubits}")
    return WalshSpectrum(_butterfly(table.values, table.n) / (1 << table.n), table.n)


def inverse_transform(spectrum: WalshSpectrum, max_weight: int | None = None) -> np.ndarray:
    """Cost values rebuilt from the coefficients, optionally keeping only strings of weight <= max_weight."""
    coeffs = spectrum.coefficients
    if max_weight is not None:
        coeffs = np.where(popcount(np.arange(coeffs.size)) <= max_weight, coeffs, 0.0)
    return _butterfly(coeffs, spectrum.n, inverse=True)


def reconstruct_cost(spectrum: WalshSpectrum, config) -> float:
    """Evaluate the expansion at one configuration."""
    n = spectrum.n
    if len(config) != n:
        raise ValueError(f"configuration has {len(config)} bits, spectrum has {n}")
    chi = np.ones(1)
    for bit in config:
        s = 2.0 * bit - 1.0
        chi = np.concatenate((chi, s * chi))
    return float(chi @ spectrum.coefficients)


def weight_spectrum(spectrum: WalshSpectrum) -> np.ndarray:
    """``W[S]`` = sum of squared coefficients over strings with exactly S Z factors, S = 0..N."""
    weights = popcount(np.arange(spectrum.coefficients.size))
    return np.bincount(weights, weights=spectrum.coefficients ** 2, minlength=spectrum.n + 1)


def truncation_errors(table: CostTable, spectrum: WalshSpectrum | None = None) -> np.ndarray:
    """Max-abs reconstruction error when keeping weights <= S, for S = 0..N."""
    spectrum = spectrum or walsh_transform(table)
    return np.array([np.max(np.abs(inverse_transform(spectrum, s) - table.values))
                     for s in range(spectrum.n + 1)])


def write_weight_csv(w: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["S", "W"])
        for s, v in enumerate(w):
            out.writerow([s, repr(float(v))])

