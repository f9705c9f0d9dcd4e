"""Brute-force ground truth over all 2**N configurations."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binn import BinnSpec, DecodedBinn, LabeledDataset, batch_cost, decode
from .bitcore import index_to_config

DEFAULT_MAX_QUBITS = 24
_CHUNK_ELEMENTS = 1 << 22

_MAGIC = b"QHNCOST1"
_HEADER = struct.Struct("<8sIQ64s")


@dataclass(frozen=True)
class CostTable:
    values: np.ndarray
    n: int
    n_samples: int = 0
    spec_hash: str = ""

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (1 << self.n,):
            raise ValueError(f"cost table for n={self.n} needs {1 << self.n} entries, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, idx):
        return self.values[idx]


@dataclass(frozen=True)
class OptimumReport:
    best_index: int
    best_cost: float
    best_binn: DecodedBinn | None
    lowest_indices: np.ndarray
    lowest_costs: np.ndarray

    def to_dict(self, spec: BinnSpec | None = None) -> dict:
        out = {
            "best_index": self.best_index,
            "best_cost": self.best_cost,
            "lowest_indices": self.lowest_indices.tolist(),
            "lowest_costs": self.lowest_costs.tolist(),
        }
        if spec is not None:
            out["best_config"] = list(index_to_config(self.best_index, spec.n_qubits))
        if self.best_binn is not None and self.best_binn.w2 is not None:
            out["best_activation"] = self.best_binn.activation
            out["best_n_hid"] = self.best_binn.n_hid
        return out


def table_hash(spec: BinnSpec, data: LabeledDataset) -> str:
    """Identity of a table: the spec's layout digest combined with the dataset's."""
    return hashlib.sha256((spec.digest() + data.digest()).encode()).hexdigest()


def build_cost_table(spec: BinnSpec, data: LabeledDataset,
                     max_qubits: int = DEFAULT_MAX_QUBITS) -> CostTable:
    n = spec.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the enumeration limit of {max_qubits}")
    size = 1 << n
    per_config = max(1, len(data) * max(spec.max_hidden, 1))
    chunk = max(1, min(size, _CHUNK_ELEMENTS // per_config))
    values = np.empty(size)
    shifts = np.arange(n)
    for start in range(0, size, chunk):
        idx = np.arange(start, min(start + chunk, size), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
        values[start:start + idx.size] = batch_cost(spec, bits, data)
    return CostTable(values, n, len(data), table_hash(spec, data))


def _lowest(values: np.ndarray, k: int) -> np.ndarray:
    # stable sort gives ascending-index tie-breaking
    if k < values.size:
        cut = np.partition(values, k - 1)[k - 1]
        candidates = np.flatnonzero(values <= cut)
    else:
        candidates = np.arange(values.size)
    order = np.argsort(values[candidates], kind="stable")
    return candidates[order][:k]


def find_optimum(table: CostTable, k: int = 1, spec: BinnSpec | None = None) -> OptimumReport:
    """Argmin and the ``k`` lowest entries, ties broken by ascending index."""
    if not 1 <= k <= len(table):
        raise ValueError(f"k must be in [1, {len(table)}], got {k}")
    idx = _lowest(table.values, k)
    best = int(idx[0])
    binn = decode(spec, index_to_config(best, table.n)) if spec is not None else None
    return OptimumReport(best, float(table.values[best]), binn, idx, table.values[idx].copy())


def density_of_configurations(table: CostTable, k: int = 200) -> np.ndarray:
    """The ``k`` lowest cost values, ascending, as samples for a density estimate."""
    if not 1 <= k <= len(table):
        raise ValueError(f"k must be in [1, {len(table)}], got {k}")
    return table.values[_lowest(table.values, k)].copy()


def save_table(table: CostTable, path) -> None:
    """Binary dump: header (magic, n, N_s, hash) then little-endian float64 payload."""
    path = Path(path)
    header = _HEADER.pack(_MAGIC, table.n, table.n_samples, table.spec_hash.encode().ljust(64, b"\0"))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(table.values.astype("<f8").tobytes())


def load_table(path, expected_hash: str | None = None) -> CostTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated cost-table header")
    magic, n, n_samples, digest = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError("not a cost-table file")
    digest = digest.rstrip(b"\0").decode()
    if expected_hash is not None and digest != expected_hash:
        raise ValueError("cost table was built for a different spec or dataset")
    payload = raw[_HEADER.size:]
    if len(payload) != 8 << n:
        raise ValueError("truncated cost-table payload")
    return CostTable(np.frombuffer(payload, dtype="<f8").astype(np.float64), n, n_samples, digest)


def cached_cost_table(spec: BinnSpec, data: LabeledDataset, cache_dir=None) -> CostTable:
    """Build a table, reusing a dump in ``cache_dir`` when one matches."""
    if cache_dir is None:
        return build_cost_table(spec, data)
    digest = table_hash(spec, data)
    path = Path(cache_dir) / f"cost-{digest[:24]}.bin"
    if path.exists():
        return load_table(path, digest)
    table = build_cost_table(spec, data)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    save_table(table, tmp)
    tmp.replace(path)
    return table
