import numpy as np
import pytest

from qhypernet import binn, oracle
from qhypernet.binn import LabeledDataset
from qhypernet.bitcore import index_to_config


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(5)
    spec = binn.logreg_spec(4)
    data = LabeledDataset(rng.normal(size=(30, 4)), rng.integers(0, 2, 30))
    return spec, data, oracle.build_cost_table(spec, data)


def test_table_matches_scalar_cost(small):
    spec, data, table = small
    for idx in range(len(table)):
        assert table[idx] == pytest.approx(binn.cost(spec, index_to_config(idx, 5), data), rel=1e-12)


def test_table_is_read_only(small):
    with pytest.raises(ValueError):
        small[2].values[0] = 0.0


def test_optimum_is_argmin(small):
    spec, _, table = small
    rep = oracle.find_optimum(table, 5, spec)
    assert rep.best_index == int(np.argmin(table.values))
    assert np.all(np.diff(rep.lowest_costs) >= 0)
    assert rep.to_dict(spec)["best_config"] == list(index_to_config(rep.best_index, 5))


def test_ties_break_by_ascending_index():
    table = oracle.CostTable(np.array([3.0, 1.0, 1.0, 0.5, 1.0, 2.0, 9.0, 1.0]), 3)
    rep = oracle.find_optimum(table, 4)
    assert rep.lowest_indices.tolist() == [3, 1, 2, 4]


def test_density_of_configurations():
    vals = np.arange(16, dtype=float)[::-1]
    dos = oracle.density_of_configurations(oracle.CostTable(vals, 4), 3)
    assert dos.tolist() == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        oracle.density_of_configurations(oracle.CostTable(vals, 4), 17)


def test_size_limit():
    with pytest.raises(ValueError):
        oracle.build_cost_table(binn.mnist_logreg_spec(), LabeledDataset(np.zeros((1, 16)), [0]), max_qubits=16)


def test_dump_round_trip(small, tmp_path):
    _, _, table = small
    path = tmp_path / "t.bin"
    oracle.save_table(table, path)
    back = oracle.load_table(path, table.spec_hash)
    assert np.array_equal(back.values, table.values)
    assert (back.n, back.n_samples) == (table.n, table.n_samples)
    with pytest.raises(ValueError):
        oracle.load_table(path, "0" * 64)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        oracle.load_table(path)
    path.write_bytes(b"garbage" * 20)
    with pytest.raises(ValueError):
        oracle.load_table(path)


def test_cache_reuses_dump(small, tmp_path):
    spec, data, table = small
    first = oracle.cached_cost_table(spec, data, tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    second = oracle.cached_cost_table(spec, data, tmp_path)
    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.values, table.values)


def test_hash_tracks_dataset(small):
    spec, data, _ = small
    other = LabeledDataset(data.x + 1e-9, data.y)
    assert oracle.table_hash(spec, data) != oracle.table_hash(spec, other)
