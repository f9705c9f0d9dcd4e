import numpy as np
import pytest
from hypothesis import given, strategies as st

from qhypernet.bitcore import all_configs, config_to_index, config_to_spins, index_to_config, popcount


def test_qubit_one_is_least_significant():
    assert index_to_config(1, 3) == (1, 0, 0)
    assert index_to_config(6, 3) == (0, 1, 1)
    assert config_to_index((0, 0, 1)) == 4


def test_spins_map_zero_to_minus_one():
    assert config_to_spins((0, 1, 1, 0)) == (-1, 1, 1, -1)


@given(st.integers(1, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))))
def test_index_round_trip(case):
    n, idx = case
    assert config_to_index(index_to_config(idx, n)) == idx


def test_all_configs_rows_match_index_to_config():
    table = all_configs(5)
    assert table.shape == (32, 5)
    for idx in range(32):
        assert tuple(table[idx]) == index_to_config(idx, 5)


@pytest.mark.parametrize("idx, n", [(-1, 3), (8, 3), (0, 0), (0, 31)])
def test_out_of_range(idx, n):
    with pytest.raises(ValueError):
        index_to_config(idx, n)


def test_bad_bit_value():
    with pytest.raises(ValueError):
        config_to_index((0, 2))


def test_popcount():
    vals = np.arange(1024)
    assert np.array_equal(popcount(vals), [bin(v).count("1") for v in vals])
