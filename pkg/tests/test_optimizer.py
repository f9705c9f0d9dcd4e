import json

import numpy as np
import pytest

from qhypernet import optimizer
from qhypernet.circuit import CircuitSpec
from qhypernet.objective import ObjectiveContext
from qhypernet.optimizer import LbfgsConfig, RunRecord
from qhypernet.oracle import CostTable


def rosenbrock(x):
    f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
    return f, g


def test_lbfgs_solves_rosenbrock():
    x, f, it, evals, reason, _, _ = optimizer.lbfgs(rosenbrock, [-1.2, 1.0], LbfgsConfig(gtol=1e-9))
    assert reason == optimizer.CONVERGED
    assert np.allclose(x, [1, 1], atol=1e-6)
    assert it < 100 and evals >= it


def test_lbfgs_quadratic_exact():
    a = np.diag([1.0, 10.0, 100.0])
    x, f, *_ = optimizer.lbfgs(lambda x: (0.5 * x @ a @ x, a @ x), np.ones(3))
    assert np.max(np.abs(x)) < 1e-8


def test_history_and_iteration_cap():
    cfg = LbfgsConfig(max_iterations=5, record_history=True)
    x, f, it, _, reason, f_trace, x_trace = optimizer.lbfgs(rosenbrock, [-1.2, 1.0], cfg)
    assert it == 5 and reason == optimizer.MAX_ITERATIONS
    assert len(f_trace) == len(x_trace) == 6
    assert all(b <= a for a, b in zip(f_trace, f_trace[1:]))


def test_non_finite_start():
    *_, reason, _, _ = optimizer.lbfgs(lambda x: (np.nan, x), np.ones(2))
    assert reason == optimizer.NON_FINITE


def test_line_search_failure_is_a_reason():
    # gradient points the wrong way: no descent direction can satisfy Armijo
    *_, reason, _, _ = optimizer.lbfgs(lambda x: (float(x @ x), -2 * x), np.ones(2))
    assert reason == optimizer.LINE_SEARCH_FAILED


def test_strong_wolfe_conditions():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    d = -g0
    a, f, g, _ = optimizer.strong_wolfe(rosenbrock, x, f0, g0, d, 1e-3)
    assert f <= f0 + 1e-4 * a * (g0 @ d)
    assert abs(g @ d) <= 0.9 * abs(g0 @ d)


def test_config_validation():
    with pytest.raises(ValueError):
        LbfgsConfig(c1=0.9, c2=0.1)
    with pytest.raises(ValueError):
        LbfgsConfig(memory=0)
    with pytest.raises(ValueError):
        LbfgsConfig(gradient="magic")


@pytest.fixture(scope="module")
def ctx():
    table = CostTable(np.random.default_rng(0).uniform(0, 1, 32), 5)
    return ObjectiveContext(CircuitSpec(5, 0), table)


def test_product_ansatz_reaches_a_basis_state(ctx):
    rec = optimizer.minimize(ctx, optimizer.initial_parameters(ctx.spec.n_params, 0), seed=0)
    assert rec.reason == optimizer.CONVERGED
    assert rec.energy <= rec.energy0
    # a stationary product state of a random diagonal cost sits at a table entry
    assert np.min(np.abs(ctx.table.values - rec.energy)) < 1e-8


def test_parameter_shift_gradient_option(ctx):
    theta0 = optimizer.initial_parameters(ctx.spec.n_params, 1)
    a = optimizer.minimize(ctx, theta0, LbfgsConfig(max_iterations=3))
    b = optimizer.minimize(ctx, theta0, LbfgsConfig(max_iterations=3, gradient="parameter_shift"))
    assert a.energy == pytest.approx(b.energy, abs=1e-9)


def test_initial_parameters_seeded():
    a = optimizer.initial_parameters(10, 4)
    assert np.array_equal(a, optimizer.initial_parameters(10, 4))
    assert np.all((a >= 0) & (a < 2 * np.pi))


def test_restart_sweep_seeds_and_threads(ctx):
    serial = optimizer.restart_sweep(ctx, 4, base_seed=10)
    assert [r.seed for r in serial] == [10, 11, 12, 13]
    parallel = optimizer.restart_sweep(ctx, 4, base_seed=10, threads=2)
    assert [r.to_json() for r in serial] == [r.to_json() for r in parallel]


def test_success_probability():
    recs = [RunRecord(i, [], [], 1.0, e, 0, 0, "converged") for i, e in enumerate([0.0, 0.01, 0.05, 0.2])]
    assert optimizer.success_probability(recs, 0.0, 0.03) == 0.5
    assert optimizer.success_probability(recs, 0.0, 0.01) == 0.25  # strict inequality
    with pytest.raises(ValueError):
        optimizer.success_probability([], 0.0, 0.1)
    with pytest.raises(ValueError):
        optimizer.success_probability(recs, 0.0, 0.0)


def test_jsonl_round_trip(tmp_path, ctx):
    recs = optimizer.restart_sweep(ctx, 2)
    path = tmp_path / "r.jsonl"
    optimizer.write_jsonl(recs, path)
    back = optimizer.read_jsonl(path)
    assert [r.to_json() for r in back] == [r.to_json() for r in recs]
    assert set(json.loads(path.read_text().splitlines()[0])) >= {"seed", "theta", "energy", "reason"}
    optimizer.write_summary_csv(recs, tmp_path / "s.csv", 0.0, 1.0)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "seed,ansatz,final_energy,iterations,success"
