import json

import numpy as np
import pytest

from qhypernet import experiments, optimizer
from qhypernet.experiments import ExperimentConfig, OverfitConfig


def test_kde_degenerate_samples_peak():
    est = experiments.kde([0.5] * 10)
    assert est.grid[np.argmax(est.density)] == pytest.approx(0.5, abs=1e-3)
    assert np.trapezoid(est.density, est.grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_bimodal():
    rng = np.random.default_rng(0)
    est = experiments.kde(np.concatenate([rng.normal(-5, 0.5, 500), rng.normal(5, 0.5, 500)]))
    mid = est.density[np.argmin(np.abs(est.grid))]
    assert mid < 0.01 * est.density.max()
    peaks = est.grid[1:-1][(est.density[1:-1] > est.density[:-2]) & (est.density[1:-1] > est.density[2:])]
    assert len(peaks) == 2


def test_kde_standard_normal_density():
    x = np.random.default_rng(1).standard_normal(10_000)
    est = experiments.kde(x, grid=np.linspace(-6, 6, 2401))
    assert est.density[1200] == pytest.approx(1 / np.sqrt(2 * np.pi), abs=0.02)
    assert np.trapezoid(est.density, est.grid) == pytest.approx(1.0, abs=1e-3)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert est.bandwidth == pytest.approx(0.9 * min(x.std(ddof=1), iqr / 1.34) * 10_000 ** -0.2)


def test_kde_clustered_samples_still_integrate():
    # most restarts land on the same value; IQR collapses to ~0
    x = np.concatenate([np.full(150, 0.43), 0.43 + np.array([0.027, 0.043, 0.2] * 17)[:50]])
    est = experiments.kde(x)
    assert np.all(est.density >= 0)
    assert np.trapezoid(est.density, est.grid) == pytest.approx(1.0, abs=1e-3)


def test_kde_errors():
    with pytest.raises(ValueError):
        experiments.kde([])
    with pytest.raises(ValueError):
        experiments.kde([1.0])


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(eps=0)
    with pytest.raises(ValueError):
        ExperimentConfig(n_optim=0)
    with pytest.raises(ValueError):
        ExperimentConfig(task="nope")
    with pytest.raises(ValueError):
        ExperimentConfig(task="custom")
    cfg = ExperimentConfig.for_task("mnist-logreg")
    assert cfg.eps == 5e-5 and cfg.ansatze == (0, 1, 2, 3) and cfg.binn_spec().n_qubits == 17
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_dimension_mismatch_names_stage(tmp_path):
    cfg = ExperimentConfig(task="custom", model={"input_dim": 3, "max_hidden": 0}, n_optim=1,
                           output_dir=str(tmp_path))
    with pytest.raises(experiments.StageError) as err:
        experiments.run_task(cfg)
    assert err.value.stage == "dataset"


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    cfg = ExperimentConfig(task="custom", model={"input_dim": 2, "max_hidden": 1},
                           ansatze=(0, 1), n_optim=3, eps=0.05, output_dir=str(out))
    return cfg, experiments.run_task(cfg)


def test_smoke_artifacts(smoke):
    cfg, out = smoke
    names = {p.name for p in out.iterdir()}
    assert {"manifest.json", "oracle.json", "spectrum.csv", "success.csv", "records_product.jsonl",
            "records_layers1.jsonl", "kde_product.csv", "density_of_configurations.csv"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"] == cfg.to_dict()
    assert manifest["kde"]["bandwidth"] == "silverman"


def test_success_csv_uses_optimizer_definition(smoke):
    cfg, out = smoke
    c_star = json.loads((out / "oracle.json").read_text())["best_cost"]
    p = experiments.read_success(out / "success.csv")
    for label in ("product", "layers1"):
        recs = optimizer.read_jsonl(out / f"records_{label}.jsonl")
        assert p[label] == optimizer.success_probability(recs, c_star, cfg.eps)


def test_resume_from_partial_records(smoke, tmp_path):
    cfg, out = smoke
    lines = (out / "records_product.jsonl").read_text().splitlines(keepends=True)
    fresh = ExperimentConfig(**{**cfg.__dict__, "output_dir": str(tmp_path), "ansatze": (0,)})
    (tmp_path / "records_product.partial.jsonl").write_text(lines[0])
    experiments.run_task(fresh)
    assert (tmp_path / "records_product.jsonl").read_text() == "".join(lines)
    assert not (tmp_path / "records_product.partial.jsonl").exists()


def test_rerun_detects_tampering(smoke, tmp_path):
    _, out = smoke
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["artifacts"]["success.csv"] = "0" * 64
    (tmp_path / "m").mkdir()
    (tmp_path / "m" / "manifest.json").write_text(json.dumps(manifest))
    _, diff = experiments.rerun(tmp_path / "m" / "manifest.json", tmp_path / "again")
    assert diff == ["success.csv"]


def test_overfit_small(tmp_path):
    cfg = OverfitConfig(sizes=(2, 50), realizations=2, iterations=4, validation_size=100,
                        output_dir=str(tmp_path))
    out = experiments.run_overfitting_study(cfg)
    curves = experiments.read_overfit_curves(out / "overfit_curves.csv")
    assert set(curves) == {2, 50}
    assert all(c["train"].size == 5 for c in curves.values())
    assert (out / "overfit_curves.csv").read_text().startswith("iteration,train_mean,valid_mean,N_s\n")


def test_validation_does_not_touch_trajectory():
    cfg = OverfitConfig(sizes=(4,), realizations=1, iterations=6, validation_size=50)
    spec = ExperimentConfig(task=cfg.task).binn_spec()
    from qhypernet import datasets, oracle
    from qhypernet.circuit import CircuitSpec
    from qhypernet.objective import ObjectiveContext
    train = datasets.sample_gaussian_mixture(cfg.mixture_spec(), 4, seed=[cfg.seed, 1, 4, 0])
    ctx = ObjectiveContext(CircuitSpec(spec.n_qubits, cfg.layers), oracle.build_cost_table(spec, train))
    theta0 = optimizer.initial_parameters(ctx.spec.n_params, experiments.hash_seed(cfg.seed, 4, 0))
    with_history = optimizer.minimize(ctx, theta0, cfg.optimizer)
    without = optimizer.minimize(ctx, theta0, optimizer.LbfgsConfig(max_iterations=6))
    assert with_history.theta == without.theta


def test_pad_holds_last_value():
    assert experiments._pad([3.0, 2.0], 4).tolist() == [3.0, 2.0, 2.0, 2.0]


def test_default_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(experiments.OUTPUT_ENV, str(tmp_path))
    assert experiments.default_output_dir() == tmp_path
