"""End-to-end pipelines: dataset -> cost table -> oracle -> restart sweeps -> CSV/JSONL artifacts.

Every artifact is a pure function of the config stored in ``manifest.json``,
so ``rerun`` on a manifest reproduces the same bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, binn, datasets, fourier, objective, oracle, optimizer
from .binn import BinnSpec, LabeledDataset
from .circuit import CircuitSpec
from .objective import ObjectiveContext
from .optimizer import LbfgsConfig, RunRecord

OUTPUT_ENV = "QHN_OUTPUT_DIR"
TASKS = ("gaussian-act", "gaussian-act-width", "mnist-logreg", "custom")
KDE_POINTS = 4096


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "qhn-output"))


# --- configuration ---------------------------------------------------------

def _default_dataset(task: str) -> dict:
    if task == "mnist-logreg":
        return {"kind": "mnist", **datasets.MnistReductionSpec().to_dict()}
    return {"kind": "gaussian", "n_samples": 200, "seed": 0,
            "closer": 1.0, "mixture": datasets.GaussianMixtureSpec().to_dict()}


TASK_DEFAULTS = {
    "gaussian-act": {"ansatze": (0, 1, 2, 3, 4), "eps": 0.03},
    "gaussian-act-width": {"ansatze": (0, 1, 2, 3, 4), "eps": 0.03},
    "mnist-logreg": {"ansatze": (0, 1, 2, 3), "eps": 5e-5},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One depth study.

    ``ansatze`` lists layer counts, 0 meaning the product state. ``model`` is
    only read for ``task="custom"``: ``{"input_dim", "max_hidden",
    "activation_qubit", "width_qubit"}`` (``max_hidden=0`` gives logistic
    regression).
    """

    task: str = "gaussian-act"
    ansatze: tuple[int, ...] = (0, 1, 2, 3, 4)
    n_optim: int = 200
    eps: float = 0.03
    seed: int = 0
    optimizer: LbfgsConfig = LbfgsConfig()
    dataset: dict = field(default_factory=dict)
    model: dict | None = None
    top_k: int = 200
    output_dir: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n_optim < 1:
            raise ValueError("n_optim must be >= 1")
        if not self.ansatze or any(a < 0 for a in self.ansatze) or len(set(self.ansatze)) != len(self.ansatze):
            raise ValueError("ansatze must be distinct non-negative layer counts")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.task == "custom" and not self.model:
            raise ValueError("custom task needs a model description")
        if not self.dataset:
            object.__setattr__(self, "dataset", _default_dataset(self.task))
        object.__setattr__(self, "ansatze", tuple(int(a) for a in self.ansatze))

    @classmethod
    def for_task(cls, task: str, **overrides) -> "ExperimentConfig":
        """Defaults of the published studies for ``task``."""
        return cls(task=task, **{**TASK_DEFAULTS.get(task, {}), **overrides})

    def binn_spec(self) -> BinnSpec:
        if self.task == "gaussian-act":
            return binn.gaussian_activation_spec()
        if self.task == "gaussian-act-width":
            return binn.gaussian_activation_width_spec()
        if self.task == "mnist-logreg":
            return binn.mnist_logreg_spec()
        m = self.model
        if m.get("max_hidden", 0) == 0:
            return binn.logreg_spec(m["input_dim"])
        return binn.mlp_spec(m["input_dim"], m["max_hidden"], m.get("activation_qubit", True),
                             m.get("width_qubit", False), name="custom")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ansatze"] = list(self.ansatze)
        d.pop("output_dir")
        return d

    @classmethod
    def from_dict(cls, d: dict, output_dir: str | None = None) -> "ExperimentConfig":
        d = dict(d)
        d.pop("output_dir", None)
        d["optimizer"] = LbfgsConfig(**d.get("optimizer", {}))
        d["ansatze"] = tuple(d.get("ansatze", (0,)))
        return cls(**d, output_dir=output_dir)


def load_dataset(desc: dict) -> LabeledDataset:
    """Build a dataset from its manifest description."""
    kind = desc.get("kind")
    if kind == "gaussian":
        spec = datasets.GaussianMixtureSpec.from_dict(desc["mixture"]).closer(desc.get("closer", 1.0))
        return datasets.sample_gaussian_mixture(spec, desc["n_samples"], seed=desc["seed"])
    if kind == "mnist":
        return datasets.load_reduced_mnist(datasets.MnistReductionSpec.from_dict(desc))
    if kind == "csv":
        raw = np.loadtxt(desc["path"], delimiter=",", skiprows=1, ndmin=2)
        return LabeledDataset(raw[:, :-1], raw[:, -1])
    raise ValueError(f"unknown dataset kind {kind!r}")


# --- kernel density estimate -----------------------------------------------

@dataclass(frozen=True)
class KdeEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    kernel: str = "gaussian"


def silverman_bandwidth(samples: np.ndarray) -> float:
    """``0.9 * min(std, IQR/1.34) * n^(-1/5)``; a zero IQR falls back to the std alone."""
    x = np.asarray(samples, dtype=float)
    std = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = std
    return 0.9 * spread * x.size ** -0.2


def kde(samples, grid=None, bandwidth: str | float = "silverman", n_points: int = KDE_POINTS) -> KdeEstimate:
    """Gaussian-kernel density of ``samples`` on ``grid``.

    The bandwidth never drops below 1e-3 of the grid span: tightly clustered
    restarts would otherwise produce spikes far narrower than any sane grid
    spacing. The default grid pads the sample range by four bandwidths.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("no samples")
    if x.size < 2:
        raise ValueError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    h = silverman_bandwidth(x) if bandwidth == "silverman" else float(bandwidth)
    if grid is None:
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        else:
            pad = 4.0 * max(h, 1e-3 * (hi - lo))
            lo, hi = lo - pad, hi + pad
        grid = np.linspace(lo, hi, n_points)
    grid = np.asarray(grid, dtype=float)
    span = float(grid[-1] - grid[0]) if grid.size > 1 else 1.0
    h = max(h, 1e-3 * span)
    density = np.zeros(grid.size)
    for start in range(0, x.size, 256):
        z = (grid[:, None] - x[None, start:start + 256]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= x.size * h * np.sqrt(2 * np.pi)
    return KdeEstimate(grid, density, h)


def write_kde_csv(est: KdeEstimate, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["E", "density"])
        for g, d in zip(est.grid, est.density):
            w.writerow([repr(float(g)), repr(float(d))])


# --- depth study -----------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _records_for(ctx: ObjectiveContext, cfg: ExperimentConfig, out: Path, threads: int,
                 log: Callable[[str], None]) -> list[RunRecord]:
    """Restart sweep with on-disk resume: finished runs are kept in a partial JSONL."""
    label = ctx.spec.label
    final = out / f"records_{label}.jsonl"
    partial = out / f"records_{label}.partial.jsonl"
    if final.exists():
        recs = optimizer.read_jsonl(final)
        if len(recs) == cfg.n_optim:
            log(f"{label}: reusing {final.name}")
            return recs
    done = optimizer.read_jsonl(partial) if partial.exists() else []
    done = done[:cfg.n_optim]
    with open(partial, "w", newline="\n") as fh:
        for r in done:
            fh.write(r.to_json() + "\n")
        fh.flush()

        def progress(_, rec):
            fh.write(rec.to_json() + "\n")
            fh.flush()
            log(f"{label}: seed {rec.seed} E={rec.energy:.10g} it={rec.iterations} {rec.reason}")

        if len(done) < cfg.n_optim:
            done += optimizer.restart_sweep(ctx, cfg.n_optim - len(done), cfg.seed + len(done),
                                            cfg.optimizer, threads, progress)
    optimizer.write_jsonl(done, final)
    partial.unlink()
    return done


def run_task(cfg: ExperimentConfig, threads: int = 1, log: Callable[[str], None] | None = None) -> Path:
    """Run the full depth study and return the artifact directory.

    Files: ``dataset.csv``, ``oracle.json``, ``density_of_configurations.csv``,
    ``spectrum.csv``, ``truncation.csv``, ``records_<ansatz>.jsonl``,
    ``kde_<ansatz>.csv``, ``success.csv``, ``manifest.json``.
    """
    log = log or (lambda msg: None)
    out = Path(cfg.output_dir) if cfg.output_dir else default_output_dir() / cfg.task
    out.mkdir(parents=True, exist_ok=True)
    with _stage("dataset"):
        spec = cfg.binn_spec()
        data = load_dataset(cfg.dataset)
        if data.input_dim != spec.input_dim:
            raise ValueError(f"dataset has {data.input_dim} inputs, model expects {spec.input_dim}")
        datasets.write_csv(data, out / "dataset.csv")
    with _stage("oracle"):
        table = oracle.cached_cost_table(spec, data, out / "cache")
        report = oracle.find_optimum(table, min(cfg.top_k, len(table)), spec)
        _write_json(report.to_dict(spec), out / "oracle.json")
        dos = oracle.density_of_configurations(table, min(cfg.top_k, len(table)))
        if dos.size >= 2:
            write_kde_csv(kde(dos), out / "density_of_configurations.csv")
        log(f"oracle: C* = {report.best_cost:.10g} at index {report.best_index}")
    with _stage("fourier"):
        spectrum = fourier.walsh_transform(table)
        fourier.write_weight_csv(fourier.weight_spectrum(spectrum), out / "spectrum.csv")
        errs = fourier.truncation_errors(table, spectrum)
        with open(out / "truncation.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["S", "max_abs_error"])
            w.writerows([s, repr(float(e))] for s, e in enumerate(errs))
    success = {}
    for layers in cfg.ansatze:
        circ = CircuitSpec(spec.n_qubits, layers)
        with _stage(f"sweep[{circ.label}]"):
            ctx = ObjectiveContext(circ, table)
            recs = _records_for(ctx, cfg, out, threads, log)
            energies = np.array([r.energy for r in recs])
            if energies.size >= 2:
                write_kde_csv(kde(energies), out / f"kde_{circ.label}.csv")
            success[circ.label] = optimizer.success_probability(recs, report.best_cost, cfg.eps)
            log(f"{circ.label}: p_success = {success[circ.label]:.3f}")
    with open(out / "success.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ansatz", "layers", "p_success", "n_optim", "eps", "c_star"])
        for layers in cfg.ansatze:
            label = CircuitSpec(spec.n_qubits, layers).label
            w.writerow([label, layers, repr(success[label]), cfg.n_optim, repr(cfg.eps), repr(report.best_cost)])
    _write_manifest(out, "task", cfg.to_dict())
    return out


def read_success(path) -> dict[str, float]:
    with open(path) as fh:
        return {row["ansatz"]: float(row["p_success"]) for row in csv.DictReader(fh)}


# --- overfitting study -----------------------------------------------------

@dataclass(frozen=True)
class OverfitConfig:
    """Train on small datasets, track E on the train and a fixed validation table.

    Realization ``r`` at size ``N_s`` draws its training set and its initial
    angles from seeds derived from ``(seed, N_s, r)``.
    """

    task: str = "gaussian-act"
    sizes: tuple[int, ...] = (2, 4, 6, 8, 1000)
    realizations: int = 100
    iterations: int = 50
    layers: int = 1
    validation_size: int = 1000
    closer: float = 0.5
    mixture: dict = field(default_factory=lambda: datasets.GaussianMixtureSpec().to_dict())
    seed: int = 0
    optimizer: LbfgsConfig = LbfgsConfig()
    output_dir: str | None = None

    def __post_init__(self):
        if self.task not in ("gaussian-act", "gaussian-act-width"):
            raise ValueError("the overfitting study uses a Gaussian task")
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError("sizes must be positive")
        if self.realizations < 1 or self.iterations < 1 or self.validation_size < 1:
            raise ValueError("realizations, iterations and validation_size must be >= 1")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "optimizer", replace(self.optimizer, max_iterations=self.iterations,
                                                      record_history=True))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d.pop("output_dir")
        return d

    @classmethod
    def from_dict(cls, d: dict, output_dir: str | None = None) -> "OverfitConfig":
        d = dict(d)
        d.pop("output_dir", None)
        d["optimizer"] = LbfgsConfig(**d.get("optimizer", {}))
        d["sizes"] = tuple(d.get("sizes", (2, 4, 6, 8, 1000)))
        return cls(**d, output_dir=output_dir)

    def mixture_spec(self) -> datasets.GaussianMixtureSpec:
        return datasets.GaussianMixtureSpec.from_dict(self.mixture).closer(self.closer)


def _pad(values: list[float], length: int) -> np.ndarray:
    """Hold the last value once a run stops early."""
    out = np.full(length, values[-1])
    out[:len(values)] = values
    return out


def _overfit_realization(args):
    cfg, n_s, r, valid_table = args
    spec = ExperimentConfig(task=cfg.task).binn_spec()
    train = datasets.sample_gaussian_mixture(cfg.mixture_spec(), n_s, seed=[cfg.seed, 1, n_s, r])
    table = oracle.build_cost_table(spec, train)
    circ = CircuitSpec(spec.n_qubits, cfg.layers)
    ctx = ObjectiveContext(circ, table)
    rec = optimizer.minimize(ctx, optimizer.initial_parameters(circ.n_params, hash_seed(cfg.seed, n_s, r)),
                             cfg.optimizer, seed=r)
    vctx = ObjectiveContext(circ, valid_table)
    valid = [objective.energy(vctx, th) for th in rec.theta_trace]
    n = cfg.iterations + 1
    return _pad(rec.trace, n), _pad(valid, n)


def hash_seed(*parts: int) -> int:
    """A 63-bit integer seed derived from integer parts."""
    return int(np.random.SeedSequence(list(parts)).generate_state(2, np.uint32).view(np.uint64)[0] >> 1)


def run_overfitting_study(cfg: OverfitConfig, threads: int = 1, log: Callable[[str], None] | None = None) -> Path:
    """Mean train/validation E curves per training-set size; writes ``overfit_curves.csv`` and ``overfit_gaps.csv``."""
    log = log or (lambda msg: None)
    out = Path(cfg.output_dir) if cfg.output_dir else default_output_dir() / "overfit"
    out.mkdir(parents=True, exist_ok=True)
    spec = ExperimentConfig(task=cfg.task).binn_spec()
    with _stage("validation"):
        valid = datasets.sample_gaussian_mixture(cfg.mixture_spec(), cfg.validation_size, seed=[cfg.seed, 2])
        valid_table = oracle.build_cost_table(spec, valid)
    rows = []
    gaps = []
    for n_s in cfg.sizes:
        with _stage(f"overfit[N_s={n_s}]"):
            jobs = [(cfg, n_s, r, valid_table) for r in range(cfg.realizations)]
            if threads > 1:
                with ProcessPoolExecutor(threads, mp_context=get_context("fork")) as pool:
                    curves = list(pool.map(_overfit_realization, jobs))
            else:
                curves = [_overfit_realization(j) for j in jobs]
            train = np.mean([c[0] for c in curves], axis=0)
            val = np.mean([c[1] for c in curves], axis=0)
            rows += [(it, train[it], val[it], n_s) for it in range(train.size)]
            gaps.append((n_s, train[-1], val[-1], val[-1] - train[-1], int(np.argmin(val))))
            log(f"N_s={n_s}: final train {train[-1]:.5f} valid {val[-1]:.5f} argmin(valid) {np.argmin(val)}")
    with open(out / "overfit_curves.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "train_mean", "valid_mean", "N_s"])
        w.writerows([it, repr(float(t)), repr(float(v)), n] for it, t, v, n in rows)
    with open(out / "overfit_gaps.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N_s", "train_final", "valid_final", "gap", "valid_argmin"])
        w.writerows([n, repr(float(t)), repr(float(v)), repr(float(g)), a] for n, t, v, g, a in gaps)
    _write_manifest(out, "overfit", cfg.to_dict())
    return out


def read_overfit_curves(path) -> dict[int, dict[str, np.ndarray]]:
    curves: dict[int, dict[str, list]] = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            c = curves.setdefault(int(row["N_s"]), {"train": [], "valid": []})
            c["train"].append(float(row["train_mean"]))
            c["valid"].append(float(row["valid_mean"]))
    return {n: {k: np.array(v) for k, v in c.items()} for n, c in curves.items()}


# --- manifests -------------------------------------------------------------

def _artifact_files(out: Path) -> list[Path]:
    return sorted(p for p in out.iterdir() if p.suffix in (".csv", ".jsonl", ".json") and p.name != "manifest.json")


def _write_manifest(out: Path, kind: str, config: dict) -> None:
    manifest = {
        "kind": kind,
        "version": __version__,
        "config": config,
        "kde": {"kernel": "gaussian", "bandwidth": "silverman", "points": KDE_POINTS},
        "artifacts": {p.name: _sha256(p) for p in _artifact_files(out)},
    }
    _write_json(manifest, out / "manifest.json")


def rerun(manifest_path, output_dir=None, threads: int = 1,
          log: Callable[[str], None] | None = None) -> tuple[Path, list[str]]:
    """Re-execute a manifest into ``output_dir``; returns the directory and the artifacts whose bytes differ."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    if output_dir is None:
        output_dir = manifest_path.parent.with_name(manifest_path.parent.name + "-rerun")
    output_dir = str(output_dir)
    if manifest["kind"] == "task":
        out = run_task(ExperimentConfig.from_dict(manifest["config"], output_dir), threads, log)
    elif manifest["kind"] == "overfit":
        out = run_overfitting_study(OverfitConfig.from_dict(manifest["config"], output_dir), threads, log)
    else:
        raise ValueError(f"unknown manifest kind {manifest['kind']!r}")
    fresh = {p.name: _sha256(p) for p in _artifact_files(out)}
    expected = manifest["artifacts"]
    diff = sorted(name for name in set(expected) | set(fresh) if expected.get(name) != fresh.get(name))
    return out, diff
