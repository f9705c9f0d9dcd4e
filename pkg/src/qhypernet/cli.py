"""Command-line entry point: ``qhn run|overfit|oracle|spectrum|dataset|rerun``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import datasets, experiments, fourier, oracle
from .experiments import ExperimentConfig, OverfitConfig
from .optimizer import LbfgsConfig


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise SystemExit(f"{path}: config file must hold a JSON object")
    return data


def _optimizer_from(base: dict, args) -> LbfgsConfig:
    opts = dict(base)
    for key in ("max_iterations", "gtol", "memory"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if getattr(args, "gradient", None):
        opts["gradient"] = args.gradient
    return LbfgsConfig(**opts)


def _experiment_config(args) -> ExperimentConfig:
    """Defaults for the task, then the config file, then explicit flags."""
    file_cfg = _load_config_file(args.config)
    task = args.task or file_cfg.get("task", "gaussian-act")
    merged = {**ExperimentConfig().to_dict(), **experiments.TASK_DEFAULTS.get(task, {}),
              "dataset": experiments._default_dataset(task), **file_cfg, "task": task}
    if args.ansatze is not None:
        merged["ansatze"] = list(args.ansatze)
    for key in ("n_optim", "eps", "seed", "top_k"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if "dataset" in file_cfg:
        merged["dataset"] = {**experiments._default_dataset(task), **file_cfg["dataset"]}
    if getattr(args, "n_samples", None) is not None:
        merged["dataset"] = {**merged["dataset"], "n_samples": args.n_samples}
    if getattr(args, "data_seed", None) is not None:
        merged["dataset"] = {**merged["dataset"], "seed": args.data_seed}
    merged["optimizer"] = _optimizer_from(merged.get("optimizer", {}), args)
    merged["ansatze"] = tuple(merged["ansatze"])
    out = getattr(args, "output_dir", None) or file_cfg.get("output_dir")
    merged.pop("output_dir", None)
    return ExperimentConfig(**merged, output_dir=out)


def _log(quiet: bool):
    return (lambda msg: None) if quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))


def cmd_run(args) -> int:
    out = experiments.run_task(_experiment_config(args), args.threads, _log(args.quiet))
    for label, p in experiments.read_success(out / "success.csv").items():
        print(f"{label}\t{p:.4f}")
    print(f"artifacts: {out}")
    return 0


def cmd_overfit(args) -> int:
    file_cfg = _load_config_file(args.config)
    base = OverfitConfig().to_dict()
    merged = {**base, **file_cfg}
    for key in ("realizations", "iterations", "layers", "validation_size", "closer", "seed"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val
    if args.sizes is not None:
        merged["sizes"] = list(args.sizes)
    merged["optimizer"] = asdict(_optimizer_from(merged.get("optimizer", {}), args))
    out = args.output_dir or file_cfg.get("output_dir")
    cfg = OverfitConfig.from_dict(merged, out)
    out = experiments.run_overfitting_study(cfg, args.threads, _log(args.quiet))
    print(f"artifacts: {out}")
    return 0


def _task_table(args):
    cfg = _experiment_config(args)
    spec = cfg.binn_spec()
    data = experiments.load_dataset(cfg.dataset)
    return cfg, spec, oracle.build_cost_table(spec, data)


def cmd_oracle(args) -> int:
    cfg, spec, table = _task_table(args)
    report = oracle.find_optimum(table, min(cfg.top_k, len(table)), spec)
    text = json.dumps(report.to_dict(spec), indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_spectrum(args) -> int:
    _, _, table = _task_table(args)
    w = fourier.weight_spectrum(fourier.walsh_transform(table))
    if args.output:
        fourier.write_weight_csv(w, args.output)
    else:
        print("S,W")
        for s, v in enumerate(w):
            print(f"{s},{float(v)!r}")
    return 0


def cmd_dataset(args) -> int:
    cfg = _experiment_config(args)
    data = experiments.load_dataset(cfg.dataset)
    if args.output:
        datasets.write_csv(data, args.output)
    else:
        datasets.write_csv(data, "/dev/stdout")
    return 0


def cmd_rerun(args) -> int:
    out, diff = experiments.rerun(args.manifest, args.output_dir, args.threads, _log(args.quiet))
    if diff:
        print("differs: " + ", ".join(diff))
        return 1
    print(f"identical: {out}")
    return 0


def _task_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=experiments.TASKS)
    p.add_argument("--config", help="JSON file whose keys mirror the run flags")
    p.add_argument("--seed", type=int, help="base seed; restart r uses seed + r")
    p.add_argument("--n-samples", type=int, help="Gaussian training-set size")
    p.add_argument("--data-seed", type=int, help="dataset sampling seed")
    p.add_argument("--top-k", type=int)
    p.add_argument("--ansatze", type=_ints, help="comma-separated layer counts, 0 = product state")
    p.add_argument("--n-optim", type=int)
    p.add_argument("--eps", type=float)


def _optimizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--gtol", type=float)
    p.add_argument("--memory", type=int)
    p.add_argument("--gradient", choices=("adjoint", "parameter_shift"))


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", help=f"artifact directory (default ${experiments.OUTPUT_ENV} or ./qhn-output)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhn", description="Quantum hypernetwork experiments for binary neural networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="depth study: oracle, restart sweeps, statistics")
    _task_flags(p)
    _optimizer_flags(p)
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("overfit", help="train/validation curves for small training sets")
    p.add_argument("--config")
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--realizations", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--validation-size", type=int)
    p.add_argument("--closer", type=float, help="blue means move to this fraction of their distance")
    p.add_argument("--seed", type=int)
    _optimizer_flags(p)
    _run_flags(p)
    p.set_defaults(func=cmd_overfit)

    for name, func, text in (("oracle", cmd_oracle, "brute-force optimum and lowest costs"),
                             ("spectrum", cmd_spectrum, "Walsh weight spectrum W(S)"),
                             ("dataset", cmd_dataset, "export the task's training data")):
        p = sub.add_parser(name, help=text)
        _task_flags(p)
        p.add_argument("--output", "-o")
        p.set_defaults(func=func)

    p = sub.add_parser("rerun", help="re-execute a manifest and compare artifacts byte for byte")
    p.add_argument("manifest")
    _run_flags(p)
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, experiments.StageError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
