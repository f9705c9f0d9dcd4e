"""LBFGS minimization of the circuit objective and the multi-restart harness."""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from typing import Callable, Iterable

import numpy as np

from . import objective
from .objective import ObjectiveContext

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
LINE_SEARCH_FAILED = "line_search_failed"
NON_FINITE = "non_finite"


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    max_iterations: int = 500
    gtol: float = 1e-8
    max_line_evals: int = 30
    record_history: bool = False
    gradient: str = "adjoint"  # or "parameter_shift"

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not (0 < self.c1 < self.c2 < 1):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.gtol <= 0 or self.max_iterations < 0:
            raise ValueError("tolerances must be positive")
        if self.gradient not in ("adjoint", "parameter_shift"):
            raise ValueError(f"unknown gradient method {self.gradient!r}")


@dataclass
class RunRecord:
    seed: int | None
    theta0: list[float]
    theta: list[float]
    energy0: float
    energy: float
    iterations: int
    evaluations: int
    reason: str
    trace: list[float] | None = None
    theta_trace: list[list[float]] | None = field(default=None, repr=False)
    ansatz: str = ""

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("theta_trace")
        return json.dumps(d, allow_nan=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        return cls(**json.loads(line))


FG = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def _finite(f, g) -> bool:
    return math.isfinite(f) and bool(np.all(np.isfinite(g)))


def _cubic_step(a, fa, da, b, fb, db):
    """Minimizer of the cubic through two points with slopes, or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0:
        return None
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (db + d2 - d1) / denom
    return t if math.isfinite(t) else None


class _LineSearchError(Exception):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


def strong_wolfe(fg: FG, x, f0, g0, d, step, c1=1e-4, c2=0.9, max_evals=30):
    """Step length satisfying the strong Wolfe conditions along ``d``.

    Returns ``(step, f, g, evaluations)``. Raises ``_LineSearchError`` when no
    acceptable step is found within ``max_evals`` evaluations.
    """
    dg0 = float(g0 @ d)
    if dg0 >= 0:
        raise _LineSearchError(LINE_SEARCH_FAILED)
    evals = 0

    def probe(a):
        nonlocal evals
        evals += 1
        f, g = fg(x + a * d)
        if not _finite(f, g):
            raise _LineSearchError(NON_FINITE)
        return f, g, float(g @ d)

    def zoom(lo, f_lo, dg_lo, hi, f_hi, dg_hi):
        while evals < max_evals:
            width = hi - lo
            a = _cubic_step(lo, f_lo, dg_lo, hi, f_hi, dg_hi)
            left, right = min(lo, hi), max(lo, hi)
            if a is None or not (left + 0.1 * abs(width) <= a <= right - 0.1 * abs(width)):
                a = 0.5 * (lo + hi)
            if abs(width) * np.max(np.abs(d)) < 1e-14:
                break
            f, g, dg = probe(a)
            if f > f0 + c1 * a * dg0 or f >= f_lo:
                hi, f_hi, dg_hi = a, f, dg
            else:
                if abs(dg) <= -c2 * dg0:
                    return a, f, g
                if dg * (hi - lo) >= 0:
                    hi, f_hi, dg_hi = lo, f_lo, dg_lo
                lo, f_lo, dg_lo = a, f, dg
        raise _LineSearchError(LINE_SEARCH_FAILED)

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = step
    while evals < max_evals:
        f, g, dg = probe(a)
        if f > f0 + c1 * a * dg0 or (a_prev > 0 and f >= f_prev):
            a, f, g = zoom(a_prev, f_prev, dg_prev, a, f, dg)
            return a, f, g, evals
        if abs(dg) <= -c2 * dg0:
            return a, f, g, evals
        if dg >= 0:
            a, f, g = zoom(a, f, dg, a_prev, f_prev, dg_prev)
            return a, f, g, evals
        a_prev, f_prev, dg_prev = a, f, dg
        a = 2.0 * a
    raise _LineSearchError(LINE_SEARCH_FAILED)


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs(fg: FG, x0, cfg: LbfgsConfig = LbfgsConfig()):
    """Minimize ``fg``; returns ``(x, f, iterations, evaluations, reason, f_trace, x_trace)``.

    Stops when the max-abs gradient drops to ``cfg.gtol``, after
    ``cfg.max_iterations`` accepted steps, or when the line search fails
    along both the quasi-Newton and the steepest-descent direction.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    evals = 1
    f_trace = [f] if cfg.record_history else None
    x_trace = [x.copy()] if cfg.record_history else None
    if not _finite(f, g):
        return x, f, 0, evals, NON_FINITE, f_trace, x_trace
    pairs: deque = deque(maxlen=cfg.memory)
    it = 0
    reason = MAX_ITERATIONS
    while it < cfg.max_iterations:
        if np.max(np.abs(g)) <= cfg.gtol:
            reason = CONVERGED
            break
        d = _two_loop(g, pairs)
        if not pairs or g @ d >= 0:
            pairs.clear()
            d = -g
        step = min(1.0, 1.0 / np.linalg.norm(g)) if not pairs else 1.0
        try:
            a, f_new, g_new, n = strong_wolfe(fg, x, f, g, d, step, cfg.c1, cfg.c2, cfg.max_line_evals)
        except _LineSearchError as err:
            evals += cfg.max_line_evals if err.reason == LINE_SEARCH_FAILED else 1
            if err.reason == NON_FINITE or not pairs:
                reason = err.reason
                break
            # quasi-Newton direction failed: retry once along -g with fresh memory
            pairs.clear()
            continue
        evals += n
        s = a * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x = x + s
        f, g = f_new, g_new
        it += 1
        if cfg.record_history:
            f_trace.append(f)
            x_trace.append(x.copy())
    else:
        if np.max(np.abs(g)) <= cfg.gtol:
            reason = CONVERGED
    return x, f, it, evals, reason, f_trace, x_trace


def _objective_fg(ctx: ObjectiveContext, cfg: LbfgsConfig) -> FG:
    if cfg.gradient == "parameter_shift":
        return lambda th: (objective.energy(ctx, th), objective.gradient_parameter_shift(ctx, th))
    return lambda th: objective.energy_and_gradient(ctx, th)


def minimize(ctx: ObjectiveContext, theta0, cfg: LbfgsConfig = LbfgsConfig(), seed: int | None = None) -> RunRecord:
    theta0 = ctx.spec.check_params(theta0)
    if not np.all(np.isfinite(theta0)):
        raise ValueError("initial parameters must be finite")
    x, f, it, evals, reason, f_trace, x_trace = lbfgs(_objective_fg(ctx, cfg), theta0, cfg)
    e0 = f_trace[0] if f_trace else objective.energy(ctx, theta0)
    return RunRecord(
        seed=seed,
        theta0=theta0.tolist(),
        theta=x.tolist(),
        energy0=float(e0),
        energy=float(f),
        iterations=it,
        evaluations=evals,
        reason=reason,
        trace=[float(v) for v in f_trace] if f_trace else None,
        theta_trace=[t.tolist() for t in x_trace] if x_trace else None,
        ansatz=ctx.spec.label,
    )


def initial_parameters(n_params: int, seed: int) -> np.ndarray:
    """Angles drawn i.i.d. from U(0, 2*pi)."""
    return np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, n_params)


def _run_one(args):
    ctx, seed, cfg = args
    return minimize(ctx, initial_parameters(ctx.spec.n_params, seed), cfg, seed=seed)


def restart_sweep(ctx: ObjectiveContext, n_restarts: int, base_seed: int = 0,
                  cfg: LbfgsConfig = LbfgsConfig(), threads: int = 1,
                  progress: Callable[[int, RunRecord], None] | None = None) -> list[RunRecord]:
    """Run ``n_restarts`` independent minimizations; run ``r`` uses seed ``base_seed + r``."""
    if n_restarts < 1:
        raise ValueError("n_restarts must be >= 1")
    jobs = [(ctx, base_seed + r, cfg) for r in range(n_restarts)]
    records: list[RunRecord] = []
    if threads <= 1:
        for r, job in enumerate(jobs):
            rec = _run_one(job)
            records.append(rec)
            if progress:
                progress(r, rec)
        return records
    with ProcessPoolExecutor(max_workers=threads, mp_context=get_context("fork")) as pool:
        for r, rec in enumerate(pool.map(_run_one, jobs)):
            records.append(rec)
            if progress:
                progress(r, rec)
    return records


def success_probability(records: Iterable[RunRecord], c_star: float, eps: float) -> float:
    """Fraction of runs whose final energy is within ``eps`` above ``c_star``."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return sum((r.energy - c_star) < eps for r in records) / len(records)


def write_jsonl(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_jsonl(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord.from_json(line) for line in fh if line.strip()]


def write_summary_csv(records: Iterable[RunRecord], path, c_star: float, eps: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "ansatz", "final_energy", "iterations", "success"])
        for r in records:
            w.writerow([r.seed, r.ansatz, repr(r.energy), r.iterations, int((r.energy - c_star) < eps)])
