"""Benchmark harness: run matrices of (problem, method, noise, seed),
persist per-run CSV traces and a JSON summary, and build comparison
profiles between two method families.

Determinism contract: given identical configs, reruns produce byte-identical
CSVs and summaries, independent of worker-pool size (each run owns its own
seeded oracle; files and summaries are keyed and emitted in sorted order).
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .linesearch import LineSearchParams
from .noise import NoiseSpec
from .problems import Problem, UnknownProblemError, registry_lookup
from .solver import RunTrace, SolverConfig, Variant, run

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "ProfilePoint",
    "run_experiment",
    "morales_profile",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_HEADER",
]

TRACE_HEADER = (
    "k,phi_true,gap,grad_norm_true,f_noisy,alpha,beta,split_active,"
    "cum_f_evals,cum_g_evals,kappa_H,lambda_min_B,lambda_max_B,pair_action"
)

THREADS_ENV_VAR = "QN_NOISE_THREADS"

# Gaps at or below zero are clamped to this before log-ratio profiles.
GAP_FLOOR = 1e-16


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


@dataclass(frozen=True)
class ProfilePoint:
    problem: str
    value: float


@dataclass
class ExperimentConfig:
    """A (cartesian) matrix of runs plus shared solver settings."""

    problems: list[str] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)
    xi_f: list[float] = field(default_factory=lambda: [0.0])
    xi_g: list[float] = field(default_factory=lambda: [0.0])
    omega: list[float] = field(default_factory=lambda: [1.0])
    schedule: str = "constant"
    n_noise: int | None = None
    noise_phase: str = "noisy"
    seeds: list[int] = field(default_factory=list)
    max_iters: int = 1000
    g_eval_budget: int | None = None
    c1: float = 1e-4
    c2: float = 0.9
    c3: float = 0.5
    n_split: int = 30
    max_ls_iters: int = 60
    max_lengthening: int = 30
    memory: int = 10
    history: int = 10
    diagnostics: bool = False
    threshold_termination: bool = False
    out: str = "qn_noise_out"

    def validate(self) -> None:
        if not self.problems:
            raise ConfigError("no problems given")
        if not self.methods:
            raise ConfigError("no methods given")
        if not self.seeds:
            raise ConfigError("no seeds given")
        for name in self.problems:
            try:
                registry_lookup(name)
            except UnknownProblemError as exc:
                raise ConfigError(str(exc)) from exc
        for method in self.methods:
            try:
                Variant(method)
            except ValueError as exc:
                known = ", ".join(v.value for v in Variant)
                raise ConfigError(
                    f"unknown method {method!r}; choose from: {known}"
                ) from exc
        if self.noise_phase not in ("noisy", "clean"):
            raise ConfigError("noise-phase must be 'noisy' or 'clean'")
        try:
            self._line_search_params()
            NoiseSpec(
                xi_f=self.xi_f[0],
                xi_g=self.xi_g[0],
                schedule=self.schedule,
                n_noise=self.n_noise,
                start_noisy=self.noise_phase == "noisy",
                omega=self.omega[0],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _line_search_params(self) -> LineSearchParams:
        return LineSearchParams(
            c1=self.c1,
            c2=self.c2,
            c3=self.c3,
            n_split=self.n_split,
            max_ls_iters=self.max_ls_iters,
            max_lengthening=self.max_lengthening,
            history=self.history,
        )

    def solver_config(self, method: str) -> SolverConfig:
        return SolverConfig(
            variant=Variant(method),
            memory=self.memory,
            ls=self._line_search_params(),
            max_iters=self.max_iters,
            g_eval_budget=self.g_eval_budget,
            threshold_termination=self.threshold_termination,
            track_condition=self.diagnostics,
            track_eigenvalues=self.diagnostics,
        )

    def run_matrix(self) -> list[dict]:
        """All run descriptors in deterministic (sorted-key) order."""
        cells = []
        for problem in self.problems:
            for method in self.methods:
                for xi_f in self.xi_f:
                    for xi_g in self.xi_g:
                        for omega in self.omega:
                            for seed in self.seeds:
                                cells.append(
                                    {
                                        "problem": problem,
                                        "method": method,
                                        "xi_f": xi_f,
                                        "xi_g": xi_g,
                                        "omega": omega,
                                        "seed": seed,
                                    }
                                )
        cells.sort(key=_run_key)
        return cells


def _run_key(cell: dict) -> str:
    return (
        f"{cell['problem']}_{cell['method']}_xif{cell['xi_f']:g}"
        f"_xig{cell['xi_g']:g}_om{cell['omega']:g}_seed{cell['seed']}"
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def write_trace_csv(path: str | Path, trace: RunTrace) -> None:
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(
            ",".join(
                [
                    str(r.k),
                    _fmt(r.phi_true),
                    _fmt(r.gap),
                    _fmt(r.grad_norm_true),
                    _fmt(r.f_noisy),
                    _fmt(r.alpha),
                    _fmt(r.beta),
                    str(int(r.split_active)),
                    str(r.cum_f_evals),
                    str(r.cum_g_evals),
                    _fmt(r.kappa_H),
                    _fmt(r.lambda_min_B),
                    _fmt(r.lambda_max_B),
                    r.pair_action,
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path: str | Path) -> list[dict]:
    """Parse a trace CSV back into row dicts (None for empty fields)."""
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row: dict = {}
            for key, text in raw.items():
                if key in ("k", "cum_f_evals", "cum_g_evals"):
                    row[key] = int(text)
                elif key == "split_active":
                    row[key] = bool(int(text))
                elif key == "pair_action":
                    row[key] = text
                else:
                    row[key] = float(text) if text != "" else None
            rows.append(row)
    return rows


def _evals_to_threshold(trace: RunTrace, eps_f: float, eps_g: float) -> int | None:
    """Cumulative gradient evaluations when the run first reached either
    noise-level threshold, or None if it never did.

    Row k's counters include iteration k's own work, so the cost of
    *reaching* that iterate is the previous row's counter (the run's single
    warm-up gradient evaluation for k = 0).
    """
    for i, rec in enumerate(trace.records):
        if (eps_f > 0.0 and rec.gap <= eps_f) or rec.grad_norm_true <= eps_g:
            return trace.records[i - 1].cum_g_evals if i > 0 else 1
    return None


def _execute_cell(cell: dict, config: ExperimentConfig, out_dir: Path) -> dict:
    problem = registry_lookup(cell["problem"])
    spec = NoiseSpec(
        xi_f=cell["xi_f"],
        xi_g=cell["xi_g"],
        schedule=config.schedule,
        n_noise=config.n_noise,
        start_noisy=config.noise_phase == "noisy",
        seed=cell["seed"],
        omega=cell["omega"],
    )
    solver_config = config.solver_config(cell["method"])
    trace = run(problem, spec, solver_config)
    key = _run_key(cell)
    write_trace_csv(out_dir / f"{key}.csv", trace)
    # Threshold bookkeeping measures against the actual noise levels, not
    # the omega-scaled estimate handed to the methods.
    eps_f = spec.xi_f
    eps_g = math.sqrt(problem.dim) * spec.xi_g
    return {
        "key": key,
        **cell,
        "final_phi_true": trace.final_phi_true,
        "final_gap": trace.final_gap,
        "final_grad_norm_true": trace.final_grad_norm_true,
        "iterations": len(trace.records),
        "first_split_iteration": trace.first_split_iteration,
        "termination_reason": trace.termination_reason,
        "f_evals": trace.f_evals,
        "g_evals": trace.g_evals,
        "evals_to_threshold": _evals_to_threshold(trace, eps_f, eps_g),
    }


def _worker_count() -> int:
    value = os.environ.get(THREADS_ENV_VAR)
    if value is not None:
        try:
            count = int(value)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {value!r}") from exc
        if count < 1:
            raise ConfigError(f"{THREADS_ENV_VAR} must be >= 1")
        return count
    return min(4, os.cpu_count() or 1)


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute every run in the matrix; write CSVs and summary.json.

    Returns the summary dict.  Individual run failures are captured per-run
    (key -> error) rather than aborting the sweep.
    """
    config.validate()
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = config.run_matrix()
    results: dict[str, dict] = {}
    errors: dict[str, str] = {}

    def task(cell: dict) -> tuple[str, dict | None, str | None]:
        key = _run_key(cell)
        try:
            return key, _execute_cell(cell, config, out_dir), None
        except Exception as exc:  # noqa: BLE001 - reported per run
            return key, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        for key, entry, error in pool.map(task, cells):
            if error is None:
                results[key] = entry
            else:
                errors[key] = error

    medians = _group_medians(results)
    summary = {
        "config": {
            "problems": config.problems,
            "methods": config.methods,
            "xi_f": config.xi_f,
            "xi_g": config.xi_g,
            "omega": config.omega,
            "schedule": config.schedule,
            "n_noise": config.n_noise,
            "noise_phase": config.noise_phase,
            "seeds": config.seeds,
            "max_iters": config.max_iters,
            "g_eval_budget": config.g_eval_budget,
        },
        "runs": {key: results[key] for key in sorted(results)},
        "medians": medians,
        "errors": {key: errors[key] for key in sorted(errors)},
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return 0.5 * (ordered[mid - 1] + ordered[mid])


def _group_medians(results: dict[str, dict]) -> dict[str, dict]:
    groups: dict[str, list[dict]] = {}
    for entry in results.values():
        gkey = (
            f"{entry['problem']}_{entry['method']}_xif{entry['xi_f']:g}"
            f"_xig{entry['xi_g']:g}_om{entry['omega']:g}"
        )
        groups.setdefault(gkey, []).append(entry)
    medians = {}
    for gkey in sorted(groups):
        entries = groups[gkey]
        medians[gkey] = {
            "seeds": sorted(e["seed"] for e in entries),
            "final_gap_median": _median([e["final_gap"] for e in entries]),
            "final_grad_norm_median": _median(
                [e["final_grad_norm_true"] for e in entries]
            ),
            "g_evals_median": _median([float(e["g_evals"]) for e in entries]),
        }
    return medians


def _clamped_gap(entry: dict) -> float:
    gap = entry["final_gap"]
    if gap <= 0.0:
        label = entry.get("key", f"{entry['problem']}/seed{entry['seed']}")
        warnings.warn(
            f"run {label} has non-positive gap {gap:g}; clamped to {GAP_FLOOR:g}",
            stacklevel=3,
        )
        return GAP_FLOOR
    return gap


def morales_profile(
    runs_new: list[dict], runs_old: list[dict], mode: str = "final-gap"
) -> list[ProfilePoint]:
    """Per-problem log2 ratios comparing two run sets, sorted ascending.

    mode "final-gap" compares final optimality gaps; "evals-to-threshold"
    compares gradient evaluations needed to reach the noise-level stopping
    test (runs that never reached it count at their consumed evaluations).
    Ratios are computed per matching seed and averaged per problem; negative
    values favor the "new" runs.
    """
    if mode not in ("final-gap", "evals-to-threshold"):
        raise ValueError(f"unknown profile mode {mode!r}")

    def index(runs: list[dict]) -> dict[str, dict[int, dict]]:
        table: dict[str, dict[int, dict]] = {}
        for entry in runs:
            table.setdefault(entry["problem"], {})[entry["seed"]] = entry
        return table

    new_table, old_table = index(runs_new), index(runs_old)
    if set(new_table) != set(old_table):
        raise ConfigError(
            f"problem sets differ: {sorted(set(new_table) ^ set(old_table))}"
        )
    points = []
    for problem in sorted(new_table):
        new_seeds, old_seeds = new_table[problem], old_table[problem]
        if set(new_seeds) != set(old_seeds):
            raise ConfigError(f"seed sets differ for {problem}")
        ratios = []
        for seed in sorted(new_seeds):
            if mode == "final-gap":
                value = math.log2(
                    _clamped_gap(new_seeds[seed]) / _clamped_gap(old_seeds[seed])
                )
            else:
                new_evals = new_seeds[seed]["evals_to_threshold"]
                old_evals = old_seeds[seed]["evals_to_threshold"]
                if new_evals is None:
                    new_evals = new_seeds[seed]["g_evals"]
                if old_evals is None:
                    old_evals = old_seeds[seed]["g_evals"]
                value = math.log2(new_evals / old_evals)
            ratios.append(value)
        points.append(ProfilePoint(problem, sum(ratios) / len(ratios)))
    points.sort(key=lambda pt: pt.value)
    return points
