"""Command-line interface.

Subcommands:
  run      execute a single (problem, method, noise, seed) and write its CSV
  sweep    execute a full experiment matrix
  profile  compare two methods from a sweep's summary.json

Every experiment key can come from a flat ``key = value`` config file
(``--config``); explicit CLI flags override file values, which override
defaults.  Exit codes: 0 all runs completed, 3 some runs failed, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .bench import ConfigError, ExperimentConfig, morales_profile, run_experiment
from .solver import Variant

__all__ = ["main", "build_parser", "load_config_file"]

_LIST_FLOAT_KEYS = ("xi_f", "xi_g", "omega")
_LIST_STR_KEYS = ("problems", "methods")
_BOOL_KEYS = ("diagnostics", "threshold_termination")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# Config-file keys are the ExperimentConfig field names (hyphens allowed);
# `problem`, `method`, and `seed` are accepted as aliases for their plurals.
_KEY_ALIASES = {
    "problem": "problems",
    "method": "methods",
    "seed": "seeds",
    "history_h": "history",
}


def load_config_file(path: str | Path) -> dict:
    """Parse a flat key=value config file into ExperimentConfig kwargs."""
    valid = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, text = line.partition("=")
        key = key.strip().replace("-", "_")
        key = _KEY_ALIASES.get(key, key)
        text = text.strip()
        if key not in valid:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, text)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


def _split_names(text: str) -> list[str]:
    """Split a list on commas/whitespace, but not inside parentheses, so
    inline quadratic specs like QUAD(50,1,100) survive intact."""
    parts: list[str] = []
    buf: list[str] = []
    depth = 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        if depth == 0 and (ch == "," or ch.isspace()):
            if buf:
                parts.append("".join(buf))
                buf = []
            continue
        buf.append(ch)
    if buf:
        parts.append("".join(buf))
    return parts


def _convert(key: str, text: str):
    if key in _LIST_STR_KEYS:
        return _split_names(text)
    if key in _LIST_FLOAT_KEYS:
        return [float(part) for part in _split_names(text)]
    if key == "seeds":
        return [int(part) for part in _split_names(text)]
    if key in _BOOL_KEYS:
        return _parse_bool(text)
    if key in ("schedule", "noise_phase", "out"):
        return text
    if key in ("c1", "c2", "c3"):
        return float(text)
    if key in ("n_noise", "g_eval_budget"):
        return None if text.lower() in ("", "none") else int(text)
    # remaining integer knobs: max_iters, n_split, max_ls_iters,
    # max_lengthening, memory, history
    return int(text)


def _add_experiment_flags(parser: argparse.ArgumentParser, single: bool) -> None:
    # Defaults are all None so that "flag was given" is detectable; actual
    # defaults live on ExperimentConfig.
    if single:
        # append-mode even for the single-run command, so that a repeated
        # flag is caught by the exactly-one validation instead of silently
        # keeping the last value
        parser.add_argument("--problem", action="append", metavar="NAME",
                            help="problem name")
        parser.add_argument("--method", action="append", metavar="NAME",
                            help="solver variant")
        parser.add_argument("--xi-f", type=float, action="append", metavar="V")
        parser.add_argument("--xi-g", type=float, action="append", metavar="V")
        parser.add_argument("--omega", type=float, action="append", metavar="V")
        parser.add_argument("--seed", type=int, action="append", metavar="N")
    else:
        parser.add_argument(
            "--problem", action="append", metavar="NAME", help="repeatable"
        )
        parser.add_argument(
            "--method", action="append", metavar="NAME", help="repeatable"
        )
        parser.add_argument("--xi-f", type=float, action="append", metavar="V")
        parser.add_argument("--xi-g", type=float, action="append", metavar="V")
        parser.add_argument("--omega", type=float, action="append", metavar="V")
        parser.add_argument(
            "--seeds", type=int, nargs="+", metavar="N", help="seed list"
        )
        parser.add_argument(
            "--seed", type=int, action="append", metavar="N", help="repeatable"
        )
    parser.add_argument("--schedule", choices=("constant", "intermittent"))
    parser.add_argument("--n-noise", type=int, metavar="N")
    parser.add_argument("--noise-phase", choices=("noisy", "clean"))
    parser.add_argument("--max-iters", type=int, metavar="N")
    parser.add_argument("--g-eval-budget", type=int, metavar="N")
    parser.add_argument("--c1", type=float)
    parser.add_argument("--c2", type=float)
    parser.add_argument("--c3", type=float)
    parser.add_argument("--n-split", type=int, metavar="N")
    parser.add_argument("--max-ls-iters", type=int, metavar="N")
    parser.add_argument("--max-lengthening", type=int, metavar="N")
    parser.add_argument("--memory", type=int, metavar="N")
    parser.add_argument("--history-h", type=int, metavar="N", dest="history_h")
    parser.add_argument(
        "--diagnostics", action="store_const", const=True, default=None
    )
    parser.add_argument(
        "--threshold-termination", action="store_const", const=True, default=None
    )
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--config", metavar="FILE", help="key = value config file")


def build_parser() -> argparse.ArgumentParser:
    methods = ", ".join(v.value for v in Variant)
    parser = argparse.ArgumentParser(
        prog="qn-noise",
        description="Noise-tolerant quasi-Newton benchmark harness "
        f"(methods: {methods})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="single run, one CSV")
    _add_experiment_flags(run_p, single=True)

    sweep_p = sub.add_parser("sweep", help="full experiment matrix")
    _add_experiment_flags(sweep_p, single=False)

    prof_p = sub.add_parser("profile", help="compare two methods from a sweep")
    prof_p.add_argument("--summary", required=True, metavar="JSON")
    prof_p.add_argument("--new-method", required=True, metavar="NAME")
    prof_p.add_argument("--old-method", required=True, metavar="NAME")
    prof_p.add_argument(
        "--mode", choices=("final-gap", "evals-to-threshold"), default="final-gap"
    )
    prof_p.add_argument("--xi-f", type=float, metavar="V")
    prof_p.add_argument("--xi-g", type=float, metavar="V")
    prof_p.add_argument("--omega", type=float, metavar="V")
    prof_p.add_argument("--out", metavar="CSV", help="also write points to a CSV")
    return parser


def _collect_config(args: argparse.Namespace, single: bool) -> ExperimentConfig:
    values: dict = {}
    if args.config is not None:
        values.update(load_config_file(args.config))

    def override(key: str, value) -> None:
        if value is not None:
            values[key] = value

    if single:
        override("problems", args.problem)
        override("methods", args.method)
        override("xi_f", args.xi_f)
        override("xi_g", args.xi_g)
        override("omega", args.omega)
        override("seeds", args.seed)
    else:
        override("problems", args.problem)
        override("methods", args.method)
        override("xi_f", args.xi_f)
        override("xi_g", args.xi_g)
        override("omega", args.omega)
        seeds = list(args.seeds or []) + list(args.seed or [])
        override("seeds", seeds or None)
    override("schedule", args.schedule)
    override("n_noise", args.n_noise)
    override("noise_phase", args.noise_phase)
    override("max_iters", args.max_iters)
    override("g_eval_budget", args.g_eval_budget)
    override("c1", args.c1)
    override("c2", args.c2)
    override("c3", args.c3)
    override("n_split", args.n_split)
    override("max_ls_iters", args.max_ls_iters)
    override("max_lengthening", args.max_lengthening)
    override("memory", args.memory)
    override("history", args.history_h)
    override("diagnostics", args.diagnostics)
    override("threshold_termination", args.threshold_termination)
    override("out", args.out)
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run_or_sweep(args: argparse.Namespace, single: bool) -> int:
    config = _collect_config(args, single)
    if single:
        for key, what in (
            ("problems", "problem"),
            ("methods", "method"),
            ("seeds", "seed"),
            ("xi_f", "xi-f value"),
            ("xi_g", "xi-g value"),
            ("omega", "omega value"),
        ):
            if len(getattr(config, key)) != 1:
                raise ConfigError(f"run takes exactly one {what}")
    summary = run_experiment(config)
    runs, errors = summary["runs"], summary["errors"]
    for key in sorted(runs):
        entry = runs[key]
        print(
            f"{key}: termination={entry['termination_reason']} "
            f"iters={entry['iterations']} final_gap={entry['final_gap']:.6g} "
            f"grad_norm={entry['final_grad_norm_true']:.6g} "
            f"f_evals={entry['f_evals']} g_evals={entry['g_evals']}"
        )
    for key in sorted(errors):
        print(f"{key}: FAILED ({errors[key]})", file=sys.stderr)
    print(f"wrote {len(runs)} trace file(s) + summary.json to {config.out}")
    return 3 if errors else 0


def _matches(entry: dict, args: argparse.Namespace) -> bool:
    for attr, key in (("xi_f", "xi_f"), ("xi_g", "xi_g"), ("omega", "omega")):
        wanted = getattr(args, attr)
        if wanted is not None and entry[key] != wanted:
            return False
    return True


def _cmd_profile(args: argparse.Namespace) -> int:
    with open(args.summary) as fh:
        summary = json.load(fh)
    runs = list(summary.get("runs", {}).values())

    def select(method: str) -> list[dict]:
        chosen = [e for e in runs if e["method"] == method and _matches(e, args)]
        if not chosen:
            raise ConfigError(f"no runs for method {method!r} in {args.summary}")
        noise_keys = {(e["xi_f"], e["xi_g"], e["omega"]) for e in chosen}
        if len(noise_keys) > 1:
            raise ConfigError(
                f"method {method!r} spans several noise settings "
                f"{sorted(noise_keys)}; narrow with --xi-f/--xi-g/--omega"
            )
        return chosen

    try:
        points = morales_profile(
            select(args.new_method), select(args.old_method), mode=args.mode
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"# log2 ratio, {args.new_method} vs {args.old_method}, mode={args.mode}")
    for pt in points:
        print(f"{pt.problem} {pt.value:.6f}")
    if args.out is not None:
        lines = ["problem,value"]
        lines += [f"{pt.problem},{pt.value:.17g}" for pt in points]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run_or_sweep(args, single=True)
        if args.command == "sweep":
            return _cmd_run_or_sweep(args, single=False)
        return _cmd_profile(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
