"""``ctxgap`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import INTERFACE_VERSION, __version__
from .diagnostics import SUITE, run_suite
from .environments import EnvSpec, make_env, write_csv
from .errors import ConfigError, CtxGapError, DataParseError
from .harness import (
    budget_sweep,
    config_from_dict,
    config_to_dict,
    holdout_split,
    load_config,
    policy_config,
    replay_cell,
    tune_config,
)

log = logging.getLogger("ctxgap")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _global_flags(parser, default):
    parser.add_argument("--seed", type=int, default=default, help="base seed (overrides the config)")
    parser.add_argument("--jobs", type=int, default=default, help="worker processes (overrides the config)")
    parser.add_argument("--quiet", "-q", action="store_true", default=default, help="only print errors")


def _build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the verb; the copy on each
    # subcommand must not reset a value given before it
    common = _Parser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)

    p = _Parser(prog="ctxgap", description="Kernel contextual bandits: sweeps, tuning, diagnostics.")
    _global_flags(p, None)
    p.set_defaults(quiet=False)
    p.add_argument("--version", action="version",
                   version=f"ctxgap {__version__} (interface {INTERFACE_VERSION})")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def with_config(name, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.add_argument("--config", "-c", required=True, help="JSON experiment config")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry (dotted keys)")
        sp.add_argument("--output", "-o", help="output directory (overrides the config)")
        return sp

    sp = with_config("sweep", "run a budget sweep and write CSVs and figures")
    sp.add_argument("--no-tune", action="store_true", help="skip tuning even if configured")
    sp.add_argument("--no-plots", action="store_true", help="write CSVs only")

    with_config("tune", "grid-search policy parameters on the hold-out split")

    sp = sub.add_parser("diagnose", help="run empirical checks of the theory", parents=[common])
    sp.add_argument("names", nargs="+", choices=[*SUITE, "all"], metavar="NAME",
                    help=f"one or more of {', '.join(SUITE)} or all")
    sp.add_argument("--trials", type=int, help="Monte Carlo trials (runs for width)")
    sp.add_argument("--beta", type=float, help="confidence parameter for coverage")
    sp.add_argument("--delta", type=float, help="failure probability for eigen and width")
    sp.add_argument("--output", "-o", default="diagnostics", help="report directory")

    sp = sub.add_parser("replay", help="re-run one sweep cell from its manifest", parents=[common])
    sp.add_argument("--run", required=True, help="sweep output directory")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--replication", type=int, required=True)

    sp = sub.add_parser("gen-data", help="write a CSV dataset from an environment", parents=[common])
    sp.add_argument("--env", required=True, help="environment kind, or a JSON object of EnvSpec fields")
    sp.add_argument("--steps", "-n", type=int, required=True)
    sp.add_argument("--arms", type=int)
    sp.add_argument("--no-means", action="store_true", help="omit the true-mean columns")
    sp.add_argument("--output", "-o", required=True, help="CSV path")
    return p


def _say(args, msg):
    if not args.quiet:
        print(msg)


def _load(args):
    config, raw = load_config(args.config, args.overrides)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if getattr(args, "output", None):
        changes["output"] = args.output
    return (replace(config, **changes) if changes else config), raw


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _cmd_sweep(args):
    config, _ = _load(args)
    env = make_env(config.env)
    tuning = None
    if config.tune is not None and not args.no_tune:
        config, tuning = tune_config(config, env)
        env = holdout_split(env, config.tune.holdout_fraction)[1]
        _say(args, "tuned: " + ", ".join(f"{k}={v['params']}" for k, v in tuning.items()))
    reports = budget_sweep(config, env)
    out = Path(config.output)
    manifest = {
        "version": __version__,
        "config": config_to_dict(config),
        "tuning": tuning,
        "max_budget": max(config.budgets),
        "cells": len(reports),
        "failed": sum(r.failed for r in reports),
    }
    _write_json(out / MANIFEST, manifest)
    figures = []
    if config.plots and not args.no_plots:
        from .plotting import render_sweep

        figures = render_sweep(reports, out)
    _say(args, f"wrote {len(reports)} rows to {out / 'regret.csv'}")
    for f in figures:
        _say(args, f"wrote {f}")
    return EXIT_RUNTIME if manifest["failed"] == len(reports) else EXIT_OK


def _cmd_tune(args):
    config, _ = _load(args)
    tuned, results = tune_config(config)
    out = _write_json(Path(config.output) / "tuned.json",
                      {"policies": tuned.policies, "results": results})
    for kind, res in results.items():
        _say(args, f"{kind}: {res['params']} (hold-out regret {res['score']:.4g})")
    _say(args, f"wrote {out}")
    return EXIT_OK


def _cmd_diagnose(args):
    overrides = {"trials": args.trials, "runs": args.trials, "beta": args.beta, "delta": args.delta}
    seed = args.seed if args.seed is not None else 0
    reports = run_suite(args.names, seed=seed, **overrides)
    out = Path(args.output)
    for rep in reports:
        _write_json(out / f"{rep.name}.json", rep.to_dict(details=True))
        status = "PASS" if rep.passed else "FAIL"
        _say(args, f"{rep.name}: {status} rate={rep.violation_rate:.4g} "
                   f"(limit {rep.nominal_rate + rep.slack:.4g}, n={rep.trials})")
    return EXIT_OK


def _cmd_replay(args):
    run = Path(args.run)
    try:
        manifest = json.loads((run / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from None
    config = config_from_dict({k: v for k, v in manifest["config"].items() if v is not None})
    if args.policy not in config.policies:
        raise ConfigError(f"policy {args.policy!r} not in this run")
    if args.budget not in config.budgets:
        raise ConfigError(f"budget {args.budget} not in this run")
    if not 0 <= args.replication < config.replications:
        raise ConfigError(f"replication must lie in [0, {config.replications})")
    env = make_env(config.env)
    if manifest.get("tuning") and config.tune is not None:
        env = holdout_split(env, config.tune.holdout_fraction)[1]
    cfg = policy_config(env.arms, config.policies[args.policy])
    rep = replay_cell(args.policy, cfg, env, args.budget, manifest["max_budget"],
                      config.eval_size, config.seed, args.replication)
    line = {"policy": rep.policy, "budget": rep.budget, "replication": rep.replication,
            "avg_regret": repr(rep.avg_regret), "worst_regret": repr(rep.worst_regret)}
    print(json.dumps(line))
    return EXIT_OK


def _cmd_gen_data(args):
    try:
        fields = json.loads(args.env) if args.env.lstrip().startswith("{") else {"kind": args.env}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--env is not valid JSON: {exc}") from None
    if args.arms is not None:
        fields["arms"] = args.arms
    if args.seed is not None:
        fields["seed"] = args.seed
    try:
        spec = EnvSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"env: {exc}") from None
    env = make_env(spec)
    batch = env.generate(args.steps, spec.seed)
    write_csv(args.output, batch.contexts, batch.rewards, None if args.no_means else batch.means)
    _say(args, f"wrote {args.steps} rows ({spec.kind}, A={env.arms}) to {args.output}")
    return EXIT_OK


COMMANDS = {
    "sweep": _cmd_sweep,
    "tune": _cmd_tune,
    "diagnose": _cmd_diagnose,
    "replay": _cmd_replay,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ctxgap: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, DataParseError) as exc:
        print(f"ctxgap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CtxGapError, ArithmeticError, LookupError, ValueError, OSError, RuntimeError) as exc:
        print(f"ctxgap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
