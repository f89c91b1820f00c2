"""Command-line entry point: ``active-sysid VERB [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import lemmas
from .config import OVERRIDE_KEYS, ConfigError, ExperimentConfig, load_config
from .control import StrategySpec, noise_control_comparison
from .harness import (
    compare_strategies,
    expand_strategies,
    noise_strategies,
    rollout,
    run_experiment,
    summarize,
    summary_to_json,
    trace_to_csv,
)

VERBS = {
    "simulate": "open-loop plant rollout (uniform random controls, or zero for strategy.kind=zero); CSV",
    "identify": "closed-loop run with the configured strategy; per-replica trace CSV",
    "compare": "run every strategy in 'strategies' (default: infomax, random, zero); JSON summary",
    "noise": "noise interrogation with noise_optimal, tau_infomax and tau_zero; JSON summary",
    "validate-lemmas": "run the numerical identity suites and report measured errors",
}


def _epilog() -> str:
    lines = ["verbs:"]
    lines += [f"  {verb:<16} {text}" for verb, text in VERBS.items()]
    lines.append("")
    lines.append("override keys (--override KEY=VALUE, values parsed as JSON when possible):")
    lines += [f"  {key}" for key in OVERRIDE_KEYS]
    lines.append("")
    lines.append("environment: ACTIVE_SYSID_THREADS caps replica parallelism.")
    lines.append("exit codes: 0 success, 1 runtime failure, 2 configuration error.")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="active-sysid",
        description="Active identification of noisy linear-in-parameters recurrent systems.",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("verb", choices=list(VERBS), metavar="VERB", help="one of: " + ", ".join(VERBS))
    parser.add_argument("--config", metavar="PATH", help="JSON experiment config")
    parser.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    parser.add_argument("--seed", type=int, metavar="N", help="base seed")
    parser.add_argument("--override", action="append", default=[], metavar="K=V",
                        help="dotted-key override, repeatable")
    parser.add_argument("--replicas", type=int, metavar="N", help="number of replicas")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.replicas is not None:
        overrides.append(f"replicas={args.replicas}")
    cfg = load_config(args.config, overrides)
    if args.out is not None:
        cfg.output["path"] = args.out
    return cfg


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _replica_path(path: Path, replica: int) -> Path:
    return path.with_name(f"{path.stem}_r{replica:03d}{path.suffix or '.csv'}")


def _report_aborted(results) -> bool:
    bad = [r for r in results if r.error is not None]
    for r in bad:
        print(f"replica {r.replica} ({r.strategy}) aborted: {r.error}", file=sys.stderr)
    return bool(bad)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    _emit(rollout(cfg), cfg.output["path"])
    return 0


def cmd_identify(cfg: ExperimentConfig) -> int:
    results = run_experiment(cfg)
    d, c = cfg.model["d"], cfg.model["c"]
    path = cfg.output["path"]
    if path is None:
        if cfg.replicas == 1:
            sys.stdout.write(trace_to_csv(results[0], d, c))
        else:
            sys.stdout.write(summary_to_json({cfg.strategy.label: summarize(results, cfg.T)}))
    elif cfg.replicas == 1:
        _emit(trace_to_csv(results[0], d, c), path)
    else:
        for res in results:
            _emit(trace_to_csv(res, d, c), _replica_path(Path(path), res.replica))
    return 1 if _report_aborted(results) else 0


def _run_compare(cfgs) -> int:
    summary, results = compare_strategies(cfgs, return_results=True)
    _emit(summary_to_json(summary), cfgs[0].output["path"])
    return 1 if any(_report_aborted(r) for r in results.values()) else 0


def cmd_compare(cfg: ExperimentConfig) -> int:
    strategies = cfg.strategies or [
        StrategySpec("infomax", cfg.strategy.domain),
        StrategySpec("random", cfg.strategy.domain, seed=cfg.strategy.seed),
        StrategySpec("zero", cfg.strategy.domain),
    ]
    return _run_compare(expand_strategies(cfg, strategies))


def cmd_noise(cfg: ExperimentConfig) -> int:
    strategies = cfg.strategies or noise_strategies(cfg)
    return _run_compare(expand_strategies(cfg, strategies))


def cmd_validate_lemmas(cfg: ExperimentConfig) -> int:
    out = []
    ok = True
    for res in lemmas.run_all(seed=cfg.seed):
        ok &= res.passed
        out.append(res.line())
        out.extend(f"    {line}" for line in res.details)
    rep = noise_control_comparison()
    out.append(
        f"noise control on K=[[1,1],[1,4]], z=1: exact u={rep['u_exact'][0]:g} q={rep['objective_exact']:g}; "
        f"block-ratio u={rep['u_block_ratio'][0]:g} q={rep['objective_block_ratio']:g}"
    )
    out.append("all suites passed" if ok else "some suites FAILED")
    _emit("\n".join(out) + "\n", cfg.output["path"])
    return 0 if ok else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "compare": cmd_compare,
    "noise": cmd_noise,
    "validate-lemmas": cmd_validate_lemmas,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.verb](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
