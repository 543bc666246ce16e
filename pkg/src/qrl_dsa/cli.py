"""Command-line entry point: ``qrl-dsa <command> [flags]``.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, selftest
from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError
from .experiments import AGENTS, iterations_to_fraction, run_alpha_sweep, run_convergence
from .train import BASELINES


def _parse_seeds(text: str) -> list[int]:
    """'0,1,2' or a range '0-4'."""
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(v) for v in text.split("-"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--seeds: expected '0,1,2' or '0-4', got {text!r}") from None


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    if args.seeds is not None:
        data["seeds"] = _parse_seeds(args.seeds)
    if args.iterations is not None:
        data["train"]["iterations"] = args.iterations
    if args.out_dir is not None:
        data["out_dir"] = args.out_dir
    if args.workers is not None:
        data["workers"] = args.workers
    return config_from_dict(data)


def _cmd_convergence(args) -> int:
    cfg = _resolve(args)
    res = run_convergence(cfg)
    for agent in AGENTS:
        curve = res.median[agent]
        print(f"{agent}: median final {curve[-1] / 1e6:.2f} Mbps, 90% of final at iteration {iterations_to_fraction(curve)}")
    for p in BASELINES:
        vals = [res.baselines[(p, s)].final_throughput for s in cfg.seeds]
        print(f"{p}: median final {np.median(vals) / 1e6:.2f} Mbps")
    print(f"wrote {len(res.paths)} files under {cfg.out_dir}/convergence")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve(args)
    res = run_alpha_sweep(cfg)
    for alpha, agent, med, lo, hi in res.summary:
        print(f"alpha={alpha:.2f} {agent}: median {med / 1e6:.2f} Mbps [{lo / 1e6:.2f}, {hi / 1e6:.2f}]")
    for v in res.violations():
        print(f"VQC below MLP at alpha={v['alpha']}: per seed (VQC, MLP) {v['per_seed_vqc_mlp']}")
    print(f"wrote {len(res.paths)} files under {cfg.out_dir}/sweep")
    return 0


def _cmd_validate(args) -> int:
    cfg = _resolve(args)
    sys.stdout.write(cfg.to_yaml())
    return 0


def _cmd_selftest(args) -> int:
    return 0 if selftest.run() else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrl-dsa", description="Quantum vs classical Q-learning for D2D spectrum access.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults used when omitted)")
    common.add_argument("--seeds", help="seed list '0,1,2' or range '0-4'")
    common.add_argument("--iterations", type=int, help="training iterations per run")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("convergence", parents=[common], help="train both agents per seed, write curves").set_defaults(fn=_cmd_convergence)
    sub.add_parser("sweep-alpha", parents=[common], help="final throughput across UE access probabilities").set_defaults(fn=_cmd_sweep)
    sub.add_parser("validate-config", parents=[common], help="print the resolved config").set_defaults(fn=_cmd_validate)
    sub.add_parser("selftest", help="run the quick invariant checks").set_defaults(fn=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - surfaced as exit code 2
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
