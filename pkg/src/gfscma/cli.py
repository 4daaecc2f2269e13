"""``simulate`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from .config import ConfigError
from .harness import RECEIVERS, ExperimentConfig, emit_csv, emit_diagnostics, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _snr_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid SNR list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Monte Carlo link simulation of grant-free SCMA receivers.",
    )
    p.add_argument("--config", type=Path, help="YAML or JSON file with ExperimentConfig / SystemConfig fields")
    p.add_argument("--receiver", choices=sorted(RECEIVERS), help="receiver to evaluate")
    p.add_argument("--snr", type=_snr_list, help="Eb/N0 points in dB, comma or space separated")
    p.add_argument("--trials", type=int, help="frames per SNR point")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="metrics CSV path (stdout when omitted)")
    p.add_argument("--diagnostics", action="store_true", help="also write per-iteration NMSE and channel powers")
    return p


def load_config_file(path: Path) -> dict:
    """Parse a YAML or JSON config file (JSON is valid YAML)."""
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return yaml.safe_load(text) or {}
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    doc = load_config_file(args.config) if args.config is not None else {}
    cfg = ExperimentConfig.from_mapping(doc)
    changes = {}
    if args.receiver is not None:
        changes["receiver"] = args.receiver
    if args.snr is not None:
        changes["snr_list_db"] = args.snr
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out"] = str(args.out)
    if args.diagnostics:
        changes["diagnostics"] = True
    return cfg.replace(**changes) if changes else cfg


def diagnostics_path(out: str | None) -> Path:
    if out is None:
        return Path("diagnostics.csv")
    p = Path(out)
    return p.with_name(p.stem + "_diagnostics.csv")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.out is not None and not Path(cfg.out).resolve().parent.is_dir():
        print(f"I/O error: output directory of {cfg.out} does not exist", file=sys.stderr)
        return EXIT_IO
    rows = [] if cfg.diagnostics else None
    try:
        records = run_experiment(cfg, diagnostics=rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        emit_csv(records, sys.stdout if cfg.out is None else cfg.out)
        if rows is not None:
            emit_diagnostics(rows, diagnostics_path(cfg.out), cfg.system.K)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
