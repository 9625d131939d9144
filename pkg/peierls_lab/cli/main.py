#!/usr/bin/env python3
"""
peierls-lab command line: run an experiment from the registry, validate a
config file, or list the experiments.

    peierls-lab <experiment> [--config file] [--key value ...] [--jobs N] [--seed S]
    peierls-lab validate <config-file>
    peierls-lab list
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from peierls_lab import __version__
from peierls_lab.cli.config import ExperimentConfig, load_experiment_config, validate_file
from peierls_lab.cli.experiments import EXPERIMENTS, experiment_names
from peierls_lab.config import Config, setup_logging
from peierls_lab.errors import ConfigValidationError, PeierlsLabError, UnknownExperimentError

logger = logging.getLogger(__name__)

RESULTS_FILE = 'results.csv'
REPORT_FILE = 'report.json'
MANIFEST_FILE = 'manifest.json'


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    tool_version: str
    started_at: str
    finished_at: str
    stages: Dict[str, float]
    artifacts: List[str]
    run_dir: str
    passed: bool
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class StageTimer:
    """Wall time per named stage, logged at start and end."""

    def __init__(self, experiment: str):
        self.experiment = experiment
        self.stages: Dict[str, float] = {}
        self._current: Optional[Tuple[str, float]] = None

    def begin(self, stage: str):
        logger.info(f"[{self.experiment}] stage {stage} started")
        self._current = (stage, time.perf_counter())

    def end(self):
        stage, start = self._current
        self.stages[stage] = round(time.perf_counter() - start, 6)
        logger.info(f"[{self.experiment}] stage {stage} finished in {self.stages[stage]:.3f}s")
        self._current = None


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%S.%fZ')


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_json(path: str, data: Dict[str, Any]):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write('\n')


def run_directory(config: ExperimentConfig) -> str:
    return os.path.join(config.output_dir, f"{config.experiment}-{config.hash[:12]}")


def run(config: ExperimentConfig) -> RunManifest:
    """
    Validate, execute the registered experiment and write results.csv,
    report.json, the experiment's own files and manifest.json.
    """
    if config.experiment not in EXPERIMENTS:
        raise UnknownExperimentError(config.experiment, experiment_names())
    errors = config.validate(experiment_names())
    if errors:
        raise ConfigValidationError(errors)

    timer = StageTimer(config.experiment)
    started = _utc_now()
    out_dir = run_directory(config)
    os.makedirs(out_dir, exist_ok=True)
    logger.info(f"Running {config.experiment} (config {config.hash[:12]}) into {out_dir}")

    timer.begin('experiment')
    result = EXPERIMENTS[config.experiment].run(config, out_dir)
    timer.end()

    timer.begin('write')
    frame = pd.DataFrame(result.rows)
    frame['config_hash'] = config.hash
    frame.to_csv(os.path.join(out_dir, RESULTS_FILE), index=False)
    write_json(os.path.join(out_dir, REPORT_FILE), {
        'experiment': config.experiment, 'config_hash': config.hash, 'config': config.semantic_dict(),
        'passed': result.passed, 'report': result.report,
    })
    timer.end()

    artifacts = [RESULTS_FILE, REPORT_FILE] + list(result.extra_files)
    notes = [] if result.passed else ['one or more checks did not pass; see report.json']
    manifest = RunManifest(experiment=config.experiment, config_hash=config.hash, tool_version=__version__,
                           started_at=started, finished_at=_utc_now(), stages=timer.stages,
                           artifacts=artifacts, run_dir=out_dir, passed=result.passed, notes=notes)
    write_json(os.path.join(out_dir, MANIFEST_FILE), manifest.to_dict())
    log = logger.info if result.passed else logger.warning
    log(f"{config.experiment} finished: passed={result.passed}, artifacts {', '.join(artifacts)}")
    return manifest


def parse_overrides(tokens: Sequence[str]) -> Dict[str, str]:
    """['--eps', '0.1', '--model.J=2'] -> {'eps': '0.1', 'model.J': '2'}; a bare flag means true."""
    overrides: Dict[str, str] = {}
    i = 0
    tokens = list(tokens)
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith('--'):
            raise ConfigValidationError([f"{token}: expected --key value"])
        key = token[2:]
        if '=' in key:
            key, value = key.split('=', 1)
            i += 1
        elif i + 1 < len(tokens) and not tokens[i + 1].startswith('--'):
            value = tokens[i + 1]
            i += 2
        else:
            value = 'true'
            i += 1
        overrides[key] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='peierls-lab',
        description='Desk-scale checks of classical and quantum bottleneck bounds.',
        epilog='Any other --key value pair overrides a config entry, e.g. --L0 12 or --model.eps 0.1.',
    )
    parser.add_argument('command', help="experiment name, 'validate' or 'list'")
    parser.add_argument('target', nargs='?', help='config file for validate')
    parser.add_argument('--config', help='JSON config file')
    parser.add_argument('--jobs', type=int, help='worker processes for disorder and parameter sweeps')
    parser.add_argument('--seed', type=int, help='master seed')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    settings = Config(args.config)
    setup_logging(settings.LOG_LEVEL)

    if args.command == 'list':
        for name, exp in EXPERIMENTS.items():
            print(f"{name:18s} {exp.summary}")
        return 0

    if args.command == 'validate':
        path = args.target or args.config
        if not path:
            parser.error('validate needs a config file')
        errors = validate_file(path, experiment_names())
        if errors:
            for error in errors:
                print(f"❌ {error}")
            return 1
        print(f"✅ {path} is valid")
        return 0

    try:
        if args.command not in EXPERIMENTS:
            raise UnknownExperimentError(args.command, experiment_names())
        overrides = parse_overrides(rest)
        if args.jobs is not None:
            overrides['jobs'] = str(args.jobs)
        if args.seed is not None:
            overrides['seed'] = str(args.seed)
        config = load_experiment_config(args.command, args.config, overrides,
                                        experiment_defaults=EXPERIMENTS[args.command].defaults)
        manifest = run(config)
    except PeierlsLabError as e:
        logger.error(str(e))
        return 1

    status = '✅' if manifest.passed else '⚠️'
    print(f"{status} {manifest.experiment}: {manifest.run_dir} (config {manifest.config_hash[:12]})")
    return 0 if manifest.passed else 2


if __name__ == '__main__':
    sys.exit(main())
