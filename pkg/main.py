"""
Main entry point for the subpen experiment runner.
"""

import argparse
import json
import logging
import re
import sys
import unicodedata
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema

from experiment_runner import ExperimentResult, ExperimentRunner
from experiment_spec import ExperimentSpec
from pauli_algebra import ConditionPreconditionError, ConfigError, ParseError, SubpenError

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SUBCOMMANDS = ('code-inspect', 'check-conditions', 'spectrum', 'gap-scan', 'simulate', 'sweep', 'swap-gate', 'chain')


def setup_logging(config: Dict[str, Any]) -> None:
    """
    Configure logging based on config settings.

    Args:
        config: Configuration dictionary
    """
    logging_config = config.get('logging', {})

    log_level_str = logging_config.get('level', 'INFO')
    log_level = getattr(logging, log_level_str)
    log_file = logging_config.get('log_file', 'subpen_run.log')
    console_output = logging_config.get('console_output', True)

    handlers = []

    file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
    file_handler.setLevel(log_level)
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)
    handlers.append(file_handler)

    if console_output:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(log_level)
        console_formatter = logging.Formatter('%(levelname)s - %(message)s')
        console_handler.setFormatter(console_formatter)
        handlers.append(console_handler)

    logging.basicConfig(
        level=log_level,
        handlers=handlers,
        force=True
    )

    logging.info(f"Logging initialized at {log_level_str} level")
    logging.info(f"Log file: {log_file}")


def load_config(config_path: str) -> Dict[str, Any]:
    """
    Load application settings from a JSON file.

    Args:
        config_path: Path to config file

    Returns:
        Configuration dictionary
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            config = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{config_path}: invalid JSON ({e})") from e

    return config


def sanitize_filename(filename: str) -> str:
    """
    Reduce a run prefix to ASCII word characters, hyphens and dots.
    """
    filename = unicodedata.normalize('NFKD', filename)
    filename = filename.encode('ascii', 'ignore').decode('ascii')
    filename = filename.replace(' ', '_')
    filename = re.sub(r'[^\w\-.]', '', filename)
    return re.sub(r'_+', '_', filename)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='subpen',
        description='Subsystem-code penalty experiments: code inspection, condition checks, spectra and dynamics'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=f'Run a {name} experiment')
        sub.add_argument(
            '--config',
            type=str,
            required=True,
            help='Experiment JSON file'
        )
        sub.add_argument(
            '--settings',
            type=str,
            default='config.json',
            help='Application settings file (default: config.json)'
        )
        sub.add_argument(
            '--out',
            type=str,
            help='Output directory (default: <output.directory>/<prefix>)'
        )
        sub.add_argument(
            '--seed',
            type=int,
            help='Override the experiment seed'
        )
    return parser


def resolve_output_dir(spec: ExperimentSpec, config: Dict[str, Any]) -> Path:
    explicit = spec.section('output').get('directory')
    if explicit:
        return Path(explicit)
    return Path(config.get('output', {}).get('directory', 'output')) / sanitize_filename(spec.prefix)


def print_summary(result: ExperimentResult, output_dir: Path, paths: List[Path]) -> None:
    print(f"\n{'=' * 60}")
    print(f"{result.kind.upper()} {'PASSED' if result.passed else 'FAILED'}")
    print(f"{'=' * 60}")
    print(f"\nOutput folder: {output_dir}")
    print("\nOutput files generated:")
    for path in paths:
        print(f"  - {path.name}")
    if result.reports:
        print("\nConditions:")
        for report in result.reports:
            print(f"  - {report.condition}: {'satisfied' if report.satisfied else 'VIOLATED'}")
    if result.metrics:
        print("\nMetrics:")
        for name in sorted(result.metrics):
            print(f"  - {name}: {result.metrics[name]}")
    if result.expectations:
        print("\nExpectations:")
        for item in result.expectations:
            print(f"  - {item['metric']}: {item.get('value')} {'ok' if item['passed'] else 'FAILED'}")
    print(f"\nWall time: {result.wall_time:.2f} s")
    print(f"{'=' * 60}")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main application entry point.

    Returns:
        0 when every condition and expectation holds, 1 when one fails, 2 on usage or config errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    for path, what in ((args.config, 'Experiment'), (args.settings, 'Settings')):
        if not Path(path).exists():
            print(f"Error: {what} file not found: {path}")
            return EXIT_USAGE

    try:
        config = load_config(args.settings)
        spec = ExperimentSpec.from_file(args.config).with_overrides(out=args.out, seed=args.seed)
    except jsonschema.ValidationError as e:
        print(f"Error: {args.config} does not match the experiment schema: {e.message}")
        return EXIT_USAGE
    except (ConfigError, ParseError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE

    if spec.kind != args.command:
        print(f"Error: {args.config} describes a {spec.kind} experiment, not {args.command}")
        return EXIT_USAGE

    output_dir = resolve_output_dir(spec, config)
    output_dir.mkdir(parents=True, exist_ok=True)
    prefix = sanitize_filename(spec.prefix)
    config.setdefault('logging', {})['log_file'] = str(output_dir / f"{prefix}_run.log")
    setup_logging(config)

    logger = logging.getLogger(__name__)
    logger.info("=" * 60)
    logger.info(f"subpen {args.command} starting")
    logger.info("=" * 60)
    logger.info(f"Experiment: {args.config}")
    logger.info(f"Settings: {args.settings}")
    logger.info(f"Output Folder: {output_dir}")

    runner = ExperimentRunner(config)
    try:
        result = runner.run(spec)
        logger.info("Writing results")
        paths = runner.write_outputs(result, str(output_dir), prefix)
    except (ConfigError, ParseError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except ConditionPreconditionError as e:
        logger.error(f"Precondition failed: {e}")
        return EXIT_FAILED
    except SubpenError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_USAGE

    logger.info("=" * 60)
    logger.info(f"Run {'completed' if result.passed else 'finished with failures'}")
    logger.info("=" * 60)
    print_summary(result, output_dir, paths)
    return result.exit_code


if __name__ == '__main__':
    sys.exit(main())
