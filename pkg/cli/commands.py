"""
Command-line driver.

    python main.py <subcommand> [--config FILE] [--preset ID] [--seed N]
                   [--workers N] [--out-dir DIR] [--verbose]

Experiment subcommands (simulate, entanglement, g2, zeta, infer, bounds) run
one config through the ExperimentRunner; `replay` re-evaluates stored
records; `validate` prints the config report; `presets` lists the named
presets with their purpose and expected checks. Exit codes: 0 success,
2 invalid config, 3 truncation abort, 1 any other failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

from core.errors import ConfigError, TruncationError
from core.gates import resolve_config, validate_config
from core.storage import ArtifactStore
from models.presets import PresetGroup, get_presets_by_group
from models.records import load_records
from pipelines import run_experiment
from pipelines.common import setup_from_config
from pipelines.replay import replay_records

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ["simulate", "entanglement", "g2", "zeta", "infer", "bounds"]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_TRUNCATION = 3


def configure_logging(verbose: bool = False) -> None:
    level = "DEBUG" if verbose else os.environ.get("OPTOMECH_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config (JSON)")
    parser.add_argument("--preset", help="named preset, e.g. fig5-n1")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--workers", type=int, help="worker processes (default OPTOMECH_WORKERS or 1)")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optomech", description="Optomechanical photon-counting simulation and sensing")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        experiment = sub.add_parser(kind, help=f"run a {kind} experiment")
        _common(experiment)
        experiment.add_argument("--progress", action="store_true", help="write progress updates to stderr as JSON lines")
    replay = sub.add_parser("replay", help="replay stored click records")
    _common(replay)
    replay.add_argument("--records", required=True, help="JSON-lines record file")
    replay.add_argument("--sample-dt", dest="sample_dt", type=float, default=1.0)
    replay.add_argument("--no-strict", dest="strict", action="store_false", help="skip the fingerprint check")
    validate = sub.add_parser("validate", help="validate a config and print the report")
    _common(validate)
    validate.add_argument("--no-probe", dest="probe", action="store_false", help="skip the leakage probe run")
    presets = sub.add_parser("presets", help="list the named presets")
    presets.add_argument("--group", choices=[g.value for g in PresetGroup], help="only this group")
    presets.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def _overrides(args: argparse.Namespace, kind: Optional[str] = None) -> dict:
    workers = args.workers
    if workers is None and os.environ.get("OPTOMECH_WORKERS"):
        workers = int(os.environ["OPTOMECH_WORKERS"])
    return {"kind": kind, "seed": args.seed, "workers": workers, "out_dir": args.out_dir}


def _print_progress(kind: str, data: dict) -> None:
    print(json.dumps({"progress": kind, **data}, default=str), file=sys.stderr, flush=True)


def _run_experiment(args: argparse.Namespace) -> int:
    config = resolve_config(args.config, args.preset, _overrides(args, args.command))
    run = run_experiment(config, progress_callback=_print_progress if args.progress else None)
    print(json.dumps({"status": run.status.value, "artifacts": run.artifacts, "summary": run.progress}, indent=2, default=str))
    return EXIT_OK


def _replay(args: argparse.Namespace) -> int:
    config = resolve_config(args.config, args.preset, _overrides(args))
    setup = setup_from_config(config)
    with open(args.records, "r", encoding="utf-8") as f:
        records = load_records(f.read())
    out_dir = args.out_dir or config.out_dir or os.path.join(os.path.dirname(os.path.abspath(args.records)), "replay")
    store = ArtifactStore(out_dir)
    summary = replay_records(records, setup, store, args.sample_dt, args.strict)
    store.write_manifest(config.model_dump(mode="json"))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    passed, message, details, normalized = validate_config(args.config, args.preset, probe=args.probe)
    print(json.dumps({"passed": passed, "message": message, "details": details, "config": normalized}, indent=2, default=str))
    return EXIT_OK if passed else EXIT_CONFIG


def _list_presets(args: argparse.Namespace) -> int:
    groups = [PresetGroup(args.group)] if args.group else list(PresetGroup)
    listing = [
        {
            "id": p.preset_id, "name": p.name, "group": p.group.value, "kind": p.config["kind"],
            "purpose": p.purpose, "checks": p.checks,
        }
        for group in groups
        for p in get_presets_by_group(group)
    ]
    print(json.dumps(listing, indent=2))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "presets":
            return _list_presets(args)
        if args.command == "validate":
            return _validate(args)
        if args.command == "replay":
            return _replay(args)
        return _run_experiment(args)
    except ConfigError as e:
        logger.error(str(e))
        print(json.dumps({"error": str(e), "errors": e.errors}, indent=2, default=str), file=sys.stderr)
        return EXIT_CONFIG
    except TruncationError as e:
        logger.error(f"Truncation abort: {e}")
        return EXIT_TRUNCATION
    except Exception as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE
