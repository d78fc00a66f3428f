"""
Command-line surface:

    pfvar <subcommand> --config PATH [--set KEY=VALUE ...] [--out DIR] [--threads K] [--seed S]

Subcommands: simulate, run, sweep-lag, long-run, ci-failure, oracle-exact,
oracle-replicate. Exit status 0 on success, 2 on configuration errors, 3 on
numerical failures, 4 on I/O errors.
"""

import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from .commands import COMMAND_REGISTRY
from .config import CONFIG, parse_config
from .errors import ConfigError, PfvarError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 4


@dataclass
class CliCommand:
    subcommand: str
    config_path: Path
    overrides: List[str] = field(default_factory=list)
    out_dir: Optional[Path] = None
    threads: Optional[int] = None
    seed: Optional[int] = None
    env_seed: Optional[int] = None
    env_out_dir: Optional[Path] = None
    env_threads: Optional[int] = None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfvar",
        description="Fixed-lag asymptotic-variance estimation for bootstrap particle filters.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMAND_REGISTRY:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value; dotted keys reach nested fields")
        p.add_argument("--out", dest="out_dir", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker threads for replicates")
        p.add_argument("--seed", type=int, default=None, help="master seed (wins over config and env)")
    return parser


def parse_command(argv: Optional[Sequence[str]] = None, env_seed: Optional[int] = None,
                  env_out_dir: Optional[Path] = None, env_threads: Optional[int] = None) -> CliCommand:
    args = build_parser().parse_args(argv)
    return CliCommand(
        subcommand=args.subcommand,
        config_path=args.config,
        overrides=list(args.overrides),
        out_dir=args.out_dir,
        threads=args.threads,
        seed=args.seed,
        env_seed=env_seed,
        env_out_dir=env_out_dir,
        env_threads=env_threads,
    )


def _effective_overrides(cmd: CliCommand) -> List[str]:
    # later entries win: config --set < env seed < --seed flag
    overrides = list(cmd.overrides)
    if cmd.env_seed is not None:
        overrides.append(f"seed={cmd.env_seed}")
    if cmd.seed is not None:
        overrides.append(f"seed={cmd.seed}")
    if cmd.threads is not None:
        overrides.append(f"threads={cmd.threads}")
    return overrides


def _output_dir(cmd: CliCommand, cfg) -> Path:
    if cmd.out_dir is not None:
        return cmd.out_dir
    if cfg.output_path is not None:
        return Path(cfg.output_path)
    if cmd.env_out_dir is not None:
        return cmd.env_out_dir
    return CONFIG["output_dir"]


def env_int(name: str, raw: Optional[str]) -> Optional[int]:
    """Integer value of an environment variable; None when unset or blank."""
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", field=name) from None


def run_command(cmd: CliCommand) -> int:
    """Execute one subcommand and map failures to exit codes. Never raises."""
    handler = COMMAND_REGISTRY.get(cmd.subcommand)
    if handler is None:
        logger.error("unknown subcommand %r", cmd.subcommand)
        return 2

    try:
        cfg = parse_config(cmd.config_path, _effective_overrides(cmd))
        if cmd.env_threads is not None and "threads" not in cfg.model_fields_set:
            cfg = cfg.model_copy(update={"threads": max(int(cmd.env_threads), 1)})
        out_dir = _output_dir(cmd, cfg)
        logger.info("%s: seed=%d out=%s", cmd.subcommand, cfg.seed, out_dir)
        written = handler(cfg, out_dir)
    except PfvarError as e:
        logger.error("%s failed: %s", cmd.subcommand, e)
        return e.exit_code
    except OSError as e:
        logger.error("%s failed: %s", cmd.subcommand, e)
        return EXIT_IO
    except Exception:
        logger.exception("%s failed unexpectedly", cmd.subcommand)
        return 1

    for path in written:
        print(f"✅ Wrote {cmd.subcommand} output → {path}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, env_seed: Optional[int] = None,
         env_out_dir: Optional[Path] = None, env_threads: Optional[int] = None) -> int:
    return run_command(parse_command(argv, env_seed, env_out_dir, env_threads))
