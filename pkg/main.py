"""
Entry point for pfvar experiments.

    python main.py sweep-lag --config data/sv_sweep.json --out results/sv
"""

import logging
import sys

from config import LOG_FORMAT, PFVAR_LOG_LEVEL, PFVAR_OUTPUT_DIR, PFVAR_SEED, PFVAR_THREADS
from pfvar.cli_io import env_int, main
from pfvar.errors import ConfigError

logger = logging.getLogger(__name__)


def run() -> int:
    logging.basicConfig(level=getattr(logging, PFVAR_LOG_LEVEL, logging.INFO), format=LOG_FORMAT)
    try:
        env_seed = env_int("PFVAR_SEED", PFVAR_SEED)
        env_threads = env_int("PFVAR_THREADS", PFVAR_THREADS)
    except ConfigError as e:
        logger.error("invalid environment: %s", e)
        return e.exit_code
    return main(
        sys.argv[1:],
        env_seed=env_seed,
        env_out_dir=PFVAR_OUTPUT_DIR,
        env_threads=env_threads,
    )


if __name__ == "__main__":
    sys.exit(run())
