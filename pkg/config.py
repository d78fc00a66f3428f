"""
Environment-driven defaults for the command-line entry point.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


# --- Reproducibility ---
# Raw text; parsed and validated by the entry point.
PFVAR_SEED = os.getenv("PFVAR_SEED")

# --- Execution ---
PFVAR_THREADS = os.getenv("PFVAR_THREADS")

# --- Output ---
PFVAR_OUTPUT_DIR = Path(os.getenv("PFVAR_OUTPUT_DIR", "results"))

# --- Logging ---
PFVAR_LOG_LEVEL = os.getenv("PFVAR_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
