# =============================================================
# WordProb — Main Entry Point
# =============================================================
# Runner CLI yang menghubungkan:
# - .env (python-dotenv): WORDPROB_LOG_LEVEL, WORDPROB_CONFIG
# - Logging global (format sama untuk semua logger WordProb.*)
# - app.cli.main → exit code
#
# Usage:
#   python main.py --config assets/fixtures/toy1/config.json score corpus.txt
# =============================================================

import logging
import os
import sys

from dotenv import load_dotenv

from app._paths import ENV_PATH

# ── Logging Configuration ────────────────────────────────────
LOG_FORMAT = "%(asctime)s [%(name)s] %(levelname)s: %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

# Ensure stdout can support UTF-8 (✓ / ✗ / Δ) on Windows
if sys.platform == "win32":
    if sys.stdout:
        sys.stdout.reconfigure(encoding="utf-8")
    if sys.stderr:
        sys.stderr.reconfigure(encoding="utf-8")

logger = logging.getLogger("WordProb")


def configure_logging():
    """Level dari WORDPROB_LOG_LEVEL (default INFO); log ke stderr, hasil ke stdout."""
    level_name = os.getenv("WORDPROB_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    if level_name != logging.getLevelName(level):
        logger.warning("⚠ Unknown WORDPROB_LOG_LEVEL %r, using INFO", level_name)


def with_default_config(argv):
    """Sisipkan --config dari WORDPROB_CONFIG bila tidak diberikan di argv."""
    env_config = os.getenv("WORDPROB_CONFIG")
    if env_config and not any(a == "--config" or a.startswith("--config=") for a in argv):
        return ["--config", env_config, *argv]
    return list(argv)


def main(argv=None) -> int:
    load_dotenv(ENV_PATH)
    configure_logging()

    from app.cli import main as cli_main

    return cli_main(with_default_config(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    sys.exit(main())
