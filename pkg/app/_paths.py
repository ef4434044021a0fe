# =============================================================
# WordProb — Runtime Path Resolver
# =============================================================
# Modul ini menyediakan path default untuk:
# - assets/ (fixture bawaan, config contoh)
# - out/    (direktori output run default)
#
# Path relatif di config di-resolve terhadap folder config,
# bukan terhadap working directory (lihat app/config.py).
# =============================================================

import os


def get_app_root() -> str:
    """Folder project root (parent dari app/)."""
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


# ── Pre-resolved paths ──────────────────────────────────────
APP_ROOT = get_app_root()

ASSETS_DIR = os.path.join(APP_ROOT, "assets")
FIXTURES_DIR = os.path.join(ASSETS_DIR, "fixtures")
TOY1_DIR = os.path.join(FIXTURES_DIR, "toy1")
EOW_TOY_DIR = os.path.join(FIXTURES_DIR, "eow_unmarked")

DEFAULT_CONFIG_PATH = os.path.join(APP_ROOT, "config.json")
DEFAULT_OUT_DIR = os.path.join(APP_ROOT, "out")
ENV_PATH = os.path.join(APP_ROOT, ".env")
