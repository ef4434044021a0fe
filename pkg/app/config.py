# =============================================================
# WordProb — Run Configuration
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Load config JSON (--config) + isi key yang hilang dari DEFAULTS
# 2. Override dari flag global (--seed, --tolerance, --out-dir, --bits)
# 3. Resolve path relatif terhadap folder file config
# 4. Validasi (file ada, scheme + flag konsisten, seed int)
# 5. Simpan effective_config.json di folder output
# =============================================================

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from app._paths import DEFAULT_OUT_DIR
from app.errors import ConfigError, UnsupportedRegime

logger = logging.getLogger("WordProb.Config")

# ── Constants ──────────────────────────────────────────────────
EFFECTIVE_CONFIG_NAME = "effective_config.json"

DEFAULTS: Dict[str, Any] = {
    "vocab": None,
    "tokeniser": None,
    "lm": None,
    "lm_order": None,
    "scheme": "eow",
    "mark_first_word": True,
    "mark_final_word": True,
    "punct_ids": [],
    "exact": False,
    "seed": 0,
    "tolerance": 1e-10,
    "out_dir": DEFAULT_OUT_DIR,
    "bits": False,
    "model_name": "model",
    "dataset_name": "dataset",
    "backend_timeout": 60.0,
}

OVERRIDABLE = ("seed", "tolerance", "out_dir", "bits")


@dataclass
class RunConfig:
    """
    Konfigurasi satu run.

    lm berbentuk {"tabular": path} atau {"endpoint": "tcp://..." | "stdio:..."}.
    lm_order None berarti order LM tabular diambil dari konteks terpanjang di file.
    Semua path sudah absolut setelah load_config().
    """
    vocab: str
    tokeniser: str
    lm: Dict[str, str]
    lm_order: Optional[int] = None
    scheme: str = "eow"
    mark_first_word: bool = True
    mark_final_word: bool = True
    punct_ids: List[int] = field(default_factory=list)
    exact: bool = False
    seed: int = 0
    tolerance: float = 1e-10
    out_dir: str = DEFAULT_OUT_DIR
    bits: bool = False
    model_name: str = "model"
    dataset_name: str = "dataset"
    backend_timeout: float = 60.0
    source: Optional[str] = None

    @property
    def tabular_path(self) -> Optional[str]:
        return self.lm.get("tabular")

    @property
    def endpoint(self) -> Optional[str]:
        return self.lm.get("endpoint")

    def output_path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop("source")
        return data


def _resolve(path: Optional[str], base_dir: str) -> Optional[str]:
    if path is None:
        return None
    path = os.path.expanduser(path)
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError("config file not found", path) from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e})", path) from None
    if not isinstance(data, dict):
        raise ConfigError("top-level JSON value must be an object", path)
    return data


def load_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Load → isi DEFAULTS → override flag → resolve path → validasi.

    Args:
        path: File config JSON.
        overrides: Nilai flag global; None berarti flag tidak diberikan.

    Raises:
        ConfigError: file tidak ada / JSON rusak / key tidak dikenal / nilai invalid.
        UnsupportedRegime: bow dengan mark_final_word=false.
    """
    data = _read_json(path)
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown keys {unknown}", path)

    merged = dict(DEFAULTS)
    merged.update(data)
    for key, value in (overrides or {}).items():
        if key not in OVERRIDABLE:
            raise ConfigError(f"{key!r} cannot be overridden from the command line", path)
        if value is not None:
            merged[key] = os.path.abspath(value) if key == "out_dir" else value

    base_dir = os.path.dirname(os.path.abspath(path))
    lm = merged["lm"]
    if not isinstance(lm, dict) or len(lm) != 1 or not set(lm) <= {"tabular", "endpoint"}:
        raise ConfigError('"lm" must be {"tabular": path} or {"endpoint": address}', path)
    if "tabular" in lm:
        lm = {"tabular": _resolve(lm["tabular"], base_dir)}

    try:
        config = RunConfig(
            vocab=_resolve(merged["vocab"], base_dir),
            tokeniser=_resolve(merged["tokeniser"], base_dir),
            lm=dict(lm),
            lm_order=merged["lm_order"],
            scheme=str(merged["scheme"]),
            mark_first_word=merged["mark_first_word"],
            mark_final_word=merged["mark_final_word"],
            punct_ids=list(merged["punct_ids"]),
            exact=merged["exact"],
            seed=merged["seed"],
            tolerance=float(merged["tolerance"]),
            out_dir=_resolve(merged["out_dir"], base_dir),
            bits=merged["bits"],
            model_name=str(merged["model_name"]),
            dataset_name=str(merged["dataset_name"]),
            backend_timeout=float(merged["backend_timeout"]),
            source=os.path.abspath(path),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid value ({e})", path) from None

    validate_config(config)
    logger.info("✓ Config loaded from %s", path)
    return config


def validate_config(config: RunConfig) -> RunConfig:
    """Cek invariant RunConfig; lihat load_config untuk daftar error."""
    where = config.source
    for key in ("vocab", "tokeniser"):
        value = getattr(config, key)
        if value is None:
            raise ConfigError(f'"{key}" is required', where)
        if not os.path.isfile(value):
            raise ConfigError(f"{key} file not found: {value}", where)
    if config.tabular_path is not None and not os.path.isfile(config.tabular_path):
        raise ConfigError(f"lm file not found: {config.tabular_path}", where)

    if config.scheme not in ("eow", "bow"):
        raise ConfigError(f"scheme must be 'eow' or 'bow', got {config.scheme!r}", where)
    for key in ("mark_first_word", "mark_final_word", "exact", "bits"):
        if not isinstance(getattr(config, key), bool):
            raise ConfigError(f'"{key}" must be true or false', where)
    if config.scheme == "eow" and not config.mark_first_word:
        raise ConfigError("eow tokenisers always mark the first word (mark_first_word must be true)", where)
    if config.scheme == "bow" and not config.mark_final_word:
        raise UnsupportedRegime("bow tokeniser with unmarked final words is not supported")

    if isinstance(config.seed, bool) or not isinstance(config.seed, int):
        raise ConfigError(f"seed must be an integer, got {config.seed!r}", where)
    if not all(isinstance(p, int) and not isinstance(p, bool) for p in config.punct_ids):
        raise ConfigError("punct_ids must be a list of integer subword ids", where)
    order = config.lm_order
    if order is not None and (isinstance(order, bool) or not isinstance(order, int) or order < 0):
        raise ConfigError(f"lm_order must be a non-negative integer, got {order!r}", where)
    if not 0.0 < config.tolerance < 1.0:
        raise ConfigError(f"tolerance must lie in (0, 1), got {config.tolerance}", where)
    return config


def save_effective_config(config: RunConfig) -> str:
    """Tulis effective_config.json ke out_dir; return path-nya."""
    os.makedirs(config.out_dir, exist_ok=True)
    path = config.output_path(EFFECTIVE_CONFIG_NAME)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, ensure_ascii=False, indent=4, sort_keys=True)
        f.write("\n")
    logger.info("✓ Effective config saved to %s", path)
    return path
