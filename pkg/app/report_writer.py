# =============================================================
# WordProb — Report Writer (TSV / CSV persistence)
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Membuat file output + header saat inisialisasi
# 2. Menulis baris dengan format float deterministik (%.12g)
# 3. Statistik jumlah baris tertulis
#
# Input identik → file byte-identik (tidak ada timestamp, urutan
# baris mengikuti caller).
# =============================================================

import csv
import logging
import math
import os
import threading
from enum import Enum
from typing import Iterable, List, Sequence

logger = logging.getLogger("WordProb.ReportWriter")

# ── Constants ──────────────────────────────────────────────────
FLOAT_FORMAT = "%.12g"


def format_value(value) -> str:
    """Render satu sel: float deterministik, enum → value, lainnya str()."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT % value
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


class ReportWriter:
    """
    Writer satu file output.

    Usage:
        writer = ReportWriter("out/scores.tsv", ["sentence_idx", "word", "logp"])
        writer.write_row([0, "a", -0.693])
        writer.stats   # {"path": ..., "rows_written": 1}
    """

    def __init__(self, path: str, headers: Sequence[str], delimiter: str = "\t"):
        """
        Args:
            path: File output (direktori dibuat bila belum ada).
            headers: Nama kolom, ditulis sekali saat file dibuat.
            delimiter: "\\t" untuk TSV, "," untuk CSV.
        """
        self._path = path
        self._headers: List[str] = list(headers)
        self._delimiter = delimiter
        self._lock = threading.Lock()
        self._rows_written = 0

        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        self._init_file()

    @property
    def path(self) -> str:
        return self._path

    @property
    def stats(self) -> dict:
        return {"path": self._path, "rows_written": self._rows_written}

    def write_row(self, values: Sequence):
        self.write_rows([values])

    def write_rows(self, rows: Iterable[Sequence]):
        """Append baris; jumlah kolom harus sama dengan header."""
        rendered = []
        for values in rows:
            if len(values) != len(self._headers):
                raise ValueError(f"row has {len(values)} cells, header has {len(self._headers)}")
            rendered.append([format_value(v) for v in values])
        if not rendered:
            return
        with self._lock:
            with open(self._path, "a", newline="", encoding="utf-8") as f:
                writer = csv.writer(f, delimiter=self._delimiter, lineterminator="\n")
                writer.writerows(rendered)
            self._rows_written += len(rendered)
        logger.debug("%d rows appended to %s", len(rendered), self._path)

    def _init_file(self):
        """Buat file baru (overwrite) dengan header."""
        with open(self._path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, delimiter=self._delimiter, lineterminator="\n")
            writer.writerow(self._headers)
        logger.info("✓ Output file created: %s", self._path)
