# =============================================================
# WordProb — Core Types & Log-Space Arithmetic
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Tipe domain bersama (Subword, MarkedVocabulary, alias id)
# 2. Aritmetika probabilitas di log-space (logsumexp, produk)
# 3. Validasi partisi role vocabulary + loader file vocab TSV
#
# Semua probabilitas dibawa dalam log natural. Nilai linear
# hanya muncul di batas I/O (file LM, output TSV).
# =============================================================

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp as _scipy_logsumexp

from app.errors import (
    DuplicateId,
    EmptyMarkedSet,
    EmptySurface,
    IdOutOfRange,
    RoleMismatch,
    VocabularyError,
)

logger = logging.getLogger("WordProb.Core")

# ── Type aliases ───────────────────────────────────────────────
LogProb = float
WordSequence = Tuple[str, ...]
SubwordSequence = Tuple[int, ...]

# ── Constants ──────────────────────────────────────────────────
LOG_ZERO: LogProb = -math.inf
WHITESPACE_MARKER = "_"


class Role(str, Enum):
    BOW = "bow"
    EOW = "eow"
    MID = "mid"


class Scheme(str, Enum):
    EOW = "eow"
    BOW = "bow"


# ================================================================
# LOG-SPACE ARITHMETIC
# ================================================================

def logsumexp(terms: Iterable[LogProb]) -> LogProb:
    """
    log Σ exp(term). List kosong → LOG_ZERO.

    Semua term LOG_ZERO juga menghasilkan LOG_ZERO (scipy sudah
    menangani -inf tanpa warning selama array tidak kosong).
    """
    arr = np.fromiter(terms, dtype=float)
    if arr.size == 0 or np.all(arr == LOG_ZERO):
        return LOG_ZERO
    return float(_scipy_logsumexp(arr))


def logprod(terms: Iterable[LogProb]) -> LogProb:
    """Produk probabilitas = jumlah log. fsum menjaga presisi rantai panjang."""
    values = list(terms)
    if any(v == LOG_ZERO for v in values):
        return LOG_ZERO
    return math.fsum(values)


def to_log(p: float) -> LogProb:
    if p < 0.0:
        raise ValueError(f"negative probability {p}")
    return math.log(p) if p > 0.0 else LOG_ZERO


def to_linear(lp: LogProb) -> float:
    return math.exp(lp) if lp != LOG_ZERO else 0.0


def surprisal(p: LogProb) -> float:
    """−log p dalam nats; probabilitas nol → +inf."""
    return math.inf if p == LOG_ZERO else 0.0 - p


# ================================================================
# VOCABULARY
# ================================================================

@dataclass(frozen=True)
class Subword:
    """
    Satu entri vocabulary.

    Attributes:
        id: Index 0..n-1 (kontigu).
        surface: String yang direpresentasikan, marker spasi ditulis `_`.
        role: bow / eow / mid (tetap, tidak boleh dual-role).
    """
    id: int
    surface: str
    role: Role

    @property
    def text(self) -> str:
        """Surface tanpa marker spasi."""
        if self.role == Role.BOW:
            return self.surface[1:] if self.surface.startswith(WHITESPACE_MARKER) else self.surface
        if self.role == Role.EOW:
            return self.surface[:-1] if self.surface.endswith(WHITESPACE_MARKER) else self.surface
        return self.surface


@dataclass(frozen=True)
class MarkedVocabulary:
    """
    Inventaris subword dengan partisi role marked / mid.

    eos selalu berada di id == len(subwords); setiap distribusi
    next-subword punya panjang len(subwords) + 1.
    """
    subwords: Tuple[Subword, ...]
    marking_scheme: Scheme
    eos_id: int
    punct_ids: FrozenSet[int] = field(default_factory=frozenset)

    @property
    def size(self) -> int:
        return len(self.subwords)

    @property
    def marked_role(self) -> Role:
        return Role.EOW if self.marking_scheme == Scheme.EOW else Role.BOW

    def surface(self, subword_id: int) -> str:
        if subword_id == self.eos_id:
            return "<eos>"
        return self.subwords[subword_id].surface

    def is_marked(self, subword_id: int) -> bool:
        return subword_id != self.eos_id and self.subwords[subword_id].role == self.marked_role

    @cached_property
    def marked_ids(self) -> FrozenSet[int]:
        return frozenset(s.id for s in self.subwords if s.role == self.marked_role)

    @cached_property
    def mid_ids(self) -> FrozenSet[int]:
        return frozenset(s.id for s in self.subwords if s.role != self.marked_role)

    # ── Index arrays (V̄ = V ∪ {eos}) untuk slicing distribusi numpy ──

    @cached_property
    def marked_with_eos(self) -> np.ndarray:
        return np.array(sorted(self.marked_ids | {self.eos_id}), dtype=np.intp)

    @cached_property
    def mid_with_eos(self) -> np.ndarray:
        return np.array(sorted(self.mid_ids | {self.eos_id}), dtype=np.intp)

    @cached_property
    def punct_with_eos(self) -> np.ndarray:
        return np.array(sorted(set(self.punct_ids) | {self.eos_id}), dtype=np.intp)


@dataclass
class ValidationReport:
    """Hasil validate_vocabulary: counts + warning non-fatal."""
    scheme: Scheme
    marked_count: int
    mid_count: int
    warnings: List[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.warnings


def build_vocabulary(
    subwords: Sequence[Subword],
    scheme: Scheme,
    punct_ids: Iterable[int] = (),
    eos_id: Optional[int] = None,
) -> MarkedVocabulary:
    """Susun MarkedVocabulary terurut by id lalu validasi invariant keras."""
    ordered = tuple(sorted(subwords, key=lambda s: s.id))
    vocab = MarkedVocabulary(
        subwords=ordered,
        marking_scheme=Scheme(scheme),
        eos_id=len(ordered) if eos_id is None else eos_id,
        punct_ids=frozenset(punct_ids),
    )
    validate_vocabulary(vocab)
    return vocab


def validate_vocabulary(vocab: MarkedVocabulary) -> ValidationReport:
    """
    Cek invariant partisi role.

    Raises:
        DuplicateId, EmptySurface, IdOutOfRange, RoleMismatch,
        EmptyMarkedSet: pelanggaran keras.

    Surface duplikat lintas subword hanya dilaporkan sebagai warning:
    kode level-kata tetap valid, tapi detokenisasi ke string ambigu.
    """
    seen = set()
    for sub in vocab.subwords:
        if sub.id in seen:
            raise DuplicateId(sub.id)
        seen.add(sub.id)

    size = len(vocab.subwords)
    for position, sub in enumerate(vocab.subwords):
        if sub.id != position:
            raise IdOutOfRange(sub.id, size)
        if not sub.surface:
            raise EmptySurface(sub.id)

    if vocab.eos_id != size:
        raise IdOutOfRange(vocab.eos_id, size + 1)

    forbidden = Role.BOW if vocab.marking_scheme == Scheme.EOW else Role.EOW
    for sub in vocab.subwords:
        if sub.role == forbidden:
            raise RoleMismatch(sub.id, sub.role.value, vocab.marking_scheme.value)

    if not vocab.marked_ids:
        raise EmptyMarkedSet(vocab.marking_scheme.value)

    for pid in vocab.punct_ids:
        if not 0 <= pid < size:
            raise IdOutOfRange(pid, size)

    report = ValidationReport(
        scheme=vocab.marking_scheme,
        marked_count=len(vocab.marked_ids),
        mid_count=len(vocab.mid_ids),
    )
    by_surface = {}
    for sub in vocab.subwords:
        if sub.surface in by_surface:
            report.warnings.append(
                f"subwords {by_surface[sub.surface]} and {sub.id} share surface {sub.surface!r}"
            )
        else:
            by_surface[sub.surface] = sub.id

    for message in report.warnings:
        logger.warning("⚠ %s", message)
    return report


def load_vocabulary(path: str, scheme: str, punct_ids: Iterable[int] = ()) -> MarkedVocabulary:
    """
    Baca vocab TSV dengan header `id<TAB>surface<TAB>role`.

    Args:
        path: File UTF-8 TSV.
        scheme: "eow" atau "bow".
        punct_ids: Kelas punctuation (tanpa eos; eos selalu ditambahkan).
    """
    subwords: List[Subword] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader, None)
        if header != ["id", "surface", "role"]:
            raise VocabularyError(f"{path}: expected header id/surface/role, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise VocabularyError(f"{path}:{line_no}: expected 3 columns, got {len(row)}")
            try:
                subwords.append(Subword(int(row[0]), row[1], Role(row[2])))
            except ValueError as e:
                raise VocabularyError(f"{path}:{line_no}: {e}") from e

    vocab = build_vocabulary(subwords, Scheme(scheme), punct_ids)
    logger.info(
        "✓ Vocabulary loaded | path=%s | size=%d | marked=%d | scheme=%s",
        path, vocab.size, len(vocab.marked_ids), vocab.marking_scheme.value,
    )
    return vocab
