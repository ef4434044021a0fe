# =============================================================
# WordProb — Conditional Subword Language Models
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Interface ConditionalLM (distribusi next-subword atas V ∪ {eos})
# 2. TabularLM: trie konteks → distribusi eksplisit (Markov order k)
# 3. Load / write file tabular TSV + validasi normalisasi
# 4. Verifikasi exactness (tidak ada massa di sequence unmapped)
# 5. Generator LM exact acak (seeded) untuk property test
#
# Backend eksternal (JSON-lines) ada di app/network_client.py.
# =============================================================

import csv
import logging
import math
from collections import deque
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np

from app.core import LOG_ZERO, SubwordSequence
from app.errors import LMError, MissingContext, NotNormalised, ParseError, SupportViolation
from app.network_client import RemoteLM
from app.tokeniser import TokeniserSpec

logger = logging.getLogger("WordProb.LM")

# ── Constants ──────────────────────────────────────────────────
EMPTY_CONTEXT = "ε"
EOS_TOKEN = "EOS"
TABULAR_TOLERANCE = 1e-8
DEFAULT_MIN_EOS_MASS = 0.05
MAX_EXACTNESS_STATES = 500_000

__all__ = [
    "ConditionalLM",
    "TabularLM",
    "RemoteLM",
    "load_tabular",
    "write_tabular",
    "verify_exactness",
    "random_exact_lm",
]


@runtime_checkable
class ConditionalLM(Protocol):
    """Sumber distribusi p(· | context) dalam log-space, panjang vocab_size + 1."""

    vocab_size: int
    exact: bool

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        ...


# ================================================================
# CONTEXT TRIE
# ================================================================

class _TrieNode:
    __slots__ = ("children", "dist")

    def __init__(self):
        self.children: Dict[int, "_TrieNode"] = {}
        self.dist: Optional[np.ndarray] = None


class ContextTrie:
    """
    Trie atas konteks terbalik (id terbaru di akar).

    lookup() mengembalikan distribusi dari suffix terpanjang yang
    tersimpan (backoff).
    """

    def __init__(self):
        self._root = _TrieNode()
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, context: SubwordSequence, dist: np.ndarray):
        node = self._root
        for u in reversed(context):
            node = node.children.setdefault(u, _TrieNode())
        if node.dist is None:
            self._size += 1
        node.dist = dist

    def lookup(self, context: SubwordSequence) -> Optional[np.ndarray]:
        node = self._root
        best = node.dist
        for u in reversed(context):
            node = node.children.get(u)
            if node is None:
                break
            if node.dist is not None:
                best = node.dist
        return best


# ================================================================
# TABULAR LM
# ================================================================

class TabularLM:
    """
    LM Markov order-k dengan tabel eksplisit.

    Usage:
        lm = load_tabular("assets/fixtures/toy1/lm.tsv", vocab_size=3, order=2)
        lm.next_distribution([0])   # log-probs atas [A, B, c, eos]
    """

    def __init__(
        self,
        vocab_size: int,
        order: int,
        rows: Mapping[SubwordSequence, Sequence[float]],
        exact: bool = False,
    ):
        if order < 0:
            raise LMError(f"order must be >= 0, got {order}")
        self.vocab_size = vocab_size
        self.order = order
        self.exact = exact
        self._rows: Dict[SubwordSequence, np.ndarray] = {}
        self._trie = ContextTrie()

        for context, probs in rows.items():
            linear = np.asarray(probs, dtype=float)
            if linear.shape != (vocab_size + 1,):
                raise LMError(f"row {list(context)} has {linear.size} entries, expected {vocab_size + 1}")
            check_normalised(tuple(context), linear, TABULAR_TOLERANCE)
            with np.errstate(divide="ignore"):
                logs = np.log(linear)
            logs.setflags(write=False)
            self._rows[tuple(context)] = logs
            self._trie.insert(tuple(context), logs)

    @property
    def eos_id(self) -> int:
        return self.vocab_size

    @property
    def contexts(self) -> List[SubwordSequence]:
        return sorted(self._rows, key=lambda c: (len(c), c))

    def stored(self, context: SubwordSequence) -> np.ndarray:
        return self._rows[tuple(context)]

    def truncate(self, context: Sequence[int]) -> SubwordSequence:
        context = tuple(context)
        return context[len(context) - self.order:] if self.order else ()

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        key = self.truncate(context)
        dist = self._trie.lookup(key)
        if dist is None:
            raise MissingContext(key)
        return dist

    def min_eos_mass(self) -> float:
        """Massa eos minimum atas konteks yang mengizinkan eos."""
        masses = [math.exp(row[self.eos_id]) for row in self._rows.values() if row[self.eos_id] > LOG_ZERO]
        return min(masses) if masses else 0.0

    def __len__(self) -> int:
        return len(self._rows)

    def __repr__(self) -> str:
        return f"TabularLM(vocab_size={self.vocab_size}, order={self.order}, contexts={len(self)}, exact={self.exact})"


def check_normalised(context: SubwordSequence, linear: np.ndarray, tolerance: float):
    """
    Raises:
        NotNormalised: |1 − Σp| > tolerance (deviation = 1 − Σp).
    """
    if np.any(linear < 0) or not np.all(np.isfinite(linear)):
        raise NotNormalised(context, float("nan"))
    deviation = 1.0 - math.fsum(linear.tolist())
    if abs(deviation) > tolerance:
        raise NotNormalised(context, deviation)


# ================================================================
# EXACTNESS
# ================================================================

def _reachable(lm: Optional[TabularLM], spec: TokeniserSpec, order: int, follow_support: bool):
    """
    BFS atas (konteks terpotong, state decoder).

    follow_support=True → hanya ikuti transisi ber-massa positif
    (verifikasi LM yang ada); False → ikuti semua transisi valid
    (konstruksi LM baru).
    """
    eos = spec.vocab.eos_id
    start = spec.decoder.initial(track_words=False)
    queue = deque([((), start)])
    seen = {((), start.signature())}
    while queue:
        context, state = queue.popleft()
        allowed = state.allowed_next()
        if follow_support:
            dist = lm.next_distribution(context)
            support = [int(u) for u in np.flatnonzero(dist > LOG_ZERO)]
        else:
            support = sorted(allowed)
        yield context, state, allowed, support

        for u in support:
            if u == eos or u not in allowed:
                continue
            child = state.advance(u)
            key = ((context + (u,))[-order:] if order else (), child.signature())
            if key in seen:
                continue
            seen.add(key)
            if len(seen) > MAX_EXACTNESS_STATES:
                raise LMError(f"exactness search exceeded {MAX_EXACTNESS_STATES} states")
            queue.append((key[0], child))


def verify_exactness(lm: TabularLM, spec: TokeniserSpec) -> int:
    """
    Pastikan LM tidak pernah memberi massa ke ekstensi unmapped.

    Returns:
        Jumlah (konteks, state) yang dikunjungi.

    Raises:
        SupportViolation: (konteks, subword) pertama yang melanggar.
    """
    visited = 0
    for context, _state, allowed, support in _reachable(lm, spec, lm.order, follow_support=True):
        visited += 1
        for u in support:
            if u not in allowed:
                raise SupportViolation(context, u)
    logger.info("✓ Exactness verified | states=%d", visited)
    return visited


# ================================================================
# FILE I/O
# ================================================================

def _parse_context(field: str, vocab_size: int) -> SubwordSequence:
    field = field.strip()
    if field in ("", EMPTY_CONTEXT):
        return ()
    context = tuple(int(x) for x in field.split(","))
    if any(not 0 <= u < vocab_size for u in context):
        raise ValueError(f"context id outside 0..{vocab_size - 1}")
    return context


def load_tabular(
    path: str,
    vocab_size: int,
    order: Optional[int] = None,
    exact: bool = False,
    spec: Optional[TokeniserSpec] = None,
) -> TabularLM:
    """
    Baca file TSV `konteks<TAB>subword|EOS<TAB>probabilitas`.

    Entri yang tidak ditulis bernilai 0. Bila exact=True dan spec
    diberikan, exactness diverifikasi terhadap tokeniser.

    Raises:
        ParseError, NotNormalised, SupportViolation
    """
    rows: Dict[SubwordSequence, np.ndarray] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE)
        for line_no, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 3:
                raise ParseError(path, line_no, f"expected 3 columns, got {len(row)}")
            try:
                context = _parse_context(row[0], vocab_size)
                target = vocab_size if row[1].strip() == EOS_TOKEN else int(row[1])
                prob = float(row[2])
            except ValueError as e:
                raise ParseError(path, line_no, str(e)) from None
            if not 0 <= target <= vocab_size:
                raise ParseError(path, line_no, f"subword id {target} outside vocabulary")
            if not 0.0 <= prob <= 1.0:
                raise ParseError(path, line_no, f"probability {prob} outside [0, 1]")
            if order is not None and len(context) > order:
                raise ParseError(path, line_no, f"context longer than order {order}")

            dist = rows.setdefault(context, np.zeros(vocab_size + 1))
            if dist[target] != 0.0:
                raise ParseError(path, line_no, f"duplicate entry for context {list(context)}, subword {target}")
            dist[target] = prob

    if () not in rows:
        logger.warning("⚠ %s has no empty-context row; unseen contexts will fail", path)
    effective_order = order if order is not None else max((len(c) for c in rows), default=0)
    lm = TabularLM(vocab_size, effective_order, rows, exact=exact)
    if exact and spec is not None:
        verify_exactness(lm, spec)
    logger.info("✓ Tabular LM loaded | path=%s | contexts=%d | order=%d | exact=%s", path, len(lm), lm.order, exact)
    return lm


def _format_context(context: SubwordSequence) -> str:
    return ",".join(str(u) for u in context) if context else EMPTY_CONTEXT


def write_tabular(lm: TabularLM, path: str):
    """Tulis LM ke format tabular (hanya entri positif)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        for context in lm.contexts:
            row = lm.stored(context)
            for u in np.flatnonzero(row > LOG_ZERO):
                target = EOS_TOKEN if u == lm.eos_id else str(u)
                writer.writerow([_format_context(context), target, "%.17g" % math.exp(row[u])])
    logger.info("✓ Tabular LM written | path=%s | contexts=%d", path, len(lm))


# ================================================================
# RANDOM EXACT LM
# ================================================================

def random_exact_lm(
    seed: int,
    spec: TokeniserSpec,
    order: int,
    min_eos_mass: float = DEFAULT_MIN_EOS_MASS,
) -> TabularLM:
    """
    Bangkitkan LM exact acak untuk tokeniser spec.

    Probabilitas positif di semua transisi valid, nol di luar support.
    Bila eos valid di sebuah konteks, massanya ≥ min_eos_mass.

    Raises:
        ValueError: order terlalu kecil sehingga dua state decoder
                    dengan konteks terpotong sama tidak punya
                    transisi valid bersama.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    rng = np.random.default_rng(seed)
    eos = spec.vocab.eos_id

    support: Dict[SubwordSequence, FrozenSet[int]] = {}
    for context, _state, allowed, _ in _reachable(None, spec, order, follow_support=False):
        support[context] = support[context] & allowed if context in support else allowed

    rows: Dict[SubwordSequence, np.ndarray] = {}
    for context in sorted(support, key=lambda c: (len(c), c)):
        allowed = sorted(support[context])
        if not allowed:
            raise ValueError(f"order {order} too small: context {list(context)} has no shared valid continuation")
        weights = 0.9 * rng.dirichlet(np.ones(len(allowed))) + 0.1 / len(allowed)
        dist = np.zeros(spec.vocab.size + 1)
        if eos in allowed and len(allowed) > 1:
            eos_index = allowed.index(eos)
            scaled = (1.0 - min_eos_mass) * weights
            scaled[eos_index] += min_eos_mass
            dist[allowed] = scaled
        else:
            dist[allowed] = weights
        dist /= dist.sum()
        rows[context] = dist

    lm = TabularLM(spec.vocab.size, order, rows, exact=True)
    logger.debug("Random exact LM | seed=%d | order=%d | contexts=%d", seed, order, len(lm))
    return lm


if __name__ == "__main__":
    import os

    from app._paths import TOY1_DIR
    from app.core import load_vocabulary
    from app.tokeniser import load_tokeniser

    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(name)s] %(levelname)s: %(message)s")
    vocab = load_vocabulary(os.path.join(TOY1_DIR, "vocab.tsv"), "bow")
    spec = load_tokeniser(os.path.join(TOY1_DIR, "tokeniser.tsv"), vocab)
    toy = load_tabular(os.path.join(TOY1_DIR, "lm.tsv"), vocab.size, order=2, exact=True, spec=spec)
    print(toy, np.exp(toy.next_distribution([])))
    print(random_exact_lm(0, spec, order=2))
