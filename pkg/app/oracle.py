# =============================================================
# WordProb — Enumeration Oracle
# =============================================================
# Ground truth brute-force untuk LM exact berukuran kecil:
# 1. Probabilitas event subword (interval tersertifikasi)
# 2. Massa prefix kata P(W ∘ L*) dan kalimat tepat P(W)
# 3. Word conditional sebagai quotient dua massa prefix
# 4. Cek ekuivalensi himpunan kata ↔ subword
# 5. Massa pada sequence unmapped
#
# Oracle TIDAK memakai kode formula di app/wordprob.py; hanya
# tipe core, akses LM, dan tokeniser sebagai model data.
# =============================================================

import itertools
import logging
import math
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core import LOG_ZERO, SubwordSequence, WordSequence
from app.errors import BudgetTooSmall, MissingMidMap, NotUniquelyDecodable, TokeniserError, ZeroContextMass
from app.lm import ConditionalLM
from app.tokeniser import DecoderState, TokeniserSpec, detokenise, tokenise_sequence

logger = logging.getLogger("WordProb.Oracle")

# ── Constants ──────────────────────────────────────────────────
DEFAULT_MAX_LEN = 40
DEFAULT_TOLERANCE = 1e-10


class Decision(Enum):
    IN = "in"
    OUT = "out"
    OPEN = "open"


# ================================================================
# BUDGET & INTERVAL
# ================================================================

@dataclass(frozen=True)
class EnumerationBudget:
    """
    Batas enumerasi.

    Attributes:
        max_len: Panjang maksimum sequence subword yang dijelajahi.
        min_eos_mass: Massa eos minimum per langkah (dari LM).
        tolerance: Lebar interval maksimum yang diterima.
        eos_stride: Setiap berapa langkah eos dijamin boleh muncul
                    (1 untuk LM yang mengizinkan eos di semua konteks).
    """
    max_len: int = DEFAULT_MAX_LEN
    min_eos_mass: float = 0.05
    tolerance: float = DEFAULT_TOLERANCE
    eos_stride: int = 1

    @property
    def residual_bound(self) -> float:
        """Batas a-priori massa yang belum berakhir di max_len."""
        return (1.0 - self.min_eos_mass) ** (self.max_len // max(self.eos_stride, 1))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: float, tolerance: float = 0.0) -> bool:
        return self.lo - tolerance <= value <= self.hi + tolerance

    @staticmethod
    def from_terms(terms: Iterable[float], tail: float) -> "Interval":
        lo = math.fsum(terms)
        return Interval(lo, lo + tail)

    def quotient(self, denominator: "Interval") -> "Interval":
        """Quotient konservatif (pembulatan ke luar), dipotong ke [0, 1]."""
        lo = math.nextafter(self.lo / denominator.hi, -math.inf) if denominator.hi > 0 else 0.0
        hi = math.nextafter(self.hi / denominator.lo, math.inf) if denominator.lo > 0 else math.inf
        return Interval(min(max(lo, 0.0), 1.0), min(hi, 1.0))


# ================================================================
# EVENTS
# ================================================================

class SubwordEvent(ABC):
    """
    Himpunan sequence subword lengkap.

    contains(ids): keanggotaan sequence lengkap (tanpa eos).
    classify(prefix): IN bila semua ekstensi lengkap anggota, OUT bila
    tidak ada, OPEN bila belum diputuskan.
    """

    @abstractmethod
    def contains(self, ids: SubwordSequence) -> bool:
        ...

    def classify(self, prefix: SubwordSequence) -> Decision:
        return Decision.OPEN


class _Always(SubwordEvent):
    def contains(self, ids):
        return True

    def classify(self, prefix):
        return Decision.IN

    def contains_words(self, words):
        return True


class _Never(SubwordEvent):
    def contains(self, ids):
        return False

    def classify(self, prefix):
        return Decision.OUT

    def contains_words(self, words):
        return False


class SubwordPrefixEvent(SubwordEvent):
    """prefix ∘ F ∘ V*; follow=None berarti F = V* (tanpa syarat)."""

    def __init__(self, prefix: Sequence[int], follow: Optional[Iterable[int]] = None, eos_id: Optional[int] = None):
        self.prefix = tuple(prefix)
        self.follow: Optional[FrozenSet[int]] = frozenset(follow) if follow is not None else None
        self.eos_id = eos_id

    def contains(self, ids):
        n = len(self.prefix)
        if tuple(ids[:n]) != self.prefix:
            return False
        if self.follow is None:
            return True
        if len(ids) == n:
            return self.eos_id in self.follow
        return ids[n] in self.follow

    def classify(self, prefix):
        n = len(self.prefix)
        if len(prefix) <= n:
            if self.prefix[:len(prefix)] != tuple(prefix):
                return Decision.OUT
            return Decision.IN if (len(prefix) == n and self.follow is None) else Decision.OPEN
        if tuple(prefix[:n]) != self.prefix:
            return Decision.OUT
        if self.follow is None or prefix[n] in self.follow:
            return Decision.IN
        return Decision.OUT


class UnionEvent(SubwordEvent):
    def __init__(self, *events: SubwordEvent):
        self.events = events

    def contains(self, ids):
        return any(e.contains(ids) for e in self.events)

    def classify(self, prefix):
        decisions = [e.classify(prefix) for e in self.events]
        if Decision.IN in decisions:
            return Decision.IN
        if all(d == Decision.OUT for d in decisions):
            return Decision.OUT
        return Decision.OPEN


class _WordEvent(SubwordEvent):
    def __init__(self, spec: TokeniserSpec, words: Sequence[str]):
        self.spec = spec
        self.words = tuple(words)

    def _decode(self, ids) -> Optional[WordSequence]:
        try:
            return detokenise(self.spec, ids)
        except TokeniserError:
            return None

    def contains(self, ids):
        words = self._decode(ids)
        return words is not None and self.contains_words(words)

    def _conflicts(self, branch_words: WordSequence) -> bool:
        common = min(len(branch_words), len(self.words))
        return branch_words[:common] != self.words[:common]


class WordPrefixEvent(_WordEvent):
    """Subword sequence yang decode ke W ∘ L*."""

    def contains_words(self, words):
        return tuple(words[:len(self.words)]) == self.words

    def classify(self, prefix):
        state = self.spec.decoder.run(prefix)
        if state.is_dead():
            return Decision.OUT
        k = len(self.words)
        if all(b.words[:k] == self.words for b in state.branches):
            return Decision.IN
        if all(self._conflicts(b.words) for b in state.branches):
            return Decision.OUT
        return Decision.OPEN


class WordExactEvent(_WordEvent):
    """Subword sequence yang decode tepat ke W."""

    def contains_words(self, words):
        return tuple(words) == self.words

    def classify(self, prefix):
        state = self.spec.decoder.run(prefix)
        if state.is_dead():
            return Decision.OUT
        k = len(self.words)
        if all(self._conflicts(b.words) or len(b.words) > k for b in state.branches):
            return Decision.OUT
        return Decision.OPEN


class UnmappedEvent(SubwordEvent):
    """Himpunan B: sequence yang bukan image dari kalimat mana pun."""

    def __init__(self, spec: TokeniserSpec):
        self.spec = spec

    def contains(self, ids):
        try:
            detokenise(self.spec, ids)
            return False
        except TokeniserError:
            return True

    def classify(self, prefix):
        return Decision.IN if self.spec.decoder.run(prefix).is_dead() else Decision.OPEN


def always() -> SubwordEvent:
    return _Always()


def never() -> SubwordEvent:
    return _Never()


def word_prefix_event(spec: TokeniserSpec, words: Sequence[str]) -> WordPrefixEvent:
    return WordPrefixEvent(spec, words)


def word_exact_event(spec: TokeniserSpec, words: Sequence[str]) -> WordExactEvent:
    return WordExactEvent(spec, words)


def subword_prefix_event(prefix: Sequence[int], follow: Optional[Iterable[int]] = None, eos_id: Optional[int] = None):
    return SubwordPrefixEvent(prefix, follow, eos_id)


def union_event(*events: SubwordEvent) -> UnionEvent:
    return UnionEvent(*events)


def unmapped_event(spec: TokeniserSpec) -> UnmappedEvent:
    return UnmappedEvent(spec)


# ================================================================
# EVENT PROBABILITY
# ================================================================

def _positive(dist: np.ndarray) -> List[int]:
    return [int(u) for u in np.flatnonzero(dist > LOG_ZERO)]


def _sum_event(lm: ConditionalLM, event: SubwordEvent, max_len: int, method: str) -> Tuple[List[float], float]:
    eos = lm.vocab_size
    inside: List[float] = []
    tail: List[float] = []
    stack: List[Tuple[SubwordSequence, float]] = [((), 0.0)]
    while stack:
        ids, lp = stack.pop()
        if method == "tree":
            decision = event.classify(ids)
            if decision == Decision.IN:
                inside.append(math.exp(lp))
                continue
            if decision == Decision.OUT:
                continue
        if len(ids) >= max_len:
            tail.append(math.exp(lp))
            continue
        dist = lm.next_distribution(ids)
        for u in _positive(dist):
            child = lp + float(dist[u])
            if u == eos:
                if event.contains(ids):
                    inside.append(math.exp(child))
            else:
                stack.append((ids + (u,), child))
    return inside, math.fsum(tail)


def enumerate_event_prob(
    lm: ConditionalLM,
    event: SubwordEvent,
    budget: EnumerationBudget,
    method: str = "tree",
) -> Interval:
    """
    P(event) sebagai interval [lo, lo + massa yang belum berakhir].

    method="dfs": jumlahkan semua sequence lengkap ≤ max_len.
    method="tree": prefix yang sudah diputuskan (IN/OUT) langsung
    di-collapse ke prefix probability-nya (butuh LM ternormalisasi).

    Raises:
        BudgetTooSmall: lebar interval ≥ tolerance.
    """
    if method not in ("tree", "dfs"):
        raise ValueError(f"method must be 'tree' or 'dfs', got {method!r}")
    inside, tail = _sum_event(lm, event, budget.max_len, method)
    if tail >= budget.tolerance and tail > 0.0:
        raise BudgetTooSmall(tail, budget.tolerance)
    return Interval.from_terms(inside, tail)


def unmapped_mass(lm: ConditionalLM, spec: TokeniserSpec, budget: EnumerationBudget) -> Interval:
    """Massa di himpunan B; tidak melempar walau residual lebar."""
    inside, tail = _sum_event(lm, unmapped_event(spec), budget.max_len, "tree")
    return Interval.from_terms(inside, tail)


# ================================================================
# WORD-PREFIX MASS TABLE
# ================================================================

@dataclass
class WordMassTable:
    """
    Massa P(W ∘ L*) dan P(W) untuk semua W sampai max_words kata.

    Interval W yang tidak pernah muncul = [0, tail].
    """
    max_words: int
    prefix_terms: Dict[WordSequence, List[float]] = field(default_factory=lambda: defaultdict(list))
    exact_terms: Dict[WordSequence, List[float]] = field(default_factory=lambda: defaultdict(list))
    unmapped_terms: List[float] = field(default_factory=list)
    tail: float = 0.0

    def prefix(self, words: Sequence[str]) -> Interval:
        return Interval.from_terms(self.prefix_terms.get(tuple(words), ()), self.tail)

    def exact(self, words: Sequence[str]) -> Interval:
        return Interval.from_terms(self.exact_terms.get(tuple(words), ()), self.tail)

    @property
    def unmapped(self) -> Interval:
        return Interval.from_terms(self.unmapped_terms, self.tail)

    def _denominator(self, context: Sequence[str]) -> Interval:
        den = self.prefix(context)
        if den.lo <= 0.0:
            raise ZeroContextMass(context)
        return den

    def conditional(self, context: Sequence[str], word: str) -> Interval:
        if len(context) + 1 > self.max_words:
            raise ValueError(f"table covers {self.max_words} words, asked for {len(context) + 1}")
        return self.prefix(tuple(context) + (word,)).quotient(self._denominator(context))

    def eos_event(self, context: Sequence[str]) -> Interval:
        return self.exact(context).quotient(self._denominator(context))


def _agreement(words: WordSequence, focus: WordSequence) -> int:
    """Panjang prefix bersama words dan focus."""
    k = 0
    for left, right in zip(words, focus):
        if left != right:
            break
        k += 1
    return k


def _consistent(words: WordSequence, focus: WordSequence) -> bool:
    return _agreement(words, focus) == min(len(words), len(focus))


def _divergence(state: DecoderState, focus: WordSequence) -> Optional[int]:
    """
    Panjang prefix focus yang dimiliki seluruh subtree, bila semua branch
    sudah menyimpang dari focus di posisi yang sama; None selainnya.
    """
    agreements = set()
    for branch in state.branches:
        if _consistent(branch.words, focus):
            return None
        agreements.add(_agreement(branch.words, focus))
    return agreements.pop() if len(agreements) == 1 else None


def word_prefix_masses(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    max_words: int,
    budget: EnumerationBudget,
    focus: Optional[Sequence[str]] = None,
) -> WordMassTable:
    """
    Satu traversal pohon prefix subword untuk semua massa prefix kata.

    Node di-collapse begitu semua branch decoder sepakat pada ≥ max_words
    kata pertama. focus membatasi traversal ke kalimat yang konsisten
    dengan W tertentu; subtree yang menyimpang hanya menyumbang ke prefix
    focus yang masih dimilikinya.

    Raises:
        BudgetTooSmall, NotUniquelyDecodable
    """
    table = WordMassTable(max_words)
    focus_words = tuple(focus) if focus is not None else None
    eos = spec.vocab.eos_id
    tail: List[float] = []
    stack: List[Tuple[SubwordSequence, float, DecoderState]] = [((), 0.0, spec.decoder.initial())]

    while stack:
        ids, lp, state = stack.pop()
        mass = math.exp(lp)
        shared = _divergence(state, focus_words) if focus_words is not None else None
        if shared is not None:
            for k in range(shared + 1):
                table.prefix_terms[focus_words[:k]].append(mass)
            continue
        committed = state.committed()
        if len(committed) >= max_words:
            for k in range(max_words + 1):
                table.prefix_terms[committed[:k]].append(mass)
            continue
        if len(ids) >= budget.max_len:
            tail.append(mass)
            continue

        dist = lm.next_distribution(ids)
        for u in _positive(dist):
            child_lp = lp + float(dist[u])
            if u == eos:
                completions = sorted(state.completions())
                if not completions:
                    table.unmapped_terms.append(math.exp(child_lp))
                    continue
                if len(completions) > 1:
                    raise NotUniquelyDecodable(completions[0], completions[1], ids)
                words = completions[0]
                for k in range(min(len(words), max_words) + 1):
                    table.prefix_terms[words[:k]].append(math.exp(child_lp))
                table.exact_terms[words].append(math.exp(child_lp))
                continue
            child = state.advance(u)
            if child.is_dead():
                table.unmapped_terms.append(math.exp(child_lp))
                continue
            stack.append((ids + (u,), child_lp, child))

    table.tail = math.fsum(tail)
    if table.tail >= budget.tolerance and table.tail > 0.0:
        raise BudgetTooSmall(table.tail, budget.tolerance)
    logger.debug("Word-prefix masses | words=%d | entries=%d | tail=%.3g", max_words, len(table.prefix_terms), table.tail)
    return table


def oracle_word_conditional(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    context: Sequence[str],
    word: str,
    budget: EnumerationBudget,
) -> Interval:
    """
    P(context ∘ word ∘ L*) / P(context ∘ L*) sebagai interval.

    Raises:
        BudgetTooSmall, ZeroContextMass
    """
    context = tuple(context)
    table = word_prefix_masses(lm, spec, len(context) + 1, budget, focus=context + (word,))
    return table.conditional(context, word)


def oracle_eos_event(lm: ConditionalLM, spec: TokeniserSpec, context: Sequence[str], budget: EnumerationBudget) -> Interval:
    """P(kalimat = context) / P(context ∘ L*)."""
    context = tuple(context)
    table = word_prefix_masses(lm, spec, len(context) + 1, budget, focus=context)
    return table.eos_event(context)


def oracle_event_quotient(
    lm: ConditionalLM,
    numerator: SubwordEvent,
    denominator: SubwordEvent,
    budget: EnumerationBudget,
) -> Interval:
    den = enumerate_event_prob(lm, denominator, budget)
    if den.lo <= 0.0:
        raise ZeroContextMass(())
    return enumerate_event_prob(lm, numerator, budget).quotient(den)


# ================================================================
# SET EQUIVALENCE
# ================================================================

@dataclass(frozen=True)
class Counterexample:
    direction: str          # "word→subword" / "subword→word"
    words: WordSequence
    ids: SubwordSequence


@dataclass
class EquivalenceReport:
    checked_words: int = 0
    checked_subwords: int = 0
    failures: List[Counterexample] = field(default_factory=list)

    @property
    def equivalent(self) -> bool:
        return not self.failures


def _word_sequences(spec: TokeniserSpec, max_len: int) -> Iterable[Tuple[WordSequence, SubwordSequence]]:
    """Semua kalimat yang tokenisasinya ≤ max_len subword."""
    frontier: List[WordSequence] = [()]
    while frontier:
        nxt: List[WordSequence] = []
        for words in frontier:
            try:
                ids = tokenise_sequence(spec, words)
            except MissingMidMap:
                ids = None
            if ids is not None and len(ids) <= max_len:
                yield words, ids
            for word in spec.lexicon:
                candidate = words + (word,)
                if sum(len(spec.word_map[w]) for w in candidate[:-1]) + min(
                    len(spec.word_map[word]), len(spec.mid_map.get(word, spec.word_map[word]))
                ) <= max_len:
                    nxt.append(candidate)
        frontier = nxt


def check_set_equivalence(
    spec: TokeniserSpec,
    word_event,
    subword_event: SubwordEvent,
    budget: EnumerationBudget,
) -> EquivalenceReport:
    """
    Verifikasi dua arah sampai budget.max_len subword:
    - setiap kalimat di word_event → tokenisasinya di subword_event
    - setiap sequence mapped di subword_event → decode-nya di word_event
    """
    report = EquivalenceReport()

    for words, ids in _word_sequences(spec, budget.max_len):
        report.checked_words += 1
        if word_event.contains_words(words) and not subword_event.contains(ids):
            report.failures.append(Counterexample("word→subword", words, ids))

    stack: List[Tuple[SubwordSequence, DecoderState]] = [((), spec.decoder.initial())]
    while stack:
        ids, state = stack.pop()
        completions = state.completions()
        if completions:
            report.checked_subwords += 1
            words = min(completions)
            if subword_event.contains(ids) and not word_event.contains_words(words):
                report.failures.append(Counterexample("subword→word", words, ids))
        if len(ids) >= budget.max_len:
            continue
        for u in sorted(state.allowed_next()):
            if u == spec.vocab.eos_id:
                continue
            child = state.advance(u)
            if not child.is_dead():
                stack.append((ids + (u,), child))

    report.failures.sort(key=lambda c: (c.direction, len(c.ids), c.ids))
    logger.info(
        "%s Set equivalence | words=%d | subwords=%d | failures=%d",
        "✓" if report.equivalent else "✗", report.checked_words, report.checked_subwords, len(report.failures),
    )
    return report
