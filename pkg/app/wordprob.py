# =============================================================
# WordProb — Word-Level Contextual Probabilities
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Prefix probability subword (chain rule)
# 2. Word conditional untuk tokeniser eow (tanpa koreksi)
# 3. Word conditional untuk tokeniser bow (fix1: rasio massa V̄_bow)
# 4. Boundary fix: kata final tanpa marker eow (fix2),
#    kata pertama tanpa marker bow (fix3)
# 5. Baseline "buggy" (produk subword tanpa koreksi)
# 6. Probabilitas sequence + scoring corpus + TSV I/O
#
# Pemilihan fix otomatis dari (scheme, posisi, flag) lewat
# word_conditional(); fix="none" memaksa baseline buggy.
# =============================================================

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core import LOG_ZERO, LogProb, Scheme, SubwordSequence, WordSequence, logsumexp, surprisal
from app.errors import (
    FirstWordNeedsFix3,
    MissingMidMap,
    NonEmptyContext,
    SchemeMismatch,
    TokeniserError,
    UnknownWord,
    UnsupportedRegime,
)
from app.lm import ConditionalLM
from app.report_writer import ReportWriter
from app.tokeniser import (
    Position,
    TokeniserSpec,
    position_of,
    tokenise_context,
    tokenise_sequence,
    tokenise_word,
)

logger = logging.getLogger("WordProb.WordProb")

# ── Constants ──────────────────────────────────────────────────
LN2 = math.log(2.0)
SCORED_HEADERS = [
    "sentence_idx", "word_idx", "word",
    "logp_buggy", "log_correction", "logp_fixed",
    "surprisal_buggy", "surprisal_fixed", "applied_fix",
]


class AppliedFix(str, Enum):
    NONE = "none"
    FIX1 = "fix1"
    FIX2 = "fix2"
    FIX3 = "fix3"


@dataclass(frozen=True)
class ScoredWord:
    """
    Hasil scoring satu kata dalam konteks.

    Attributes:
        word: Kata yang di-score.
        context_words: Kata-kata sebelumnya dalam kalimat yang sama.
        p_buggy: Produk subword tanpa koreksi (log).
        correction: p_fixed − p_buggy (log-ratio).
        p_fixed: Probabilitas kontekstual yang benar (log).
        applied_fix: none / fix1 / fix2 / fix3.
        sentence_idx, word_idx: Posisi di corpus.
    """
    word: str
    context_words: WordSequence
    p_buggy: LogProb
    correction: LogProb
    p_fixed: LogProb
    applied_fix: AppliedFix
    sentence_idx: int = 0
    word_idx: int = 0

    @property
    def surprisal_fixed(self) -> float:
        return surprisal(self.p_fixed)

    @property
    def surprisal_buggy(self) -> float:
        return surprisal(self.p_buggy)

    def at(self, sentence_idx: int, word_idx: int) -> "ScoredWord":
        return ScoredWord(
            self.word, self.context_words, self.p_buggy, self.correction,
            self.p_fixed, self.applied_fix, sentence_idx, word_idx,
        )


@dataclass
class CorpusScores:
    """Hasil score_corpus: kata ter-score + kalimat yang di-skip."""
    words: List[ScoredWord] = field(default_factory=list)
    failures: List[Tuple[int, TokeniserError]] = field(default_factory=list)


def _log_ratio(p_fixed: LogProb, p_buggy: LogProb) -> LogProb:
    if p_buggy == LOG_ZERO:
        return math.inf if p_fixed > LOG_ZERO else 0.0
    return p_fixed - p_buggy


def _require_scheme(spec: TokeniserSpec, scheme: Scheme):
    if spec.scheme != scheme:
        raise SchemeMismatch(scheme.value, spec.scheme.value)


def _require_word(spec: TokeniserSpec, word: str):
    if word not in spec.word_map:
        raise UnknownWord(word)


# ================================================================
# SUBWORD PRIMITIVES
# ================================================================

def prefix_logprob(lm: ConditionalLM, ids: Sequence[int], context: Sequence[int] = ()) -> LogProb:
    """
    Σ_t log p(s_t | context ∘ s_<t). Sequence kosong → 0.

    Berhenti lebih awal begitu salah satu faktor bernilai nol.
    """
    history = list(context)
    terms = []
    for u in ids:
        lp = float(lm.next_distribution(history)[u])
        if lp == LOG_ZERO:
            return LOG_ZERO
        terms.append(lp)
        history.append(u)
    return math.fsum(terms)


def continuation_mass(lm: ConditionalLM, context: Sequence[int], ids: np.ndarray) -> LogProb:
    """log Σ_{u ∈ ids} p(u | context)."""
    return logsumexp(lm.next_distribution(list(context))[ids])


# ================================================================
# WORD CONDITIONALS
# ================================================================

def word_conditional_eow(lm: ConditionalLM, spec: TokeniserSpec, context: Sequence[str], word: str) -> LogProb:
    """Tokeniser eow: produk subword kata, tanpa faktor koreksi."""
    _require_scheme(spec, Scheme.EOW)
    _require_word(spec, word)
    ctx = tokenise_context(spec, context, word)
    return prefix_logprob(lm, spec.word_map[word], ctx)


def word_conditional_bow(lm: ConditionalLM, spec: TokeniserSpec, context: Sequence[str], word: str) -> ScoredWord:
    """
    Tokeniser bow (fix1).

    correction = log Σ_{V̄_bow} p(u | ctx∘s^w) − log Σ_{V̄_bow} p(u | ctx)
    """
    _require_scheme(spec, Scheme.BOW)
    _require_word(spec, word)
    if not context and spec.unmarked_first:
        raise FirstWordNeedsFix3(word)

    ctx = tokenise_sequence(spec, context)
    s_w = spec.word_map[word]
    marked = spec.vocab.marked_with_eos
    p_buggy = prefix_logprob(lm, s_w, ctx)
    if p_buggy == LOG_ZERO:
        return ScoredWord(word, tuple(context), LOG_ZERO, 0.0, LOG_ZERO, AppliedFix.FIX1)

    numerator = continuation_mass(lm, ctx + s_w, marked)
    denominator = continuation_mass(lm, ctx, marked)
    correction = numerator - denominator
    return ScoredWord(word, tuple(context), p_buggy, correction, p_buggy + correction, AppliedFix.FIX1)


def bugfix_eow_final(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    context: Sequence[str],
    word: str,
    position: Position = Position.FINAL,
) -> ScoredWord:
    """
    Tokeniser eow dengan kata final tanpa marker (fix2).

    p_fixed = p(s_mid | ctx) · Σ_{V̄_!?} p(u | ctx∘s_mid) + p(s^w | ctx)

    Dua event disjoint dijumlahkan, bukan dikalikan. p_buggy adalah
    produk subword yang benar-benar teramati di posisi tersebut
    (bentuk mid bila FINAL, bentuk ter-mark selainnya).
    """
    _require_scheme(spec, Scheme.EOW)
    if spec.mark_final_word:
        raise UnsupportedRegime("final words are marked; use word_conditional_eow")
    _require_word(spec, word)
    if word not in spec.mid_map:
        raise MissingMidMap(word)

    ctx = tokenise_context(spec, context, word)
    s_w = spec.word_map[word]
    s_mid = spec.mid_map[word]

    p_mid = prefix_logprob(lm, s_mid, ctx)
    closing = continuation_mass(lm, ctx + s_mid, spec.vocab.punct_with_eos) if p_mid > LOG_ZERO else LOG_ZERO
    p_marked = prefix_logprob(lm, s_w, ctx)
    p_fixed = logsumexp([p_mid + closing, p_marked])

    p_buggy = p_mid if position == Position.FINAL else p_marked
    return ScoredWord(word, tuple(context), p_buggy, _log_ratio(p_fixed, p_buggy), p_fixed, AppliedFix.FIX2)


def bugfix_bow_first(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    word: str,
    context: Sequence[str] = (),
) -> ScoredWord:
    """
    Tokeniser bow dengan kata pertama tanpa marker (fix3).

    p_fixed = p(s_mid | ε) · Σ_{V̄_bow} p(u | s_mid) / Σ_{V̄_mid} p(u | ε)
    """
    _require_scheme(spec, Scheme.BOW)
    if context:
        raise NonEmptyContext(context)
    if spec.mark_first_word:
        raise UnsupportedRegime("first words are marked; use word_conditional_bow")
    _require_word(spec, word)
    if word not in spec.mid_map:
        raise MissingMidMap(word)

    s_mid = spec.mid_map[word]
    p_buggy = prefix_logprob(lm, s_mid)
    if p_buggy == LOG_ZERO:
        return ScoredWord(word, (), LOG_ZERO, 0.0, LOG_ZERO, AppliedFix.FIX3)

    numerator = continuation_mass(lm, s_mid, spec.vocab.marked_with_eos)
    denominator = continuation_mass(lm, (), spec.vocab.mid_with_eos)
    correction = numerator - denominator
    return ScoredWord(word, (), p_buggy, correction, p_buggy + correction, AppliedFix.FIX3)


def word_conditional_buggy(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    context: Sequence[str],
    word: str,
    position: Optional[Position] = None,
) -> LogProb:
    """
    Produk subword tanpa koreksi apa pun, untuk semua scheme.

    position=None → FIRST bila konteks kosong, MEDIAL selainnya.
    """
    if position is None:
        position = Position.FIRST if not context else Position.MEDIAL
    ctx = tokenise_context(spec, context, word)
    return prefix_logprob(lm, tokenise_word(spec, word, position), ctx)


def word_conditional(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    context: Sequence[str],
    word: str,
    fix: str = "auto",
    position: Optional[Position] = None,
) -> ScoredWord:
    """
    Satu titik dispatch untuk semua regime.

    Args:
        fix: "auto" → pilih fix dari (scheme, posisi, flag);
             "none" → baseline buggy (correction = 0).
        position: posisi teramati kata di kalimat (dipakai oleh
                  p_buggy regime fix2 dan oleh fix="none").

    Raises:
        UnsupportedRegime: bow dengan kata final tanpa marker.
    """
    if spec.scheme == Scheme.BOW and not spec.mark_final_word:
        raise UnsupportedRegime("bow tokeniser with unmarked final words is not supported")
    if fix not in ("auto", "none"):
        raise ValueError(f"fix must be 'auto' or 'none', got {fix!r}")

    if fix == "none":
        p = word_conditional_buggy(lm, spec, context, word, position)
        return ScoredWord(word, tuple(context), p, 0.0, p, AppliedFix.NONE)

    if spec.scheme == Scheme.BOW:
        if not context and spec.unmarked_first:
            return bugfix_bow_first(lm, spec, word)
        return word_conditional_bow(lm, spec, context, word)

    if spec.mark_final_word:
        p = word_conditional_eow(lm, spec, context, word)
        return ScoredWord(word, tuple(context), p, 0.0, p, AppliedFix.NONE)
    return bugfix_eow_final(lm, spec, context, word, position or Position.MEDIAL)


def eos_event_logprob(lm: ConditionalLM, spec: TokeniserSpec, context: Sequence[str]) -> LogProb:
    """
    log P(kalimat berakhir tepat setelah context | context).

    Mengikuti aturan boundary yang sama dengan word conditional.
    """
    vocab = spec.vocab
    eos = vocab.eos_id

    if spec.scheme == Scheme.BOW:
        ids = tokenise_sequence(spec, context)
        dist = lm.next_distribution(list(ids))
        support = vocab.mid_with_eos if (not context and spec.unmarked_first) else vocab.marked_with_eos
        if dist[eos] == LOG_ZERO:
            return LOG_ZERO
        return float(dist[eos]) - logsumexp(dist[support])

    if spec.mark_final_word or not context:
        ids = tokenise_sequence(spec, context)
        return float(lm.next_distribution(list(ids))[eos])

    closed = tokenise_sequence(spec, context)
    opened = tokenise_context(spec, context, None)
    p_closed = prefix_logprob(lm, closed)
    p_open = prefix_logprob(lm, opened)
    if p_closed == LOG_ZERO:
        return LOG_ZERO
    dist = lm.next_distribution(list(closed))
    numerator = p_closed + float(dist[eos])
    denominator = logsumexp([p_open, p_closed + logsumexp(dist[vocab.punct_with_eos])])
    return numerator - denominator


def sequence_logprob(lm: ConditionalLM, spec: TokeniserSpec, words: Sequence[str]) -> LogProb:
    """log p(words) = prefix probability + log p(eos | seluruh subword)."""
    ids = tokenise_sequence(spec, words)
    p = prefix_logprob(lm, ids)
    if p == LOG_ZERO:
        return LOG_ZERO
    return p + float(lm.next_distribution(list(ids))[spec.vocab.eos_id])


# ================================================================
# CORPUS SCORING
# ================================================================

def score_sentence(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    words: Sequence[str],
    sentence_idx: int = 0,
    fix: str = "auto",
) -> List[ScoredWord]:
    """Score setiap kata kalimat; konteks tidak melewati batas kalimat."""
    words = tuple(words)
    tokenise_sequence(spec, words)
    scored = []
    for index, word in enumerate(words):
        position = position_of(spec, words, index)
        record = word_conditional(lm, spec, words[:index], word, fix=fix, position=position)
        scored.append(record.at(sentence_idx, index))
    return scored


def score_corpus(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    sentences: Sequence[Sequence[str]],
    fix: str = "auto",
    workers: int = 1,
) -> CorpusScores:
    """
    Score seluruh corpus, urutan dipertahankan.

    Kalimat dengan kata di luar lexicon dicatat di failures dan
    di-skip; error backend tetap dilempar.
    """
    def run(item):
        sentence_idx, words = item
        try:
            return sentence_idx, score_sentence(lm, spec, words, sentence_idx, fix), None
        except TokeniserError as e:
            return sentence_idx, [], e

    items = list(enumerate(sentences))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="WordProb-Score") as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(item) for item in items]

    result = CorpusScores()
    for sentence_idx, scored, error in outcomes:
        if error is not None:
            logger.warning("⚠ Sentence %d skipped: %s", sentence_idx, error)
            result.failures.append((sentence_idx, error))
        result.words.extend(scored)

    logger.info(
        "✓ Corpus scored | sentences=%d | words=%d | skipped=%d",
        len(items), len(result.words), len(result.failures),
    )
    return result


# ================================================================
# TSV I/O
# ================================================================

def write_scored(path: str, scored: Sequence[ScoredWord], bits: bool = False) -> ReportWriter:
    """Tulis ScoredWord TSV; bits=True mengonversi kolom surprisal ke bit."""
    scale = 1.0 / LN2 if bits else 1.0
    writer = ReportWriter(path, SCORED_HEADERS)
    writer.write_rows(
        [
            r.sentence_idx, r.word_idx, r.word,
            r.p_buggy, r.correction, r.p_fixed,
            r.surprisal_buggy * scale, r.surprisal_fixed * scale,
            r.applied_fix,
        ]
        for r in scored
    )
    return writer


def read_scored(path: str) -> pd.DataFrame:
    """Baca ScoredWord TSV ke DataFrame (kolom sesuai SCORED_HEADERS)."""
    frame = pd.read_csv(
        path,
        sep="\t",
        dtype={"sentence_idx": int, "word_idx": int, "word": str, "applied_fix": str},
        keep_default_na=False,
    )
    missing = [c for c in SCORED_HEADERS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    for column in ("logp_buggy", "log_correction", "logp_fixed", "surprisal_buggy", "surprisal_fixed"):
        frame[column] = pd.to_numeric(frame[column])
    return frame
