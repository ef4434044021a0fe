# =============================================================
# WordProb — Oracle Suite (formula vs enumeration)
# =============================================================
# Bandingkan setiap nilai formula app/wordprob.py dengan interval
# oracle hasil enumerasi:
# - Semua pasangan (konteks ≤ k kata, kata) di lexicon
# - Event eos per konteks
#
# Satu-satunya tempat yang mengimpor wordprob DAN oracle; oracle
# sendiri tetap bebas dari kode formula.
# =============================================================

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

from app.core import Scheme, WordSequence, to_linear
from app.errors import MissingMidMap, ZeroContextMass
from app.lm import ConditionalLM
from app.oracle import (
    EnumerationBudget,
    Interval,
    oracle_event_quotient,
    subword_prefix_event,
    union_event,
    word_prefix_masses,
)
from app.report_writer import ReportWriter
from app.tokeniser import TokeniserSpec, tokenise_context
from app.wordprob import eos_event_logprob, word_conditional

logger = logging.getLogger("WordProb.Oracle")

# ── Constants ──────────────────────────────────────────────────
EOS_LABEL = "<eos>"
SUITE_HEADERS = ["case_id", "formula", "oracle_lo", "oracle_hi", "pass"]


@dataclass(frozen=True)
class SuiteCase:
    case_id: str
    formula: float
    oracle: Interval
    passed: bool

    def row(self) -> list:
        return [self.case_id, self.formula, self.oracle.lo, self.oracle.hi, self.passed]


def case_id(context: Sequence[str], target: str) -> str:
    """"a ac→b", "ε→a", "a→<eos>"."""
    return "%s→%s" % (" ".join(context) if context else "ε", target)


def formula_value(lm: ConditionalLM, spec: TokeniserSpec, context: WordSequence, word: str, fix: str = "auto") -> float:
    """
    p(word | context) dari formula, dalam ruang linear.

    Kata tanpa bentuk unmarked tidak bisa menjadi kata pertama bila
    kata pertama tidak di-mark, jadi nilainya 0 di konteks kosong.
    """
    try:
        return to_linear(word_conditional(lm, spec, context, word, fix=fix).p_fixed)
    except MissingMidMap:
        if context:
            raise
        return 0.0


def _fix2_subword_quotient(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    context: WordSequence,
    word: str,
    budget: EnumerationBudget,
) -> Interval:
    """
    Event subword yang dijumlahkan fix2 pada konteks non-kosong:
    ctx∘s^w∘V* ∪ ctx∘s_mid∘V̄_!?∘V*, dibagi ctx∘V*.
    """
    ctx = tokenise_context(spec, context, word)
    eos = spec.vocab.eos_id
    closing = set(spec.vocab.punct_ids) | {eos}
    numerator = union_event(
        subword_prefix_event(ctx + spec.word_map[word]),
        subword_prefix_event(ctx + spec.mid_map[word], follow=closing, eos_id=eos),
    )
    return oracle_event_quotient(lm, numerator, subword_prefix_event(ctx), budget)


def run_suite(
    lm: ConditionalLM,
    spec: TokeniserSpec,
    budget: EnumerationBudget,
    max_context_words: int = 2,
    fix: str = "auto",
) -> List[SuiteCase]:
    """
    Jalankan seluruh case formula-vs-oracle.

    Konteks dengan massa nol dilewati (conditional tidak terdefinisi).

    Raises:
        BudgetTooSmall: budget tidak cukup untuk tolerance.
    """
    table = word_prefix_masses(lm, spec, max_context_words + 1, budget)
    fix2_contexts = spec.scheme == Scheme.EOW and spec.unmarked_final
    cases: List[SuiteCase] = []

    for length in range(max_context_words + 1):
        for context in itertools.product(spec.lexicon, repeat=length):
            if table.prefix(context).lo <= 0.0:
                continue

            for word in spec.lexicon:
                formula = formula_value(lm, spec, context, word, fix)
                try:
                    if fix2_contexts and context:
                        oracle = _fix2_subword_quotient(lm, spec, context, word, budget)
                    else:
                        oracle = table.conditional(context, word)
                except ZeroContextMass:
                    logger.debug("Case %s skipped: zero subword context mass", case_id(context, word))
                    continue
                passed = oracle.contains(formula, budget.tolerance)
                cases.append(SuiteCase(case_id(context, word), formula, oracle, passed))

            formula = to_linear(eos_event_logprob(lm, spec, context))
            oracle = table.eos_event(context)
            cases.append(SuiteCase(case_id(context, EOS_LABEL), formula, oracle, oracle.contains(formula, budget.tolerance)))

    failed = [c.case_id for c in cases if not c.passed]
    if failed:
        logger.warning("✗ Oracle suite | cases=%d | failed=%d | first=%s", len(cases), len(failed), failed[:5])
    else:
        logger.info("✓ Oracle suite | cases=%d | all inside oracle intervals", len(cases))
    return cases


def write_suite(path: str, cases: Sequence[SuiteCase]) -> ReportWriter:
    writer = ReportWriter(path, SUITE_HEADERS)
    writer.write_rows(case.row() for case in cases)
    return writer


def normalisation_gap(lm: ConditionalLM, spec: TokeniserSpec, context: Sequence[str], fix: str = "auto") -> float:
    """1 − (Σ_w p(w | context) + p(eos | context)), dalam ruang linear."""
    total = math.fsum(formula_value(lm, spec, tuple(context), word, fix) for word in spec.lexicon)
    return 1.0 - (total + to_linear(eos_event_logprob(lm, spec, context)))
