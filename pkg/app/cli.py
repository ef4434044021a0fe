# =============================================================
# WordProb — Command-Line Interface
# =============================================================
# Subcommand:
#   score            corpus → ScoredWord TSV
#   oracle-check     formula vs enumerasi (LM tabular exact)
#   analyze-rt       Δ_llh buggy vs fixed atas reading time
#   analyze-lengths  korelasi Spearman panjang kata
#   validate         cek vocab + tokeniser + LM
#
# Exit code: 0 sukses, 1 gagal, 2 sukses parsial (kalimat di-skip).
# Semua error WordProbError / OSError ditangkap di satu handler.
# =============================================================

import argparse
import contextlib
import logging
import os
import sys
from typing import Iterator, List, Optional, Sequence, Tuple

from app._paths import DEFAULT_CONFIG_PATH
from app.analysis import (
    BASELINE_PREDICTORS,
    DEFAULT_FOLDS,
    DEFAULT_PERMUTATIONS,
    SURPRISAL_PREDICTORS,
    build_rt_frame,
    compare_buggy_vs_fixed,
    correlate_lengths,
    lexicon_stats,
    read_counts,
    write_comparison,
    write_correlations,
)
from app.config import RunConfig, load_config, save_effective_config
from app.core import load_vocabulary
from app.errors import ConfigError, WordProbError
from app.lm import ConditionalLM, RemoteLM, TabularLM, load_tabular
from app.oracle import EnumerationBudget, unmapped_mass
from app.oracle_suite import run_suite, write_suite
from app.tokeniser import TokeniserSpec, certify_decodability, load_tokeniser, pretokenise
from app.wordprob import read_scored, score_corpus, write_scored

logger = logging.getLogger("WordProb.CLI")

# ── Exit codes ─────────────────────────────────────────────────
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2

FORMULAS = {"fixed": "auto", "buggy": "none"}


# ================================================================
# COMPONENT LOADING
# ================================================================

def load_spec(config: RunConfig) -> TokeniserSpec:
    vocab = load_vocabulary(config.vocab, config.scheme, config.punct_ids)
    spec = load_tokeniser(config.tokeniser, vocab, config.mark_first_word, config.mark_final_word)
    return spec


@contextlib.contextmanager
def open_lm(config: RunConfig, spec: TokeniserSpec) -> Iterator[ConditionalLM]:
    """LM tabular langsung; backend eksternal dibuka lalu ditutup otomatis."""
    if config.tabular_path is not None:
        yield load_tabular(config.tabular_path, spec.vocab.size, order=config.lm_order, exact=config.exact, spec=spec)
        return
    with RemoteLM(config.endpoint, spec.vocab.size, timeout=config.backend_timeout, exact=config.exact) as lm:
        yield lm


def read_corpus(path: str, spec: TokeniserSpec) -> List[Tuple[str, ...]]:
    """Satu kalimat per baris; baris kosong dilewati."""
    with open(path, "r", encoding="utf-8") as f:
        return [pretokenise(line, spec.rules) for line in f if line.strip()]


# ================================================================
# SUBCOMMANDS
# ================================================================

def cmd_score(config: RunConfig, args: argparse.Namespace) -> int:
    spec = load_spec(config)
    sentences = read_corpus(args.corpus, spec)
    with open_lm(config, spec) as lm:
        result = score_corpus(lm, spec, sentences, fix=FORMULAS[args.formula], workers=args.workers)

    save_effective_config(config)
    writer = write_scored(config.output_path(args.output), result.words, bits=config.bits)
    print(f"{writer.stats['rows_written']} words scored → {writer.path}")
    if result.failures:
        for sentence_idx, error in result.failures:
            print(f"  skipped sentence {sentence_idx}: {error}", file=sys.stderr)
        print(f"{len(result.failures)} sentence(s) skipped", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_oracle_check(config: RunConfig, args: argparse.Namespace) -> int:
    if config.tabular_path is None:
        raise ConfigError("oracle-check needs a tabular LM", config.source)
    spec = load_spec(config)
    lm: TabularLM = load_tabular(config.tabular_path, spec.vocab.size, order=config.lm_order, exact=True, spec=spec)
    budget = EnumerationBudget(
        max_len=args.max_len,
        min_eos_mass=lm.min_eos_mass(),
        tolerance=config.tolerance,
    )
    cases = run_suite(lm, spec, budget, args.max_context_words, fix=FORMULAS[args.formula])

    save_effective_config(config)
    writer = write_suite(config.output_path(args.output), cases)
    failed = [c.case_id for c in cases if not c.passed]
    print(f"{len(cases)} cases, {len(failed)} failed → {writer.path}")
    if failed:
        for case in failed:
            print(f"  FAIL {case}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_analyze_rt(config: RunConfig, args: argparse.Namespace) -> int:
    counts = read_counts(args.counts)
    scored_fixed = read_scored(args.scored)
    scored_buggy = read_scored(args.scored_buggy) if args.scored_buggy else scored_fixed
    frame_fixed = build_rt_frame(args.rt, scored_fixed, counts, variant="fixed")
    frame_buggy = build_rt_frame(args.rt, scored_buggy, counts, variant="buggy")
    report = compare_buggy_vs_fixed(
        frame_buggy,
        frame_fixed,
        BASELINE_PREDICTORS,
        SURPRISAL_PREDICTORS,
        folds=args.folds,
        seed=config.seed,
        n_perm=args.permutations,
        model=args.model or config.model_name,
        dataset=args.dataset or config.dataset_name,
    )

    save_effective_config(config)
    writer = write_comparison(config.output_path(args.output), [report])
    print(
        f"Δ_llh fixed={report.fixed:.6g} buggy={report.buggy:.6g} "
        f"improvement={report.improvement:.6g} p={report.p_value:.4g} → {writer.path}"
    )
    return EXIT_OK


def cmd_analyze_lengths(config: RunConfig, args: argparse.Namespace) -> int:
    stats_frame = lexicon_stats(read_scored(args.scored), read_counts(args.counts))
    rows = correlate_lengths(stats_frame)

    save_effective_config(config)
    writer = write_correlations(config.output_path(args.output), rows)
    for row in rows:
        detail = row.error or f"{row.correlation:.4f}"
        print(f"{row.hypothesis:<10} {row.surprisal:<8} {detail}")
    print(f"→ {writer.path}")
    return EXIT_OK


def cmd_validate(config: RunConfig, args: argparse.Namespace) -> int:
    spec = load_spec(config).validate()
    certificate = certify_decodability(spec, max_words=args.max_words)
    print(f"vocabulary: {spec.vocab.size} subwords, scheme={spec.scheme.value}")
    print(f"tokeniser: {len(spec.lexicon)} words, decodability={certificate.kind}")
    if certificate.witness is not None:
        print(
            f"  witness {list(certificate.witness)} ({certificate.word!r}): "
            f"confirmed by {certificate.confirming_next}, diverted by {certificate.diverting_next}"
        )
    with open_lm(config, spec) as lm:
        if isinstance(lm, TabularLM):
            print(f"lm: tabular, order={lm.order}, contexts={len(lm)}, min eos mass={lm.min_eos_mass():.3g}")
            if config.exact:
                budget = EnumerationBudget(max_len=args.max_len, min_eos_mass=lm.min_eos_mass())
                mass = unmapped_mass(lm, spec, budget)
                print(f"  unmapped mass ∈ [{mass.lo:.3g}, {mass.hi:.3g}]")
        else:
            lm.next_distribution([])
            print(f"lm: backend {config.endpoint} reachable")
    return EXIT_OK


# ================================================================
# ARGUMENT PARSER
# ================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wordprob", description="Word-level probabilities from subword language models")
    parser.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="run configuration JSON")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tolerance", type=float, default=None)
    parser.add_argument("--out-dir", dest="out_dir", default=None)
    parser.add_argument("--bits", action="store_const", const=True, default=None, help="report surprisal in bits")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    score = sub.add_parser("score", help="score every word of a corpus")
    score.add_argument("corpus", help="UTF-8 text, one sentence per line")
    score.add_argument("--formula", choices=sorted(FORMULAS), default="fixed")
    score.add_argument("--workers", type=int, default=1)
    score.add_argument("--output", default="scored.tsv")
    score.set_defaults(handler=cmd_score)

    oracle = sub.add_parser("oracle-check", help="compare formulas against exhaustive enumeration")
    oracle.add_argument("--max-len", dest="max_len", type=int, default=40)
    oracle.add_argument("--max-context-words", dest="max_context_words", type=int, default=2)
    oracle.add_argument("--formula", choices=sorted(FORMULAS), default="fixed")
    oracle.add_argument("--output", default="oracle_check.tsv")
    oracle.set_defaults(handler=cmd_oracle_check)

    rt = sub.add_parser("analyze-rt", help="Δ_llh of buggy vs fixed surprisal over reading times")
    rt.add_argument("rt", help="CSV with word,avg_rt,sentence_idx,word_idx")
    rt.add_argument("scored", help="ScoredWord TSV (fixed surprisal, and buggy unless --scored-buggy)")
    rt.add_argument("--scored-buggy", dest="scored_buggy", default=None)
    rt.add_argument("--counts", required=True, help="unigram counts TSV word<TAB>count")
    rt.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    rt.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
    rt.add_argument("--model", default=None)
    rt.add_argument("--dataset", default=None)
    rt.add_argument("--output", default="rt_comparison.tsv")
    rt.set_defaults(handler=cmd_analyze_rt)

    lengths = sub.add_parser("analyze-lengths", help="Spearman correlations with word length")
    lengths.add_argument("scored", help="ScoredWord TSV")
    lengths.add_argument("counts", help="unigram counts TSV word<TAB>count")
    lengths.add_argument("--output", default="length_correlations.tsv")
    lengths.set_defaults(handler=cmd_analyze_lengths)

    validate = sub.add_parser("validate", help="check vocabulary, tokeniser and LM")
    validate.add_argument("--max-words", dest="max_words", type=int, default=3)
    validate.add_argument("--max-len", dest="max_len", type=int, default=12)
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; mengembalikan exit code (tidak memanggil sys.exit)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose and not os.getenv("WORDPROB_LOG_LEVEL"):
        logging.getLogger("WordProb").setLevel(logging.DEBUG)

    try:
        overrides = {"seed": args.seed, "tolerance": args.tolerance, "out_dir": args.out_dir, "bits": args.bits}
        config = load_config(args.config, overrides)
        return args.handler(config, args)
    except (WordProbError, OSError) as e:
        logger.error("✗ %s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception:
        logger.exception("✗ %s crashed", args.command)
        return EXIT_FAILURE
