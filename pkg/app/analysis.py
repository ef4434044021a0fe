# =============================================================
# WordProb — Psycholinguistic Analyses
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Reading time: frame prediktor (spillover 3 kata), OLS Gaussian,
#    Δ_llh cross-validated, paired permutation test, null band
# 2. Panjang kata: statistik lexicon (unigram, E[h], E[h²]/E[h])
#    dan korelasi Spearman terhadap panjang kata
# 3. Reader/writer TSV untuk input dan tabel hasil
#
# Semua surprisal dalam nats. Semua randomness lewat
# numpy.random.default_rng(seed) → hasil deterministik.
# =============================================================

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from app.core import surprisal
from app.errors import (
    AnalysisError,
    DegenerateInput,
    EmptyCorpus,
    LengthMismatch,
    MisalignedFrames,
    NotEnoughObservations,
    SingularDesign,
)
from app.report_writer import ReportWriter
from app.wordprob import ScoredWord, read_scored

logger = logging.getLogger("WordProb.Analysis")

__all__ = [
    "surprisal", "lexicon_stats", "spearman", "fit_linear", "delta_llh",
    "paired_permutation_test", "compare_buggy_vs_fixed", "build_rt_frame",
    "null_band", "correlate_lengths",
]

# ── Constants ──────────────────────────────────────────────────
VARIANCE_FLOOR = 1e-12
SPILLOVER = 3
EXACT_PERMUTATION_LIMIT = 12      # n ≤ ini → enumerasi semua 2^n sign flip
DEFAULT_PERMUTATIONS = 10_000
DEFAULT_FOLDS = 10
RT_KEYS = ["sentence_idx", "word_idx"]

BASE_COLUMNS = ["length", "log_freq"]
BASELINE_PREDICTORS = BASE_COLUMNS + [
    f"{column}_prev{k}" for k in range(1, SPILLOVER + 1) for column in BASE_COLUMNS
]
SURPRISAL_PREDICTORS = ["surprisal"] + [f"surprisal_prev{k}" for k in range(1, SPILLOVER + 1)]

COMPARISON_HEADERS = ["model", "dataset", "improvement", "fixed", "buggy", "p_value", "n"]
CORRELATION_HEADERS = ["hypothesis", "surprisal", "spearman", "n", "error"]

ScoredInput = Union[pd.DataFrame, Sequence[ScoredWord], str]


# ================================================================
# INPUT
# ================================================================

def read_counts(path: str) -> Dict[str, int]:
    """Unigram counts TSV `word<TAB>count` (tanpa header)."""
    frame = pd.read_csv(
        path, sep="\t", header=None, names=["word", "count"],
        dtype={"word": str, "count": int}, keep_default_na=False, quoting=3,
    )
    if (frame["count"] < 0).any():
        raise AnalysisError(f"{path}: negative unigram count")
    return dict(zip(frame["word"], frame["count"]))


def read_rt(path: str) -> pd.DataFrame:
    """Reading-time CSV dengan header `word,avg_rt,sentence_idx,word_idx`."""
    frame = pd.read_csv(
        path, dtype={"word": str, "avg_rt": float, "sentence_idx": int, "word_idx": int},
        keep_default_na=False,
    )
    missing = [c for c in ("word", "avg_rt", *RT_KEYS) if c not in frame.columns]
    if missing:
        raise AnalysisError(f"{path}: missing columns {missing}")
    return frame


def _as_scored_frame(scored: ScoredInput) -> pd.DataFrame:
    if isinstance(scored, str):
        return read_scored(scored)
    if isinstance(scored, pd.DataFrame):
        return scored
    return pd.DataFrame(
        {
            "sentence_idx": [r.sentence_idx for r in scored],
            "word_idx": [r.word_idx for r in scored],
            "word": [r.word for r in scored],
            "surprisal_buggy": [r.surprisal_buggy for r in scored],
            "surprisal_fixed": [r.surprisal_fixed for r in scored],
        }
    )


# ================================================================
# LEXICON STATISTICS (panjang kata)
# ================================================================

def lexicon_stats(scored: ScoredInput, counts: Mapping[str, int]) -> pd.DataFrame:
    """
    Statistik per word type.

    Kolom: length, token_count, unigram_surprisal, lalu untuk
    variant ∈ {buggy, fixed}: mean_surprisal_<variant> = E[h] dan
    surprisal_ratio_<variant> = E[h²] / E[h].

    Word dengan count nol / tidak ada di counts → unigram_surprisal = inf.

    Raises:
        EmptyCorpus: scored kosong.
    """
    frame = _as_scored_frame(scored)
    if frame.empty:
        raise EmptyCorpus("no scored words")

    total = float(sum(counts.values()))
    grouped = frame.groupby("word", sort=True)
    result = pd.DataFrame(index=pd.Index(sorted(grouped.groups), name="word"))
    result["length"] = [len(w) for w in result.index]
    result["token_count"] = grouped.size()
    result["unigram_surprisal"] = [
        surprisal(math.log(counts[w] / total)) if total > 0 and counts.get(w, 0) > 0 else math.inf
        for w in result.index
    ]

    for variant in ("buggy", "fixed"):
        h = frame[f"surprisal_{variant}"]
        mean_h = h.groupby(frame["word"]).mean()
        mean_h2 = (h * h).groupby(frame["word"]).mean()
        ratio = (mean_h2 / mean_h).where(mean_h > 0, 0.0)
        result[f"mean_surprisal_{variant}"] = mean_h
        result[f"surprisal_ratio_{variant}"] = ratio

    logger.info("✓ Lexicon stats | types=%d | tokens=%d", len(result), len(frame))
    return result


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Korelasi rank Spearman (tie → average rank).

    Raises:
        LengthMismatch, NotEnoughObservations (< 3), DegenerateInput (vektor konstan)
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(len(x), len(y))
    if len(x) < 3:
        raise NotEnoughObservations(3, len(x))
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("spearman on a constant vector")
    return float(stats.spearmanr(x, y)[0])


@dataclass(frozen=True)
class CorrelationRow:
    hypothesis: str          # zipf / cch_mean / cch_ratio
    surprisal: str           # unigram / buggy / fixed
    correlation: float
    n: int
    error: str = ""

    def row(self) -> list:
        return [self.hypothesis, self.surprisal, self.correlation, self.n, self.error]


def correlate_lengths(stats_frame: pd.DataFrame) -> List[CorrelationRow]:
    """
    Lima korelasi terhadap panjang kata: Zipf (unigram), lalu E[h]
    dan E[h²]/E[h] untuk surprisal buggy dan fixed.

    Error per baris (input konstan, terlalu sedikit type) dicatat di
    kolom error, tidak menghentikan baris lain.
    """
    plan = [
        ("zipf", "unigram", "unigram_surprisal"),
        ("cch_mean", "buggy", "mean_surprisal_buggy"),
        ("cch_mean", "fixed", "mean_surprisal_fixed"),
        ("cch_ratio", "buggy", "surprisal_ratio_buggy"),
        ("cch_ratio", "fixed", "surprisal_ratio_fixed"),
    ]
    lengths = stats_frame["length"].to_numpy(dtype=float)
    rows = []
    for hypothesis, variant, column in plan:
        try:
            rho = spearman(stats_frame[column].to_numpy(dtype=float), lengths)
            rows.append(CorrelationRow(hypothesis, variant, rho, len(lengths)))
        except (DegenerateInput, NotEnoughObservations) as e:
            logger.warning("⚠ Correlation %s/%s undefined: %s", hypothesis, variant, e)
            rows.append(CorrelationRow(hypothesis, variant, math.nan, len(lengths), str(e)))
    return rows


# ================================================================
# LINEAR REGRESSION (Gaussian OLS)
# ================================================================

@dataclass(frozen=True)
class LinearFit:
    """
    OLS dengan intercept. coefficients[0] = intercept.

    variance adalah ML variance (MSE training), di-floor VARIANCE_FLOOR.
    """
    predictors: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    variance: float
    llh: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.coefficients[0] + X @ self.coefficients[1:]

    def loglik(self, X: np.ndarray, y: np.ndarray) -> float:
        """Gaussian log-likelihood data (X, y) dengan variance hasil fit."""
        residuals = y - self.predict(X)
        n = len(y)
        return float(
            -0.5 * n * math.log(2.0 * math.pi * self.variance)
            - float(residuals @ residuals) / (2.0 * self.variance)
        )


def _design(frame: pd.DataFrame, predictors: Sequence[str]) -> np.ndarray:
    missing = [p for p in predictors if p not in frame.columns]
    if missing:
        raise AnalysisError(f"frame is missing predictor columns {missing}")
    return frame[list(predictors)].to_numpy(dtype=float).reshape(len(frame), len(predictors))


def _fit_arrays(X: np.ndarray, y: np.ndarray, predictors: Sequence[str]) -> LinearFit:
    n, k = X.shape
    if n < k + 2:
        raise NotEnoughObservations(k + 2, n)
    design = np.column_stack([np.ones(n), X])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesign(f"design matrix with predictors {list(predictors)} is rank deficient")

    beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ beta
    rss = float(residuals @ residuals)
    variance = max(rss / n, VARIANCE_FLOOR)
    unbiased = max(rss / (n - k - 1), VARIANCE_FLOOR)
    covariance = unbiased * np.linalg.inv(design.T @ design)
    standard_errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))

    fit = LinearFit(tuple(predictors), beta, standard_errors, variance, 0.0)
    return LinearFit(fit.predictors, beta, standard_errors, variance, fit.loglik(X, y))


def fit_linear(frame: pd.DataFrame, predictors: Sequence[str], response: str = "avg_rt") -> LinearFit:
    """
    Raises:
        NotEnoughObservations: < len(predictors) + 2 baris.
        SingularDesign: kolom prediktor linear dependen.
    """
    return _fit_arrays(_design(frame, predictors), frame[response].to_numpy(dtype=float), predictors)


# ================================================================
# Δ_llh (cross-validated)
# ================================================================

@dataclass(frozen=True)
class DeltaLLH:
    """
    pointwise: Δ log-likelihood held-out per observasi (urutan frame).
    per_fold: rata-rata pointwise per fold.
    """
    pointwise: np.ndarray
    per_fold: np.ndarray
    folds: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.pointwise))


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Label fold 0..folds-1 per index; ukuran fold berbeda paling banyak 1."""
    if folds < 2:
        raise ValueError(f"folds must be ≥ 2, got {folds}")
    if folds > n:
        raise NotEnoughObservations(folds, n)
    rng = np.random.default_rng(seed)
    labels = np.empty(n, dtype=int)
    labels[rng.permutation(n)] = np.arange(n) % folds
    return labels


def _pointwise_loglik(fit: LinearFit, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    residuals = y - fit.predict(X)
    return -0.5 * np.log(2.0 * math.pi * fit.variance) - residuals ** 2 / (2.0 * fit.variance)


def delta_llh(
    frame: pd.DataFrame,
    baseline_predictors: Sequence[str],
    target_predictor: Union[str, Sequence[str]],
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    response: str = "avg_rt",
) -> DeltaLLH:
    """
    Δ_llh = llh(model + target) − llh(model baseline) di data held-out.

    Args:
        target_predictor: satu kolom atau list kolom (mis. surprisal + spillover).

    Raises:
        NotEnoughObservations: folds > jumlah baris atau fold training terlalu kecil.
        SingularDesign
    """
    targets = [target_predictor] if isinstance(target_predictor, str) else list(target_predictor)
    baseline = list(baseline_predictors)
    full = baseline + targets

    X_base = _design(frame, baseline)
    X_full = _design(frame, full)
    y = frame[response].to_numpy(dtype=float)
    labels = fold_assignment(len(frame), folds, seed)

    pointwise = np.zeros(len(frame))
    per_fold = np.zeros(folds)
    for fold in range(folds):
        test = labels == fold
        train = ~test
        fit_base = _fit_arrays(X_base[train], y[train], baseline)
        fit_full = _fit_arrays(X_full[train], y[train], full)
        gain = _pointwise_loglik(fit_full, X_full[test], y[test]) - _pointwise_loglik(fit_base, X_base[test], y[test])
        pointwise[test] = gain
        per_fold[fold] = float(np.mean(gain))

    logger.debug("Δ_llh | target=%s | folds=%d | mean=%.6g", targets, folds, float(np.mean(pointwise)))
    return DeltaLLH(pointwise, per_fold, labels)


def paired_permutation_test(
    deltas_a: Sequence[float],
    deltas_b: Sequence[float],
    n_perm: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> float:
    """
    p-value dua sisi untuk mean(a − b) dengan sign-flip.

    n ≤ EXACT_PERMUTATION_LIMIT → enumerasi lengkap 2^n; selainnya
    Monte-Carlo dengan estimator (hits + 1) / (n_perm + 1).

    Raises:
        LengthMismatch
    """
    a = np.asarray(deltas_a, dtype=float)
    b = np.asarray(deltas_b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(len(a), len(b))
    diff = a - b
    n = len(diff)
    if n == 0 or np.all(diff == 0.0):
        return 1.0

    observed = abs(float(np.mean(diff)))
    threshold = observed - 1e-12 * max(1.0, observed)

    if n <= EXACT_PERMUTATION_LIMIT:
        codes = np.arange(2 ** n)[:, None]
        signs = ((codes >> np.arange(n)) & 1) * 2 - 1
        means = np.abs(signs @ diff) / n
        return float(np.count_nonzero(means >= threshold)) / float(2 ** n)

    rng = np.random.default_rng(seed)
    hits = 0
    remaining = n_perm
    while remaining > 0:
        chunk = min(remaining, 2_000)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(chunk, n))
        hits += int(np.count_nonzero(np.abs(signs @ diff) / n >= threshold))
        remaining -= chunk
    return (hits + 1) / (n_perm + 1)


# ================================================================
# READING-TIME FRAME
# ================================================================

def build_rt_frame(
    rt: Union[str, pd.DataFrame],
    scored: ScoredInput,
    counts: Mapping[str, int],
    variant: str = "fixed",
) -> pd.DataFrame:
    """
    Gabungkan reading time dengan prediktor per kata.

    Kolom hasil: word, avg_rt, sentence_idx, word_idx, length, log_freq,
    surprisal, dan spillover <kolom>_prev1..3 dari kata-kata sebelumnya
    di kalimat yang sama (entri yang tidak ada diisi mean kolom).

    log_freq memakai add-one smoothing supaya kata tanpa count tetap finite.

    Raises:
        MisalignedFrames: key / word reading time tidak ada di scored.
        AnalysisError: reading time ≤ 0.
    """
    if variant not in ("buggy", "fixed"):
        raise ValueError(f"variant must be 'buggy' or 'fixed', got {variant!r}")
    rt_frame = read_rt(rt) if isinstance(rt, str) else rt.copy()
    scored_frame = _as_scored_frame(scored)
    if rt_frame.empty:
        raise EmptyCorpus("reading-time table is empty")
    if (rt_frame["avg_rt"] <= 0).any():
        raise AnalysisError("reading times must be positive")

    predictors = scored_frame[RT_KEYS + ["word", f"surprisal_{variant}"]].rename(
        columns={"word": "scored_word", f"surprisal_{variant}": "surprisal"}
    )
    merged = rt_frame.merge(predictors, on=RT_KEYS, how="left", validate="one_to_one")
    unmatched = merged["scored_word"].isna() | (merged["scored_word"] != merged["word"])
    if unmatched.any():
        first = merged.loc[unmatched, RT_KEYS].iloc[0].tolist()
        raise MisalignedFrames(f"{int(unmatched.sum())} reading-time rows have no matching scored word (first at {first})")

    total = float(sum(counts.values()))
    types = len(counts)
    merged = merged.drop(columns=["scored_word"]).sort_values(RT_KEYS, kind="mergesort").reset_index(drop=True)
    merged["length"] = merged["word"].str.len().astype(float)
    merged["log_freq"] = [math.log((counts.get(w, 0) + 1.0) / (total + types + 1.0)) for w in merged["word"]]

    by_sentence = merged.groupby("sentence_idx", sort=False)
    for k in range(1, SPILLOVER + 1):
        for column in ("surprisal", "length", "log_freq"):
            shifted = by_sentence[column].shift(k)
            merged[f"{column}_prev{k}"] = shifted.fillna(merged[column].mean())
    return merged


# ================================================================
# COMPARISON & NULL BAND
# ================================================================

@dataclass(frozen=True)
class ComparisonReport:
    model: str
    dataset: str
    fixed: float
    buggy: float
    p_value: float
    n: int

    @property
    def improvement(self) -> float:
        return self.fixed - self.buggy

    def row(self) -> list:
        return [self.model, self.dataset, self.improvement, self.fixed, self.buggy, self.p_value, self.n]


def compare_buggy_vs_fixed(
    frame_buggy: pd.DataFrame,
    frame_fixed: pd.DataFrame,
    baseline: Sequence[str] = tuple(BASELINE_PREDICTORS),
    target: Sequence[str] = tuple(SURPRISAL_PREDICTORS),
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    n_perm: int = DEFAULT_PERMUTATIONS,
    model: str = "model",
    dataset: str = "dataset",
) -> ComparisonReport:
    """
    Δ_llh untuk surprisal buggy dan fixed pada fold yang sama, plus
    p-value paired permutation atas Δ pointwise.

    Raises:
        MisalignedFrames: key, kata, atau reading time tidak identik.
    """
    keys = RT_KEYS + ["word", "avg_rt"]
    if len(frame_buggy) != len(frame_fixed) or not frame_buggy[keys].reset_index(drop=True).equals(
        frame_fixed[keys].reset_index(drop=True)
    ):
        raise MisalignedFrames("buggy and fixed frames do not share the same rows")

    buggy = delta_llh(frame_buggy, baseline, list(target), folds, seed)
    fixed = delta_llh(frame_fixed, baseline, list(target), folds, seed)
    p_value = paired_permutation_test(fixed.pointwise, buggy.pointwise, n_perm, seed)
    report = ComparisonReport(model, dataset, fixed.mean, buggy.mean, p_value, len(frame_fixed))
    logger.info(
        "✓ %s/%s | Δ_llh fixed=%.6g | buggy=%.6g | improvement=%.6g | p=%.4g",
        model, dataset, report.fixed, report.buggy, report.improvement, p_value,
    )
    return report


def null_band(
    frame: pd.DataFrame,
    baseline: Sequence[str],
    target: Union[str, Sequence[str]],
    n_shuffles: int = 100,
    seed: int = 0,
    folds: int = DEFAULT_FOLDS,
) -> tuple:
    """(2.5%, 97.5%) percentile mean Δ_llh ketika kolom target di-shuffle."""
    targets = [target] if isinstance(target, str) else list(target)
    rng = np.random.default_rng(seed)
    means = []
    shuffled = frame.copy()
    for _ in range(n_shuffles):
        order = rng.permutation(len(frame))
        for column in targets:
            shuffled[column] = frame[column].to_numpy()[order]
        means.append(delta_llh(shuffled, baseline, targets, folds, seed).mean)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


# ================================================================
# OUTPUT
# ================================================================

def write_comparison(path: str, reports: Sequence[ComparisonReport]) -> ReportWriter:
    writer = ReportWriter(path, COMPARISON_HEADERS)
    writer.write_rows(r.row() for r in reports)
    return writer


def write_correlations(path: str, rows: Sequence[CorrelationRow]) -> ReportWriter:
    writer = ReportWriter(path, CORRELATION_HEADERS)
    writer.write_rows(r.row() for r in rows)
    return writer


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(name)s] %(levelname)s: %(message)s")
    rng = np.random.default_rng(7)
    n = 200
    demo = pd.DataFrame({"length": rng.integers(1, 10, n).astype(float), "surprisal": rng.gamma(2.0, 2.0, n)})
    demo["avg_rt"] = 200.0 + 5.0 * demo["length"] + 12.0 * demo["surprisal"] + rng.normal(0.0, 10.0, n)
    result = delta_llh(demo, ["length"], "surprisal", folds=10, seed=0)
    print("mean Δ_llh per word: %.4f nats" % result.mean)
