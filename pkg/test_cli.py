# =============================================================
# Tests — app/cli.py (end-to-end di atas fixture TOY-1)
# =============================================================

import json
import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

from app.cli import EXIT_FAILURE, EXIT_OK, EXIT_PARTIAL, main
from app.config import EFFECTIVE_CONFIG_NAME
from app.wordprob import SCORED_HEADERS, read_scored

CORPUS = "a b\n\nac\nbc a\n"


def run(toy1_config, tmp_path, *args):
    return main(["--config", toy1_config, "--out-dir", str(tmp_path), *args])


def write_corpus(tmp_path, text=CORPUS, name="corpus.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ── score ──

def test_score_toy1_corpus(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "score", write_corpus(tmp_path)) == EXIT_OK
    frame = read_scored(str(tmp_path / "scored.tsv"))
    assert frame["word"].tolist() == ["a", "b", "ac", "bc", "a"]
    assert frame["sentence_idx"].tolist() == [0, 0, 1, 2, 2]
    assert frame["word_idx"].tolist() == [0, 1, 0, 0, 1]
    expected = [0.35, 0.12 / 0.7, 0.15, 0.12, 0.28]
    np.testing.assert_allclose(np.exp(frame["logp_fixed"]), expected, rtol=1e-10)
    assert set(frame["applied_fix"]) == {"fix1"}
    assert os.path.isfile(tmp_path / EFFECTIVE_CONFIG_NAME)


def test_score_buggy_and_bits(toy1_config, tmp_path):
    corpus = write_corpus(tmp_path)
    assert run(toy1_config, tmp_path, "--bits", "score", corpus, "--formula", "buggy", "--output", "buggy.tsv") == EXIT_OK
    frame = read_scored(str(tmp_path / "buggy.tsv"))
    assert (frame["log_correction"] == 0.0).all()
    assert frame["surprisal_fixed"].iloc[0] == pytest.approx(1.0, rel=1e-10)
    with open(tmp_path / EFFECTIVE_CONFIG_NAME, encoding="utf-8") as f:
        assert json.load(f)["bits"] is True


def test_score_empty_corpus_writes_header_only(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "score", write_corpus(tmp_path, "\n  \n")) == EXIT_OK
    lines = (tmp_path / "scored.tsv").read_text(encoding="utf-8").splitlines()
    assert lines == ["\t".join(SCORED_HEADERS)]


def test_score_unknown_word_is_partial(toy1_config, tmp_path, capsys):
    code = run(toy1_config, tmp_path, "score", write_corpus(tmp_path, "a b\nzz a\nbc\n"), "--workers", "2")
    assert code == EXIT_PARTIAL
    frame = read_scored(str(tmp_path / "scored.tsv"))
    assert frame["sentence_idx"].tolist() == [0, 0, 2]
    assert "skipped sentence 1" in capsys.readouterr().err


def test_missing_vocab_fails(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"vocab": "nope.tsv", "tokeniser": "nope.tsv", "lm": {"tabular": "nope.tsv"}}), encoding="utf-8")
    assert main(["--config", str(config), "score", write_corpus(tmp_path)]) == EXIT_FAILURE
    assert "vocab file not found" in capsys.readouterr().err


def test_missing_corpus_fails(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "score", str(tmp_path / "absent.txt")) == EXIT_FAILURE


# ── oracle-check / validate ──

def test_oracle_check_passes(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "oracle-check", "--max-context-words", "1") == EXIT_OK
    lines = (tmp_path / "oracle_check.tsv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 5 * 5
    assert all(line.endswith("\ttrue") for line in lines[1:])


def test_oracle_check_flags_buggy_formula(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "oracle-check", "--max-context-words", "0", "--formula", "buggy") == EXIT_FAILURE


def test_oracle_check_on_eow_fixture(eow_toy_config, tmp_path):
    assert main(["--config", eow_toy_config, "--out-dir", str(tmp_path), "oracle-check"]) == EXIT_OK


def test_validate(toy1_config, tmp_path, capsys):
    assert run(toy1_config, tmp_path, "validate", "--max-len", "6") == EXIT_OK
    out = capsys.readouterr().out
    assert "decodability=near_instantaneous" in out
    assert "lm: tabular, order=2" in out
    assert "unmapped mass" in out


# ── analyses ──

def _random_corpus(seed, sentences=40):
    rng = np.random.default_rng(seed)
    words = ["a", "b", "ac", "bc"]
    return "\n".join(" ".join(rng.choice(words, size=int(rng.integers(2, 6)))) for _ in range(sentences)) + "\n"


def _write_counts(tmp_path):
    path = tmp_path / "counts.tsv"
    path.write_text("a\t10\nb\t3\nac\t5\nbc\t1\n", encoding="utf-8")
    return str(path)


def test_analyze_lengths(toy1_config, tmp_path):
    assert run(toy1_config, tmp_path, "score", write_corpus(tmp_path, _random_corpus(0))) == EXIT_OK
    counts = _write_counts(tmp_path)
    assert run(toy1_config, tmp_path, "analyze-lengths", str(tmp_path / "scored.tsv"), counts) == EXIT_OK
    frame = pd.read_csv(tmp_path / "length_correlations.tsv", sep="\t", keep_default_na=False)
    assert frame["hypothesis"].tolist() == ["zipf", "cch_mean", "cch_mean", "cch_ratio", "cch_ratio"]
    assert (frame["n"] == 4).all()


def _write_rt(tmp_path, scored):
    rng = np.random.default_rng(2)
    rt = scored[["word", "sentence_idx", "word_idx"]].copy()
    rt["avg_rt"] = 200.0 + 20.0 * scored["surprisal_fixed"] + rng.normal(0.0, 0.1, len(scored))
    rt_path = tmp_path / "rt.csv"
    rt[["word", "avg_rt", "sentence_idx", "word_idx"]].to_csv(rt_path, index=False)
    return str(rt_path)


def _analyze_rt(toy1_config, out_dir, rt_path, counts, *extra):
    return run(
        toy1_config, out_dir, *extra, "analyze-rt", rt_path, str(out_dir / "scored.tsv"),
        "--scored-buggy", str(out_dir / "buggy.tsv"), "--counts", counts,
        "--folds", "3", "--permutations", "199", "--dataset", "synthetic",
    )


def test_analyze_rt(toy1_config, tmp_path):
    corpus = write_corpus(tmp_path, _random_corpus(1))
    assert run(toy1_config, tmp_path, "score", corpus) == EXIT_OK
    assert run(toy1_config, tmp_path, "score", corpus, "--formula", "buggy", "--output", "buggy.tsv") == EXIT_OK

    scored = read_scored(str(tmp_path / "scored.tsv"))
    code = _analyze_rt(toy1_config, tmp_path, _write_rt(tmp_path, scored), _write_counts(tmp_path))
    assert code == EXIT_OK
    report = pd.read_csv(tmp_path / "rt_comparison.tsv", sep="\t")
    assert report["model"].tolist() == ["toy1"]
    assert report["dataset"].tolist() == ["synthetic"]
    assert report["n"].tolist() == [len(scored)]
    assert report["improvement"].iloc[0] > 0
    assert math.isfinite(report["p_value"].iloc[0])


def test_outputs_are_byte_identical_across_runs(toy1_config, tmp_path):
    corpus = write_corpus(tmp_path, _random_corpus(1))
    counts = _write_counts(tmp_path)
    rt_path = None
    outputs = []
    for name in ("first", "second"):
        out_dir = tmp_path / name
        assert run(toy1_config, out_dir, "--seed", "5", "score", corpus) == EXIT_OK
        assert run(
            toy1_config, out_dir, "--seed", "5", "score", corpus, "--formula", "buggy", "--output", "buggy.tsv"
        ) == EXIT_OK
        if rt_path is None:
            rt_path = _write_rt(tmp_path, read_scored(str(out_dir / "scored.tsv")))
        assert _analyze_rt(toy1_config, out_dir, rt_path, counts, "--seed", "5") == EXIT_OK
        assert run(toy1_config, out_dir, "analyze-lengths", str(out_dir / "scored.tsv"), counts) == EXIT_OK
        outputs.append(
            {
                f: (out_dir / f).read_bytes()
                for f in ("scored.tsv", "buggy.tsv", "rt_comparison.tsv", "length_correlations.tsv")
            }
        )
    assert outputs[0] == outputs[1]
    assert all(outputs[0].values())


# ── Entry point ──

def test_env_supplies_default_config(monkeypatch):
    import main as entry

    monkeypatch.setenv("WORDPROB_CONFIG", "from_env.json")
    assert entry.with_default_config(["score", "c.txt"]) == ["--config", "from_env.json", "score", "c.txt"]
    assert entry.with_default_config(["--config=mine.json", "validate"]) == ["--config=mine.json", "validate"]
    monkeypatch.delenv("WORDPROB_CONFIG")
    assert entry.with_default_config(["validate"]) == ["validate"]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
