# =============================================================
# Tests — app/lm.py (tabular LM, exactness, random fixtures)
# =============================================================

import math
import sys

import numpy as np
import pytest

from app.errors import MissingContext, NotNormalised, ParseError, SupportViolation
from app.lm import (
    ConditionalLM,
    TabularLM,
    load_tabular,
    random_exact_lm,
    verify_exactness,
    write_tabular,
)
from conftest import random_spec, toy1_unmarked_first


def _linear(lm, context):
    return np.exp(lm.next_distribution(context))


def test_toy1_rows(toy1_lm):
    assert isinstance(toy1_lm, ConditionalLM)
    assert toy1_lm.order == 2 and len(toy1_lm) == 4
    np.testing.assert_allclose(_linear(toy1_lm, []), [0.5, 0.3, 0.0, 0.2], atol=1e-15)
    np.testing.assert_allclose(_linear(toy1_lm, [0]), [0.2, 0.2, 0.3, 0.3], atol=1e-15)


def test_backoff_to_longest_stored_suffix(toy1_lm):
    np.testing.assert_allclose(_linear(toy1_lm, [1, 2]), [0.4, 0.3, 0.0, 0.3], atol=1e-15)
    np.testing.assert_allclose(_linear(toy1_lm, [0, 2, 1]), [0.3, 0.1, 0.4, 0.2], atol=1e-15)


def test_distributions_are_read_only(toy1_lm):
    with pytest.raises(ValueError):
        toy1_lm.next_distribution([])[0] = 0.0


def test_min_eos_mass(toy1_lm):
    assert math.isclose(toy1_lm.min_eos_mass(), 0.2, rel_tol=1e-12)


def test_missing_context():
    lm = TabularLM(1, 1, {(0,): [0.5, 0.5]})
    with pytest.raises(MissingContext):
        lm.next_distribution([])


def test_not_normalised_reports_deviation():
    with pytest.raises(NotNormalised, match="0.1"):
        TabularLM(1, 0, {(): [0.5, 0.4]})


# ── File I/O ──

@pytest.mark.parametrize(
    "body, reason",
    [
        ("ε\t0\n", "expected 3 columns"),
        ("ε\t0\t1.5\n", "outside"),
        ("ε\t7\t1.0\n", "outside vocabulary"),
        ("ε\t0\t0.5\nε\t0\t0.5\n", "duplicate"),
        ("ε\t0\tabc\n", "could not convert"),
    ],
)
def test_parse_errors(tmp_path, body, reason):
    path = tmp_path / "lm.tsv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(ParseError, match=reason):
        load_tabular(str(path), vocab_size=3)


def test_context_longer_than_order(tmp_path):
    path = tmp_path / "lm.tsv"
    path.write_text("ε\tEOS\t1\n0,1\tEOS\t1\n", encoding="utf-8")
    with pytest.raises(ParseError, match=":2:"):
        load_tabular(str(path), vocab_size=3, order=1)


def test_unwritten_entries_are_zero(tmp_path):
    path = tmp_path / "lm.tsv"
    path.write_text("ε\t1\t0.25\nε\tEOS\t0.75\n", encoding="utf-8")
    lm = load_tabular(str(path), vocab_size=3)
    assert lm.order == 0
    np.testing.assert_allclose(_linear(lm, [2, 2]), [0.0, 0.25, 0.0, 0.75])


def test_write_then_load_preserves_rows(tmp_path, toy1_lm):
    path = tmp_path / "copy.tsv"
    write_tabular(toy1_lm, str(path))
    copy = load_tabular(str(path), toy1_lm.vocab_size, order=toy1_lm.order)
    assert copy.contexts == toy1_lm.contexts
    for context in toy1_lm.contexts:
        np.testing.assert_allclose(copy.stored(context), toy1_lm.stored(context), rtol=1e-14)


# ── Exactness ──

def test_toy1_is_exact(toy1_spec, toy1_lm):
    assert verify_exactness(toy1_lm, toy1_spec) > 0


def test_eow_toy_is_exact(eow_toy):
    spec, lm = eow_toy
    assert verify_exactness(lm, spec) > 0


def test_support_violation_names_context(toy1_spec):
    rows = {
        (): [0.4, 0.3, 0.1, 0.2],
        (0,): [0.2, 0.2, 0.3, 0.3],
        (1,): [0.3, 0.1, 0.4, 0.2],
        (2,): [0.4, 0.3, 0.0, 0.3],
    }
    lm = TabularLM(3, 2, rows)
    with pytest.raises(SupportViolation) as info:
        verify_exactness(lm, toy1_spec)
    assert info.value.context == ()
    assert info.value.subword == 2


# ── Random exact LMs ──

@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("scheme", ["bow", "eow"])
def test_random_exact_lm_is_exact(seed, scheme):
    spec = random_spec(seed, scheme)
    lm = random_exact_lm(seed, spec, order=2)
    assert lm.exact
    verify_exactness(lm, spec)
    assert lm.min_eos_mass() >= 0.05 - 1e-12


def test_random_exact_lm_is_seeded(toy1_spec):
    first = random_exact_lm(3, toy1_spec, order=2)
    second = random_exact_lm(3, toy1_spec, order=2)
    other = random_exact_lm(4, toy1_spec, order=2)
    assert first.contexts == second.contexts
    for context in first.contexts:
        np.testing.assert_array_equal(first.stored(context), second.stored(context))
    assert any(not np.array_equal(first.stored(c), other.stored(c)) for c in first.contexts)


def test_random_exact_lm_for_boundary_regimes(eow_toy):
    for spec in (toy1_unmarked_first(), eow_toy[0]):
        lm = random_exact_lm(0, spec, order=2)
        verify_exactness(lm, spec)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
