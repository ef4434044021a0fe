# =============================================================
# Tests — app/tokeniser.py
# =============================================================

import itertools
import sys

import pytest

from app.core import Role, Scheme, Subword, build_vocabulary
from app.errors import (
    MalformedTokeniser,
    MissingMidMap,
    NotUniquelyDecodable,
    UnknownWord,
    UnmappedSequence,
    UnsupportedRegime,
)
from app.tokeniser import (
    Position,
    SegmentationRules,
    TokeniserSpec,
    certify_decodability,
    detokenise,
    load_tokeniser,
    position_of,
    pretokenise,
    tokenise_context,
    tokenise_sequence,
    tokenise_word,
)
from conftest import SENTENCE, example_bow_spec, example_eow_spec, toy1_unmarked_first


# ── Pre-tokenisation ──

def test_pretokenise_splits_clitics_and_punctuation():
    assert pretokenise(SENTENCE) == ("Why", "did", "we", "reboot", "the", "server", "'s", "firmware", "?")


def test_pretokenise_normalises_apostrophe_and_whitespace():
    assert pretokenise("  it’s\tfine ") == ("it", "'s", "fine")


def test_pretokenise_keeps_hyphenated_words():
    assert pretokenise("editor-in-chief, again") == ("editor-in-chief", ",", "again")


def test_pretokenise_without_rules():
    rules = SegmentationRules(punctuation="", clitics=())
    assert pretokenise(SENTENCE, rules) == ("Why", "did", "we", "reboot", "the", "server's", "firmware?")


def test_pretokenise_empty():
    assert pretokenise("   ") == ()


# ── Tokenisation ──

def test_toy1_sequence(toy1_spec):
    assert tokenise_sequence(toy1_spec, ["ac", "b"]) == (0, 2, 1)
    assert tokenise_sequence(toy1_spec, []) == ()


def test_unknown_word_carries_index(toy1_spec):
    with pytest.raises(UnknownWord, match="zz"):
        tokenise_sequence(toy1_spec, ["a", "zz"])


def test_example_sentence_eow():
    spec = example_eow_spec()
    assert tokenise_sequence(spec, pretokenise(SENTENCE, spec.rules)) == tuple(range(11))


def test_example_sentence_bow():
    spec = example_bow_spec()
    assert tokenise_sequence(spec, pretokenise(SENTENCE, spec.rules)) == tuple(range(11))


def test_example_sentence_round_trip():
    for spec in (example_eow_spec(), example_bow_spec()):
        words = pretokenise(SENTENCE, spec.rules)
        assert detokenise(spec, tokenise_sequence(spec, words)) == words


def test_positions_eow_unmarked():
    spec = example_eow_spec()
    words = pretokenise(SENTENCE)
    positions = [position_of(spec, words, i) for i in range(len(words))]
    assert positions[0] == Position.FIRST
    assert positions[5] == Position.FINAL          # "server" before "'s"
    assert positions[6] == Position.MEDIAL         # "'s" before "firmware"
    assert positions[7] == Position.FINAL          # "firmware" before "?"
    assert positions[8] == Position.FINAL


def test_tokenise_word_forms():
    spec = example_eow_spec()
    assert tokenise_word(spec, "firmware", Position.MEDIAL) == (8, 12)
    assert tokenise_word(spec, "firmware", Position.FINAL) == (8, 9)


def test_tokenise_context_depends_on_next_word(eow_toy):
    spec, _ = eow_toy
    assert tokenise_context(spec, ["a"], "?") == (3,)
    assert tokenise_context(spec, ["a"], "ac") == (0,)
    assert tokenise_context(spec, ["a"]) == (0,)
    assert tokenise_context(spec, [], "a") == ()


def test_missing_mid_form():
    spec = toy1_unmarked_first()
    assert tokenise_sequence(spec, ["ac", "b"]) == (3, 2, 1)
    with pytest.raises(MissingMidMap):
        tokenise_sequence(spec, ["b"])


# ── Detokenisation ──

def test_detokenise_toy1(toy1_spec):
    assert detokenise(toy1_spec, (0, 2, 1)) == ("ac", "b")
    assert detokenise(toy1_spec, (0, 3)) == ("a",)
    assert detokenise(toy1_spec, ()) == ()


def test_detokenise_rejects_unmapped(toy1_spec):
    with pytest.raises(UnmappedSequence):
        detokenise(toy1_spec, (2,))
    with pytest.raises(UnmappedSequence):
        detokenise(toy1_spec, (0, 3, 0))
    with pytest.raises(UnmappedSequence):
        detokenise(toy1_spec, (0, 2, 2))


def test_detokenise_eow_unmarked_requires_boundary(eow_toy):
    spec, _ = eow_toy
    assert detokenise(spec, (3,)) == ("a",)
    assert detokenise(spec, (3, 5)) == ("a", "?")
    with pytest.raises(UnmappedSequence):
        detokenise(spec, (0,))          # marked final word
    with pytest.raises(UnmappedSequence):
        detokenise(spec, (0, 2))        # marked word before an attaching word


def _all_sequences(lexicon, max_words=4):
    for length in range(max_words + 1):
        yield from itertools.product(lexicon, repeat=length)


def test_round_trip_and_injective_up_to_four_words(toy1_spec, eow_toy):
    three_words = TokeniserSpec(
        toy1_spec.vocab, {w: toy1_spec.word_map[w] for w in ("a", "ac", "bc")}
    ).validate()
    for spec in (three_words, eow_toy[0]):
        assert len(spec.lexicon) == 3
        images = {}
        for words in _all_sequences(spec.lexicon):
            ids = tokenise_sequence(spec, words)
            assert detokenise(spec, ids) == words
            assert images.setdefault(ids, words) == words
        assert len(images) == 1 + 3 + 9 + 27 + 81


def test_first_word_marking_changes_only_first_segment():
    unmarked = toy1_unmarked_first(full_mid_map=True)
    marked = TokeniserSpec(unmarked.vocab, dict(unmarked.word_map)).validate()
    for words in _all_sequences(unmarked.lexicon):
        if not words:
            continue
        first = words[0]
        rest = tokenise_sequence(marked, words)[len(marked.word_map[first]):]
        ids = tokenise_sequence(unmarked, words)
        assert ids == unmarked.mid_map[first] + rest
        assert detokenise(unmarked, ids) == words


# ── Decoder ──

def test_decoder_allowed_next(toy1_spec):
    decoder = toy1_spec.decoder
    assert decoder.initial().allowed_next() == frozenset({0, 1, 3})
    assert decoder.run([0]).allowed_next() == frozenset({0, 1, 2, 3})
    assert decoder.run([0, 2]).allowed_next() == frozenset({0, 1, 3})
    assert decoder.run([2]).is_dead()
    assert decoder.run([0, 3]).is_dead()


def test_decoder_committed_words(toy1_spec):
    decoder = toy1_spec.decoder
    assert decoder.run([0]).committed() == ()
    assert decoder.run([0, 2, 1]).committed() == ("ac",)
    assert decoder.run([0, 0]).committed() == ("a",)
    assert decoder.run([0, 2]).completions() == frozenset({("ac",)})


# ── Decodability ──

def test_toy1_is_near_instantaneous(toy1_spec):
    certificate = certify_decodability(toy1_spec)
    assert certificate.kind == "near_instantaneous"
    assert certificate.witness == (0,)
    assert certificate.word == "a"
    assert certificate.confirming_next == 0
    assert certificate.diverting_next == 2


def test_marked_eow_is_instantaneous():
    vocab = build_vocabulary([Subword(0, "a_", Role.EOW), Subword(1, "c", Role.MID)], Scheme.EOW)
    spec = TokeniserSpec(vocab, {"a": (0,), "ca": (1, 0)}).validate()
    certificate = certify_decodability(spec)
    assert certificate.kind == "instantaneous"
    assert certificate.witness is None


def test_shared_image_is_not_decodable(toy1_spec):
    spec = TokeniserSpec(toy1_spec.vocab, {"a": (0,), "alpha": (0,)})
    with pytest.raises(NotUniquelyDecodable):
        certify_decodability(spec)


# ── Validation & loading ──

def test_validate_rejects_wrong_shape(toy1_spec):
    with pytest.raises(MalformedTokeniser):
        TokeniserSpec(toy1_spec.vocab, {"c": (2,)}).validate()
    with pytest.raises(MalformedTokeniser):
        TokeniserSpec(toy1_spec.vocab, {"ab": (0, 1)}).validate()


def test_validate_regimes(toy1_spec):
    with pytest.raises(UnsupportedRegime):
        TokeniserSpec(toy1_spec.vocab, {"a": (0,)}, {"a": (2,)}, mark_final_word=False).validate()
    with pytest.raises(MalformedTokeniser):
        TokeniserSpec(toy1_spec.vocab, {"a": (0,)}, mark_first_word=False).validate()
    eow_vocab = build_vocabulary([Subword(0, "a_", Role.EOW)], Scheme.EOW)
    with pytest.raises(UnsupportedRegime):
        TokeniserSpec(eow_vocab, {"a": (0,)}, mark_first_word=False).validate()


def test_load_tokeniser_mid_section(eow_toy):
    spec, _ = eow_toy
    assert spec.word_map["ac"] == (3, 1)
    assert spec.mid_map["ac"] == (3, 4)
    assert spec.attaches("?") and not spec.attaches("a")
    assert spec.lexicon == ("?", "a", "ac")


def test_load_tokeniser_duplicate_word(tmp_path, toy1_spec):
    path = tmp_path / "tok.tsv"
    path.write_text("a\t0\na\t1\n", encoding="utf-8")
    with pytest.raises(MalformedTokeniser, match="duplicate"):
        load_tokeniser(str(path), toy1_spec.vocab)


def test_load_tokeniser_bad_ids(tmp_path, toy1_spec):
    path = tmp_path / "tok.tsv"
    path.write_text("a\t0;1\n", encoding="utf-8")
    with pytest.raises(MalformedTokeniser, match=":1:"):
        load_tokeniser(str(path), toy1_spec.vocab)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
