# =============================================================
# WordProb — Shared pytest fixtures
# =============================================================
# - TOY-1 (bow, exact, order 2) dan toy eow unmarked-final dari
#   assets/fixtures/
# - Factory lexicon contoh kalimat "Why did we reboot the server's
#   firmware?" untuk eow dan bow
# - Factory tokeniser + LM exact acak untuk sweep property
# =============================================================

import os

import numpy as np
import pytest

from app._paths import EOW_TOY_DIR, TOY1_DIR
from app.core import Role, Scheme, Subword, build_vocabulary, load_vocabulary
from app.lm import load_tabular, random_exact_lm
from app.tokeniser import SegmentationRules, TokeniserSpec, load_tokeniser

TOLERANCE = 1e-10
SENTENCE = "Why did we reboot the server's firmware?"


# ── Fixture files ──────────────────────────────────────────────

def load_toy1():
    vocab = load_vocabulary(os.path.join(TOY1_DIR, "vocab.tsv"), "bow")
    spec = load_tokeniser(os.path.join(TOY1_DIR, "tokeniser.tsv"), vocab)
    lm = load_tabular(os.path.join(TOY1_DIR, "lm.tsv"), vocab.size, order=2, exact=True, spec=spec)
    return spec, lm


def load_eow_toy():
    vocab = load_vocabulary(os.path.join(EOW_TOY_DIR, "vocab.tsv"), "eow", punct_ids=[2, 5])
    spec = load_tokeniser(os.path.join(EOW_TOY_DIR, "tokeniser.tsv"), vocab, mark_final_word=False)
    lm = load_tabular(os.path.join(EOW_TOY_DIR, "lm.tsv"), vocab.size, order=1, exact=True, spec=spec)
    return spec, lm


@pytest.fixture
def toy1():
    return load_toy1()


@pytest.fixture
def toy1_spec(toy1):
    return toy1[0]


@pytest.fixture
def toy1_lm(toy1):
    return toy1[1]


@pytest.fixture
def eow_toy():
    return load_eow_toy()


@pytest.fixture
def toy1_config():
    return os.path.join(TOY1_DIR, "config.json")


@pytest.fixture
def eow_toy_config():
    return os.path.join(EOW_TOY_DIR, "config.json")


# ── TOY-1 variant: kata pertama tanpa marker ───────────────────

def toy1_unmarked_first(full_mid_map: bool = False):
    """
    TOY-1 + mid "a" (id 3) sebagai bentuk kata "a" di awal kalimat.

    Default: hanya "a" dan "ac" boleh menjadi kata pertama
    (a → [3], ac → [3, 2]). full_mid_map=True menambah mid "b"
    (id 4) sehingga semua kata punya bentuk awal kalimat.
    """
    subwords = [
        Subword(0, "_a", Role.BOW),
        Subword(1, "_b", Role.BOW),
        Subword(2, "c", Role.MID),
        Subword(3, "a", Role.MID),
    ]
    mid_map = {"a": (3,), "ac": (3, 2)}
    if full_mid_map:
        subwords.append(Subword(4, "b", Role.MID))
        mid_map.update({"b": (4,), "bc": (4, 2)})
    vocab = build_vocabulary(subwords, Scheme.BOW)
    spec = TokeniserSpec(
        vocab,
        {"a": (0,), "b": (1,), "ac": (0, 2), "bc": (1, 2)},
        mid_map,
        mark_first_word=False,
    )
    return spec.validate()


# ── Contoh kalimat (eow / bow) ─────────────────────────────────

def example_eow_spec():
    """
    eow, kata final tanpa marker; "'s" dan "?" attaching.
    Tokenisasi kalimat: Why_ did_ we_ re boot_ the_ server 's_ firm ware ?
    """
    surfaces = [
        ("Why_", Role.EOW), ("did_", Role.EOW), ("we_", Role.EOW), ("re", Role.MID),
        ("boot_", Role.EOW), ("the_", Role.EOW), ("server", Role.MID), ("'s_", Role.EOW),
        ("firm", Role.MID), ("ware", Role.MID), ("?", Role.MID), ("server_", Role.EOW),
        ("ware_", Role.EOW), ("?_", Role.EOW), ("'s", Role.MID), ("Why", Role.MID),
        ("did", Role.MID), ("we", Role.MID), ("boot", Role.MID), ("the", Role.MID),
    ]
    subwords = [Subword(i, s, r) for i, (s, r) in enumerate(surfaces)]
    vocab = build_vocabulary(subwords, Scheme.EOW, punct_ids=[7, 10, 13, 14])
    word_map = {
        "Why": (0,), "did": (1,), "we": (2,), "reboot": (3, 4), "the": (5,),
        "server": (11,), "'s": (7,), "firmware": (8, 12), "?": (13,),
    }
    mid_map = {
        "Why": (15,), "did": (16,), "we": (17,), "reboot": (3, 18), "the": (19,),
        "server": (6,), "'s": (14,), "firmware": (8, 9), "?": (10,),
    }
    return TokeniserSpec(vocab, word_map, mid_map, mark_final_word=False).validate()


def example_bow_spec():
    """
    bow, kata pertama tanpa marker. Tanpa aturan clitic/punctuation,
    "server's" dan "firmware?" adalah satu kata.
    Tokenisasi kalimat: Why _did _we _re boot _the _server 's _firm ware ?
    """
    surfaces = [
        ("Why", Role.MID), ("_did", Role.BOW), ("_we", Role.BOW), ("_re", Role.BOW),
        ("boot", Role.MID), ("_the", Role.BOW), ("_server", Role.BOW), ("'s", Role.MID),
        ("_firm", Role.BOW), ("ware", Role.MID), ("?", Role.MID), ("_Why", Role.BOW),
        ("did", Role.MID), ("we", Role.MID), ("re", Role.MID), ("the", Role.MID),
        ("server", Role.MID), ("firm", Role.MID),
    ]
    subwords = [Subword(i, s, r) for i, (s, r) in enumerate(surfaces)]
    vocab = build_vocabulary(subwords, Scheme.BOW)
    word_map = {
        "Why": (11,), "did": (1,), "we": (2,), "reboot": (3, 4), "the": (5,),
        "server's": (6, 7), "firmware?": (8, 9, 10),
    }
    mid_map = {
        "Why": (0,), "did": (12,), "we": (13,), "reboot": (14, 4), "the": (15,),
        "server's": (16, 7), "firmware?": (17, 9, 10),
    }
    rules = SegmentationRules(punctuation="", clitics=())
    return TokeniserSpec(vocab, word_map, mid_map, mark_first_word=False, rules=rules).validate()


# ── Random tokeniser + exact LM ────────────────────────────────

def random_spec(seed: int, scheme: str = "bow", max_words: int = 4):
    """
    Tokeniser acak kecil: ≤3 subword ter-mark, ≤2 mid, ≤max_words kata.

    bow: image [b] atau [b, m]; eow: image [e] atau [m, e].
    Image saling berbeda sehingga decodable unik.
    """
    rng = np.random.default_rng(seed)
    n_marked = int(rng.integers(1, 4))
    n_mid = int(rng.integers(1, 3))
    marked_role = Role.BOW if scheme == "bow" else Role.EOW

    subwords = []
    for i in range(n_marked):
        surface = f"_m{i}" if scheme == "bow" else f"m{i}_"
        subwords.append(Subword(i, surface, marked_role))
    for j in range(n_mid):
        subwords.append(Subword(n_marked + j, f"x{j}", Role.MID))
    vocab = build_vocabulary(subwords, Scheme(scheme))

    marked_ids = list(range(n_marked))
    mid_ids = list(range(n_marked, n_marked + n_mid))
    candidates = [(b,) for b in marked_ids]
    for b in marked_ids:
        for m in mid_ids:
            candidates.append((b, m) if scheme == "bow" else (m, b))
    n_words = int(rng.integers(1, min(max_words, len(candidates)) + 1))
    chosen = rng.choice(len(candidates), size=n_words, replace=False)
    word_map = {f"w{k}": candidates[int(index)] for k, index in enumerate(sorted(chosen))}
    return TokeniserSpec(vocab, word_map).validate()


def random_case(seed: int, scheme: str = "bow"):
    spec = random_spec(seed, scheme)
    lm = random_exact_lm(seed, spec, order=2, min_eos_mass=0.05)
    return spec, lm
