# =============================================================
# WordProb — Segmentation-Aware Tokeniser
# =============================================================
# Module ini bertanggung jawab untuk:
# 1. Pre-tokenisasi teks → kata (whitespace + punctuation + clitic)
# 2. Mapping kata → subword sesuai posisi (first / medial / final)
# 3. Detokenisasi + PrefixDecoder (NFA inkremental) untuk
#    cek exactness, generator fixture, dan klasifikasi oracle
# 4. Sertifikasi decodability (instantaneous / near-instantaneous)
#
# Regime yang didukung:
# - eow, semua kata di-mark
# - eow, kata final (atau sebelum kata "attaching") tidak di-mark
# - bow, semua kata di-mark
# - bow, kata pertama tidak di-mark
# =============================================================

import itertools
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Pattern, Sequence, Tuple

from app.core import MarkedVocabulary, Scheme, SubwordSequence, WordSequence
from app.errors import (
    MalformedTokeniser,
    MissingMidMap,
    NotUniquelyDecodable,
    UnknownWord,
    UnmappedSequence,
    UnsupportedRegime,
)

logger = logging.getLogger("WordProb.Tokeniser")

# ── Constants ──────────────────────────────────────────────────
DEFAULT_PUNCTUATION = ".,!?;:\"()[]{}"
DEFAULT_CLITICS = ("n't", "'s", "'re", "'ve", "'ll", "'d", "'m")
MID_SECTION = "#mid"
MAX_INJECTIVITY_SEQUENCES = 200_000


class Position(str, Enum):
    FIRST = "first"
    MEDIAL = "medial"
    FINAL = "final"


# ================================================================
# PRE-TOKENISATION
# ================================================================

@dataclass(frozen=True)
class SegmentationRules:
    """
    Aturan pemecahan teks menjadi kata.

    - Whitespace (berapapun panjangnya) memisahkan kata.
    - Setiap tanda baca di awal/akhir chunk menjadi kata sendiri.
    - Clitic di akhir chunk ("'s", "n't", ...) menjadi kata sendiri.
    - Bentuk ber-hyphen ("editor-in-chief") tetap satu kata.
    """
    punctuation: str = DEFAULT_PUNCTUATION
    clitics: Tuple[str, ...] = DEFAULT_CLITICS

    @cached_property
    def clitic_pattern(self) -> Pattern:
        alternatives = "|".join(re.escape(c) for c in sorted(self.clitics, key=len, reverse=True))
        return re.compile(rf"^(.+?)({alternatives})$", re.IGNORECASE)

    def normalise(self, text: str) -> str:
        return unicodedata.normalize("NFC", text).replace("’", "'")

    def split_chunk(self, chunk: str) -> List[str]:
        start, end = 0, len(chunk)
        lead: List[str] = []
        trail: List[str] = []
        while start < end and chunk[start] in self.punctuation:
            lead.append(chunk[start])
            start += 1
        while end > start and chunk[end - 1] in self.punctuation:
            trail.append(chunk[end - 1])
            end -= 1

        core = chunk[start:end]
        pieces: List[str] = []
        if core:
            match = self.clitic_pattern.match(core) if self.clitics else None
            pieces = [match.group(1), match.group(2)] if match else [core]
        return lead + pieces + trail[::-1]


DEFAULT_RULES = SegmentationRules()


def pretokenise(text: str, rules: SegmentationRules = DEFAULT_RULES) -> WordSequence:
    """
    Deterministic word segmentation.

    Usage:
        pretokenise("Why did we reboot the server's firmware?")
        → ("Why", "did", "we", "reboot", "the", "server", "'s", "firmware", "?")
    """
    words: List[str] = []
    for chunk in rules.normalise(text).split():
        words.extend(rules.split_chunk(chunk))
    return tuple(words)


# ================================================================
# TOKENISER SPEC
# ================================================================

@dataclass(frozen=True, eq=False)
class TokeniserSpec:
    """
    Tokeniser segmentation-aware: lexicon tertutup + flag boundary.

    Attributes:
        vocab: MarkedVocabulary.
        word_map: kata → bentuk ter-mark (V_mid*∘V_eow atau V_bow∘V_mid*).
        mid_map: kata → bentuk tanpa marker (V_mid*), dipakai di posisi
                 boundary yang flag-nya false.
        mark_first_word: False → kata pertama (bow) memakai mid_map.
        mark_final_word: False → kata final (eow) memakai mid_map.
        rules: SegmentationRules untuk pretokenise.

    Constructor tidak memvalidasi bentuk; loader memanggil validate().
    """
    vocab: MarkedVocabulary
    word_map: Mapping[str, SubwordSequence]
    mid_map: Mapping[str, SubwordSequence] = field(default_factory=dict)
    mark_first_word: bool = True
    mark_final_word: bool = True
    rules: SegmentationRules = DEFAULT_RULES

    def __post_init__(self):
        object.__setattr__(self, "word_map", MappingProxyType({w: tuple(ids) for w, ids in self.word_map.items()}))
        object.__setattr__(self, "mid_map", MappingProxyType({w: tuple(ids) for w, ids in self.mid_map.items()}))

    @property
    def scheme(self) -> Scheme:
        return self.vocab.marking_scheme

    @property
    def unmarked_final(self) -> bool:
        return self.scheme == Scheme.EOW and not self.mark_final_word

    @property
    def unmarked_first(self) -> bool:
        return self.scheme == Scheme.BOW and not self.mark_first_word

    @cached_property
    def lexicon(self) -> Tuple[str, ...]:
        return tuple(sorted(self.word_map))

    def attaches(self, word: str) -> bool:
        """Kata "attaching": bentuk ter-mark diawali id kelas punctuation."""
        image = self.word_map.get(word)
        return bool(image) and image[0] in self.vocab.punct_ids

    def uses_mid_form(self, position: Position) -> bool:
        return (
            (self.unmarked_final and position == Position.FINAL)
            or (self.unmarked_first and position == Position.FIRST)
        )

    @cached_property
    def decoder(self) -> "PrefixDecoder":
        return PrefixDecoder(self)

    # ── Validation ──

    def validate(self) -> "TokeniserSpec":
        """
        Cek bentuk image terhadap marking scheme.

        Raises:
            MalformedTokeniser: id invalid / bentuk image salah.
            UnsupportedRegime: kombinasi flag yang tidak didukung.
        """
        vocab = self.vocab
        if self.scheme == Scheme.EOW and not self.mark_first_word:
            raise UnsupportedRegime("mark_first_word=false only applies to bow tokenisers")
        if self.scheme == Scheme.BOW and not self.mark_final_word:
            raise UnsupportedRegime("bow tokeniser with unmarked final words is not supported")
        if (self.unmarked_final or self.unmarked_first) and not self.mid_map:
            raise MalformedTokeniser("an unmarked boundary needs a #mid section")

        for word, image in self.word_map.items():
            self._check_ids(word, image)
            if self.scheme == Scheme.EOW:
                ok = vocab.is_marked(image[-1]) and not any(vocab.is_marked(u) for u in image[:-1])
            else:
                ok = vocab.is_marked(image[0]) and not any(vocab.is_marked(u) for u in image[1:])
            if not ok:
                raise MalformedTokeniser(f"image of {word!r} {list(image)} does not fit the {self.scheme.value} scheme")

        for word, image in self.mid_map.items():
            self._check_ids(word, image)
            if word not in self.word_map:
                raise MalformedTokeniser(f"mid form for {word!r} without a marked form")
            if any(vocab.is_marked(u) for u in image):
                raise MalformedTokeniser(f"mid image of {word!r} {list(image)} contains a marked subword")
        return self

    def _check_ids(self, word: str, image: SubwordSequence):
        if not word:
            raise MalformedTokeniser("empty word in lexicon")
        if not image:
            raise MalformedTokeniser(f"empty image for {word!r}")
        for u in image:
            if not 0 <= u < self.vocab.size:
                raise MalformedTokeniser(f"image of {word!r} uses invalid id {u}")


# ================================================================
# TOKENISATION
# ================================================================

def position_of(spec: TokeniserSpec, words: Sequence[str], index: int, followed: Optional[bool] = None) -> Position:
    """
    Posisi kata ke-index di dalam kalimat.

    Args:
        followed: untuk kata terakhir dari sebuah konteks. None = kata ini
                  memang terakhir di kalimat; True/False = diikuti kata
                  yang attaching / tidak attaching.
    """
    last = index == len(words) - 1
    if last and followed is not None:
        closes = followed
    elif last:
        closes = True
    else:
        closes = spec.attaches(words[index + 1])

    if spec.scheme == Scheme.EOW and closes:
        return Position.FINAL
    if index == 0:
        return Position.FIRST
    return Position.FINAL if last and followed is None else Position.MEDIAL


def tokenise_word(spec: TokeniserSpec, word: str, position: Position) -> SubwordSequence:
    if word not in spec.word_map:
        raise UnknownWord(word)
    if spec.uses_mid_form(Position(position)):
        if word not in spec.mid_map:
            raise MissingMidMap(word)
        return spec.mid_map[word]
    return spec.word_map[word]


def _segments(spec: TokeniserSpec, words: Sequence[str], followed: Optional[bool] = None) -> List[SubwordSequence]:
    segments = []
    for index, word in enumerate(words):
        try:
            segments.append(tokenise_word(spec, word, position_of(spec, words, index, followed)))
        except UnknownWord:
            raise UnknownWord(word, index) from None
    return segments


def tokenise_sequence(spec: TokeniserSpec, words: Sequence[str]) -> SubwordSequence:
    return tuple(itertools.chain.from_iterable(_segments(spec, words)))


def tokenise_context(spec: TokeniserSpec, context: Sequence[str], next_word: Optional[str] = None) -> SubwordSequence:
    """
    Tokenisasi konteks sebagaimana ia muncul sebelum kata berikutnya.

    next_word=None berarti konteks diikuti kata yang tidak attaching.
    """
    if not context:
        return ()
    attaching = spec.attaches(next_word) if next_word is not None else False
    return tuple(itertools.chain.from_iterable(_segments(spec, context, followed=attaching)))


# ================================================================
# PREFIX DECODER (NFA)
# ================================================================

class Constraint(str, Enum):
    START = "start"
    FREE = "free"
    NEED_ATTACH = "need_attach"     # kata sebelumnya mid: berikutnya attaching atau selesai
    NEED_PLAIN = "need_plain"       # kata sebelumnya ter-mark: berikutnya non-attaching


ENDABLE = frozenset({Constraint.START, Constraint.FREE, Constraint.NEED_ATTACH})


@dataclass(frozen=True)
class Branch:
    pending: SubwordSequence
    constraint: Constraint
    words: WordSequence


@dataclass(frozen=True)
class _ImageTable:
    images: Mapping[SubwordSequence, Tuple[str, ...]]
    successors: Mapping[SubwordSequence, FrozenSet[int]]


def _build_table(entries: Iterable[Tuple[str, SubwordSequence]]) -> _ImageTable:
    images: Dict[SubwordSequence, List[str]] = {}
    successors: Dict[SubwordSequence, set] = {}
    for word, image in entries:
        images.setdefault(image, []).append(word)
        for cut in range(len(image)):
            successors.setdefault(image[:cut], set()).add(image[cut])
    return _ImageTable(
        images={k: tuple(sorted(v)) for k, v in images.items()},
        successors={k: frozenset(v) for k, v in successors.items()},
    )


class PrefixDecoder:
    """
    NFA inkremental atas subword → hipotesis kata.

    Setiap Branch = (subword tertunda, constraint boundary, kata yang
    sudah di-commit). State mati = prefix berada di himpunan unmapped.

    Usage:
        state = spec.decoder.initial()
        for u in ids:
            state = state.advance(u)
        state.completions()   # set kata valid bila berhenti di sini
    """

    def __init__(self, spec: TokeniserSpec):
        self.spec = spec
        self.eos_id = spec.vocab.eos_id
        marked = list(spec.word_map.items())
        mid = list(spec.mid_map.items())
        self._tables: Dict[Tuple[str, str], _ImageTable] = {}
        for form, entries in (("marked", marked), ("mid", mid)):
            self._tables[(form, "any")] = _build_table(entries)
            self._tables[(form, "attach")] = _build_table((w, i) for w, i in entries if spec.attaches(w))
            self._tables[(form, "plain")] = _build_table((w, i) for w, i in entries if not spec.attaches(w))
        self._moves = self._build_moves()

    def _build_moves(self) -> Dict[Constraint, Tuple[Tuple[str, str, Constraint], ...]]:
        spec = self.spec
        if spec.scheme == Scheme.BOW:
            first_form = "mid" if spec.unmarked_first else "marked"
            return {
                Constraint.START: ((first_form, "any", Constraint.FREE),),
                Constraint.FREE: (("marked", "any", Constraint.FREE),),
            }
        if spec.mark_final_word:
            free = (("marked", "any", Constraint.FREE),)
            return {Constraint.START: free, Constraint.FREE: free}
        open_moves = (("marked", "any", Constraint.NEED_PLAIN), ("mid", "any", Constraint.NEED_ATTACH))
        return {
            Constraint.START: open_moves,
            Constraint.FREE: open_moves,
            Constraint.NEED_ATTACH: (
                ("marked", "attach", Constraint.NEED_PLAIN),
                ("mid", "attach", Constraint.NEED_ATTACH),
            ),
            Constraint.NEED_PLAIN: (
                ("marked", "plain", Constraint.NEED_PLAIN),
                ("mid", "plain", Constraint.NEED_ATTACH),
            ),
        }

    def initial(self, track_words: bool = True) -> "DecoderState":
        return DecoderState(self, frozenset({Branch((), Constraint.START, ())}), track_words)

    def run(self, ids: Sequence[int], track_words: bool = True) -> "DecoderState":
        state = self.initial(track_words)
        for u in ids:
            state = state.advance(u)
            if state.is_dead():
                break
        return state

    def step_branch(self, branch: Branch, u: int, track_words: bool) -> List[Branch]:
        pending = branch.pending + (u,)
        out: List[Branch] = []
        keep_pending = False
        for form, filt, nxt in self._moves.get(branch.constraint, ()):
            table = self._tables[(form, filt)]
            for word in table.images.get(pending, ()):
                words = branch.words + (word,) if track_words else ()
                out.append(Branch((), nxt, words))
            if pending in table.successors:
                keep_pending = True
        if keep_pending:
            out.append(Branch(pending, branch.constraint, branch.words))
        return out

    def next_ids(self, branch: Branch) -> FrozenSet[int]:
        ids: set = set()
        for form, filt, _ in self._moves.get(branch.constraint, ()):
            ids |= self._tables[(form, filt)].successors.get(branch.pending, frozenset())
        return frozenset(ids)


@dataclass(frozen=True)
class DecoderState:
    decoder: PrefixDecoder = field(compare=False, hash=False, repr=False)
    branches: FrozenSet[Branch]
    track_words: bool = True

    def advance(self, u: int) -> "DecoderState":
        if u == self.decoder.eos_id:
            return DecoderState(self.decoder, frozenset(), self.track_words)
        out = set()
        for branch in self.branches:
            out.update(self.decoder.step_branch(branch, u, self.track_words))
        return DecoderState(self.decoder, frozenset(out), self.track_words)

    def is_dead(self) -> bool:
        return not self.branches

    def can_end(self) -> bool:
        return any(not b.pending and b.constraint in ENDABLE for b in self.branches)

    def completions(self) -> FrozenSet[WordSequence]:
        return frozenset(b.words for b in self.branches if not b.pending and b.constraint in ENDABLE)

    def allowed_next(self) -> FrozenSet[int]:
        """Id berikutnya yang tidak membuat prefix mati (eos bila boleh berhenti)."""
        ids: set = set()
        for branch in self.branches:
            ids |= self.decoder.next_ids(branch)
        if self.can_end():
            ids.add(self.decoder.eos_id)
        return frozenset(ids)

    def committed(self) -> WordSequence:
        """Prefix kata yang disepakati semua branch."""
        if not self.branches:
            return ()
        sequences = [b.words for b in self.branches]
        common: List[str] = []
        for column in zip(*sequences):
            if len(set(column)) != 1:
                break
            common.append(column[0])
        return tuple(common)

    def signature(self) -> FrozenSet[Tuple[SubwordSequence, Constraint]]:
        return frozenset((b.pending, b.constraint) for b in self.branches)


# ================================================================
# DETOKENISATION & DECODABILITY
# ================================================================

def detokenise(spec: TokeniserSpec, ids: Sequence[int]) -> WordSequence:
    """
    Subword → kata. Sequence di luar image tokenise_sequence (himpunan B)
    selalu error, tidak pernah ditebak.

    Raises:
        UnmappedSequence, NotUniquelyDecodable
    """
    ids = tuple(ids)
    eos = spec.vocab.eos_id
    if ids and ids[-1] == eos:
        ids = ids[:-1]
    if eos in ids:
        raise UnmappedSequence(ids)

    state = spec.decoder.run(ids)
    candidates = sorted(state.completions())
    if not candidates:
        raise UnmappedSequence(ids)
    if len(candidates) > 1:
        raise NotUniquelyDecodable(candidates[0], candidates[1], ids)

    words = candidates[0]
    if tokenise_sequence(spec, words) != ids:
        raise UnmappedSequence(ids)
    return words


@dataclass(frozen=True)
class DecodabilityCertificate:
    """
    kind: "instantaneous" atau "near_instantaneous".
    witness: prefix yang decoding-nya bergantung pada subword berikutnya,
             beserta satu lanjutan yang mengonfirmasi kata dan satu yang
             membelokkannya.
    """
    kind: str
    witness: Optional[SubwordSequence] = None
    word: Optional[str] = None
    confirming_next: Optional[int] = None
    diverting_next: Optional[int] = None


def _check_injective(spec: TokeniserSpec, max_words: int):
    for mapping in (spec.word_map, spec.mid_map):
        inverse: Dict[SubwordSequence, str] = {}
        for word in sorted(mapping):
            image = mapping[word]
            if image in inverse:
                raise NotUniquelyDecodable((inverse[image],), (word,), image)
            inverse[image] = word

    lexicon = spec.lexicon
    while max_words > 1 and len(lexicon) ** max_words > MAX_INJECTIVITY_SEQUENCES:
        max_words -= 1
    seen: Dict[SubwordSequence, WordSequence] = {}
    for length in range(1, max_words + 1):
        for words in itertools.product(lexicon, repeat=length):
            try:
                ids = tokenise_sequence(spec, words)
            except MissingMidMap:
                continue
            if ids in seen:
                raise NotUniquelyDecodable(seen[ids], words, ids)
            seen[ids] = words


def _find_witness(spec: TokeniserSpec) -> Optional[DecodabilityCertificate]:
    start = spec.decoder.initial()
    for word in spec.lexicon:
        forms = [spec.word_map[word]]
        if word in spec.mid_map:
            forms.append(spec.mid_map[word])
        for image in forms:
            state = start
            for u in image:
                state = state.advance(u)
            if state.is_dead() or not any(b.words[:1] == (word,) for b in state.branches):
                continue
            if all(b.words[:1] == (word,) and not b.pending for b in state.branches):
                continue

            confirming = diverting = None
            for u in sorted(state.allowed_next()):
                if u == spec.vocab.eos_id:
                    if all(ws[:1] == (word,) for ws in state.completions()):
                        confirming = u if confirming is None else confirming
                    continue
                child = state.advance(u)
                if child.is_dead():
                    continue
                if all(b.words[:1] == (word,) for b in child.branches):
                    confirming = u if confirming is None else confirming
                elif not any(b.words[:1] == (word,) for b in child.branches):
                    diverting = u if diverting is None else diverting
            if confirming is not None and diverting is not None:
                return DecodabilityCertificate("near_instantaneous", image, word, confirming, diverting)
    return None


def certify_decodability(spec: TokeniserSpec, max_words: int = 3) -> DecodabilityCertificate:
    """
    Sertifikasi decodability + cek injektivitas sampai max_words kata.

    Raises:
        NotUniquelyDecodable: dua kata / kalimat berbagi image.
    """
    _check_injective(spec, max_words)
    witness = _find_witness(spec)
    certificate = witness or DecodabilityCertificate("instantaneous")
    logger.info("✓ Decodability certified | kind=%s | witness=%s", certificate.kind, certificate.witness)
    return certificate


# ================================================================
# LOADER
# ================================================================

def load_tokeniser(
    path: str,
    vocab: MarkedVocabulary,
    mark_first_word: bool = True,
    mark_final_word: bool = True,
    rules: SegmentationRules = DEFAULT_RULES,
) -> TokeniserSpec:
    """
    Baca tokeniser TSV: `word<TAB>ids,dipisah,koma`, section `#mid`
    untuk mid_map. Baris `# ...` adalah komentar.
    """
    word_map: Dict[str, SubwordSequence] = {}
    mid_map: Dict[str, SubwordSequence] = {}
    target = word_map
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if line.strip() == MID_SECTION:
                target = mid_map
                continue
            if line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedTokeniser(f"{path}:{line_no}: expected word<TAB>ids")
            word, id_field = parts
            try:
                image = tuple(int(x) for x in id_field.split(","))
            except ValueError:
                raise MalformedTokeniser(f"{path}:{line_no}: bad id list {id_field!r}") from None
            if word in target:
                raise MalformedTokeniser(f"{path}:{line_no}: duplicate entry for {word!r}")
            target[word] = image

    spec = TokeniserSpec(vocab, word_map, mid_map, mark_first_word, mark_final_word, rules).validate()
    logger.info(
        "✓ Tokeniser loaded | path=%s | words=%d | mid=%d | first=%s | final=%s",
        path, len(word_map), len(mid_map), mark_first_word, mark_final_word,
    )
    return spec
