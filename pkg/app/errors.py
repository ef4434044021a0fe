# =============================================================
# WordProb — Error Hierarchy
# =============================================================
# Semua modul library melempar turunan WordProbError.
# CLI menangkapnya di satu tempat dan memetakan ke exit code.
# =============================================================

from typing import Optional, Sequence, Tuple


class WordProbError(Exception):
    """Root of every error raised by the toolkit."""


# ── Vocabulary ─────────────────────────────────────────────────

class VocabularyError(WordProbError):
    pass


class DuplicateId(VocabularyError):
    def __init__(self, subword_id: int):
        super().__init__(f"duplicate subword id {subword_id}")
        self.subword_id = subword_id


class EmptySurface(VocabularyError):
    def __init__(self, subword_id: int):
        super().__init__(f"subword {subword_id} has an empty surface")
        self.subword_id = subword_id


class EmptyMarkedSet(VocabularyError):
    def __init__(self, scheme: str):
        super().__init__(f"no {scheme}-marked subword in vocabulary")
        self.scheme = scheme


class IdOutOfRange(VocabularyError):
    def __init__(self, subword_id: int, size: int):
        super().__init__(f"id {subword_id} outside 0..{size - 1} (ids must be contiguous, eos = {size})")
        self.subword_id = subword_id
        self.size = size


class RoleMismatch(VocabularyError):
    def __init__(self, subword_id: int, role: str, scheme: str):
        super().__init__(f"subword {subword_id} has role {role!r}, not allowed under scheme {scheme!r}")
        self.subword_id = subword_id
        self.role = role
        self.scheme = scheme


# ── Tokeniser ──────────────────────────────────────────────────

class TokeniserError(WordProbError):
    pass


class UnknownWord(TokeniserError):
    def __init__(self, word: str, index: Optional[int] = None):
        where = f" at word index {index}" if index is not None else ""
        super().__init__(f"unknown word {word!r}{where}")
        self.word = word
        self.index = index


class MissingMidMap(TokeniserError):
    def __init__(self, word: str):
        super().__init__(f"word {word!r} has no unmarked (mid) form")
        self.word = word


class UnmappedSequence(TokeniserError):
    def __init__(self, ids: Sequence[int]):
        super().__init__(f"subword sequence {list(ids)} is not the image of any word sequence")
        self.ids = tuple(ids)


class NotUniquelyDecodable(TokeniserError):
    def __init__(self, first: Tuple[str, ...], second: Tuple[str, ...], ids: Sequence[int] = ()):
        super().__init__(f"word sequences {list(first)} and {list(second)} share the subword sequence {list(ids)}")
        self.first = first
        self.second = second
        self.ids = tuple(ids)


class MalformedTokeniser(TokeniserError):
    pass


# ── Language models ────────────────────────────────────────────

class LMError(WordProbError):
    pass


class ParseError(LMError):
    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class NotNormalised(LMError):
    def __init__(self, context: Tuple[int, ...], deviation: float):
        super().__init__(f"distribution at context {list(context)} deviates from 1 by {deviation:.3g}")
        self.context = context
        self.deviation = deviation


class SupportViolation(LMError):
    def __init__(self, context: Tuple[int, ...], subword: int):
        super().__init__(
            f"exact LM places mass on subword {subword} after {list(context)}, "
            "which yields an unmapped sequence"
        )
        self.context = context
        self.subword = subword


class MissingContext(LMError):
    def __init__(self, context: Tuple[int, ...]):
        super().__init__(f"no distribution stored for context {list(context)} or any of its suffixes")
        self.context = context


class BackendUnavailable(LMError):
    pass


class MalformedResponse(LMError):
    pass


# ── Scoring ────────────────────────────────────────────────────

class ScoringError(WordProbError):
    pass


class SchemeMismatch(ScoringError):
    def __init__(self, expected: str, actual: str):
        super().__init__(f"operation needs a {expected}-marking tokeniser, got {actual}")
        self.expected = expected
        self.actual = actual


class FirstWordNeedsFix3(ScoringError):
    def __init__(self, word: str):
        super().__init__(f"first word {word!r} is unmarked; use bugfix_bow_first")
        self.word = word


class NonEmptyContext(ScoringError):
    def __init__(self, context: Sequence[str]):
        super().__init__(f"first-word correction called with context {list(context)}")
        self.context = tuple(context)


class UnsupportedRegime(ScoringError):
    pass


# ── Oracle ─────────────────────────────────────────────────────

class OracleError(WordProbError):
    pass


class BudgetTooSmall(OracleError):
    def __init__(self, residual: float, tolerance: float):
        super().__init__(f"enumeration residual {residual:.3g} is not below tolerance {tolerance:.3g}")
        self.residual = residual
        self.tolerance = tolerance


class ZeroContextMass(OracleError):
    def __init__(self, context: Sequence[str]):
        super().__init__(f"context {list(context)} has zero enumerated mass")
        self.context = tuple(context)


# ── Analysis ───────────────────────────────────────────────────

class AnalysisError(WordProbError):
    pass


class LengthMismatch(AnalysisError):
    def __init__(self, left: int, right: int):
        super().__init__(f"paired inputs differ in length ({left} vs {right})")
        self.left = left
        self.right = right


class DegenerateInput(AnalysisError):
    pass


class SingularDesign(AnalysisError):
    pass


class MisalignedFrames(AnalysisError):
    pass


class EmptyCorpus(AnalysisError):
    pass


class NotEnoughObservations(AnalysisError):
    def __init__(self, needed: int, got: int):
        super().__init__(f"need at least {needed} observations, got {got}")
        self.needed = needed
        self.got = got


# ── Config ─────────────────────────────────────────────────────

class ConfigError(WordProbError):
    def __init__(self, reason: str, path: Optional[str] = None):
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{reason}")
        self.reason = reason
        self.path = path
