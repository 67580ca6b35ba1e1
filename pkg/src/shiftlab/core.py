"""Alphabets, words, language oracles, word sets, and locally constant potentials.

Words are stored as tuples of alphabet indices.  All enumeration is
lexicographic in the alphabet order, and every floating-point reduction in
the package accumulates in that canonical order so results do not depend on
the degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import DepthExceededError, NotInLanguageError

Word = tuple[int, ...]

EMPTY_WORD: Word = ()

#: chunk size for canonical-order partial sums (fixed, so results are
#: identical for any thread count)
_SUM_CHUNK = 4096

_THREADS = 1


def set_thread_count(n: int) -> None:
    """Set the worker count used for chunked reductions (1 = serial)."""
    global _THREADS
    _THREADS = max(1, int(n))


def get_thread_count() -> int:
    return _THREADS


def default_depth_guard(alphabet_size: int) -> int:
    """Enumeration depth guard: 24 for two letters, scaled so that the
    worst-case word count k**n stays comparable for larger alphabets."""
    if alphabet_size <= 2:
        return 24
    return max(8, int(24 * math.log(2) / math.log(alphabet_size)))


def subword(w: Word, i: int, j: int) -> Word:
    """1-based inclusive subword w_{[i,j]}; empty when the range is empty.

    Defined exactly for 1 <= i <= j <= |w| (and for j = i-1, the empty
    range).
    """
    if i > j:
        return EMPTY_WORD
    if i < 1 or j > len(w):
        raise IndexError(f"subword range [{i},{j}] invalid for length {len(w)}")
    return w[i - 1 : j]


@dataclass(frozen=True)
class Alphabet:
    """An ordered finite list of distinct symbol identifiers.

    The ordering is total and fixed; it defines the lexicographic order on
    words used throughout.
    """

    symbols: tuple[str, ...]
    separator: str = ""

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if self.separator == "" and any(len(s) != 1 for s in self.symbols):
            # multi-character identifiers need a separator to round-trip
            object.__setattr__(self, "separator", ",")

    @classmethod
    def binary(cls) -> "Alphabet":
        return cls(("0", "1"))

    @classmethod
    def of_size(cls, k: int) -> "Alphabet":
        if k <= 10:
            return cls(tuple(str(i) for i in range(k)))
        return cls(tuple(str(i) for i in range(k)), separator=",")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"unknown symbol {symbol!r}") from None

    def word(self, text: str) -> Word:
        """Parse a word from its serialized form."""
        if text == "":
            return EMPTY_WORD
        if self.separator:
            return tuple(self.index(part) for part in text.split(self.separator))
        return tuple(self.index(ch) for ch in text)

    def text(self, w: Word) -> str:
        return self.separator.join(self.symbols[i] for i in w)

    def valid(self, w: Word) -> bool:
        return all(0 <= i < len(self.symbols) for i in w)


class LanguageOracle:
    """Membership + enumeration for the language of a shift space.

    The language is factorial (subwords of members are members) and the
    empty word is always a member.  ``enumeration_limit`` is the depth to
    which the oracle certifies enumeration; deeper requests raise
    DepthExceededError.  Optional hooks:

    * ``count_hook(n)``: exact integer word count (used for zero-potential
      partition sums without enumeration),
    * ``locality``: window size within which membership is decidable
      (SFT memory); ``None`` for non-local rules,
    * ``periodicity_window``: m such that p^infinity is admissible iff a
      repetition of p of length >= |p| + m is admissible (exact periodic
      point detection); ``None`` falls back to a depth-certified check,
    * ``periodic_check(p)``: exact periodic-point predicate overriding the
      window rule (used by cocyclic shifts).
    """

    def __init__(
        self,
        alphabet: Alphabet,
        membership: Callable[[Word], bool],
        enumeration_limit: int,
        *,
        name: str = "",
        locality: int | None = None,
        periodicity_window: int | None = None,
        periodic_check: Callable[[Word], bool] | None = None,
        count_hook: Callable[[int], int] | None = None,
    ):
        self.alphabet = alphabet
        self._membership = membership
        self.enumeration_limit = int(enumeration_limit)
        self.name = name or "shift"
        self.locality = locality
        self.periodicity_window = periodicity_window
        self.periodic_check = periodic_check
        self.count_hook = count_hook
        self._cache: dict[int, tuple[Word, ...]] = {}

    def contains(self, w: Word) -> bool:
        if not self.alphabet.valid(w):
            return False
        if len(w) == 0:
            return True
        return self._membership(w)

    def words(self, n: int) -> tuple[Word, ...]:
        """All admissible words of length n, lexicographically sorted."""
        if n > self.enumeration_limit:
            raise DepthExceededError(
                f"length {n} exceeds enumeration limit {self.enumeration_limit} of {self.name}"
            )
        if n < 0:
            return ()
        got = self._cache.get(n)
        if got is not None:
            return got
        if n == 0:
            out: tuple[Word, ...] = (EMPTY_WORD,)
        else:
            # depth-first extension with factorial pruning: a prefix that is
            # not admissible has no admissible extension
            prev = self.words(n - 1)
            k = self.alphabet.size
            acc: list[Word] = []
            for p in prev:
                for a in range(k):
                    w = p + (a,)
                    if self._membership(w):
                        acc.append(w)
            out = tuple(acc)
        self._cache[n] = out
        return out

    def count(self, n: int) -> int:
        if self.count_hook is not None:
            return int(self.count_hook(n))
        return len(self.words(n))

    def __repr__(self):
        return f"LanguageOracle({self.name}, k={self.alphabet.size}, n_max={self.enumeration_limit})"


class WordSet:
    """A per-length collection of words backed by an oracle.

    Either explicit sorted per-length lists up to a depth, or a predicate
    over the backing oracle's language for lazy enumeration.  Enumeration
    at each length is duplicate-free and lexicographically sorted, and every
    member is admissible in the backing oracle.
    """

    def __init__(
        self,
        oracle: LanguageOracle,
        *,
        predicate: Callable[[Word], bool] | None = None,
        explicit: Mapping[int, Sequence[Word]] | None = None,
        depth: int | None = None,
        count_hook: Callable[[int], int] | None = None,
        is_full_language: bool = False,
        name: str = "",
    ):
        if predicate is None and explicit is None and not is_full_language:
            raise ValueError("WordSet needs a predicate, explicit words, or full-language flag")
        self.oracle = oracle
        self._predicate = predicate
        self._explicit = (
            {n: tuple(sorted(set(ws))) for n, ws in explicit.items()} if explicit is not None else None
        )
        self.depth = depth if depth is not None else oracle.enumeration_limit
        self.count_hook = count_hook
        self.is_full_language = is_full_language
        self.name = name
        self._cache: dict[int, tuple[Word, ...]] = {}

    # -- constructors ----------------------------------------------------
    @classmethod
    def language(cls, oracle: LanguageOracle, name: str = "") -> "WordSet":
        return cls(oracle, predicate=lambda w: True, is_full_language=True,
                   count_hook=oracle.count_hook and (lambda n: oracle.count(n)),
                   name=name or f"L({oracle.name})")

    @classmethod
    def from_words(cls, oracle: LanguageOracle, words: Iterable[Word], depth: int | None = None,
                   name: str = "") -> "WordSet":
        table: dict[int, list[Word]] = {}
        for w in words:
            table.setdefault(len(w), []).append(w)
        d = depth if depth is not None else (max(table) if table else 0)
        return cls(oracle, explicit=table, depth=d, name=name)

    @classmethod
    def from_predicate(cls, oracle: LanguageOracle, predicate: Callable[[Word], bool],
                       depth: int | None = None, count_hook=None, name: str = "") -> "WordSet":
        return cls(oracle, predicate=predicate, depth=depth, count_hook=count_hook, name=name)

    @classmethod
    def empty_word_only(cls, oracle: LanguageOracle) -> "WordSet":
        return cls(oracle, explicit={0: [EMPTY_WORD]}, depth=oracle.enumeration_limit,
                   name="{epsilon}")

    @classmethod
    def empty(cls, oracle: LanguageOracle) -> "WordSet":
        return cls(oracle, explicit={}, depth=oracle.enumeration_limit, name="{}")

    def union(self, other: "WordSet", name: str = "") -> "WordSet":
        if other.oracle is not self.oracle:
            raise ValueError("union requires word sets over the same oracle")
        if self.known_empty:
            return other
        if other.known_empty:
            return self
        return WordSet(
            self.oracle,
            predicate=lambda w: self.contains(w) or other.contains(w),
            depth=min(self.depth, other.depth),
            name=name or f"({self.name} U {other.name})",
        )

    # -- queries ----------------------------------------------------------
    @property
    def known_empty(self) -> bool:
        """True when the set is explicit and holds no words at all."""
        return self._explicit is not None and all(not ws for ws in self._explicit.values())

    def contains(self, w: Word) -> bool:
        if self._explicit is not None:
            return w in self._explicit.get(len(w), ())
        if not self.oracle.contains(w):
            return False
        if self.is_full_language:
            return True
        return bool(self._predicate(w))

    def at(self, n: int) -> tuple[Word, ...]:
        if n > self.depth:
            raise DepthExceededError(f"length {n} exceeds word-set depth {self.depth}")
        if n in self._cache:
            return self._cache[n]
        if self._explicit is not None:
            out = self._explicit.get(n, ())
        elif self.is_full_language:
            out = self.oracle.words(n)
        else:
            out = tuple(w for w in self.oracle.words(n) if self._predicate(w))
        self._cache[n] = out
        return out

    def count(self, n: int) -> int:
        if self.count_hook is not None:
            return int(self.count_hook(n))
        if self.is_full_language:
            return self.oracle.count(n)
        return len(self.at(n))

    def __repr__(self):
        return f"WordSet({self.name or 'anon'}, depth={self.depth})"


@dataclass(frozen=True)
class Potential:
    """A locally constant potential reading ``window`` coordinates.

    ``table`` maps every admissible window word (length = ``window``) to a
    real value.  ``holder_data`` optionally records a (beta, |phi|_beta)
    pair for reporting; it is never evaluated.
    """

    window: int
    table: Mapping[Word, float]
    holder_data: tuple[float, float] | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("potential range must be >= 1")

    @classmethod
    def zero(cls, alphabet: Alphabet) -> "Potential":
        return cls(1, {(i,): 0.0 for i in range(alphabet.size)})

    @classmethod
    def from_strings(cls, alphabet: Alphabet, window: int, table: Mapping[str, float],
                     holder_data=None) -> "Potential":
        return cls(window, {alphabet.word(k): float(v) for k, v in table.items()},
                   holder_data=holder_data)

    @classmethod
    def indicator(cls, alphabet: Alphabet, pattern: str, scale: float = 1.0) -> "Potential":
        """scale * 1_[pattern] as a range-|pattern| potential (all admissible
        windows are looked up with default 0)."""
        w = alphabet.word(pattern)
        return cls(len(w), _IndicatorTable(w, scale))

    @property
    def is_zero(self) -> bool:
        if isinstance(self.table, _IndicatorTable):
            return self.table.scale == 0.0
        return all(v == 0.0 for v in self.table.values())

    def value(self, window_word: Word) -> float:
        try:
            return float(self.table[window_word])
        except KeyError:
            raise NotInLanguageError(
                f"potential table has no entry for window {window_word}"
            ) from None

    def sup_norm(self) -> float:
        if isinstance(self.table, _IndicatorTable):
            return abs(self.table.scale)
        return max((abs(v) for v in self.table.values()), default=0.0)

    def table_spread(self) -> float:
        if isinstance(self.table, _IndicatorTable):
            return abs(self.table.scale)
        vals = list(self.table.values())
        return (max(vals) - min(vals)) if vals else 0.0


class _IndicatorTable:
    """Total table for indicator potentials: pattern -> scale, else 0."""

    def __init__(self, pattern: Word, scale: float):
        self.pattern = pattern
        self.scale = float(scale)

    def __getitem__(self, w: Word) -> float:
        return self.scale if w == self.pattern else 0.0

    def values(self):  # pragma: no cover - only used via spread/sup_norm
        return (self.scale, 0.0)


def distortion_bound(potential: Potential) -> float:
    """A valid bound on |S_n phi(x) - S_n phi(y)| within any common n-cylinder.

    For a range-r locally constant potential, Birkhoff sums over a common
    n-cylinder differ only in the last r-1 windows, so
    (r-1) * (max table value - min table value) dominates the true
    sup-difference.  Zero for r = 1 and for constant potentials.
    """
    return (potential.window - 1) * potential.table_spread()


def enumerate_language(oracle: LanguageOracle, n: int) -> WordSet:
    """The admissible length-n words as an explicit WordSet."""
    words = oracle.words(n)  # raises DepthExceededError past the limit
    return WordSet.from_words(oracle, words, depth=n, name=f"L_{n}({oracle.name})")


def phi_hat(potential: Potential, oracle: LanguageOracle, w: Word) -> float:
    """Exact sup of the |w|-step Birkhoff sum over the cylinder [w].

    For a range-r potential the supremum is a maximum over admissible
    extensions of w by r-1 symbols; the search extends symbol by symbol and
    prunes inadmissible prefixes (sound because the language is factorial).
    phi_hat of the empty word is 0 by convention.
    """
    if len(w) == 0:
        return 0.0
    if not oracle.contains(w):
        raise NotInLanguageError(f"word {w} not in language of {oracle.name}")
    if potential.is_zero:
        return 0.0
    r = potential.window
    value = potential.value
    fixed = 0.0
    if len(w) >= r:
        fixed = math.fsum(value(w[j : j + r]) for j in range(len(w) - r + 1))
    need = r - 1
    if need == 0:
        return fixed
    k = oracle.alphabet.size

    best: float | None = None
    # depth-first max over admissible (r-1)-symbol right extensions
    stack: list[Word] = [EMPTY_WORD]
    while stack:
        ext = stack.pop()
        if len(ext) == need:
            full = w + ext
            tail = math.fsum(
                value(full[j : j + r]) for j in range(max(0, len(w) - r + 1), len(w))
            )
            if best is None or tail > best:
                best = tail
            continue
        for a in range(k - 1, -1, -1):
            cand = w + ext + (a,)
            if oracle.contains(cand):
                stack.append(ext + (a,))
    if best is None:
        raise NotInLanguageError(
            f"word {w} has no admissible {need}-symbol extension (oracle not extendable)"
        )
    return fixed + best


def check_factorial(oracle: LanguageOracle, n_max: int) -> list[Word]:
    """Exhaustively verify factoriality up to n_max; returns violating subwords."""
    bad: list[Word] = []
    for n in range(1, n_max + 1):
        for w in oracle.words(n):
            for i in range(len(w)):
                for j in range(i + 1, len(w) + 1):
                    if not oracle.contains(w[i:j]):
                        bad.append(w[i:j])
    return bad


def check_extendable(oracle: LanguageOracle, n_max: int) -> list[Word]:
    """Verify that every admissible word shorter than n_max has a one-symbol
    right and left extension; returns the stranded words."""
    bad: list[Word] = []
    k = oracle.alphabet.size
    for n in range(0, n_max):
        for w in oracle.words(n):
            if not any(oracle.contains(w + (a,)) for a in range(k)):
                bad.append(w)
            elif not any(oracle.contains((a,) + w) for a in range(k)):
                bad.append(w)
    return bad


def chunked_fsum(terms: Sequence[float]) -> float:
    """fsum over fixed-size chunks in canonical order.

    Chunk boundaries are independent of the thread count, so the result is
    bit-identical whether chunks are evaluated serially or by a pool.
    """
    n = len(terms)
    if n <= _SUM_CHUNK:
        return math.fsum(terms)
    chunks = [terms[i : i + _SUM_CHUNK] for i in range(0, n, _SUM_CHUNK)]
    if _THREADS > 1:
        with ThreadPoolExecutor(max_workers=_THREADS) as pool:
            partial = list(pool.map(math.fsum, chunks))
    else:
        partial = [math.fsum(c) for c in chunks]
    return math.fsum(partial)
