"""Constructors for concrete shift families and sliding-block factor maps.

Each constructor returns a :class:`~shiftlab.core.LanguageOracle` whose
membership rule is exact for the family (SFT forbidden-factor scan, beta
lexicographic rule, S-gap run scan, coded-window certificate, cocyclic
matrix products).  Construction-time checks record how far factoriality and
extendability were certified.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import mpmath as mp
import numpy as np

from .core import (
    Alphabet,
    EMPTY_WORD,
    LanguageOracle,
    Word,
    WordSet,
    default_depth_guard,
)
from .errors import (
    DepthExceededError,
    EmptyLanguageError,
    ExpansionUncertainError,
)


# ---------------------------------------------------------------------------
# Shifts of finite type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SftSpec:
    alphabet: Alphabet
    forbidden: tuple[Word, ...]

    @classmethod
    def from_strings(cls, symbols: Sequence[str], forbidden: Sequence[str]) -> "SftSpec":
        alphabet = Alphabet(tuple(symbols))
        return cls(alphabet, tuple(sorted(alphabet.word(f) for f in forbidden)))

    @property
    def memory(self) -> int:
        return max((len(f) for f in self.forbidden), default=1) - 1


class _SftData:
    """De Bruijn graph of an SFT after pruning states with no bi-infinite
    continuation."""

    def __init__(self, spec: SftSpec):
        self.spec = spec
        self.memory = max(spec.memory, 0)
        m = self.memory
        k = spec.alphabet.size
        forbidden = spec.forbidden
        if m == 0:
            self.states: list[Word] = [EMPTY_WORD]
            self.edges: dict[Word, list[Word]] = {EMPTY_WORD: [EMPTY_WORD] * k}
            self.live: set[Word] = {EMPTY_WORD}
            return

        def clean(w: Word) -> bool:
            return not _has_factor(w, forbidden)

        states = [w for w in itertools.product(range(k), repeat=m) if clean(w)]
        succ: dict[Word, list[Word]] = {}
        pred_count: dict[Word, int] = {s: 0 for s in states}
        state_set = set(states)
        for u in states:
            outs = []
            for a in range(k):
                v = u[1:] + (a,)
                if v in state_set and clean(u + (a,)):
                    outs.append(v)
            succ[u] = outs
        # prune states with no outgoing or no incoming edge, to a fixpoint
        live = set(states)
        changed = True
        while changed:
            changed = False
            indeg = {s: 0 for s in live}
            for u in live:
                for v in succ[u]:
                    if v in live:
                        indeg[v] += 1
            drop = {u for u in live if not any(v in live for v in succ[u]) or indeg[u] == 0}
            if drop:
                live -= drop
                changed = True
        self.states = sorted(live)
        self.live = live
        self.edges = {u: [v for v in succ[u] if v in live] for u in self.states}

    def adjacency(self) -> np.ndarray:
        # the m = 0 graph keeps one state with k parallel self-loops, so
        # accumulate multiplicities rather than writing 1s
        idx = {s: i for i, s in enumerate(self.states)}
        a = np.zeros((len(self.states), len(self.states)))
        for u, outs in self.edges.items():
            for v in outs:
                a[idx[u], idx[v]] += 1.0
        return a

    def count(self, n: int, allowed: set[int] | None = None) -> int:
        """Exact number of admissible length-n words (optionally restricted
        to words using only the allowed symbol indices), by integer DP."""
        m = self.memory
        if m == 0:
            k = self.spec.alphabet.size if allowed is None else len(allowed)
            return k ** n
        if n < m:
            # small lengths: factors of live states
            seen: set[Word] = set()
            for s in self.states:
                for i in range(m - n + 1):
                    w = s[i : i + n]
                    if allowed is None or all(c in allowed for c in w):
                        seen.add(w)
            return len(seen) if n > 0 else 1

        def ok(state: Word) -> bool:
            return allowed is None or all(c in allowed for c in state)

        vec = {s: 1 for s in self.states if ok(s)}
        for _ in range(n - m):
            nxt = {s: 0 for s in self.states if ok(s)}
            for u, c in vec.items():
                if c == 0:
                    continue
                for v in self.edges[u]:
                    if ok(v):
                        nxt[v] += c
            vec = nxt
        return sum(vec.values())


def _has_factor(w: Word, forbidden: Sequence[Word]) -> bool:
    if not forbidden:
        return False
    by_len: dict[int, frozenset[Word]] = _forbidden_index(tuple(forbidden))
    n = len(w)
    for lf, bucket in by_len.items():
        if lf > n:
            continue
        for i in range(n - lf + 1):
            if w[i : i + lf] in bucket:
                return True
    return False


@lru_cache(maxsize=64)
def _forbidden_index(forbidden: tuple[Word, ...]) -> dict[int, frozenset[Word]]:
    by_len: dict[int, set[Word]] = {}
    for f in forbidden:
        if f:
            by_len.setdefault(len(f), set()).add(f)
    return {k: frozenset(v) for k, v in by_len.items()}


def sft_from_forbidden(spec: SftSpec, enumeration_limit: int | None = None) -> LanguageOracle:
    """Language oracle for the SFT avoiding the given factors.

    Symbols and windows with no bi-infinite continuation are pruned at
    construction, so the oracle satisfies the extendability invariant.
    Raises EmptyLanguageError when nothing survives.
    """
    data = _SftData(spec)
    if not data.live:
        raise EmptyLanguageError("every symbol is stranded by the forbidden set")
    m = data.memory
    forbidden = spec.forbidden
    live = data.live
    states = data.states

    def member(w: Word) -> bool:
        if _has_factor(w, forbidden):
            return False
        if m == 0:
            return True
        if len(w) >= m:
            return all(w[i : i + m] in live for i in range(len(w) - m + 1))
        return any(_contains(s, w) for s in states)

    limit = enumeration_limit if enumeration_limit is not None else default_depth_guard(spec.alphabet.size)
    oracle = LanguageOracle(
        spec.alphabet,
        member,
        limit,
        name=f"sft({','.join(spec.alphabet.text(f) for f in spec.forbidden) or 'full'})",
        locality=m + 1 if spec.forbidden else 0,
        periodicity_window=m + 1 if spec.forbidden else 0,
        count_hook=data.count,
    )
    oracle.sft_data = data
    return oracle


def _contains(haystack: Word, needle: Word) -> bool:
    ln = len(needle)
    return any(haystack[i : i + ln] == needle for i in range(len(haystack) - ln + 1))


def full_shift(k: int, enumeration_limit: int | None = None) -> LanguageOracle:
    if k == 2:
        spec = SftSpec(Alphabet.binary(), ())
    else:
        spec = SftSpec(Alphabet.of_size(k), ())
    return sft_from_forbidden(spec, enumeration_limit)


def sft_entropy_exact(source: SftSpec | LanguageOracle, tol: float = 1e-12) -> float:
    """log of the spectral radius of the de Bruijn transition matrix,
    via power iteration on A + I to relative tolerance ``tol``."""
    if isinstance(source, LanguageOracle):
        data = getattr(source, "sft_data", None)
        if data is None:
            raise ValueError("oracle does not carry SFT transition data")
    else:
        data = _SftData(source)
        if not data.live:
            raise EmptyLanguageError("empty language has no entropy")
    a = data.adjacency() + np.eye(len(data.states))
    x = np.ones(len(data.states))
    x /= np.linalg.norm(x)
    lam = 1.0
    for _ in range(500000):
        y = a @ x
        lam = float(y @ x)
        residual = float(np.linalg.norm(y - lam * x))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            raise EmptyLanguageError("transition matrix is nilpotent")
        x = y / nrm
        if residual <= tol * abs(lam):
            break
    return math.log(lam - 1.0)


def cycle_sft(k: int, enumeration_limit: int | None = None) -> LanguageOracle:
    """SFT on {1,...,k} allowing transitions a -> a+1 and a -> a+2 mod k."""
    if k < 4:
        raise ValueError("cycle SFT needs k >= 4")
    alphabet = Alphabet(tuple(str(i + 1) for i in range(k)))
    forbidden = [
        (i, j)
        for i in range(k)
        for j in range(k)
        if (j - i) % k not in (1, 2)
    ]
    spec = SftSpec(alphabet, tuple(forbidden))
    limit = enumeration_limit if enumeration_limit is not None else max(18, default_depth_guard(k))
    oracle = sft_from_forbidden(spec, limit)
    oracle.name = f"cycle_sft({k})"
    return oracle


def avoid_symbol_set(oracle: LanguageOracle, symbol: str) -> WordSet:
    """Words of the language avoiding one symbol, with an exact count hook
    when the oracle carries SFT transition data."""
    a = oracle.alphabet.index(symbol)
    allowed = set(range(oracle.alphabet.size)) - {a}
    data = getattr(oracle, "sft_data", None)
    hook = (lambda n: data.count(n, allowed)) if data is not None else None
    return WordSet.from_predicate(
        oracle,
        lambda w: a not in w,
        count_hook=hook,
        name=f"avoid({symbol})",
    )


# ---------------------------------------------------------------------------
# Beta shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaSpec:
    """Driving data for a beta-shift: either a base beta > 1 (the
    quasi-greedy expansion of 1 is computed) or an explicit eventually
    periodic sequence z."""

    beta: float | None
    z_pre: tuple[int, ...]
    z_period: tuple[int, ...] | None
    depth: int

    @classmethod
    def from_beta(cls, beta: float, depth: int = 24, tol: float = 1e-12) -> "BetaSpec":
        if beta <= 1:
            raise ValueError("beta must be > 1")
        pre, period = _quasi_greedy_digits(beta, depth, tol)
        return cls(beta, pre, period, depth)

    @classmethod
    def from_sequence(cls, pre: Sequence[int], period: Sequence[int] | None,
                      depth: int = 24) -> "BetaSpec":
        return cls(None, tuple(pre), tuple(period) if period else None, depth)

    def digit(self, i: int) -> int:
        """1-based digit z_i."""
        if i <= len(self.z_pre):
            return self.z_pre[i - 1]
        if self.z_period:
            return self.z_period[(i - len(self.z_pre) - 1) % len(self.z_period)]
        raise DepthExceededError(f"driving sequence certified only to depth {len(self.z_pre)}")

    def prefix(self, n: int) -> Word:
        return tuple(self.digit(i) for i in range(1, n + 1))

    def digit_alphabet(self) -> Alphabet:
        if self.beta is not None:
            top = math.ceil(self.beta) - 1
        else:
            digits = self.z_pre + (self.z_period or ())
            top = max(digits)
        return Alphabet(tuple(str(d) for d in range(top + 1)))

    def expansion_sums_to_one(self, tol: float = 1e-12) -> bool:
        """Numerical check that sum z_k beta^{-k} = 1 at certificate depth."""
        if self.beta is None:
            return True
        with mp.workdps(60):
            b = mp.mpf(self.beta)
            if self.z_period is not None:
                p, q = self.z_pre, self.z_period
                head = mp.fsum(d * b ** -(i + 1) for i, d in enumerate(p))
                block = mp.fsum(d * b ** -(i + 1) for i, d in enumerate(q))
                tail = block * b ** -len(p) / (1 - b ** -len(q))
                return abs(head + tail - 1) <= tol
            partial = mp.fsum(d * b ** -(i + 1) for i, d in enumerate(self.z_pre))
            top = math.ceil(self.beta) - 1
            max_tail = top * b ** -len(self.z_pre) / (b - 1)
            return -tol <= 1 - partial <= max_tail + tol


def _quasi_greedy_digits(beta: float, n: int, tol: float) -> tuple[tuple[int, ...], tuple[int, ...] | None]:
    """First n digits of the quasi-greedy expansion of 1 in base beta.

    Runs the greedy algorithm in high precision.  A step landing within
    ``tol`` of an integer is snapped: the greedy expansion terminates there
    and the quasi-greedy sequence is the terminating word with its last
    digit decremented, repeated.  A step landing near an integer but outside
    the snap zone cannot be resolved and raises ExpansionUncertainError.
    """
    guard = max(tol * 1000, 1e-9)
    dps = max(50, 30 + int(n * math.log10(beta)) + 10)
    with mp.workdps(dps):
        b = mp.mpf(beta)
        top = math.ceil(beta) - 1
        r = mp.mpf(1)
        digits: list[int] = []
        for k in range(1, n + 1):
            x = b * r
            nearest = int(mp.nint(x))
            dist = abs(x - nearest)
            if dist <= tol:
                if nearest < 1:
                    raise ExpansionUncertainError(
                        f"digit {k} of the expansion of 1 in base {beta} is ambiguous near 0"
                    )
                period = tuple(digits + [nearest - 1])
                return (), period
            if dist <= guard:
                raise ExpansionUncertainError(
                    f"digit {k} of the expansion of 1 in base {beta} cannot be resolved "
                    f"within tolerance {tol:g} (distance {float(dist):.3e} to integer)"
                )
            d = int(mp.floor(x))
            if k > 1 and d > top:
                raise ExpansionUncertainError(
                    f"digit {k} exceeded the digit alphabet; beta too imprecise"
                )
            digits.append(d)
            r = x - d
        return tuple(digits), None


def quasi_greedy_expansion(beta: float, n: int, tol: float = 1e-12) -> Word:
    """First n digits of the lexicographically maximal driving sequence z."""
    if beta <= 1:
        raise ValueError("beta must be > 1")
    pre, period = _quasi_greedy_digits(beta, n, tol)
    spec = BetaSpec(beta, pre, period, n)
    return spec.prefix(n)


def beta_shift(spec: BetaSpec, enumeration_limit: int | None = None) -> LanguageOracle:
    """Membership via the lexicographic condition against the quasi-greedy z:
    a word is admissible iff every suffix is lexicographically <= the prefix
    of z of the same length."""
    alphabet = spec.digit_alphabet()
    limit = enumeration_limit if enumeration_limit is not None else spec.depth
    if spec.z_period is None and limit > len(spec.z_pre):
        limit = len(spec.z_pre)

    def member(w: Word) -> bool:
        n = len(w)
        z = spec.prefix(n)  # raises DepthExceededError if uncertified
        for k in range(n):
            suffix = w[k:]
            if suffix > z[: n - k]:
                return False
        return True

    label = f"beta({spec.beta})" if spec.beta is not None else "beta(z)"
    return LanguageOracle(alphabet, member, limit, name=label, locality=None)


# ---------------------------------------------------------------------------
# S-gap shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SGapSpec:
    """Gap set S as an explicit finite part plus an optional arithmetic
    tail {tail_start + j*tail_period : j >= 0}."""

    values: tuple[int, ...]
    tail_start: int | None = None
    tail_period: int | None = None

    def __post_init__(self):
        if not self.values and self.tail_start is None:
            raise ValueError("S must be nonempty")

    @classmethod
    def naturals(cls) -> "SGapSpec":
        return cls((), tail_start=0, tail_period=1)

    @property
    def unbounded(self) -> bool:
        return self.tail_start is not None

    def contains_gap(self, g: int) -> bool:
        if g in self.values:
            return True
        if self.tail_start is not None and g >= self.tail_start:
            return (g - self.tail_start) % (self.tail_period or 1) == 0
        return False

    def has_gap_at_least(self, g: int) -> bool:
        if self.unbounded:
            return True
        return any(s >= g for s in self.values)

    def max_finite(self) -> int | None:
        return None if self.unbounded else max(self.values)


def s_gap_shift(spec: SGapSpec, enumeration_limit: int | None = None) -> LanguageOracle:
    """Binary shift whose internal runs of 0s between consecutive 1s have
    lengths in S; boundary runs only need some gap at least as long."""
    alphabet = Alphabet.binary()

    def member(w: Word) -> bool:
        ones = [i for i, c in enumerate(w) if c == 1]
        if not ones:
            return spec.has_gap_at_least(len(w))
        if not spec.has_gap_at_least(ones[0]):
            return False
        if not spec.has_gap_at_least(len(w) - 1 - ones[-1]):
            return False
        for a, b in zip(ones, ones[1:]):
            if not spec.contains_gap(b - a - 1):
                return False
        return True

    def periodic_check(p: Word) -> bool:
        ones = [i for i, c in enumerate(p) if c == 1]
        if not ones:
            return spec.unbounded
        cyc = [b - a - 1 for a, b in zip(ones, ones[1:])]
        cyc.append(ones[0] + len(p) - 1 - ones[-1])
        return all(spec.contains_gap(g) for g in cyc)

    limit = enumeration_limit if enumeration_limit is not None else default_depth_guard(2)
    mx = spec.max_finite()
    return LanguageOracle(
        alphabet,
        member,
        limit,
        name=f"s_gap({list(spec.values)}{'+' if spec.unbounded else ''})",
        locality=None if spec.unbounded else mx + 2,
        periodic_check=periodic_check,
    )


# ---------------------------------------------------------------------------
# Coded shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CodedSpec:
    generators: tuple[Word, ...]
    alphabet: Alphabet
    truncated: bool = False

    @classmethod
    def from_strings(cls, symbols: Sequence[str], generators: Sequence[str],
                     truncated: bool = False) -> "CodedSpec":
        alphabet = Alphabet(tuple(symbols))
        gens = tuple(sorted(alphabet.word(g) for g in generators))
        return cls(gens, alphabet, truncated)

    @property
    def pad(self) -> int:
        return max((len(g) for g in self.generators), default=0)


def coded_shift(spec: CodedSpec, enumeration_limit: int | None = None) -> LanguageOracle:
    """A word is admissible iff it occurs in some bi-infinite concatenation
    of generators; decided by a boundary-reachability scan over a window
    padded by the longest generator on each side."""
    if not spec.generators or any(len(g) == 0 for g in spec.generators):
        raise ValueError("generators must be nonempty words")
    gens = spec.generators

    def member(w: Word) -> bool:
        n = len(w)
        starts = {0}
        for g in gens:
            lg = len(g)
            for j in range(1, lg):
                avail = lg - j
                if avail >= n:
                    if g[j : j + n] == w:
                        return True
                elif g[j:] == w[:avail]:
                    starts.add(avail)
        seen = set(starts)
        queue = sorted(starts)
        while queue:
            i = queue.pop()
            if i == n:
                return True
            for g in gens:
                lg = len(g)
                if i + lg <= n:
                    if w[i : i + lg] == g and (i + lg) not in seen:
                        seen.add(i + lg)
                        queue.append(i + lg)
                elif g[: n - i] == w[i:]:
                    return True
        return False

    limit = enumeration_limit if enumeration_limit is not None else default_depth_guard(spec.alphabet.size)
    oracle = LanguageOracle(
        spec.alphabet,
        member,
        limit,
        name=f"coded({len(gens)} gens{', truncated' if spec.truncated else ''})",
        locality=None,
    )
    oracle.coded_truncated = spec.truncated
    return oracle


# ---------------------------------------------------------------------------
# Cocyclic shifts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CocyclicSpec:
    """One square integer matrix per symbol; a word is admissible iff the
    ordered product of its matrices is nonzero (exact arithmetic)."""

    matrices: tuple[tuple[tuple[int, ...], ...], ...]
    alphabet: Alphabet

    @classmethod
    def from_lists(cls, matrices: Sequence[Sequence[Sequence[int]]],
                   symbols: Sequence[str] | None = None) -> "CocyclicSpec":
        mats = tuple(tuple(tuple(int(x) for x in row) for row in m) for m in matrices)
        d = len(mats[0])
        for m in mats:
            if len(m) != d or any(len(row) != d for row in m):
                raise ValueError("matrices must be square and of equal dimension")
        alphabet = Alphabet(tuple(symbols) if symbols else tuple(str(i + 1) for i in range(len(mats))))
        return cls(mats, alphabet)

    @property
    def dimension(self) -> int:
        return len(self.matrices[0])


def _mat_mul(a, b, d: int):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(d)) for j in range(d))
        for i in range(d)
    )


def _mat_is_zero(a) -> bool:
    return all(all(x == 0 for x in row) for row in a)


def cocyclic_shift(spec: CocyclicSpec, enumeration_limit: int | None = None) -> LanguageOracle:
    d = spec.dimension
    mats = spec.matrices
    identity = tuple(tuple(1 if i == j else 0 for j in range(d)) for i in range(d))

    @lru_cache(maxsize=262144)
    def product(w: Word):
        if len(w) == 0:
            return identity
        if len(w) == 1:
            return mats[w[0]]
        return _mat_mul(product(w[:-1]), mats[w[-1]], d)

    def member(w: Word) -> bool:
        return not _mat_is_zero(product(w))

    limit = enumeration_limit if enumeration_limit is not None else default_depth_guard(spec.alphabet.size)
    oracle = LanguageOracle(
        spec.alphabet,
        member,
        limit,
        name=f"cocyclic(d={d})",
        locality=None,
    )
    oracle.cocyclic_product = product
    return oracle


# ---------------------------------------------------------------------------
# Sliding-block codes and factors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockCode:
    """Window map with radius m: theta sends source (2m+1)-words to target
    symbol indices."""

    radius: int
    theta: Mapping[Word, int]
    target_alphabet: Alphabet

    def apply(self, u: Word) -> Word:
        m = self.radius
        width = 2 * m + 1
        if len(u) < width:
            return EMPTY_WORD
        return tuple(self.theta[u[i : i + width]] for i in range(len(u) - width + 1))


def sliding_block_factor(source: LanguageOracle, code: BlockCode,
                         enumeration_limit: int | None = None) -> LanguageOracle:
    """Factor language: length-n words are the images of source words of
    length n + 2m under the window map."""
    m = code.radius
    limit_cap = source.enumeration_limit - 2 * m
    limit = min(enumeration_limit, limit_cap) if enumeration_limit is not None else limit_cap
    images: dict[int, frozenset[Word]] = {}

    def image_at(n: int) -> frozenset[Word]:
        got = images.get(n)
        if got is None:
            if n + 2 * m > source.enumeration_limit:
                raise DepthExceededError(
                    f"factor membership at length {n} needs source depth {n + 2 * m}"
                )
            got = frozenset(code.apply(u) for u in source.words(n + 2 * m))
            images[n] = got
        return got

    def member(w: Word) -> bool:
        return w in image_at(len(w))

    return LanguageOracle(
        code.target_alphabet,
        member,
        limit,
        name=f"factor({source.name}, m={m})",
        locality=None,
    )


def compose_block_codes(source: LanguageOracle, inner: BlockCode, outer: BlockCode) -> BlockCode:
    """The code computing outer∘inner directly, with radius m1+m2; its table
    is built over the admissible source windows."""
    m = inner.radius + outer.radius
    width = 2 * m + 1
    table: dict[Word, int] = {}
    for u in source.words(width):
        mid = inner.apply(u)
        table[u] = outer.theta[mid]
    return BlockCode(m, table, outer.target_alphabet)
