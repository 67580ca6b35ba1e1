"""Finite-scale checkers and constructors for the specification conditions,
obstruction collections, the good-word construction from complete obstruction
lists, quasi-finite-type constraints, and synchronised decompositions.

Every verdict is depth-certified: it quantifies over the enumerated words
only and records the depth.  No checker claims an infinite-depth result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import (
    EMPTY_WORD,
    LanguageOracle,
    Potential,
    Word,
    WordSet,
)
from .errors import DepthExceededError, NotSynchronisingError, NoValidParametersError
from .thermo import NEG_INF, PressureReport, format17, pressure_estimate

DEFAULT_MARGIN = 0.05


@dataclass
class TripleCollections:
    """Prefix, good, and suffix collections with the gluing bound tau and
    the overlap parameter L."""

    cp: WordSet
    good: WordSet
    cs: WordSet
    tau: int
    L_param: int | None = None


@dataclass(frozen=True)
class Decomposition:
    """w = w[:prefix_end] * w[prefix_end:good_end] * w[good_end:]."""

    prefix_end: int
    good_end: int


@dataclass
class Verdict:
    condition: str
    depth: int
    passed: bool
    witnesses: list = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_json_dict(self, alphabet=None) -> dict:
        def render(x):
            if alphabet is not None and isinstance(x, tuple) and all(isinstance(i, int) for i in x):
                return alphabet.text(x)
            if isinstance(x, tuple):
                return [render(y) for y in x]
            return x

        return {
            "condition": self.condition,
            "depth": self.depth,
            "pass": self.passed,
            "witnesses": [render(w) for w in self.witnesses],
            "parameters": dict(sorted(self.parameters.items())),
        }


def _collection_words(ws: WordSet, n: int, include_empty: bool = False) -> list[Word]:
    out: list[Word] = []
    lo = 0 if include_empty else 1
    for m in range(lo, n + 1):
        out.extend(ws.at(m))
    return out


# ---------------------------------------------------------------------------
# Conditions [I], [I'], [III]/[III_a]/[III_b]
# ---------------------------------------------------------------------------

def check_spec_I(collections: TripleCollections, oracle: LanguageOracle, n: int) -> Verdict:
    """[I]: every pair of good words glues with a connector u, |u| <= tau."""
    return _check_gluing(collections.good, oracle, collections.tau, n,
                         exact_length=False, condition="[I]",
                         target=collections.good)


def check_strong_spec_Iprime(collections: TripleCollections, oracle: LanguageOracle, n: int) -> Verdict:
    """[I']: as [I] but the connector has length exactly tau."""
    return _check_gluing(collections.good, oracle, collections.tau, n,
                         exact_length=True, condition="[I']",
                         target=collections.good)


def _check_gluing(good: WordSet, oracle: LanguageOracle, tau: int, n: int,
                  *, exact_length: bool, condition: str, target: WordSet) -> Verdict:
    if getattr(good, "_explicit", None) is not None and 2 * n + tau > good.depth:
        raise DepthExceededError(
            f"gluing check needs membership at length {2 * n + tau}, set certified to {good.depth}"
        )
    words = _collection_words(good, n)
    lengths = [tau] if exact_length else list(range(tau + 1))
    connectors = [u for ell in lengths for u in oracle.words(ell)]
    witnesses: list[tuple[Word, Word]] = []
    max_needed = 0
    for v, w in itertools.product(words, repeat=2):
        hit = None
        for u in connectors:
            if target.contains(v + u + w):
                hit = u
                break
        if hit is None:
            witnesses.append((v, w))
        else:
            max_needed = max(max_needed, len(hit))
    return Verdict(
        condition,
        n,
        not witnesses,
        witnesses[:20],
        parameters={"tau": tau},
        extras={"max_connector": max_needed, "pairs": len(words) ** 2},
    )


def check_stay_good_III(
    collections: TripleCollections,
    oracle: LanguageOracle,
    n: int,
    *,
    mode: str = "full",
    x_bound: int | None = None,
) -> Verdict:
    """[III] and its one-sided variants over all admissible u,v,w with
    |uvw| <= n, |v| >= L, uv and vw good, uvw admissible.

    mode "full": require v and uvw good ([III]);
    mode "inter": require v good ([III_a]);
    mode "union": require uvw good whenever additionally some admissible x
    has x.uvw good ([III_b]); x is searched to ``x_bound`` symbols.
    """
    if collections.L_param is None:
        raise ValueError("check_stay_good_III needs L_param")
    L = collections.L_param
    good = collections.good
    witnesses: list[tuple[Word, Word, Word]] = []
    checked = 0
    label = {"full": "[III]", "inter": "[III_a]", "union": "[III_b]"}[mode]
    for m in range(L, n + 1):
        for t in oracle.words(m):
            for i in range(0, m + 1):
                for j in range(i + L, m + 1):
                    u, v, w = t[:i], t[i:j], t[j:]
                    if not (good.contains(t[:j]) and good.contains(t[i:])):
                        continue
                    checked += 1
                    if mode == "union":
                        bound = x_bound if x_bound is not None else max(0, n - m)
                        trigger = any(
                            good.contains(x + t)
                            for ell in range(1, bound + 1)
                            for x in oracle.words(ell)
                        )
                        if not trigger:
                            continue
                        ok = good.contains(t)
                    elif mode == "inter":
                        ok = good.contains(v)
                    else:
                        ok = good.contains(v) and good.contains(t)
                    if not ok:
                        witnesses.append((u, v, w))
    return Verdict(
        label,
        n,
        not witnesses,
        witnesses[:20],
        parameters={"L": L, "mode": mode},
        extras={"instances": checked},
    )


# ---------------------------------------------------------------------------
# Decompositions and the pressure-gap condition [II]
# ---------------------------------------------------------------------------

def make_decomposer(collections: TripleCollections) -> Callable[[Word], Decomposition | None]:
    """Split finder for Cp.G.Cs with the deterministic tie rule: smallest
    prefix end, then largest good end."""

    cp, good, cs = collections.cp, collections.good, collections.cs

    def decompose(w: Word) -> Decomposition | None:
        for i in range(0, len(w) + 1):
            if not cp.contains(w[:i]):
                continue
            for j in range(len(w), i - 1, -1):
                if cs.contains(w[j:]) and good.contains(w[i:j]):
                    return Decomposition(i, j)
        return None

    return decompose


def obstruction_complement(
    collections: TripleCollections, oracle: LanguageOracle, n: int
) -> tuple[WordSet, Callable[[Word], Decomposition | None]]:
    """The words of length 1..n with no Cp.G.Cs decomposition, together with
    the decomposition finder (the empty word is never reported)."""
    decompose = make_decomposer(collections)
    table: dict[int, list[Word]] = {}
    for m in range(1, n + 1):
        table[m] = [w for w in oracle.words(m) if decompose(w) is None]
    ws = WordSet.from_words(oracle, [w for ws_ in table.values() for w in ws_],
                            depth=n, name="L\\CpGCs")
    return ws, decompose


@dataclass
class GapReport:
    condition: str
    obstruction_report: PressureReport
    language_report: PressureReport
    margin: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "condition": self.condition,
            "margin": format17(self.margin),
            "pass": self.passed,
            "obstructions": self.obstruction_report.to_json_dict(),
            "language": self.language_report.to_json_dict(),
        }


def margin_rule(obstruction: PressureReport, language: PressureReport, margin: float) -> bool:
    """Gap holds at depth iff the obstruction rate stays below the language
    rate by the margin on every length in the top half of the table."""
    n_max = language.n_max
    for row in language.rows:
        if row.n <= n_max // 2:
            continue
        other = obstruction.rate_at(row.n)
        if other > row.rate - margin:
            return False
    return True


def pressure_gap_II(
    collections: TripleCollections,
    oracle: LanguageOracle,
    potential: Potential,
    n_max: int,
    *,
    margin: float = DEFAULT_MARGIN,
) -> GapReport:
    """[II]: pressure of Cp u Cs u (L \\ Cp.G.Cs) versus the full language,
    judged by the margin rule."""
    decompose = make_decomposer(collections)
    cp, cs = collections.cp, collections.cs

    def in_obstructions(w: Word) -> bool:
        return cp.contains(w) or cs.contains(w) or decompose(w) is None

    obstructions = WordSet.from_predicate(oracle, in_obstructions, name="C")
    lang = WordSet.language(oracle)
    rep_c = pressure_estimate(obstructions, potential, n_max, fekete=False)
    rep_l = pressure_estimate(lang, potential, n_max)
    return GapReport("[II]", rep_c, rep_l, margin, margin_rule(rep_c, rep_l, margin))


# ---------------------------------------------------------------------------
# Obstruction pairs: persistence, [I*], and good words G(C^+-, M)
# ---------------------------------------------------------------------------

@dataclass
class ObstructionPair:
    cminus: WordSet
    cplus: WordSet
    M: int | None = None
    tau_of_M: dict[int, int] = field(default_factory=dict)


def good_words_from_obstructions(pair: ObstructionPair, oracle: LanguageOracle, M: int) -> WordSet:
    """G(C^+-, M): words that do not start with a C^- word or end with a C^+
    word of length >= M."""
    if M < 1:
        raise ValueError("threshold M must be >= 1")
    cminus, cplus = pair.cminus, pair.cplus

    def member(w: Word) -> bool:
        for i in range(M, len(w) + 1):
            if cminus.contains(w[:i]):
                return False
            if cplus.contains(w[len(w) - i :]):
                return False
        return True

    return WordSet.from_predicate(oracle, member, name=f"G(C+-,{M})")


def check_persistence(pair: ObstructionPair, oracle: LanguageOracle, n: int) -> Verdict:
    """eqn-persistence: prefixes of C^+ words stay in C^+ and suffixes of
    C^- words stay in C^-, over all splits to depth n."""
    witnesses: list[tuple[Word, Word]] = []
    for m in range(2, n + 1):
        for u in pair.cplus.at(m):
            for t in range(1, m):
                if not pair.cplus.contains(u[:t]):
                    witnesses.append((u[:t], u))
        for u in pair.cminus.at(m):
            for t in range(1, m):
                if not pair.cminus.contains(u[t:]):
                    witnesses.append((u[t:], u))
    return Verdict("persistence", n, not witnesses, witnesses[:20])


def check_complete_list_Istar(
    pair: ObstructionPair,
    oracle: LanguageOracle,
    M_list: Sequence[int],
    n: int,
    *,
    tau_cap: int | None = None,
) -> Verdict:
    """[I*]: for each M, the minimal tau such that all pairs from
    G(C^+-, M) up to depth n glue into the language (not necessarily into
    the good set) with a connector of length <= tau."""
    cap = tau_cap if tau_cap is not None else n
    table: dict[int, int] = {}
    witnesses: list = []
    for M in M_list:
        good = good_words_from_obstructions(pair, oracle, M)
        words = _collection_words(good, n)
        worst = 0
        failed = None
        for v, w in itertools.product(words, repeat=2):
            need = None
            for ell in range(cap + 1):
                if any(oracle.contains(v + u + w) for u in oracle.words(ell)):
                    need = ell
                    break
            if need is None:
                failed = (v, w)
                break
            worst = max(worst, need)
        if failed is not None:
            witnesses.append((M, failed))
        else:
            table[M] = worst
            pair.tau_of_M[M] = worst
    return Verdict(
        "[I*]",
        n,
        not witnesses,
        witnesses,
        parameters={"tau_of_M": dict(sorted(table.items())), "tau_cap": cap},
    )


# ---------------------------------------------------------------------------
# The construction of good collections from a complete obstruction list
# ---------------------------------------------------------------------------

def star_closure(base: WordSet, oracle: LanguageOracle, name: str = "") -> WordSet:
    """Kleene star of a collection, by length-bounded parsing DP; the empty
    word is included."""
    if base.known_empty:
        return WordSet(oracle, explicit={0: [EMPTY_WORD]}, depth=oracle.enumeration_limit,
                       name=name or "{epsilon}")

    def member(w: Word) -> bool:
        n = len(w)
        if n == 0:
            return True
        reach = [False] * (n + 1)
        reach[0] = True
        for i in range(n):
            if not reach[i]:
                continue
            for j in range(i + 1, n + 1):
                if not reach[j] and base.contains(w[i:j]):
                    reach[j] = True
        return reach[n]

    return WordSet.from_predicate(oracle, member, name=name or f"({base.name})*")


def _phat(ws: WordSet, potential: Potential, lo: int, hi: int) -> float:
    """sup over computed n in [lo, hi] of (1/n) log Lambda_n."""
    from .thermo import log_partition_sum

    best = NEG_INF
    for m in range(max(1, lo), hi + 1):
        ls = log_partition_sum(ws, potential, m)
        if ls > NEG_INF:
            best = max(best, ls / m)
    return best


@dataclass
class CgcResult:
    collections: TripleCollections
    decompose: Callable[[Word], tuple[Word, Word, Word]]
    parameters: dict
    gap_report: GapReport


def cgc_construct(
    pair: ObstructionPair,
    oracle: LanguageOracle,
    potential: Potential,
    eps: float = DEFAULT_MARGIN,
    *,
    depth: int | None = None,
    M_grid: Sequence[int] = (2, 3, 4),
    N_grid: Sequence[int] = (2, 3, 4, 6, 8, 10),
    margin: float | None = None,
    tau_depth: int | None = None,
) -> CgcResult:
    """Builds prefix/good/suffix collections from a persistent complete
    obstruction list, scanning (M, N) over the grid and returning the
    smallest pair that passes the margin rule.

    The construction follows the three-step recipe: choose M and tau(M),
    derive the near-obstruction collections D^-+ (words extendable into an
    obstruction within tau+M symbols), take star closures
    Cp = (C^-_{>=M} u D^+_{>=N})*, Cs = (C^+_{>=M} u D^-_{>=N})*, and keep
    as good words those clear of all four collections at every scale.
    Raises NoValidParametersError when no grid pair meets the margin rule.
    """
    work_depth = depth if depth is not None else min(oracle.enumeration_limit, 12)
    glue_depth = tau_depth if tau_depth is not None else min(work_depth, 6)
    use_margin = margin if margin is not None else eps
    cminus, cplus = pair.cminus, pair.cplus
    rate_minus = _phat_rate(cminus, potential, work_depth)
    rate_plus = _phat_rate(cplus, potential, work_depth)

    for M in M_grid:
        if not _surrogate_ok(cminus, potential, M, work_depth, rate_minus, eps):
            continue
        if not _surrogate_ok(cplus, potential, M, work_depth, rate_plus, eps):
            continue
        istar = check_complete_list_Istar(pair, oracle, [M], glue_depth)
        if not istar.passed:
            continue
        tau = istar.parameters["tau_of_M"][M]
        dminus = _near_obstructions(cminus, oracle, tau + M, side="right")
        dplus = _near_obstructions(cplus, oracle, tau + M, side="left")
        for N in N_grid:
            if N < M:
                continue
            if not _surrogate_ok(dminus, potential, N, work_depth, rate_minus, eps):
                continue
            if not _surrogate_ok(dplus, potential, N, work_depth, rate_plus, eps):
                continue
            result = _assemble_cgc(pair, oracle, potential, M, N, tau,
                                   dminus, dplus, work_depth, use_margin)
            if result is not None:
                return result
    raise NoValidParametersError(
        f"no (M, N) in {list(M_grid)} x {list(N_grid)} meets the margin rule at depth {work_depth}"
    )


def _phat_rate(ws: WordSet, potential: Potential, depth: int) -> float:
    """Finite-depth point estimate of the pressure of a collection."""
    from .thermo import log_partition_sum

    logs = [(m, log_partition_sum(ws, potential, m)) for m in range(1, depth + 1)]
    supported = [(m, v) for m, v in logs if v > NEG_INF]
    if len(supported) >= 2:
        (m1, v1), (m2, v2) = supported[-2], supported[-1]
        return (v2 - v1) / (m2 - m1)
    if supported:
        return supported[0][1] / supported[0][0]
    return NEG_INF


def _surrogate_ok(ws: WordSet, potential: Potential, cutoff: int, depth: int,
                  rate: float, eps: float) -> bool:
    """Finite surrogate of the tail-pressure inequalities: the sup-rate of
    the length->=cutoff part must not exceed the collection's rate estimate
    by more than eps.  Vacuous for empty collections."""
    if rate == NEG_INF:
        return True
    tail = WordSet.from_predicate(ws.oracle, lambda w: len(w) >= cutoff and ws.contains(w))
    phat = _phat(tail, potential, cutoff, depth)
    return phat <= rate + eps or phat == NEG_INF


def _near_obstructions(obstructions: WordSet, oracle: LanguageOracle, reach: int,
                       side: str) -> WordSet:
    """Words within `reach` symbols of an obstruction: side="right" means
    some extension wx lands in the collection, side="left" means some xw
    does."""
    if obstructions.known_empty:
        return WordSet.empty(oracle)

    def member(w: Word) -> bool:
        if len(w) == 0:
            return False
        for ell in range(0, reach + 1):
            for x in oracle.words(ell):
                cand = w + x if side == "right" else x + w
                if obstructions.contains(cand):
                    return True
        return False

    return WordSet.from_predicate(oracle, member,
                                  name=f"D{'+' if side == 'left' else '-'}")


def _assemble_cgc(pair, oracle, potential, M, N, tau, dminus, dplus, depth, margin):
    cminus, cplus = pair.cminus, pair.cplus

    def at_least(ws: WordSet, cutoff: int) -> WordSet:
        return WordSet.from_predicate(oracle, lambda w: len(w) >= cutoff and ws.contains(w))

    cp = star_closure(at_least(cminus, M).union(at_least(dplus, N)), oracle, name="Cp")
    cs = star_closure(at_least(cplus, M).union(at_least(dminus, N)), oracle, name="Cs")

    def in_good(w: Word) -> bool:
        if len(w) == 0:
            return False
        if dplus.contains(w) or dminus.contains(w):
            return False
        for i in range(M, len(w) + 1):
            if cminus.contains(w[:i]) or cplus.contains(w[len(w) - i :]):
                return False
        for i in range(N, len(w) + 1):
            if dplus.contains(w[:i]) or dminus.contains(w[len(w) - i :]):
                return False
        return True

    good = WordSet.from_predicate(oracle, in_good, name="G(cgc)")
    collections = TripleCollections(cp, good, cs, tau=tau, L_param=N)
    gap = pressure_gap_II(collections, oracle, potential, depth, margin=margin)
    if not gap.passed:
        return None

    prefix_base = at_least(cminus, M).union(at_least(dplus, N))
    suffix_base = at_least(cplus, M).union(at_least(dminus, N))

    def decompose(w: Word) -> tuple[Word, Word, Word]:
        """Greedy left-then-right stripping; pieces are reported as words."""
        up: list[Word] = []
        v = w
        while v:
            hit = None
            for i in range(1, len(v) + 1):
                if prefix_base.contains(v[:i]):
                    hit = i
                    break
            if hit is None:
                break
            up.append(v[:hit])
            v = v[hit:]
        us: list[Word] = []
        while v:
            hit = None
            for i in range(1, len(v) + 1):
                if suffix_base.contains(v[len(v) - i :]):
                    hit = i
                    break
            if hit is None:
                break
            us.insert(0, v[len(v) - hit :])
            v = v[: len(v) - hit]
        prefix = tuple(x for piece in up for x in piece)
        suffix = tuple(x for piece in us for x in piece)
        return prefix, v, suffix

    params = {"M": M, "N": N, "tau": tau, "depth": depth, "margin": margin}
    return CgcResult(collections, decompose, params, gap)


# ---------------------------------------------------------------------------
# Quasi-finite-type constraints
# ---------------------------------------------------------------------------

@dataclass
class QftReport:
    depth: int
    exact: bool
    left: dict[int, tuple[Word, ...]]
    right: dict[int, tuple[Word, ...]]

    def left_all(self) -> list[Word]:
        return [w for ws in self.left.values() for w in ws]

    def right_all(self) -> list[Word]:
        return [w for ws in self.right.values() for w in ws]


def _is_left_constraint(oracle: LanguageOracle, w: Word, bound: int) -> bool:
    if len(w) < 1:
        return False
    for ell in range(1, bound + 1):
        for v in oracle.words(ell):
            if oracle.contains(w[1:] + v) and not oracle.contains(w + v):
                return True
    return False


def _is_right_constraint(oracle: LanguageOracle, w: Word, bound: int) -> bool:
    if len(w) < 1:
        return False
    for ell in range(1, bound + 1):
        for v in oracle.words(ell):
            if oracle.contains(v + w[:-1]) and not oracle.contains(v + w):
                return True
    return False


def _constraint_bound(oracle: LanguageOracle, search_bound: int | None) -> tuple[int, bool]:
    if oracle.locality is not None:
        return max(0, oracle.locality - 1), True
    return (search_bound if search_bound is not None else 4), False


def qft_constraints(oracle: LanguageOracle, n: int, *, search_bound: int | None = None) -> QftReport:
    """Left/right constraint words up to length n.

    Exact for window-local oracles (the witness extension never needs more
    than the memory); otherwise the extension search is bounded and the
    result is depth-certified (exact=False)."""
    bound, exact = _constraint_bound(oracle, search_bound)
    left: dict[int, tuple[Word, ...]] = {}
    right: dict[int, tuple[Word, ...]] = {}
    for m in range(1, n + 1):
        words = oracle.words(m)
        left[m] = tuple(w for w in words if _is_left_constraint(oracle, w, bound))
        right[m] = tuple(w for w in words if _is_right_constraint(oracle, w, bound))
    return QftReport(n, exact, left, right)


def qft_obstruction_pair(oracle: LanguageOracle, *, search_bound: int | None = None) -> ObstructionPair:
    """C^+ = left constraints, C^- = right constraints, as predicate sets."""
    bound, _ = _constraint_bound(oracle, search_bound)
    cplus = WordSet.from_predicate(oracle, lambda w: _is_left_constraint(oracle, w, bound),
                                   name="C^l")
    cminus = WordSet.from_predicate(oracle, lambda w: _is_right_constraint(oracle, w, bound),
                                    name="C^r")
    return ObstructionPair(cminus, cplus)


# ---------------------------------------------------------------------------
# Synchronised shifts
# ---------------------------------------------------------------------------

def sync_decomposition(
    oracle: LanguageOracle,
    s: Word,
    *,
    depth: int | None = None,
    connector_bound: int | None = None,
) -> TripleCollections:
    """Collections for a synchronising word: good words start and end with
    s, prefix/suffix obstructions avoid s entirely, and tau is the length
    of the least connector c with s.c.s admissible.

    The synchronising property (vs, sw admissible implies vsw admissible)
    is verified exhaustively to the given depth; a failing pair raises
    NotSynchronisingError with the witness."""
    d = depth if depth is not None else min(oracle.enumeration_limit // 2, 8)
    if not oracle.contains(s):
        raise NotSynchronisingError(f"{s} is not admissible", witness=s)
    for lv in range(0, d + 1):
        for v in oracle.words(lv):
            if not oracle.contains(v + s):
                continue
            for lw in range(0, d + 1):
                for w in oracle.words(lw):
                    if oracle.contains(s + w) and not oracle.contains(v + s + w):
                        raise NotSynchronisingError(
                            f"{v} and {w} witness failure of synchronisation for {s}",
                            witness=(v, w),
                        )
    bound = connector_bound if connector_bound is not None else d
    connector = None
    for ell in range(bound + 1):
        for c in oracle.words(ell):
            if oracle.contains(s + c + s):
                connector = c
                break
        if connector is not None:
            break
    if connector is None:
        raise NotSynchronisingError(f"no connector c with scs admissible within {bound}")

    ls = len(s)

    def in_good(w: Word) -> bool:
        return len(w) >= ls and w[:ls] == s and w[len(w) - ls :] == s and oracle.contains(w)

    def avoids_s(w: Word) -> bool:
        return all(w[i : i + ls] != s for i in range(len(w) - ls + 1))

    good = WordSet.from_predicate(oracle, in_good, name=f"G(sync {oracle.alphabet.text(s)})")
    edge = WordSet.from_predicate(oracle, avoids_s, name="L\\LsL")
    return TripleCollections(edge, good, edge, tau=len(connector), L_param=ls)
