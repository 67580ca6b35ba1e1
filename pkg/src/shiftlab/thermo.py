"""Partition sums, pressure estimates with one-sided bounds, Gibbs-ratio
tables, periodic-orbit measures, and the hyperbolicity diagnostic.

No limit is ever claimed: reports carry the finite-n table, a Fekete upper
bound where submultiplicativity warrants one, and a point estimate taken
from the largest computed lengths (the last successive-ratio increment,
which converges far faster than (1/n) log Lambda_n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from .core import (
    LanguageOracle,
    Potential,
    Word,
    WordSet,
    chunked_fsum,
    distortion_bound,
    phi_hat,
)
from .errors import NoPeriodicPointsError, NotInLanguageError

NEG_INF = float("-inf")

#: magnitudes beyond this stay in log space (exp would be ~1e130)
_EXP_CAP = 300.0


def format17(x: float) -> str:
    """17-significant-digit decimal rendering used by all serializers."""
    if isinstance(x, int):
        return str(x)
    return f"{x:.17g}"


def log_partition_sum(words: WordSet, potential: Potential, n: int) -> float:
    """log Lambda_n(D, phi); -inf when D_n is empty.

    Zero potentials use exact integer counts.  Otherwise terms are
    accumulated with compensated summation in lexicographic order after a
    max shift, so the result is reproducible for any thread count.
    """
    if potential.is_zero:
        c = words.count(n)
        return math.log(c) if c > 0 else NEG_INF
    elems = words.at(n)
    if not elems:
        return NEG_INF
    oracle = words.oracle
    vals = [phi_hat(potential, oracle, w) for w in elems]
    m = max(vals)
    s = chunked_fsum([math.exp(v - m) for v in vals])
    return m + math.log(s)


def partition_sum(words: WordSet, potential: Potential, n: int) -> float:
    """Lambda_n(D, phi) = sum over D_n of e^{phi_hat(w)}.

    Summed in lexicographic order with compensated accumulation; switches
    to a log-space path (returning exp of the log value, or inf) when
    magnitudes exceed e^300.
    """
    if potential.is_zero:
        return float(words.count(n))
    elems = words.at(n)
    if not elems:
        return 0.0
    oracle = words.oracle
    vals = [phi_hat(potential, oracle, w) for w in elems]
    if max(vals) <= _EXP_CAP:
        return chunked_fsum([math.exp(v) for v in vals])
    m = max(vals)
    log_value = m + math.log(chunked_fsum([math.exp(v - m) for v in vals]))
    return math.exp(log_value) if log_value <= _EXP_CAP else float("inf")


def word_count(words: WordSet, n: int) -> int:
    """Exact cardinality of D_n (integer)."""
    return words.count(n)


@dataclass(frozen=True)
class PressureRow:
    n: int
    log_sum: float
    count: int | None
    rate: float
    upper_bound: float | None = None


@dataclass
class PressureReport:
    """Finite-scale pressure table for a word set.

    For the full language log Lambda is exactly submultiplicative, so each
    row carries the Fekete upper bound (1/n)(log Lambda_n + |phi|_d), valid
    for the pressure at every n; ``fekete_upper`` is the sharpest of them.
    ``point_estimate`` is the increment log Lambda_N - log Lambda_{N'} over
    the last two supported lengths (far faster convergence than the raw
    rate column).
    """

    set_name: str
    rows: list[PressureRow]
    fekete_upper: float | None
    point_estimate: float
    distortion: float
    gap_flags: dict[str, bool] = field(default_factory=dict)

    @property
    def n_max(self) -> int:
        return self.rows[-1].n if self.rows else 0

    def rate_at(self, n: int) -> float:
        for row in self.rows:
            if row.n == n:
                return row.rate
        raise KeyError(n)

    def to_json_dict(self) -> dict:
        return {
            "set_name": self.set_name,
            "rows": [
                {
                    "n": r.n,
                    "log_sum": format17(r.log_sum),
                    "count": r.count,
                    "rate": format17(r.rate),
                    "upper_bound": None if r.upper_bound is None else format17(r.upper_bound),
                }
                for r in self.rows
            ],
            "fekete_upper": None if self.fekete_upper is None else format17(self.fekete_upper),
            "point_estimate": format17(self.point_estimate),
            "distortion": format17(self.distortion),
            "gap_flags": dict(sorted(self.gap_flags.items())),
        }

    def to_csv_text(self) -> str:
        lines = ["n,count_or_sum,rate,upper_bound"]
        for r in self.rows:
            mid = str(r.count) if r.count is not None else format17(math.exp(r.log_sum) if r.log_sum <= _EXP_CAP else float("inf"))
            ub = "" if r.upper_bound is None else format17(r.upper_bound)
            lines.append(f"{r.n},{mid},{format17(r.rate)},{ub}")
        return "\n".join(lines) + "\n"


def pressure_estimate(
    words: WordSet,
    potential: Potential,
    n_max: int,
    *,
    fekete: bool | None = None,
) -> PressureReport:
    """Pressure table for lengths 1..n_max.

    The Fekete upper bound is included when the set is the full language
    (where Lambda_{m+n} <= Lambda_m Lambda_n holds exactly) unless
    overridden by ``fekete``.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    use_fekete = words.is_full_language if fekete is None else fekete
    dist = distortion_bound(potential)
    rows: list[PressureRow] = []
    for n in range(1, n_max + 1):
        ls = log_partition_sum(words, potential, n)
        count = words.count(n) if potential.is_zero else None
        rate = ls / n if ls > NEG_INF else NEG_INF
        ub = (ls + dist) / n if (use_fekete and ls > NEG_INF) else None
        rows.append(PressureRow(n, ls, count, rate, ub))

    supported = [r for r in rows if r.log_sum > NEG_INF]
    if len(supported) >= 2:
        a, b = supported[-2], supported[-1]
        point = (b.log_sum - a.log_sum) / (b.n - a.n)
    elif supported:
        point = supported[-1].rate
    else:
        point = NEG_INF

    fekete_upper = None
    if use_fekete and supported:
        fekete_upper = min(r.upper_bound for r in supported)

    flags: dict[str, bool] = {}
    flags["support_full"] = len(supported) == len(rows)
    tail = [r.rate for r in rows[-(max(2, len(rows) // 4)) :] if r.log_sum > NEG_INF]
    flags["tail_monotone"] = all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))
    if fekete_upper is not None:
        flags["fekete_consistent"] = fekete_upper >= point - 1e-6
    return PressureReport(words.name or "words", rows, fekete_upper, point, dist, flags)


# ---------------------------------------------------------------------------
# Cylinder occurrence tables (finite-scale Gibbs ratios)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderRow:
    position: int
    log_sum: float
    count: int | None
    gibbs_ratio: float


@dataclass
class CylinderTable:
    word: Word
    n: int
    pressure_used: float
    rows: list[CylinderRow]

    def ratios(self) -> list[float]:
        return [r.gibbs_ratio for r in self.rows]


def cylinder_count_table(
    oracle: LanguageOracle,
    potential: Potential,
    v: Word,
    n: int,
    *,
    pressure_hint: float | None = None,
) -> CylinderTable:
    """Partition sums over the words of length n containing v at each start
    position i (the finite-length analogue of a cylinder), plus the ratios
    Lambda_n(H) * e^{-(n-|v|) P - phi_hat(v)} as empirical Gibbs constants.

    ``pressure_hint`` substitutes for the point estimate of the full
    language at depth n.
    """
    if not oracle.contains(v):
        raise NotInLanguageError(f"{v} is not admissible")
    k = len(v)
    if k == 0 or k > n:
        raise ValueError("need 1 <= |v| <= n")
    p_hat = pressure_hint
    if p_hat is None:
        lang = WordSet.language(oracle)
        p_hat = pressure_estimate(lang, potential, n).point_estimate
    pv = phi_hat(potential, oracle, v)
    all_words = oracle.words(n)
    rows: list[CylinderRow] = []
    for i in range(1, n - k + 1):
        hits = [w for w in all_words if w[i - 1 : i - 1 + k] == v]
        if potential.is_zero:
            count = len(hits)
            ls = math.log(count) if count else NEG_INF
        else:
            count = None
            if hits:
                vals = [phi_hat(potential, oracle, w) for w in hits]
                m = max(vals)
                ls = m + math.log(chunked_fsum([math.exp(x - m) for x in vals]))
            else:
                ls = NEG_INF
        ratio = math.exp(ls - (n - k) * p_hat - pv) if ls > NEG_INF else 0.0
        rows.append(CylinderRow(i, ls, count, ratio))
    return CylinderTable(v, n, p_hat, rows)


# ---------------------------------------------------------------------------
# Periodic points and weighted periodic-orbit measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicPoints:
    period: int
    words: tuple[Word, ...]
    exact: bool


def periodic_points(oracle: LanguageOracle, n: int) -> PeriodicPoints:
    """All length-n words whose infinite repetition is admissible.

    Exact when the oracle is window-local (SFTs) or provides a periodic
    check (S-gap); otherwise the repetition is tested to the enumeration
    limit and the result is flagged approximate.
    """
    if n < 1:
        raise ValueError("period must be >= 1")
    out: list[Word] = []
    exact = True
    check = oracle.periodic_check
    window = oracle.periodicity_window
    for p in oracle.words(n):
        if check is not None:
            ok = check(p)
        elif window is not None:
            reps = max(1, -(-(n + window) // n))
            ok = oracle.contains(p * reps)
        else:
            exact = False
            reps = max(1, -(-(oracle.enumeration_limit + n) // n))
            ok = oracle.contains(p * reps)
        if ok:
            out.append(p)
    return PeriodicPoints(n, tuple(out), exact)


def _cyclic_birkhoff(potential: Potential, p: Word) -> float:
    """Birkhoff sum of one full period along the periodic point p^infinity."""
    r = potential.window
    k = len(p)
    reps = 1 + -(-(r) // k)
    ext = p * reps
    return math.fsum(potential.value(ext[j : j + r]) for j in range(k))


@dataclass
class PeriodicMeasure:
    horizon: int
    depth: int
    atoms: list[tuple[Word, int, float]]
    cylinder_weights: dict[Word, float]
    exact_periods: bool

    def weight(self, u: Word) -> float:
        return self.cylinder_weights.get(u, 0.0)

    def marginal(self, depth: int) -> dict[Word, float]:
        """Cylinder weights at a shallower depth, by summing tails."""
        if depth > self.depth:
            raise ValueError("cannot deepen a stored measure")
        out: dict[Word, float] = {}
        for u, wt in sorted(self.cylinder_weights.items()):
            out[u[:depth]] = out.get(u[:depth], 0.0) + wt
        return out

    def shifted_marginal(self, depth: int) -> dict[Word, float]:
        """Weights of sigma^{-1}-cylinders [*u] at the given depth."""
        if depth > self.depth - 1:
            raise ValueError("shifted marginal needs depth <= stored depth - 1")
        out: dict[Word, float] = {}
        for u, wt in sorted(self.cylinder_weights.items()):
            out[u[1 : 1 + depth]] = out.get(u[1 : 1 + depth], 0.0) + wt
        return out

    def to_json_dict(self, alphabet) -> dict:
        return {
            "horizon": self.horizon,
            "depth": self.depth,
            "exact_periods": self.exact_periods,
            "cylinder_weights": {
                alphabet.text(u): format17(wt)
                for u, wt in sorted(self.cylinder_weights.items())
            },
        }

    def to_csv_text(self, alphabet) -> str:
        lines = ["cylinder,weight"]
        for u, wt in sorted(self.cylinder_weights.items()):
            lines.append(f"{alphabet.text(u)},{format17(wt)}")
        return "\n".join(lines) + "\n"


def periodic_orbit_measure(
    oracle: LanguageOracle,
    potential: Potential,
    n: int,
    depth: int,
) -> PeriodicMeasure:
    """The normalized phi-weighted sum of point masses on periodic points of
    period at most n, reported as cylinder weights at the given depth."""
    if not (n >= depth >= 1):
        raise ValueError("need horizon >= depth >= 1")
    atoms: list[tuple[Word, int, float]] = []
    exact = True
    for k in range(1, n + 1):
        per = periodic_points(oracle, k)
        exact = exact and per.exact
        for p in per.words:
            s = _cyclic_birkhoff(potential, p)
            atoms.append((p, k, math.exp(s)))
    if not atoms:
        raise NoPeriodicPointsError(f"no periodic points up to period {n}")
    total = chunked_fsum([a[2] for a in atoms])
    weights: dict[Word, float] = {}
    for p, k, wt in atoms:
        reps = 1 + -(-depth // k)
        u = (p * reps)[:depth]
        weights[u] = weights.get(u, 0.0) + wt / total
    return PeriodicMeasure(n, depth, atoms, weights, exact)


# ---------------------------------------------------------------------------
# Hyperbolicity diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicityRow:
    n: int
    sup_rate: float
    rate: float
    gap: float


@dataclass
class HyperbolicityReport:
    rows: list[HyperbolicityRow]
    point_estimate: float
    verdict: str

    @property
    def is_hyperbolic_at_depth(self) -> bool:
        return self.verdict == "hyperbolic-at-depth"


def hyperbolicity_diagnostic(
    oracle: LanguageOracle,
    potential: Potential,
    n_max: int,
    *,
    tolerance: float | None = None,
) -> HyperbolicityReport:
    """Compares sup_w phi_hat(w)/n against the pressure estimate.

    The per-n gap is the successive-ratio pressure increment
    log Lambda_n - log Lambda_{n-1} minus the sup Birkhoff rate.  Verdict is
    "hyperbolic-at-depth" iff over the last quarter of the table the gap is
    positive and does not shrink on net (the oscillation tolerance scales
    with the gap size, so a gap decaying to zero is rejected while a stable
    positive gap passes)."""
    rows: list[HyperbolicityRow] = []
    prev_log = None
    for n in range(1, n_max + 1):
        elems = oracle.words(n)
        if potential.is_zero:
            sup = 0.0
            log_sum = math.log(len(elems)) if elems else NEG_INF
        else:
            vals = [phi_hat(potential, oracle, w) for w in elems]
            sup = max(vals) / n
            m = max(vals)
            log_sum = m + math.log(chunked_fsum([math.exp(v - m) for v in vals]))
        if prev_log is not None and prev_log > NEG_INF and log_sum > NEG_INF:
            rate = log_sum - prev_log
        else:
            rate = log_sum / n if log_sum > NEG_INF else NEG_INF
        prev_log = log_sum
        rows.append(HyperbolicityRow(n, sup, rate, rate - sup))
    point = pressure_estimate(WordSet.language(oracle), potential, n_max).point_estimate
    tail = rows[-max(3, len(rows) // 4) :]
    gaps = [r.gap for r in tail]
    positive = all(g > 0 for g in gaps)
    scale = sorted(abs(g) for g in gaps)[len(gaps) // 2]
    tol = tolerance if tolerance is not None else max(1e-9, 0.05 * scale)
    widening = gaps[-1] >= gaps[0] - tol
    verdict = "hyperbolic-at-depth" if (positive and widening) else "not-hyperbolic-at-depth"
    return HyperbolicityReport(rows, point, verdict)


# ---------------------------------------------------------------------------
# Small combinatorial bounds used by the proofs
# ---------------------------------------------------------------------------

def entropy_function(delta: float) -> float:
    """The standard two-point entropy h(delta); 0 at the endpoints."""
    if delta <= 0.0 or delta >= 1.0:
        return 0.0
    return -delta * math.log(delta) - (1 - delta) * math.log(1 - delta)


def binomial_entropy_bound_holds(n: int, ell: int) -> bool:
    """C(n, ell) <= (n+1) e^{h(ell/n) n + 1}, exact integer-vs-float check."""
    lhs = math.comb(n, ell)
    rhs = (n + 1) * math.exp(entropy_function(ell / n) * n + 1)
    return lhs <= rhs
