"""Finite-horizon estimates of S, L, LI, LS, pointwise limits and the half/half split.

Every estimate is parameterized by a horizon N, a window W and a threshold tau,
and the reports carry those parameters.  Nothing here claims to decide the
tail-defined sets exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from .errors import HorizonError, InvariantViolation, PreconditionError
from .generators import MeasureSequence
from .measure import FinSuppMeasure, pos_neg_split, signed_mass, total_variation
from .spaces import frac_str

DEFAULT_N = 400
DEFAULT_W = 50
DEFAULT_TAU = Fraction(1, 2**20)


def prefix_support(seq: MeasureSequence, N: int) -> list:
    """Union of supports of mu_0..mu_{N-1}, ordered by first appearance."""
    if N < 1:
        raise PreconditionError("prefix_support needs N >= 1")
    seen: dict = {}
    for n in range(seq.available(N)):
        for p in seq[n].support():
            seen.setdefault(p, n)
    return list(seen)


def first_appearance(seq: MeasureSequence, N: int) -> dict:
    seen: dict = {}
    for n in range(seq.available(N)):
        for p in seq[n].support():
            seen.setdefault(p, n)
    return seen


@dataclass
class PointwiseLimitEstimate:
    N: int
    W: int
    tau: Fraction
    limit_atoms: dict  # point -> estimate (value at the last index) for L points
    classification: dict  # point -> "L" | "LI-only" | "LS-only" | "transient"
    window_min: dict = field(default_factory=dict)  # point -> min |mu_n({x})| over the window
    window_max: dict = field(default_factory=dict)

    def points(self, label: str) -> list:
        return [p for p, c in self.classification.items() if c == label]

    @property
    def L(self) -> list:
        return self.points("L")

    @property
    def LI(self) -> list:
        return [p for p, c in self.classification.items() if c in ("L", "LI-only")]

    @property
    def LS(self) -> list:
        return [p for p, c in self.classification.items() if c != "transient"]

    def to_json(self, space) -> dict:
        return {
            "N": self.N, "W": self.W, "tau": frac_str(self.tau),
            "points": [
                {"point": space.point_to_json(p), "class": c,
                 "estimate": frac_str(self.limit_atoms[p]) if p in self.limit_atoms else None,
                 "window_min": frac_str(self.window_min[p]), "window_max": frac_str(self.window_max[p])}
                for p, c in self.classification.items()
            ],
        }


def classify_points(seq: MeasureSequence, N: int = DEFAULT_N, W: int = DEFAULT_W,
                    tau=DEFAULT_TAU) -> PointwiseLimitEstimate:
    """Window-stability classification of every point of the prefix support.

    With c the value at the last index: L if |c| > tau and every window value is
    within tau of c; otherwise LI-only if the window minimum of |value| exceeds
    tau, LS-only if the window maximum does, transient if neither.
    """
    tau = Fraction(tau)
    N = seq.available(N)
    if not 1 <= W <= N:
        raise PreconditionError(f"need 1 <= W <= N, got W={W}, N={N}")
    if tau <= 0:
        raise PreconditionError("tau must be positive")
    pts = prefix_support(seq, N)
    window = [seq[n] for n in range(N - W, N)]
    # one pass over the window atoms; a point missing from a member has value 0 there
    seen: dict = {}
    for mu in window:
        for p, v in mu.items():
            seen.setdefault(p, []).append(v)
    last = window[-1]
    cls, lim, wmin, wmax = {}, {}, {}, {}
    zero = Fraction(0)
    for p in pts:
        vals = seen.get(p, ())
        absvals = [abs(v) for v in vals]
        full = len(vals) == W
        lo = min(absvals) if full else zero
        hi = max(absvals, default=zero)
        wmin[p], wmax[p] = lo, hi
        c = last(p)
        if full and abs(c) > tau and all(abs(v - c) <= tau for v in vals):
            cls[p] = "L"
            lim[p] = c
        elif lo > tau:
            cls[p] = "LI-only"
        elif hi > tau:
            cls[p] = "LS-only"
        else:
            cls[p] = "transient"
    return PointwiseLimitEstimate(N, W, tau, lim, cls, wmin, wmax)


# ---------------------------------------------------------------------------
# pointwise convergent subsequences
# ---------------------------------------------------------------------------

class Extraction(NamedTuple):
    indices: list
    limit: FinSuppMeasure
    tracked: list  # points whose coefficients were forced to settle


def _densest_interval(values: list, tau: Fraction):
    """Closed interval [v, v + tau] with v a sample value holding the most samples.

    Ties go to the interval containing the earliest sample.
    """
    earliest: dict = {}
    for i, w in enumerate(values):
        earliest.setdefault(w, i)
    distinct = sorted(earliest)
    counts = {w: 0 for w in distinct}
    for w in values:
        counts[w] += 1
    best = None
    for a, v in enumerate(distinct):
        inside = [w for w in distinct[a:] if w <= v + tau]
        key = (sum(counts[w] for w in inside), -min(earliest[w] for w in inside))
        if best is None or key > best[0]:
            best = (key, v)
    v = best[1]
    return v, v + tau


def extract_pointwise_convergent(seq: MeasureSequence, N: int = DEFAULT_N, tau=DEFAULT_TAU,
                                 norm_bound=1, min_length: int = 8) -> Extraction:
    """Subsequence along which every tracked point's coefficient oscillates by at most tau.

    Tracked points are those first seen before N/4.  If every tracked coefficient is
    already tau-stable over the tail [N/2, N) the identity 0..N-1 is returned.
    Otherwise, point by point in order of first appearance, the tail indices are
    restricted to the densest tau-interval of that point's values, and the head
    indices n < N/2 are kept when every tracked point first seen before n has its
    value in the chosen interval.  The limit is read off at the last chosen index
    and purged below tau.
    """
    tau = Fraction(tau)
    N = seq.available(N)
    if N < 2 * min_length:
        raise HorizonError(f"horizon exhausted: N={N} cannot yield {min_length} indices")
    first = first_appearance(seq, N)
    tracked = [p for p, f in first.items() if 4 * f < N]
    tail = list(range(N // 2, N))

    def value(n, p):
        return seq[n](p)

    # a tracked point missing from every tail support is identically 0 there
    in_tail = set()
    for n in tail:
        in_tail.update(seq[n].support())
    stable = all(
        max(value(n, p) for n in tail) - min(value(n, p) for n in tail) <= tau
        for p in tracked if p in in_tail
    )
    intervals = {}
    if stable:
        indices = list(range(N))
    else:
        idx = tail
        for p in tracked:
            lo, hi = _densest_interval([value(n, p) for n in idx], tau)
            intervals[p] = (lo, hi)
            idx = [n for n in idx if lo <= value(n, p) <= hi]
        head = [
            n for n in range(N // 2)
            if all(lo <= value(n, p) <= hi for p, (lo, hi) in intervals.items() if first[p] < n)
        ]
        indices = head + idx
    if len(indices) < min_length:
        raise HorizonError(
            f"horizon exhausted: only {len(indices)} indices settle within tau={tau} at N={N}")
    last = seq[indices[-1]]
    atoms = {p: last(p) for p in tracked if abs(last(p)) > tau}
    limit = FinSuppMeasure(seq.space, atoms, _trusted=True)
    if total_variation(limit) > Fraction(norm_bound) + tau * len(atoms):
        raise PreconditionError(
            f"limit estimate has norm {total_variation(limit)} > {norm_bound} + tau*|supp|")
    return Extraction(indices, limit, tracked)


# ---------------------------------------------------------------------------
# half/half split
# ---------------------------------------------------------------------------

class HalfSplitRow(NamedTuple):
    n: int
    pos_mass: Fraction
    neg_mass: Fraction
    mass_defect: Fraction  # mu_n(1_X)
    support_size: int


def half_split_row(n: int, mu: FinSuppMeasure) -> HalfSplitRow:
    parts = pos_neg_split(mu)
    pos, neg = total_variation(parts.positive), total_variation(parts.negative)
    s = signed_mass(mu)
    if pos != (total_variation(mu) + s) / 2 or pos - neg != s:
        raise InvariantViolation(f"half/half identity fails at n={n}")
    return HalfSplitRow(n, pos, neg, s, len(mu))


def half_split_profile(seq: MeasureSequence, N: int) -> list[HalfSplitRow]:
    """Per-index positive mass, negative mass, signed mass and support size (exact)."""
    return [half_split_row(n, seq[n]) for n in range(seq.available(N))]


def profile_csv(rows: list[HalfSplitRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "pos_mass", "neg_mass", "mass_defect", "support_size"])
    for r in rows:
        w.writerow([r.n, frac_str(r.pos_mass), frac_str(r.neg_mass), frac_str(r.mass_defect), r.support_size])
    return buf.getvalue()


def tail_window(rows: list, fraction=Fraction(1, 4)) -> list:
    k = max(1, -(-len(rows) * fraction.numerator // fraction.denominator))
    return rows[-k:]


class LimitMassBound(NamedTuple):
    value: Fraction
    threshold: Fraction
    violated: bool
    L: list


def limit_mass_bound(seq: MeasureSequence, N: int = DEFAULT_N, W: int = DEFAULT_W,
                     tau=DEFAULT_TAU) -> LimitMassBound:
    """Sum over L-classified points of |limit estimate|, against 1/2 + tau*|L|."""
    est = classify_points(seq, N, W, tau)
    value = sum((abs(v) for v in est.limit_atoms.values()), Fraction(0))
    threshold = Fraction(1, 2) + est.tau * len(est.limit_atoms)
    return LimitMassBound(value, threshold, value > threshold, est.L)


def renormalize_half(seq: MeasureSequence, N: int) -> MeasureSequence:
    """Rescale each signed part to mass exactly 1/2.

    One-signed members are skipped and recorded in ``meta["skipped"]``; the norm
    distance to the source member is recorded in ``meta["distances"]``.
    """
    out, skipped, distances, sources = [], [], [], []
    for n in range(seq.available(N)):
        mu = seq[n]
        pos, neg = pos_neg_split(mu)
        p, q = total_variation(pos), total_variation(neg)
        if p == 0 or q == 0:
            skipped.append(n)
            continue
        nu = pos.scale(Fraction(1, 2) / p) + neg.scale(Fraction(1, 2) / q)
        out.append(nu)
        sources.append(n)
        distances.append(total_variation(nu - mu))
    meta = {
        "name": f"{seq.meta.get('name', 'seq')}-half",
        "claimed_jn": seq.meta.get("claimed_jn", False),
        "claimed_disjoint": seq.meta.get("claimed_disjoint", False),
        "support_bound": seq.meta.get("support_bound"),
        "provenance": list(seq.meta.get("provenance", [])) + ["renormalize_half"],
        "skipped": skipped,
        "distances": distances,
        "indices": sources,
    }
    return MeasureSequence.from_measures(out, meta, space=seq.space)


# ---------------------------------------------------------------------------
# asymptotic diagnostics
# ---------------------------------------------------------------------------

@dataclass
class LiminfDiagnostic:
    """Monitors ||mu_k restricted to L|| and the growth of S minus L (no verdict)."""

    N: int
    W: int
    tau: Fraction
    liminf_estimate: Fraction  # min over the window of ||mu_n restricted to L-hat||
    outside_counts: list  # (checkpoint n, |prefix support minus L-hat|)


def liminf_diagnostic(seq: MeasureSequence, N: int = DEFAULT_N, W: int = DEFAULT_W,
                      tau=DEFAULT_TAU, checkpoints: int = 8) -> LiminfDiagnostic:
    est = classify_points(seq, N, W, tau)
    Lset = set(est.L)
    N = est.N
    li = min(
        sum((abs(c) for p, c in seq[n].items() if p in Lset), Fraction(0)) for n in range(N - W, N)
    )
    first = first_appearance(seq, N)
    marks = sorted({max(1, N * j // checkpoints) for j in range(1, checkpoints + 1)})
    counts = [(m, sum(1 for p, f in first.items() if f < m and p not in Lset)) for m in marks]
    return LiminfDiagnostic(N, W, est.tau, li, counts)


def support_growth(seq: MeasureSequence, horizons) -> list:
    """|prefix support| at each horizon; unbounded growth is a necessary JN condition."""
    first = first_appearance(seq, max(horizons))
    return [(h, sum(1 for f in first.values() if f < h)) for h in horizons]
