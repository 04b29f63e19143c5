"""Empirical weak*-null testing and structural certificates.

The strongest positive verdict for a sequence is "not-refuted": no member of a
finite corpus exceeded the threshold on the tail window.  A refutation always
names the function, the index and the value.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .analysis import half_split_profile, tail_window
from .generators import MeasureSequence
from .measure import FinSuppMeasure, integrate, total_variation
from .spaces import TestFunction, exact_sqrt, frac_str

DEFAULT_EPS = Fraction(1, 2**10)
DEFAULT_TAIL = Fraction(1, 4)


class DecayRow(NamedTuple):
    n: int
    max_abs: Fraction | float
    argmax: int  # corpus position of the first maximizing function
    norm_defect: Fraction


class Refutation(NamedTuple):
    f: int
    description: str
    n: int
    value: Fraction | float


def _num(v) -> str:
    return frac_str(v) if isinstance(v, Fraction) else repr(v)


@dataclass
class DecayReport:
    rows: list
    N: int
    eps: Fraction
    tail: Fraction
    refutation: Refutation | None
    decay_exponent: float | None
    boundedness: list  # per function: max |f(x)| over the prefix support
    corpus_size: int

    @property
    def refuted(self) -> bool:
        return self.refutation is not None

    @property
    def verdict(self) -> str:
        if self.refutation is None:
            return "not-refuted"
        r = self.refutation
        return f"refuted(f={r.f}, n={r.n}, value={_num(r.value)})"

    def refutation_text(self) -> str:
        if self.refutation is None:
            return "not refuted"
        r = self.refutation
        return f"f#{r.f} [{r.description}] at n={r.n} with |value|={float(abs(r.value)):.6g}"

    def tail_sup(self):
        rows = tail_window(self.rows, self.tail)
        return max((r.max_abs for r in rows), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "max_abs", "argmax_f", "norm_defect"])
        for r in self.rows:
            w.writerow([r.n, _num(r.max_abs), r.argmax, frac_str(r.norm_defect)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "N": self.N, "eps": frac_str(self.eps), "tail": frac_str(self.tail),
            "corpus_size": self.corpus_size, "verdict": self.verdict,
            "tail_sup": _num(self.tail_sup()),
            "decay_exponent": self.decay_exponent,
            "refutation": None if self.refutation is None else {
                "f": self.refutation.f, "description": self.refutation.description,
                "n": self.refutation.n, "value": _num(self.refutation.value)},
        }


def _row_values(mu: FinSuppMeasure, fs: Sequence[TestFunction]) -> list:
    return [integrate(mu, f) for f in fs]


def _rows_chunk(args):
    measures, fs = args
    return [_row_values(mu, fs) for mu in measures]


def _fit_exponent(rows) -> float | None:
    pts = [(math.log(r.n + 1), math.log(float(r.max_abs))) for r in rows if r.max_abs and r.n > 0]
    if len(pts) < 2:
        return None
    mx = sum(x for x, _ in pts) / len(pts)
    my = sum(y for _, y in pts) / len(pts)
    den = sum((x - mx) ** 2 for x, _ in pts)
    return sum((x - mx) * (y - my) for x, y in pts) / den if den else None


def weak_star_report(seq: MeasureSequence, corpus: Sequence[TestFunction], N: int = 200,
                     eps=DEFAULT_EPS, tail=DEFAULT_TAIL, jobs: int = 1) -> DecayReport:
    """Per-index max over the corpus of |mu_n(f)|; refuted iff a tail row exceeds eps.

    Rows are evaluated exactly when every value is rational.  With ``jobs > 1`` the
    rows are computed in worker processes; the reduction is by index order so the
    report does not depend on the job count.
    """
    fs = list(corpus)
    if not fs:
        raise ValueError("corpus is empty")
    eps, tail = Fraction(eps), Fraction(tail)
    N = seq.available(N)
    measures = seq.prefix(N)
    if jobs > 1 and N > 1:
        size = max(1, -(-N // jobs))
        chunks = [(measures[i:i + size], fs) for i in range(0, N, size)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            values = [row for part in ex.map(_rows_chunk, chunks) for row in part]
    else:
        values = _rows_chunk((measures, fs))
    rows = []
    for n, (mu, vals) in enumerate(zip(measures, values)):
        absvals = [abs(v) for v in vals]
        m = max(absvals)
        rows.append(DecayRow(n, m, absvals.index(m), abs(total_variation(mu) - 1)))
    refutation = None
    for r in tail_window(rows, tail):
        if r.max_abs > eps:
            j = next(j for j, v in enumerate(values[r.n]) if abs(v) > eps)
            refutation = Refutation(j, fs[j].description, r.n, values[r.n][j])
            break
    support = {p for mu in measures for p in mu.support()}
    bounded = [max((abs(f(p)) for p in support), default=0) for f in fs]
    return DecayReport(rows, N, eps, tail, refutation, _fit_exponent(rows), bounded, len(fs))


@dataclass
class JNCertificate:
    norm_ok: bool
    bad_norm_index: int | None
    decay: DecayReport
    half_split_ok: bool
    half_split_worst: Fraction
    provenance: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if not self.norm_ok:
            return f"norm check failed at n={self.bad_norm_index}"
        if self.decay.refuted:
            return self.decay.verdict
        if not self.half_split_ok:
            return "half/half split not settled on the tail"
        return "not-refuted"

    @property
    def ok(self) -> bool:
        return self.verdict == "not-refuted"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "norm_ok": self.norm_ok,
            "bad_norm_index": self.bad_norm_index,
            "half_split_ok": self.half_split_ok,
            "half_split_worst": frac_str(self.half_split_worst),
            "decay": self.decay.to_json(),
            "provenance": self.provenance,
        }


def jn_certificate(seq: MeasureSequence, corpus: Sequence[TestFunction], N: int = 200,
                   eps=DEFAULT_EPS, tail=DEFAULT_TAIL, jobs: int = 1) -> JNCertificate:
    """Exact unit norms, corpus decay, and both signed parts within eps of 1/2 on the tail."""
    eps = Fraction(eps)
    N = seq.available(N)
    bad = next((n for n in range(N) if total_variation(seq[n]) != 1), None)
    decay = weak_star_report(seq, corpus, N, eps, tail, jobs)
    rows = tail_window(half_split_profile(seq, N), Fraction(tail))
    worst = max(max(abs(r.pos_mass - Fraction(1, 2)), abs(r.neg_mass - Fraction(1, 2))) for r in rows)
    return JNCertificate(bad is None, bad, decay, worst <= eps, worst, list(seq.meta.get("provenance", [])))


class DisjointnessResult(NamedTuple):
    disjoint: bool
    collision: tuple | None  # (point, i, j) for the first shared point found

    def __bool__(self):
        return self.disjoint


def disjointness_check(seq: MeasureSequence, N: int) -> DisjointnessResult:
    owner: dict = {}
    for n in range(seq.available(N)):
        for p in seq[n].support():
            if p in owner:
                return DisjointnessResult(False, (p, owner[p], n))
            owner[p] = n
    return DisjointnessResult(True, None)


@dataclass
class DiscretenessReport:
    ok: bool
    failures: list  # (i, point, expectation)
    checked: int
    min_distance: Fraction | float | None
    subset_ok: bool | None = None

    def to_json(self, space=None) -> dict:
        pj = space.point_to_json if space is not None else (lambda p: repr(p))
        return {
            "ok": self.ok,
            "checked": self.checked,
            "failures": [[i, pj(p), what] for i, p, what in self.failures],
            "min_distance": None if self.min_distance is None else _num(self.min_distance),
            "subset_ok": self.subset_ok,
        }


def discreteness_certificate(d, N: int | None = None, source: MeasureSequence | None = None) -> DiscretenessReport:
    """Evaluate every witness g_i at every output support point.

    g_i must vanish on supp(rho_j) for j <= i and be positive on supp(rho_l) for
    l > i; zero sets must grow with i.  All comparisons are exact.
    """
    n_out = len(d.rho) if N is None else min(N, len(d.rho))
    supports = [d.rho[i].support() for i in range(n_out)]
    failures, checked = [], 0
    for i in range(n_out):
        g = d.witnesses[i]
        for j, supp in enumerate(supports):
            for p in supp:
                checked += 1
                if j <= i and not g.le(p, 0):
                    failures.append((i, p, f"g_{i} should vanish on supp(rho_{j})"))
                elif j > i and not g.gt(p, 0):
                    failures.append((i, p, f"g_{i} should be positive on supp(rho_{j})"))
        if i + 1 < n_out:
            nxt = d.witnesses[i + 1]
            for supp in supports:
                for p in supp:
                    if g.le(p, 0) and not nxt.le(p, 0):
                        failures.append((i, p, f"zero set of g_{i} not contained in that of g_{i + 1}"))
    pts = [p for s in supports for p in s]
    sp = d.space
    min_sq = None
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            s = sp.sq_distance(pts[a], pts[b])
            if min_sq is None or s < min_sq:
                min_sq = s
    min_dist = None if min_sq is None else _sqrt_num(min_sq)
    subset_ok = None
    if source is not None:
        subset_ok = all(set(d.rho[i].support()) <= set(source[d.source_indices[i]].support())
                        for i in range(n_out))
        if not subset_ok:
            failures.append((-1, None, "supp(rho_i) not contained in the source support"))
    return DiscretenessReport(not failures, failures, checked, min_dist, subset_ok)


def _sqrt_num(sq: Fraction):
    r = exact_sqrt(sq)
    return r if r is not None else math.sqrt(sq)


def pair_row_bound(mu: FinSuppMeasure, lipschitz) -> Fraction:
    """l * d(x, y) / 2 for mu = 1/2 (delta_x - delta_y): bound on |mu(f)| for l-Lipschitz f."""
    (x, _), (y, _) = mu.items()
    d = _sqrt_num(mu.space.sq_distance(x, y))
    return lipschitz * d / 2


def default_jobs() -> int:
    return os.cpu_count() or 1
