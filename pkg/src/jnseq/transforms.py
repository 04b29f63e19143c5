"""Constructive sequence transforms.

kpr_split            peel a norm-convergent part off a pointwise convergent subsequence
disjointify          differences of consecutive peels: a disjointly supported sequence
select_small_set     pigeonhole over disjoint regions
escape_step          a neighbourhood of one support that later supports barely touch
discretize           layered Urysohn witnesses making the union of supports discrete
constant_coefficients  cluster coefficient vectors on the l1 sphere
reduce_to_pairs      shrink supports to two points with coefficients +-1/2

Every infinite choice in the underlying arguments ("infinitely many indices
satisfy ...") is replaced by "at least Q indices within the horizon satisfy ...",
and failures raise HorizonError naming the stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .analysis import DEFAULT_N, DEFAULT_TAU, extract_pointwise_convergent
from .errors import HorizonError, InvariantViolation, PreconditionError
from .generators import MeasureSequence
from .measure import FinSuppMeasure, make_measure, normalize, restrict, total_variation
from .spaces import (CorpusConfig, Region, TestFunction, corpus, dyadic_floor, frac_str,
                     min_combine, reparam, urysohn)

HALF = Fraction(1, 2)


def _provenance(seq: MeasureSequence, step: str) -> list:
    return list(seq.meta.get("provenance", [])) + [step]


# ---------------------------------------------------------------------------
# splitting and disjointification
# ---------------------------------------------------------------------------

@dataclass
class SplitResult:
    indices: list  # n_k
    peel_sets: list  # A_k, tuples of points
    limit: FinSuppMeasure
    residual_norms: list  # ||mu_{n_k} restricted off A_k  -  limit||
    horizon: int
    tau: Fraction

    def peel(self, seq: MeasureSequence, k: int) -> FinSuppMeasure:
        return restrict(seq[self.indices[k]], set(self.peel_sets[k]))


def _restricted_distance(mu: FinSuppMeasure, limit: FinSuppMeasure, B: set) -> Fraction:
    """||(mu - limit) restricted to B|| for B containing supp(limit)."""
    d = Fraction(0)
    for p, c in mu.items():
        if p in B:
            d += abs(c - limit(p))
    for p, c in limit.items():
        if mu(p) == 0:
            d += abs(c)
    return d


def kpr_split(seq: MeasureSequence, K: int, tau=DEFAULT_TAU, horizon: int = DEFAULT_N,
              norm_bound=1) -> SplitResult:
    """K rounds of the inductive splitting choice.

    The limit is estimated by ``extract_pointwise_convergent``.  Round k sets
    B_k = supp(limit) U A_0 U ... U A_{k-1}, takes the first extracted index
    n_k > n_{k-1} with ||(mu_{n_k} - limit) restricted to B_k|| < 1/(2k+2), and peels
    A_k = supp(mu_{n_k}) minus B_k.  The residual ||mu_{n_k} off A_k - limit|| is
    then checked exactly to be < 1/(k+1).
    """
    tau = Fraction(tau)
    if K < 1:
        raise PreconditionError("K must be positive")
    ext = extract_pointwise_convergent(seq, horizon, tau, norm_bound=norm_bound)
    limit = ext.limit
    if tau * max(1, len(limit)) >= Fraction(1, 2 * K + 2):
        raise PreconditionError(
            f"limit accuracy tau*|supp| = {tau * len(limit)} must be < 1/(2K+2) = {Fraction(1, 2 * K + 2)}")
    B = set(limit.support())
    indices, peels, residuals = [], [], []
    candidates = iter(ext.indices)
    best = None
    for k in range(K):
        bound = Fraction(1, 2 * k + 2)
        chosen = None
        for n in candidates:
            d = _restricted_distance(seq[n], limit, B)
            best = d if best is None else min(best, d)
            if d < bound:
                chosen = n
                break
        if chosen is None:
            raise HorizonError(
                f"horizon exhausted in splitting round {k}: best achieved {best} is not < {bound}")
        mu = seq[chosen]
        A = tuple(p for p in mu.support() if p not in B)
        off = restrict(mu, lambda p, A=set(A): p not in A)
        residual = total_variation(off - limit)
        if not residual < Fraction(1, k + 1):
            raise InvariantViolation(f"round {k}: residual {residual} is not < 1/{k + 1}")
        indices.append(chosen)
        peels.append(A)
        residuals.append(residual)
        B.update(A)
    return SplitResult(indices, peels, limit, residuals, seq.available(horizon), tau)


def disjointify(seq: MeasureSequence, eps_floor=None, K: int = 20, tau=DEFAULT_TAU,
                horizon: int | None = None) -> MeasureSequence:
    """rho_k = normalize(nu_{2k} - nu_{2k+1}) with nu_k the k-th peel of a 2K-round split."""
    M = Fraction(seq.meta.get("norm_bound", 1))
    eps_floor = Fraction(1, 4) / M if eps_floor is None else Fraction(eps_floor)
    horizon = max(horizon or DEFAULT_N, 4 * K + 16)
    split = kpr_split(seq, 2 * K, tau, horizon, norm_bound=M)
    peels = []
    for k in range(2 * K):
        nu = split.peel(seq, k)
        if not total_variation(nu) > eps_floor:
            raise PreconditionError(
                f"norm-convergent subsequence suspected: peel {k} (index {split.indices[k]}) has norm "
                f"{total_variation(nu)} <= {eps_floor}")
        peels.append(nu)
    out = [normalize(peels[2 * k] - peels[2 * k + 1]) for k in range(K)]
    meta = {
        "name": f"{seq.meta.get('name', 'seq')}-disjoint",
        "claimed_jn": seq.meta.get("claimed_jn", False),
        "claimed_disjoint": True,
        "support_bound": None,
        "provenance": _provenance(seq, "disjointify"),
        "source_indices": [[split.indices[2 * k], split.indices[2 * k + 1]] for k in range(K)],
        "eps_floor": frac_str(eps_floor),
        "limit": split.limit.to_json(),
        "residual_norms": [frac_str(r) for r in split.residual_norms],
    }
    return MeasureSequence.from_measures(out, meta, space=seq.space)


# ---------------------------------------------------------------------------
# small sets and escape neighbourhoods
# ---------------------------------------------------------------------------

def variation_on(mu: FinSuppMeasure, region) -> Fraction:
    """|mu|(U)."""
    return sum((abs(c) for p, c in mu.items() if p in region), Fraction(0))


def select_small_set(seq: MeasureSequence, regions: Sequence[Region], K: int,
                     horizon: int = DEFAULT_N) -> tuple[int, list]:
    """Region index i and K indices n with |mu_n|(U_i) <= 1/m (m regions).

    Returns the region with the most qualifying indices in the horizon (ties to the
    smallest i) and its first K qualifying indices.
    """
    m = len(regions)
    if m == 0:
        raise PreconditionError("need at least one region")
    for a in range(m):
        for b in range(a + 1, m):
            if not regions[a].disjoint_from(regions[b]):
                raise PreconditionError(f"regions {a} and {b} are not certified disjoint")
    bound = Fraction(1, m)
    hits = [[] for _ in regions]
    for n in range(seq.available(horizon)):
        mu = seq[n]
        for i, U in enumerate(regions):
            if variation_on(mu, U) <= bound:
                hits[i].append(n)
    i = max(range(m), key=lambda j: (len(hits[j]), -j))
    if len(hits[i]) < K:
        raise HorizonError(f"fewer than {K} qualifying indices; tallies {[len(h) for h in hits]}")
    return i, hits[i][:K]


def _half_distance_radius(sq: Fraction) -> Fraction:
    """A power of two r with (2r)^2 <= sq, i.e. r at most half the distance."""
    p = dyadic_floor(sq / 4)
    e = p.numerator.bit_length() - 1 if p >= 1 else -(p.denominator.bit_length() - 1)
    return Fraction(2) ** (e // 2)


def escape_step(seq: MeasureSequence, eps, K: int, candidates: Sequence[int] | None = None,
                horizon: int = DEFAULT_N, max_halvings: int = 64) -> tuple[int, Region, list]:
    """n_0, a union of balls U around supp(mu_{n_0}), and later indices barely touching U.

    The radius starts at a dyadic lower bound of half the least distance from
    supp(mu_{n_0}) to the next K candidate supports and is halved until at least K
    later candidates satisfy |mu_n|(U) < eps.  All qualifying candidates are returned.
    """
    eps = Fraction(eps)
    cands = list(candidates) if candidates is not None else list(range(seq.available(horizon)))
    if len(cands) < K + 1:
        raise HorizonError(f"need {K + 1} candidates, have {len(cands)}")
    n0, rest = cands[0], cands[1:]
    sp = seq.space
    E = seq[n0].support()
    if not E:
        raise PreconditionError(f"measure {n0} is zero")
    others = [p for n in rest[:K] for p in seq[n].support()]
    sq = min((sp.sq_distance(x, y) for x in E for y in others if x != y), default=Fraction(4))
    if any(x in set(E) for x in others):
        raise PreconditionError(f"supports of {n0} and a later candidate intersect")
    r = min(_half_distance_radius(sq), Fraction(1))
    masses = None
    for _ in range(max_halvings):
        U = Region.ball_union(sp, [(x, r) for x in E])
        masses = [(n, variation_on(seq[n], U)) for n in rest]
        good = [n for n, v in masses if v < eps]
        if len(good) >= K:
            return n0, U, good
        r /= 2
    raise HorizonError(f"cannot reach eps={eps}; achieved masses {[frac_str(v) for _, v in masses[:K]]}")


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------

@dataclass
class DiscretizeResult:
    rho: list  # output measures
    source_indices: list  # input index of nu_{k_i}
    levels: list  # k_i (positions in the escape list)
    witnesses: list  # g_i
    regions: list  # U_{k_i}
    lambda_norms: list
    space: object = None
    band_choices: list = field(default_factory=list)  # (level, m, qualifying count)
    q4_diagnostic: list = field(default_factory=list)

    def zero_set(self, i: int) -> dict:
        """Symbolic descriptor of C_i = g_i^{-1}(0)."""
        return {"zero_set_of": self.witnesses[i].to_json()}

    def sequence(self, meta=None) -> MeasureSequence:
        return MeasureSequence.from_measures(self.rho, meta, space=self.space)

    def to_json(self) -> dict:
        return {
            "levels": self.levels,
            "source_indices": self.source_indices,
            "lambda_norms": [frac_str(v) for v in self.lambda_norms],
            "band_choices": [list(b) for b in self.band_choices],
            "witnesses": [g.to_json() for g in self.witnesses],
            "regions": [U.to_json() for U in self.regions],
            "zero_sets": [self.zero_set(i) for i in range(len(self.witnesses))],
        }


def _band_of(g: TestFunction, p, bands: int):
    """m with g(p) in the open interval (m/bands, (m+1)/bands), or None."""
    v = g(p)
    if isinstance(v, Fraction):
        m = math.floor(v * bands)
        if Fraction(m, bands) < v < Fraction(m + 1, bands):
            return m
        return None
    guess = math.floor(v * bands)
    for m in (guess, guess - 1, guess + 1):
        if 0 <= m < bands and g.gt(p, Fraction(m, bands)) and g.lt(p, Fraction(m + 1, bands)):
            return m
    return None


def _open_preimage_mass(g: TestFunction, mu: FinSuppMeasure) -> Fraction:
    """|mu|(g^{-1}((0, 1)))."""
    return sum((abs(c) for p, c in mu.items() if g.gt(p, 0) and g.lt(p, 1)), Fraction(0))


def discretize(seq: MeasureSequence, I: int, horizon: int = 64, Q: int = 8) -> DiscretizeResult:
    """I measures rho_i whose supports form a discrete set, with witnesses g_i.

    Stage 1 picks indices n_0 < n_1 < ... and balls U_k around supp(mu_{n_k}) with
    |mu_{n_l}|(U_k) < 1/4 * 2^-k for l > k (repeated escape steps).  Stage 2 builds
    h_k = urysohn(E_k, U_k), g_0 = h_0, and for each level the band
    m in {0..2^{i+1}} of g' = min(g_i, h_{k_{i+1}}) carrying the least mass, then
    g_{i+1} = p_{m/(2^{i+1}+1), (m+1)/(2^{i+1}+1)} o g'.  Finally
    lambda_i = nu_{k_i} off C_{i-1} = g_{i-1}^{-1}(0) and rho_i = lambda_i / ||lambda_i||.
    """
    if I < 1:
        raise PreconditionError("I must be positive")
    sp = seq.space
    H = seq.available(horizon)
    # stage 1: escape neighbourhoods
    cands = list(range(H))
    ns, Us = [], []
    k = 0
    while len(cands) > 1 and len(ns) < H:
        eps = Fraction(1, 4 * 2**k)
        need = min(Q, len(cands) - 1)
        n0, U, good = escape_step(seq, eps, need, cands)
        ns.append(n0)
        Us.append(U)
        cands = good
        k += 1
    if cands:
        ns.append(cands[0])
        Us.append(escape_step_last(seq, cands[0]))
    nu = [seq[n] for n in ns]
    T = len(nu)
    if T < I:
        raise HorizonError(f"escape stage kept only {T} indices; need at least I={I}")
    h = [urysohn(sp, nu[j].support(), Us[j]) for j in range(T)]

    # stage 2: layered witnesses
    levels = [0]
    g = [h[0]]
    A = [l for l in range(1, T) if _open_preimage_mass(g[0], nu[l]) < 1]
    bands_log = []
    for i in range(I - 1):
        if not A:
            raise HorizonError(f"level {i}: no candidates left (horizon too small)")
        kn = A[0]
        gp = min_combine(g[i], h[kn])
        bands = 2 ** (i + 1) + 1
        bound = Fraction(1, 2 ** (i + 1))
        rest = [l for l in A if l > kn]
        bad: dict[int, int] = {}
        for l in rest:
            mass: dict[int, Fraction] = {}
            for p, c in nu[l].items():
                m = _band_of(gp, p, bands)
                if m is not None:
                    mass[m] = mass.get(m, Fraction(0)) + abs(c)
            for m, v in mass.items():
                if v >= bound:
                    bad[m] = bad.get(m, 0) + 1
        m_best = min(range(bands), key=lambda m: (bad.get(m, 0), m))
        qualifying = [l for l in rest if _band_mass(gp, nu[l], m_best, bands) < bound]
        # the last level only needs its witness, not further candidates
        if i < I - 2 and len(qualifying) < Q:
            raise HorizonError(
                f"level {i + 1}: best band {m_best} has {len(qualifying)} qualifying candidates (< {Q})")
        g.append(reparam(Fraction(m_best, bands), Fraction(m_best + 1, bands), gp))
        levels.append(kn)
        bands_log.append((i + 1, m_best, len(qualifying)))
        A = qualifying

    rho, lam_norms, q4 = [], [], []
    for i, kk in enumerate(levels):
        if i == 0:
            lam = nu[kk]
        else:
            lam = restrict(nu[kk], lambda p, gg=g[i - 1]: not gg.le(p, 0))
        ln = total_variation(lam)
        if not ln > HALF:
            raise InvariantViolation(f"level {i}: ||lambda|| = {ln} is not > 1/2")
        rho.append(normalize(lam))
        lam_norms.append(ln)
    for i in range(len(levels) - 1):
        # mass of later sources on C_{i+1} minus C_i; the argument only needs < 2/2^i
        masses = []
        for l in levels[i + 2:]:
            v = sum((abs(c) for p, c in nu[l].items() if g[i + 1].le(p, 0) and not g[i].le(p, 0)),
                    Fraction(0))
            masses.append(v)
        q4.append((i, frac_str(max(masses, default=Fraction(0))), frac_str(Fraction(2, 2**i))))
    return DiscretizeResult(rho, [ns[k] for k in levels], levels, g, [Us[k] for k in levels],
                            lam_norms, sp, bands_log, q4)


def _band_mass(g: TestFunction, mu: FinSuppMeasure, m: int, bands: int) -> Fraction:
    return sum((abs(c) for p, c in mu.items() if _band_of(g, p, bands) == m), Fraction(0))


def escape_step_last(seq: MeasureSequence, n: int) -> Region:
    """Ball union around the final kept support; radius from its own point spread."""
    sp = seq.space
    E = seq[n].support()
    sq = min((sp.sq_distance(x, y) for x in E for y in E if x != y), default=Fraction(4))
    return Region.ball_union(sp, [(x, min(_half_distance_radius(sq), Fraction(1))) for x in E])


# ---------------------------------------------------------------------------
# constant coefficients and pairs
# ---------------------------------------------------------------------------

def canonical_vector(mu: FinSuppMeasure) -> tuple[tuple, tuple]:
    """(points, l1-normalized coefficients) sorted by decreasing coefficient, ties by point."""
    items = sorted(mu.items(), key=lambda pc: (-pc[1], pc[0]))
    n = total_variation(mu)
    return tuple(p for p, _ in items), tuple(c / n for _, c in items)


def l1(u, v) -> Fraction:
    return sum((abs(a - b) for a, b in zip(u, v)), Fraction(0))


@dataclass
class ConstantCoefficients:
    alpha: tuple
    indices: list
    sequence: MeasureSequence
    distances: list


def constant_coefficients(seq: MeasureSequence, M: int, tau=Fraction(1, 64), horizon: int = DEFAULT_N,
                          Q: int = 8, indices: Sequence[int] | None = None) -> ConstantCoefficients:
    """Subsequence whose canonical coefficient vectors lie within tau of each other.

    Picks the scanned vector whose closed l1 ball of radius tau/2 holds the most
    scanned vectors (ties to the earliest centre); alpha is the vector of the
    earliest member, and nu_k places alpha on the points of mu_{n_k}.
    """
    tau = Fraction(tau)
    idx = list(indices) if indices is not None else list(range(seq.available(horizon)))
    vecs = {}
    for n in idx:
        mu = seq[n]
        if len(mu) != M:
            raise PreconditionError(f"support size {len(mu)} != {M} at n={n}")
        vecs[n] = canonical_vector(mu)
    centers, seen = [], set()
    for n in idx:
        if vecs[n][1] not in seen:
            seen.add(vecs[n][1])
            centers.append(vecs[n][1])
    best = None
    for c in centers:
        members = [n for n in idx if l1(vecs[n][1], c) <= tau / 2]
        if best is None or len(members) > len(best):
            best = members
    if best is None or len(best) < Q:
        raise HorizonError(f"no tau-cluster with {Q} members (largest has {0 if best is None else len(best)})")
    alpha = vecs[best[0]][1]
    if sum(abs(a) for a in alpha) != 1:
        raise InvariantViolation("cluster vector is not on the l1 sphere")
    out, dists = [], []
    for n in best:
        pts = vecs[n][0]
        nu = make_measure(list(zip(pts, alpha)), seq.space)
        d = total_variation(nu - seq[n])
        if not d < tau * M:
            raise PreconditionError(f"index {n}: ||nu - mu|| = {d} is not < tau*M; members are not norm-1")
        out.append(nu)
        dists.append(d)
    meta = {
        "name": f"{seq.meta.get('name', 'seq')}-constcoef",
        "claimed_jn": seq.meta.get("claimed_jn", False),
        "support_bound": M,
        "alpha": [frac_str(a) for a in alpha],
        "indices": best,
        "provenance": _provenance(seq, "constant_coefficients"),
    }
    return ConstantCoefficients(alpha, best, MeasureSequence.from_measures(out, meta, space=seq.space), dists)


def _pair(space, x, y) -> FinSuppMeasure:
    return make_measure([(x, HALF), (y, -HALF)], space)


def _disjoint_pairs(space, pairs: list, Q: int):
    """Pair-disjointification: identity, hub (convergent) structure, or greedy thinning.

    Returns (pairs, mode) where pairs are (x, y, source position) triples.
    """
    used: set = set()
    clash = False
    for x, y, _ in pairs:
        if x in used or y in used:
            clash = True
            break
        used.update((x, y))
    if not clash:
        return pairs, "identity"
    counts: dict = {}
    for x, y, _ in pairs:
        counts[x] = counts.get(x, 0) + 1
        counts[y] = counts.get(y, 0) + 1
    hub = max(counts, key=counts.get)  # first maximal point in scan order
    if counts[hub] >= Q:
        partners, seen = [], set()
        for x, y, n in pairs:
            if hub in (x, y):
                z = y if x == hub else x
                if z not in seen:
                    seen.add(z)
                    partners.append((z, n))
        out = [(partners[2 * k][0], partners[2 * k + 1][0], partners[2 * k][1])
               for k in range(len(partners) // 2)]
        return out, "hub"
    out, used = [], set()
    for x, y, n in pairs:
        if x not in used and y not in used:
            used.update((x, y))
            out.append((x, y, n))
    return out, "thinned"


def reduce_to_pairs(seq: MeasureSequence, M_bound: int, horizon: int = 400, tau=Fraction(1, 64),
                    Q: int = 8, W: int = 16, corpus_config: CorpusConfig | None = None,
                    eps=Fraction(1, 2**10)) -> MeasureSequence:
    """A sequence of measures 1/2 (delta_x - delta_y) with pairwise disjoint supports.

    (a) keep the support-size class with most members; (b) drop canonical positions
    whose coefficients stay below tau over the last W members and renormalize;
    (c) constant coefficients; (d) candidate pairs of canonical positions, the
    largest positive against the most negative first; (e) make supports disjoint.
    The first candidate not refuted by the corpus is returned.
    """
    from .verify import weak_star_report

    tau = Fraction(tau)
    H = seq.available(horizon)
    sizes: dict[int, list] = {}
    for n in range(H):
        s = len(seq[n])
        if s > M_bound:
            raise PreconditionError(f"support size {s} > M_bound={M_bound} at n={n}")
        if s >= 2:
            sizes.setdefault(s, []).append(n)
    if not sizes:
        raise HorizonError("no members with at least two atoms")
    M = max(sizes, key=lambda s: (len(sizes[s]), -sizes[s][0]))
    idx = sizes[M]
    if len(idx) < Q:
        raise HorizonError(f"size class {M} too sparse: {len(idx)} members")
    work = seq.subsequence(idx, f"support size {M}")
    # (b) drop vanishing canonical positions
    while True:
        vecs = [canonical_vector(work[k]) for k in range(len(idx))]
        tailv = vecs[-W:]
        keep = [j for j in range(M) if max(abs(v[1][j]) for v in tailv) >= tau]
        if len(keep) == M or len(keep) < 2:
            break
        reduced = [normalize(make_measure([(v[0][j], v[1][j]) for j in keep], seq.space)) for v in vecs]
        work = MeasureSequence.from_measures(reduced, dict(work.meta), space=seq.space)
        M = len(keep)
    cc = constant_coefficients(work, M, tau, len(idx), Q)
    alpha = cc.alpha
    pos = [j for j in range(M) if alpha[j] > 0]
    neg = [j for j in range(M) if alpha[j] < 0]
    first = []
    if pos and neg:
        jmax = max(pos, key=lambda j: (alpha[j], -j))
        jmin = min(neg, key=lambda j: (alpha[j], j))
        first = [(jmax, jmin)]
    cand = first + [(i, j) for i in pos for j in neg if (i, j) not in first]
    cand += [(i, j) for i in range(M) for j in range(M) if i != j and (i, j) not in cand]
    cfg = corpus_config or CorpusConfig()
    fs = corpus(seq.space, cfg)
    refutations = []
    for i, j in cand:
        raw = []
        for k, n in enumerate(cc.indices):
            pts = canonical_vector(work[n])[0]
            raw.append((pts[i], pts[j], k))
        pairs, mode = _disjoint_pairs(seq.space, raw, Q)
        if len(pairs) < 2:
            refutations.append(((i, j), "too few disjoint pairs"))
            continue
        out = [_pair(seq.space, x, y) for x, y, _ in pairs]
        meta = {
            "name": f"{seq.meta.get('name', 'seq')}-pairs",
            "claimed_jn": seq.meta.get("claimed_jn", False),
            "claimed_disjoint": True,
            "support_bound": 2,
            "pair_positions": [i, j],
            "alpha": [frac_str(a) for a in alpha],
            "disjoint_mode": mode,
            "provenance": _provenance(seq, f"reduce_to_pairs(M={M})"),
        }
        cand_seq = MeasureSequence.from_measures(out, meta, space=seq.space)
        rep = weak_star_report(cand_seq, fs, len(out), eps)
        if not rep.refuted:
            return cand_seq
        refutations.append(((i, j), rep.refutation_text()))
    raise HorizonError("no pair reduction found at horizon; refuted by " +
                       "; ".join(f"{ij}: {why}" for ij, why in refutations))
