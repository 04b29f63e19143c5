"""Subsets of the naturals, asymptotic density, and clopen obstruction witnesses.

Set descriptors are expression trees over a few primitives (arithmetic
progressions, squares, factorials, finite sets, images of named increasing
sequences) closed under complement, union and intersection.  Counting
``|A ∩ {0..N-1}|`` is exact and never scans the whole range when a primitive
knows its own count.
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

from .errors import ParseError, PreconditionError


class SetDescriptor:
    """A decidable subset of the naturals."""

    def contains(self, n: int) -> bool:
        raise NotImplementedError

    def count(self, N: int) -> int:
        """|A ∩ [0, N)|."""
        return sum(1 for _ in self.members(N))

    def members(self, N: int) -> Iterator[int]:
        """Increasing enumeration of A ∩ [0, N)."""
        return (n for n in range(N) if self.contains(n))

    def depth(self) -> int:
        return 1

    def __contains__(self, n):
        return self.contains(n)

    def __invert__(self):
        return Complement(self)

    def __and__(self, other):
        return Intersection(self, other)

    def __or__(self, other):
        return Union(self, other)

    def __repr__(self):
        return f"SetDescriptor({self})"


@dataclass(frozen=True, repr=False)
class AP(SetDescriptor):
    """{a + b*k : k >= 0}; b = 0 gives the singleton {a}."""

    a: int
    b: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise PreconditionError("progression parameters must be nonnegative")

    def contains(self, n):
        if n < self.a:
            return False
        if self.b == 0:
            return n == self.a
        return (n - self.a) % self.b == 0

    def count(self, N):
        if N <= self.a:
            return 0
        if self.b == 0:
            return 1
        return (N - 1 - self.a) // self.b + 1

    def members(self, N):
        if self.b == 0:
            return iter([self.a] if self.a < N else [])
        return iter(range(self.a, N, self.b))

    def __str__(self):
        return f"ap({self.a},{self.b})"


@dataclass(frozen=True, repr=False)
class Squares(SetDescriptor):
    def contains(self, n):
        return n >= 0 and math.isqrt(n) ** 2 == n

    def count(self, N):
        return 0 if N <= 0 else math.isqrt(N - 1) + 1

    def members(self, N):
        return (k * k for k in range(self.count(N)))

    def __str__(self):
        return "squares"


@dataclass(frozen=True, repr=False)
class Factorials(SetDescriptor):
    """{k! : k >= 0} = {1, 2, 6, 24, ...}."""

    def _list(self, N):
        out, f, k = [], 1, 1
        while f < N:
            if not out or out[-1] != f:
                out.append(f)
            k += 1
            f *= k
        return out

    def contains(self, n):
        f, k = 1, 1
        while f < n:
            k += 1
            f *= k
        return f == n

    def count(self, N):
        return len(self._list(N))

    def members(self, N):
        return iter(self._list(N))

    def __str__(self):
        return "factorials"


@dataclass(frozen=True, repr=False)
class Finite(SetDescriptor):
    elements: frozenset

    def __init__(self, elements: Iterable[int]):
        els = frozenset(int(e) for e in elements)
        if any(e < 0 for e in els):
            raise PreconditionError("finite sets hold naturals")
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "_sorted", tuple(sorted(els)))

    def contains(self, n):
        return n in self.elements

    def count(self, N):
        return bisect.bisect_left(self._sorted, N)

    def members(self, N):
        return iter(self._sorted[: self.count(N)])

    def __str__(self):
        return "finite{" + ",".join(map(str, self._sorted)) + "}"


ALL = AP(0, 1)
EMPTY = Finite(())

# named increasing sequences usable in seq(name); values must be strictly increasing
NAMED_SEQUENCES: dict[str, Callable[[int], int]] = {
    "squares": lambda n: n * n,
    "evens": lambda n: 2 * n,
    "odds": lambda n: 2 * n + 1,
    "cubes": lambda n: n**3,
    "powers2": lambda n: 2**n,
    "factorials": lambda n: math.factorial(n + 1),
}


def register_sequence(name: str, fn: Callable[[int], int]):
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        raise PreconditionError(f"bad sequence name {name!r}")
    NAMED_SEQUENCES[name] = fn


@dataclass(frozen=True, repr=False)
class SeqImage(SetDescriptor):
    """{x_n : n in ω} for a named strictly increasing sequence x."""

    name: str

    def __post_init__(self):
        if self.name not in NAMED_SEQUENCES:
            raise ParseError(f"unknown sequence {self.name!r}")

    @property
    def fn(self):
        return NAMED_SEQUENCES[self.name]

    def _index_bound(self, N):
        # smallest k with x_k >= N, by doubling then bisection (x strictly increasing, x_k >= k)
        fn = self.fn
        hi = 1
        while fn(hi) < N:
            hi *= 2
        lo = 0
        while lo < hi:
            mid = (lo + hi) // 2
            if fn(mid) < N:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def contains(self, n):
        if n < 0:
            return False
        k = self._index_bound(n)
        return self.fn(k) == n

    def count(self, N):
        return self._index_bound(N)

    def members(self, N):
        fn = self.fn
        return (fn(k) for k in range(self._index_bound(N)))

    def __str__(self):
        return f"seq({self.name})"


@dataclass(frozen=True, repr=False)
class Complement(SetDescriptor):
    inner: SetDescriptor

    def contains(self, n):
        return not self.inner.contains(n)

    def count(self, N):
        return max(N, 0) - self.inner.count(N)

    def members(self, N):
        inside = iter(self.inner.members(N))
        nxt = next(inside, None)
        for n in range(N):
            if n == nxt:
                nxt = next(inside, None)
            else:
                yield n

    def depth(self):
        return 1 + self.inner.depth()

    def __str__(self):
        return f"!{_wrap(self.inner)}"


@dataclass(frozen=True, repr=False)
class Intersection(SetDescriptor):
    left: SetDescriptor
    right: SetDescriptor

    def contains(self, n):
        return self.left.contains(n) and self.right.contains(n)

    def _sparse(self, N):
        # enumerate the side that is not a complement, test the other
        if isinstance(self.left, Complement) and not isinstance(self.right, Complement):
            return self.right, self.left
        return self.left, self.right

    def count(self, N):
        a, b = self._sparse(N)
        return sum(1 for n in a.members(N) if b.contains(n))

    def members(self, N):
        a, b = self._sparse(N)
        return (n for n in a.members(N) if b.contains(n))

    def depth(self):
        return 1 + max(self.left.depth(), self.right.depth())

    def __str__(self):
        return f"{_wrap(self.left)}&{_wrap(self.right)}"


@dataclass(frozen=True, repr=False)
class Union(SetDescriptor):
    left: SetDescriptor
    right: SetDescriptor

    def contains(self, n):
        return self.left.contains(n) or self.right.contains(n)

    def count(self, N):
        return self.left.count(N) + self.right.count(N) - Intersection(self.left, self.right).count(N)

    def members(self, N):
        seen = sorted(set(self.left.members(N)) | set(self.right.members(N)))
        return iter(seen)

    def depth(self):
        return 1 + max(self.left.depth(), self.right.depth())

    def __str__(self):
        return f"{_wrap(self.left)}|{_wrap(self.right)}"


def _wrap(d: SetDescriptor) -> str:
    s = str(d)
    return f"({s})" if isinstance(d, (Union, Intersection)) else s


def brute_count(a: SetDescriptor, N: int) -> int:
    """Reference count by testing every n < N; used as an oracle."""
    return sum(1 for n in range(N) if a.contains(n))


# ---------------------------------------------------------------------------
# textual grammar:  expr := term ('|' term)* ; term := factor ('&' factor)* ;
# factor := '!' factor | '(' expr ')' | atom
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(ap\(\s*\d+\s*,\s*\d+\s*\)|finite\{[\d,\s]*\}|seq\(\s*\w+\s*\)|squares|factorials|all|empty|[!&|()])")


def parse_set(text: str, max_depth: int = 64) -> SetDescriptor:
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"cannot parse set descriptor at {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    it = _Parser(tokens)
    out = it.expr()
    if it.i != len(tokens):
        raise ParseError(f"trailing input in set descriptor {text!r}")
    if out.depth() > max_depth:
        raise ParseError(f"descriptor deeper than {max_depth}")
    return out


class _Parser:
    def __init__(self, tokens):
        self.t, self.i = tokens, 0

    def peek(self):
        return self.t[self.i] if self.i < len(self.t) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of set descriptor")
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek() == "|":
            self.take()
            node = Union(node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == "&":
            self.take()
            node = Intersection(node, self.factor())
        return node

    def factor(self):
        tok = self.take()
        if tok == "!":
            return Complement(self.factor())
        if tok == "(":
            node = self.expr()
            if self.take() != ")":
                raise ParseError("missing ')'")
            return node
        if tok == "squares":
            return Squares()
        if tok == "factorials":
            return Factorials()
        if tok == "all":
            return ALL
        if tok == "empty":
            return EMPTY
        if tok.startswith("ap("):
            a, b = (int(x) for x in tok[3:-1].split(","))
            return AP(a, b)
        if tok.startswith("finite{"):
            body = tok[7:-1].strip()
            return Finite(int(x) for x in body.split(",") if x.strip()) if body else EMPTY
        if tok.startswith("seq("):
            return SeqImage(tok[4:-1].strip())
        raise ParseError(f"unexpected token {tok!r}")


# ---------------------------------------------------------------------------
# density verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityVerdict:
    N: int
    ratio: Fraction
    checkpoints: tuple  # ((n, ratio), ...) at dyadic n <= N and N itself
    trend: float  # least-squares slope of ratio against log2(n) over the last checkpoints
    verdict: str  # "in-Z", "in-coZ", "oscillating", "undecided"
    delta: Fraction

    def to_json(self):
        return {
            "N": self.N,
            "ratio": f"{self.ratio.numerator}/{self.ratio.denominator}",
            "checkpoints": [[n, f"{r.numerator}/{r.denominator}"] for n, r in self.checkpoints],
            "trend": self.trend,
            "verdict": self.verdict,
            "delta": f"{self.delta.numerator}/{self.delta.denominator}",
        }


def _slope(xs, ys):
    n = len(xs)
    if n < 2:
        return 0.0
    mx, my = sum(xs) / n, sum(ys) / n
    den = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / den if den else 0.0


def density_profile(a: SetDescriptor, N: int, delta=Fraction(1, 64)) -> DensityVerdict:
    """Exact prefix densities at dyadic checkpoints and a trend verdict.

    in-Z when the last three ratios are below ``delta`` and non-increasing; in-coZ
    symmetrically for 1 - ratio; undecided when the ratios are still strictly
    moving toward 0 or 1; oscillating otherwise (no sign of density 0 or 1).
    """
    if N < 2:
        raise PreconditionError("density_profile needs N >= 2")
    delta = Fraction(delta)
    points = []
    c = 2
    while c < N:
        points.append(c)
        c *= 2
    points.append(N)
    cps = tuple((n, Fraction(a.count(n), n)) for n in points)
    last = [r for _, r in cps[-3:]]
    trend = _slope([math.log2(n) for n, _ in cps[-4:]], [float(r) for _, r in cps[-4:]])

    def nonincreasing(xs):
        return all(y <= x for x, y in zip(xs, xs[1:]))

    def decreasing(xs):
        return all(y < x for x, y in zip(xs, xs[1:]))

    co = [1 - r for r in last]
    if all(r < delta for r in last) and nonincreasing(last):
        verdict = "in-Z"
    elif all(r < delta for r in co) and nonincreasing(co):
        verdict = "in-coZ"
    elif len(last) == 3 and (decreasing(last) or decreasing(co)):
        verdict = "undecided"
    else:
        verdict = "oscillating"
    return DensityVerdict(N, cps[-1][1], cps, trend, verdict, delta)


def clopen_integrate(mu, a: SetDescriptor) -> Fraction:
    """mu([A]) for a measure supported in the naturals."""
    if not mu.space.is_discrete:
        raise PreconditionError("clopen_integrate needs a measure on discrete_nat")
    return sum((c for p, c in mu.items() if a.contains(p)), Fraction(0))


# ---------------------------------------------------------------------------
# obstruction witnesses
# ---------------------------------------------------------------------------

@dataclass
class WitnessReport:
    found: bool
    witness: SetDescriptor | None
    indices: list  # pair indices on which the witness was evaluated
    values: list  # mu_n([A]) for those indices
    density: DensityVerdict | None
    density_horizon: int
    tried: list = field(default_factory=list)  # (label, descriptor text, verdict)
    verdict: str = ""

    def to_json(self):
        return {
            "found": self.found,
            "witness": None if self.witness is None else str(self.witness),
            "verdict": self.verdict,
            "n_values": len(self.values),
            "all_half": all(v == Fraction(1, 2) for v in self.values),
            "density": None if self.density is None else self.density.to_json(),
            "density_horizon": self.density_horizon,
            "tried": [list(t) for t in self.tried],
        }


_SUBFAMILIES = [
    ("all", lambda n: True),
    ("even-index", lambda n: n % 2 == 0),
    ("square-index", lambda n: math.isqrt(n) ** 2 == n),
    ("factorial-index", lambda n: Factorials().contains(n) or n == 0),
]


def _primitive_candidates(xs, ys):
    """Named primitives containing every x and no y, if any."""
    cands = [Squares(), Factorials()]
    if len(xs) >= 2:
        a, b = xs[0], xs[1] - xs[0]
        if b > 0:
            cands.append(AP(a % b, b))
    out = []
    for c in cands:
        if all(c.contains(x) for x in xs) and not any(c.contains(y) for y in ys):
            out.append(c)
    return out


def pair_measure(x: int, y: int):
    from .measure import make_measure

    return make_measure([(x, Fraction(1, 2)), (y, Fraction(-1, 2))], "discrete_nat")


def obstruction_witness(pairs: Sequence, N: int, delta=Fraction(1, 64)) -> WitnessReport:
    """Look for a density-zero set A with mu_n([A]) = 1/2 along a subfamily of pairs.

    ``pairs`` lists (x_n, y_n) in ω with x_n != y_n and pairwise disjoint pairs.
    The candidate is A = {x_n : n in I} for subfamilies I tried in order (all,
    even-index, square-index, factorial-index); A is reported as a named primitive
    when one separates the x's from the y's on the prefix.  Density is evaluated up
    to min(N, coverage) where coverage is the range on which the finite prefix of
    x's determines A.
    """
    pairs = [(int(x), int(y)) for x, y in pairs]
    seen: dict = {}
    for n, (x, y) in enumerate(pairs):
        if x == y:
            raise PreconditionError(f"pair {n} is degenerate: x_n = y_n = {x}")
        for p in (x, y):
            if p in seen:
                raise PreconditionError(f"pairs {seen[p]} and {n} share the point {p}")
            seen[p] = n
    if not pairs:
        raise PreconditionError("no pairs given")
    tried = []
    best = None
    for label, keep in _SUBFAMILIES:
        idx = [n for n in range(len(pairs)) if keep(n)]
        if len(idx) < 2:
            continue
        xs = [pairs[n][0] for n in idx]
        ys = [pairs[n][1] for n in idx]
        candidates = [(A, N) for A in _primitive_candidates(xs, ys)]
        # the prefix only pins down {x_n} below the first x it has not seen yet
        candidates.append((Finite(xs), min(N, max(xs) + 1) if xs == sorted(xs) else min(N, min(xs) + 1)))
        for A, horizon in candidates:
            horizon = max(horizon, 2)
            dv = density_profile(A, horizon, delta)
            tried.append((label, str(A), dv.verdict))
            values = [clopen_integrate(pair_measure(*pairs[n]), A) for n in idx]
            if dv.verdict == "in-Z":
                if any(v != Fraction(1, 2) for v in values):
                    raise AssertionError("witness does not separate its own pairs")
                return WitnessReport(True, A, idx, values, dv, horizon, tried, "refuted")
            if best is None:
                best = (A, idx, values, dv, horizon)
    if best is None:
        raise PreconditionError("need at least two pairs")
    A, idx, values, dv, horizon = best
    return WitnessReport(False, A, idx, values, dv, horizon, tried, "no witness found at horizon")
