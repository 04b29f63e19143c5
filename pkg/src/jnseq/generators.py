"""Explicit JN-sequences and file-backed measure sequences."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

from .errors import MeasureError, ParseError, PreconditionError
from .measure import FinSuppMeasure, make_measure
from .spaces import as_fraction, conv_point, frac_str, get_space

F = Fraction


class MeasureSequence:
    """Indexed deterministic producer of measures on one space.

    ``length`` is None for sequences defined on all of ω.  Values are cached.
    ``meta`` holds declared properties: name, claimed_jn, claimed_disjoint,
    support_bound, alpha, enumeration, ground_truth and a provenance list.
    """

    def __init__(self, space, producer: Callable[[int], FinSuppMeasure], meta: dict | None = None,
                 length: int | None = None):
        self.space = get_space(space)
        self._producer = producer
        self.meta = dict(meta or {})
        self.meta.setdefault("provenance", [])
        self.length = length
        self._cache: dict[int, FinSuppMeasure] = {}

    @classmethod
    def from_measures(cls, measures: Sequence[FinSuppMeasure], meta=None, space=None) -> "MeasureSequence":
        measures = list(measures)
        if space is None:
            if not measures:
                raise PreconditionError("empty sequence needs an explicit space")
            space = measures[0].space
        sp = get_space(space)
        for i, mu in enumerate(measures):
            if mu.space != sp:
                raise MeasureError(f"index {i}: measure lives in {mu.space.id}, expected {sp.id}")
        return cls(sp, measures.__getitem__, meta, length=len(measures))

    def __getitem__(self, n: int) -> FinSuppMeasure:
        if n < 0 or (self.length is not None and n >= self.length):
            raise IndexError(f"index {n} outside the sequence (length {self.length})")
        mu = self._cache.get(n)
        if mu is None:
            mu = self._producer(n)
            if mu.space != self.space:
                raise MeasureError(f"index {n}: producer emitted a measure on {mu.space.id}")
            self._cache[n] = mu
        return mu

    def __len__(self):
        if self.length is None:
            raise TypeError("sequence is infinite; use prefix(N)")
        return self.length

    def __iter__(self) -> Iterator[FinSuppMeasure]:
        n = 0
        while self.length is None or n < self.length:
            yield self[n]
            n += 1

    def available(self, N: int) -> int:
        """min(N, length)."""
        return N if self.length is None else min(N, self.length)

    def prefix(self, N: int) -> list[FinSuppMeasure]:
        return [self[n] for n in range(self.available(N))]

    def subsequence(self, indices, name: str | None = None) -> "MeasureSequence":
        """Subsequence along a finite increasing index list or an index function."""
        meta = {k: v for k, v in self.meta.items() if k not in ("ground_truth",)}
        meta["provenance"] = list(self.meta.get("provenance", [])) + [name or "subsequence"]
        if callable(indices):
            fn = indices
            return MeasureSequence(self.space, lambda k: self[fn(k)], meta)
        idx = list(indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise PreconditionError("subsequence indices must be strictly increasing")
        meta["indices"] = idx
        return MeasureSequence(self.space, lambda k: self[idx[k]], meta, length=len(idx))

    def __repr__(self):
        return f"MeasureSequence({self.meta.get('name', '?')!r}, space={self.space.id}, length={self.length})"


# ---------------------------------------------------------------------------
# rational enumerations of [0, 1]
# ---------------------------------------------------------------------------

def _calkin_wilf_unit() -> Iterator[Fraction]:
    """Calkin-Wilf order of the positive rationals, filtered to (0, 1]."""
    x = F(1)
    while True:
        if x <= 1:
            yield x
        x = 1 / (2 * (x.numerator // x.denominator) - x + 1)


def _farey_unit() -> Iterator[Fraction]:
    """Rationals in [0, 1] by increasing denominator, then numerator."""
    yield F(0)
    yield F(1)
    q = 2
    while True:
        for p in range(1, q):
            if F(p, q).denominator == q:
                yield F(p, q)
        q += 1


def _calkin_wilf_with_zero() -> Iterator[Fraction]:
    # 0 goes to position 2: at positions 0 and 1 it would make atoms collide in the
    # third generator ((q_0, 0) = (0, 1 - 1/1) and (q_1, 1/2) = (0, 1 - 1/2)).
    it = _calkin_wilf_unit()
    yield next(it)
    yield next(it)
    yield F(0)
    yield from it


ENUMERATIONS = {"calkin-wilf": _calkin_wilf_with_zero, "denominator": _farey_unit}


class RationalEnumeration:
    """Cached enumeration q_0, q_1, ... of the rationals in [0, 1] without repetitions."""

    def __init__(self, name: str = "calkin-wilf"):
        if name not in ENUMERATIONS:
            raise PreconditionError(f"unknown enumeration {name!r}; known: {sorted(ENUMERATIONS)}")
        self.name = name
        self._it = ENUMERATIONS[name]()
        self._vals: list[Fraction] = []

    def __getitem__(self, k: int) -> Fraction:
        while len(self._vals) <= k:
            self._vals.append(next(self._it))
        return self._vals[k]


@lru_cache(maxsize=None)
def _enumeration(name: str) -> RationalEnumeration:
    return RationalEnumeration(name)


def trailing_zeros(m: int) -> int:
    return (m & -m).bit_length() - 1


# ---------------------------------------------------------------------------
# the four square generators
# ---------------------------------------------------------------------------

SQUARE_GROUND_TRUTH = {
    1: {"L": [[0, 0]], "LI": [[0, 0], ["1/2", 0]], "LS": [[0, 0], ["1/2", 0], [1, 0]],
        "relation": "0 != L < LI < LS < S"},
    2: {"L": [], "LI": [], "LS": "rationals x {0}", "limsup": "1/2", "relation": "0 = L = LI < LS < S"},
    3: {"L": "rationals x {0}", "limit_mass": "(1-alpha)/2", "relation": "0 != L = LI = LS < S"},
    4: {"L": "dyadics x {0}", "relation": "0 != L = LI = LS = S", "norm_on_L": 1},
}


def _square1(n: int) -> FinSuppMeasure:
    h = F(1, n + 1)
    if n % 2 == 0:
        cols = ((F(0), F(1, 4)), (F(1, 2), F(1, 4)))
    else:
        cols = ((F(0), F(1, 4)), (F(1, 2), F(1, 8)), (F(1), F(1, 8)))
    entries = []
    for x, c in cols:
        entries += [((x, F(0)), c), ((x, h), -c)]
    return make_measure(entries, "unit_square")


def _square2(enum: RationalEnumeration, k: int) -> FinSuppMeasure:
    q = enum[trailing_zeros(k + 1)]
    return make_measure([((q, F(0)), F(1, 2)), ((q, F(1, k + 1)), F(-1, 2))], "unit_square")


def _square3(enum: RationalEnumeration, alpha: Fraction, n: int) -> FinSuppMeasure:
    # points are canonical and distinct by construction, so the atom map is built directly
    atoms = {}
    zero, h = F(0), F(1, n + 1)
    for k in range(n + 1):
        c = (1 - alpha) / 2 ** (k + 2)
        q = enum[k]
        atoms[(q, zero)] = c
        atoms[(q, h)] = -c
    c = alpha / 2 + (1 - alpha) / 2 ** (n + 2)
    atoms[(zero, 1 - F(1, n + 1))] = c
    atoms[(zero, 1 - F(1, n + 2))] = -c
    if len(atoms) != 2 * n + 4:
        raise MeasureError(f"atoms collide in the third generator at n={n}; change the enumeration")
    return FinSuppMeasure("unit_square", atoms, _trusted=True)


@dataclass(frozen=True)
class Square4State:
    """Level n of the dyadic construction: points e_k = 2k/2^{n+1}, o_k = (2k+1)/2^{n+1}.

    alpha(k) is the coefficient of (delta_{e_k} - delta_{o_k}) in nu_n.  In closed
    form alpha(0) = 1/4 and, writing k = 2^j * odd, alpha(k) = 2^{-(2(n-j)+1)},
    i.e. c_m / 2^m with m = n - j the level where e_k first appeared as an odd point.
    """

    n: int

    @property
    def c(self) -> Fraction:
        return F(1, 2 ** (self.n + 1))

    @property
    def P(self) -> range:
        return range(2**self.n)

    def e(self, k: int) -> Fraction:
        return F(2 * k, 2 ** (self.n + 1))

    def o(self, k: int) -> Fraction:
        return F(2 * k + 1, 2 ** (self.n + 1))

    def E(self) -> list[Fraction]:
        return [self.e(k) for k in self.P]

    def O(self) -> list[Fraction]:
        return [self.o(k) for k in self.P]

    def S(self) -> list[Fraction]:
        return sorted(self.E() + self.O())

    def alpha(self, k: int) -> Fraction:
        """The recursive definition, unrolled along the trailing zeros of k."""
        if not 0 <= k < 2**self.n:
            raise IndexError(k)
        if k == 0:
            return F(1, 4)
        m = self.n - trailing_zeros(k)
        return F(1, 2 ** (m + 1)) / 2**m

    def alpha_recursive(self, k: int) -> Fraction:
        """Direct transcription of the recursion; used as an oracle for ``alpha``."""
        n = self.n
        while n > 0:
            if k % 2:
                return F(1, 2 ** (n + 1)) / 2**n
            k //= 2
            n -= 1
        return F(1, 4)

    def alpha_sum(self) -> Fraction:
        """sum_k alpha(k) in closed form, counting 2^{m-1} odd points per level m."""
        return F(1, 4) + sum((F(2 ** (m - 1), 2 ** (2 * m + 1)) for m in range(1, self.n + 1)), F(0))

    def _atoms(self) -> dict:
        zero = F(0)
        atoms = {}
        for k in self.P:
            a = self.alpha(k)
            atoms[(self.e(k), zero)] = a
            atoms[(self.o(k), zero)] = -a
        return atoms

    def nu(self) -> FinSuppMeasure:
        return FinSuppMeasure("unit_square", self._atoms(), _trusted=True)

    def nu_norm(self) -> Fraction:
        return 2 * self.alpha_sum()

    def measure(self) -> FinSuppMeasure:
        """nu_n + c_n delta_(0,0); (0,0) = e_0 already carries alpha(0) = 1/4."""
        atoms = self._atoms()
        origin = (F(0), F(0))
        atoms[origin] += self.c
        return FinSuppMeasure("unit_square", atoms, _trusted=True)


def gen_square(variant: int, alpha=0, enumeration: str = "calkin-wilf") -> MeasureSequence:
    """The four explicit JN-sequences on the unit square."""
    if variant not in (1, 2, 3, 4):
        raise PreconditionError(f"variant must be 1..4, got {variant!r}")
    alpha = as_fraction(alpha)
    if not 0 <= alpha < 1:
        raise PreconditionError(f"alpha must lie in [0, 1), got {alpha}")
    meta = {
        "name": f"square{variant}",
        "claimed_jn": True,
        "claimed_disjoint": False,
        "support_bound": {1: 6, 2: 2, 3: None, 4: None}[variant],
        "ground_truth": SQUARE_GROUND_TRUTH[variant],
        "provenance": [f"square{variant}"],
    }
    if variant == 1:
        producer = _square1
    elif variant == 2:
        enum = _enumeration(enumeration)
        meta["enumeration"] = enumeration
        meta["partition"] = "class of k = trailing zeros of k+1"
        producer = lambda k: _square2(enum, k)  # noqa: E731
    elif variant == 3:
        enum = _enumeration(enumeration)
        meta["enumeration"] = enumeration
        meta["alpha"] = frac_str(alpha)
        producer = lambda n: _square3(enum, alpha, n)  # noqa: E731
    else:
        producer = lambda n: Square4State(n).measure()  # noqa: E731
    return MeasureSequence("unit_square", producer, meta)


def thin_square2(seq: MeasureSequence | None = None) -> MeasureSequence:
    """Indices 2^n - 1 of the second generator: one pair per rational, supports disjoint."""
    seq = seq or gen_square(2)
    out = seq.subsequence(lambda n: 2**n - 1, "one index per partition class")
    out.meta.update(name="square2-thinned", claimed_disjoint=True)
    return out


# ---------------------------------------------------------------------------
# convergent-sequence space and small designed inputs
# ---------------------------------------------------------------------------

def gen_convergent(mode: str = "to_limit") -> MeasureSequence:
    """Pair sequences on {1/(n+1)} U {0}.

    to_limit: 1/2 (delta_{x_n} - delta_0) with x_n = 1/(n+1).
    paired:   1/2 (delta_{z_{2n}} - delta_{z_{2n+1}}) with z_m = 1/(m+1).
    quad:     1/4 (delta_{z_{4n}} - delta_{z_{4n+1}}) + 1/4 (delta_{z_{4n+2}} - delta_{z_{4n+3}}).
    """
    half = F(1, 2)
    if mode == "to_limit":
        producer = lambda n: make_measure([(conv_point(n), half), ((F(0),), -half)], "convergent_seq")  # noqa: E731
        disjoint, bound = False, 2
    elif mode == "paired":
        producer = lambda n: make_measure(  # noqa: E731
            [(conv_point(2 * n), half), (conv_point(2 * n + 1), -half)], "convergent_seq")
        disjoint, bound = True, 2
    elif mode == "quad":
        q = F(1, 4)
        producer = lambda n: make_measure(  # noqa: E731
            [(conv_point(4 * n + i), q if i % 2 == 0 else -q) for i in range(4)], "convergent_seq")
        disjoint, bound = True, 4
    else:
        raise PreconditionError(f"unknown mode {mode!r}; use to_limit, paired or quad")
    meta = {"name": f"conv-{mode}", "claimed_jn": True, "claimed_disjoint": disjoint,
            "support_bound": bound, "provenance": [f"conv-{mode}"]}
    return MeasureSequence("convergent_seq", producer, meta)


def gen_half_atom() -> MeasureSequence:
    """1/2 delta_0 + 1/2 delta_{1/(n+1)} on [0, 1]: bounded, not weak* null, norm-limit free."""

    def producer(n):
        return make_measure([((F(0),), F(1, 2)), ((F(1, n + 1),), F(1, 2))], "unit_interval")

    meta = {"name": "half-atom", "claimed_jn": False, "claimed_disjoint": False, "support_bound": 2,
            "provenance": ["half-atom"]}
    return MeasureSequence("unit_interval", producer, meta)


def gen_nat_pairs(x: Callable[[int], int], y: Callable[[int], int], name: str = "nat-pairs",
                  start: int = 0) -> MeasureSequence:
    """1/2 (delta_{x(n+start)} - delta_{y(n+start)}) on the naturals."""

    def producer(n):
        return make_measure([(x(n + start), F(1, 2)), (y(n + start), F(-1, 2))], "discrete_nat")

    meta = {"name": name, "claimed_jn": False, "support_bound": 2, "provenance": [name]}
    return MeasureSequence("discrete_nat", producer, meta)


GENERATORS = {
    "square1": lambda alpha: gen_square(1),
    "square2": lambda alpha: gen_square(2),
    "square3": lambda alpha: gen_square(3, alpha),
    "square4": lambda alpha: gen_square(4),
    "square2-thinned": lambda alpha: thin_square2(),
    "conv": lambda alpha: gen_convergent("to_limit"),
    "pairs": lambda alpha: gen_convergent("paired"),
    "quad": lambda alpha: gen_convergent("quad"),
    "half-atom": lambda alpha: gen_half_atom(),
}


def generator(name: str, alpha=0) -> MeasureSequence:
    try:
        return GENERATORS[name](alpha)
    except KeyError:
        raise PreconditionError(f"unknown generator {name!r}; known: {sorted(GENERATORS)}") from None


# ---------------------------------------------------------------------------
# JSON-lines files
# ---------------------------------------------------------------------------

def dump_lines(measures: Iterable[FinSuppMeasure], header: dict | None = None) -> str:
    lines = []
    if header is not None:
        lines.append(json.dumps({"header": header}, sort_keys=True, separators=(",", ":")))
    for mu in measures:
        lines.append(json.dumps(mu.to_json(), separators=(",", ":")))
    return "\n".join(lines) + "\n"


def atomic_write(path, text: str):
    """Write via a temporary file in the target directory and rename into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_sequence(seq: MeasureSequence | Sequence[FinSuppMeasure], path, N: int | None = None,
                  header: dict | None = None):
    if isinstance(seq, MeasureSequence):
        if N is None and seq.length is None:
            raise PreconditionError("saving an infinite sequence needs N")
        measures = seq.prefix(N if N is not None else seq.length)
    else:
        measures = list(seq)
    atomic_write(path, dump_lines(measures, header))


def parse_lines(lines: Iterable[str], source: str = "<input>") -> tuple[list[FinSuppMeasure], dict | None]:
    measures: list[FinSuppMeasure] = []
    header = None
    space = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{source}: invalid JSON ({exc.msg})", lineno) from None
        if isinstance(obj, dict) and "header" in obj and not measures and header is None:
            header = obj["header"]
            continue
        try:
            mu = FinSuppMeasure.from_json(obj)
        except (MeasureError, ParseError) as exc:
            raise ParseError(f"{source}: {exc}", lineno) from None
        if space is None:
            space = mu.space
        elif mu.space != space:
            raise ParseError(f"{source}: space {mu.space.id} differs from {space.id}", lineno)
        measures.append(mu)
    return measures, header


def load_sequence(path) -> MeasureSequence:
    with open(path, encoding="utf-8") as fh:
        measures, header = parse_lines(fh, os.fspath(path))
    if not measures:
        raise ParseError(f"{path}: no measures")
    meta = dict((header or {}).get("meta", {}))
    meta.setdefault("name", os.path.basename(os.fspath(path)))
    meta["provenance"] = list(meta.get("provenance", [])) + [f"file:{os.path.basename(os.fspath(path))}"]
    seq = MeasureSequence.from_measures(measures, meta)
    seq.header = header
    return seq
