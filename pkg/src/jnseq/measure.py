"""Finitely supported signed measures with exact rational coefficients."""

from __future__ import annotations

import json
import math
from fractions import Fraction
from types import MappingProxyType
from typing import Callable, Iterable, NamedTuple

from .errors import MeasureError, ParseError
from .spaces import Region, Space, TestFunction, as_fraction, frac_str, get_space


class Point(NamedTuple):
    """A point tagged with its space.  Measures store bare coordinates internally."""

    space: str
    coords: object


class FinSuppMeasure:
    """sum_x alpha_x * delta_x with finitely many nonzero rational alpha_x.

    Instances are immutable.  Atoms are kept sorted by point so that iteration
    and serialization are deterministic.
    """

    __slots__ = ("space", "_atoms", "_hash")

    def __init__(self, space, atoms: dict | None = None, *, _trusted=False):
        self.space: Space = get_space(space)
        atoms = atoms or {}
        if not _trusted:
            clean = {}
            for p, c in atoms.items():
                p = self.space.normalize(p)
                c = as_fraction(c)
                if c == 0:
                    raise MeasureError(f"zero coefficient at {p}")
                clean[p] = c
            atoms = clean
        self._atoms = dict(sorted(atoms.items()))
        self._hash = None

    # -- mapping-like access -------------------------------------------------
    @property
    def atoms(self):
        return MappingProxyType(self._atoms)

    def items(self):
        return self._atoms.items()

    def support(self) -> tuple:
        return tuple(self._atoms)

    def __len__(self):
        return len(self._atoms)

    def __call__(self, point) -> Fraction:
        """mu({x})."""
        return self._atoms.get(point, Fraction(0))

    def __bool__(self):
        return bool(self._atoms)

    # -- arithmetic -------------------------------------------------------------
    def norm(self) -> Fraction:
        return total_variation(self)

    def __add__(self, other):
        return linear_combine([(1, self), (1, other)])

    def __sub__(self, other):
        return linear_combine([(1, self), (-1, other)])

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "FinSuppMeasure":
        c = as_fraction(c)
        if c == 0:
            return zero(self.space)
        return FinSuppMeasure(self.space, {p: c * a for p, a in self._atoms.items()}, _trusted=True)

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, FinSuppMeasure):
            return NotImplemented
        return self.space == other.space and self._atoms == other._atoms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.space.id, tuple(self._atoms.items())))
        return self._hash

    def __repr__(self):
        body = " + ".join(f"{c}*d{p}" for p, c in self._atoms.items()) or "0"
        return f"FinSuppMeasure[{self.space.id}]({body})"

    # -- serialization ----------------------------------------------------------
    def to_json(self) -> dict:
        sp = self.space
        return {
            "space": sp.id,
            "atoms": [{"point": sp.point_to_json(p), "coeff": frac_str(c)} for p, c in self._atoms.items()],
        }

    @classmethod
    def from_json(cls, obj) -> "FinSuppMeasure":
        try:
            sp = get_space(obj["space"])
            atoms = {}
            for a in obj["atoms"]:
                p = sp.normalize(a["point"])
                if not isinstance(a["coeff"], (str, int)) or isinstance(a["coeff"], bool):
                    raise MeasureError(f"coefficient must be a fraction string: {a['coeff']!r}")
                c = as_fraction(a["coeff"])
                if c == 0:
                    raise MeasureError(f"zero coefficient at {p}")
                if p in atoms:
                    raise MeasureError(f"duplicate point {p}")
                atoms[p] = c
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure encoding: {exc}") from exc
        return cls(sp, atoms, _trusted=True)


def zero(space) -> FinSuppMeasure:
    return FinSuppMeasure(space, {}, _trusted=True)


def dirac(space, point, coeff=1) -> FinSuppMeasure:
    return make_measure([(point, coeff)], space)


def make_measure(entries: Iterable, space=None) -> FinSuppMeasure:
    """Build a measure from ``(point, coefficient)`` pairs.

    Points may be bare coordinates (``space`` required) or ``Point`` tuples.
    Duplicate points are summed and exact zeros dropped.
    """
    sid = None if space is None else get_space(space).id
    acc: dict = {}
    pending = []
    for point, coeff in entries:
        if isinstance(point, Point):
            if sid is None:
                sid = point.space
            elif point.space != sid:
                raise MeasureError(f"mixed spaces: {sid!r} and {point.space!r}")
            point = point.coords
        pending.append((point, coeff))
    if sid is None:
        if pending:
            raise MeasureError("space must be given for untagged points")
        raise MeasureError("space must be given for the empty measure")
    sp = get_space(sid)
    for point, coeff in pending:
        p = sp.normalize(point)
        acc[p] = acc.get(p, Fraction(0)) + as_fraction(coeff)
    return FinSuppMeasure(sp, {p: c for p, c in acc.items() if c != 0}, _trusted=True)


def total_variation(mu: FinSuppMeasure) -> Fraction:
    return sum((abs(c) for _, c in mu.items()), Fraction(0))


def signed_mass(mu: FinSuppMeasure) -> Fraction:
    """mu(1_X)."""
    return sum((c for _, c in mu.items()), Fraction(0))


def restrict(mu: FinSuppMeasure, r) -> FinSuppMeasure:
    """Keep the atoms whose points lie in ``r``.

    ``r`` may be a Region, any container of points, or a predicate.
    """
    if isinstance(r, Region):
        keep = r.__contains__
    elif callable(r) and not hasattr(r, "__contains__"):
        keep = r
    else:
        pts = r if isinstance(r, (set, frozenset, dict)) else set(r)
        keep = pts.__contains__
    return FinSuppMeasure(mu.space, {p: c for p, c in mu.items() if keep(p)}, _trusted=True)


def integrate(mu: FinSuppMeasure, f: Callable) -> Fraction | float:
    """sum_x alpha_x f(x).

    Exact when every f(x) is rational.  If some value is a float the sum is taken
    with ``math.fsum`` over float(alpha_x) * f(x); see ``integration_error_bound``.
    """
    vals = [(c, f(p)) for p, c in mu.items()]
    if all(not isinstance(v, float) for _, v in vals):
        return sum((c * v for c, v in vals), Fraction(0))
    return math.fsum(float(c) * float(v) for c, v in vals)


def integration_error_bound(mu: FinSuppMeasure, f: Callable) -> float:
    """A posteriori bound on the rounding error of a float-mode ``integrate``.

    Each product float(alpha)*f(x) carries at most 3 unit roundoffs (coefficient
    conversion, value, product) and fsum is correctly rounded.
    """
    u = 2.0**-53
    terms = [abs(float(c) * float(f(p))) for p, c in mu.items()]
    return 4 * u * math.fsum(terms)


class SignedParts(NamedTuple):
    positive: FinSuppMeasure
    negative: FinSuppMeasure


def pos_neg_split(mu: FinSuppMeasure) -> SignedParts:
    pos = {p: c for p, c in mu.items() if c > 0}
    neg = {p: c for p, c in mu.items() if c < 0}
    return SignedParts(FinSuppMeasure(mu.space, pos, _trusted=True), FinSuppMeasure(mu.space, neg, _trusted=True))


def linear_combine(terms: Iterable) -> FinSuppMeasure:
    """sum_i c_i * mu_i for ``(c_i, mu_i)`` pairs on one space; zeros purged."""
    terms = list(terms)
    if not terms:
        raise MeasureError("linear_combine needs at least one term to know the space")
    sp = terms[0][1].space
    acc: dict = {}
    for c, mu in terms:
        if mu.space != sp:
            raise MeasureError(f"mixed spaces: {sp.id!r} and {mu.space.id!r}")
        c = as_fraction(c)
        if c == 0:
            continue
        for p, a in mu.items():
            acc[p] = acc.get(p, Fraction(0)) + c * a
    return FinSuppMeasure(sp, {p: a for p, a in acc.items() if a != 0}, _trusted=True)


def normalize(mu: FinSuppMeasure) -> FinSuppMeasure:
    """mu / ||mu||."""
    n = total_variation(mu)
    if n == 0:
        raise MeasureError("cannot normalize the zero measure")
    return mu.scale(1 / n)


def dumps(mu: FinSuppMeasure) -> str:
    return json.dumps(mu.to_json(), separators=(",", ":"))


def loads(text: str) -> FinSuppMeasure:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}") from exc
    return FinSuppMeasure.from_json(obj)
