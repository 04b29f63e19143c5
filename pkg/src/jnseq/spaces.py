"""Ambient spaces, regions and evaluable test functions.

Four concrete spaces are provided:

``unit_interval``   [0, 1], points are 1-tuples of Fractions
``unit_square``     [0, 1]^2, points are 2-tuples of Fractions, Euclidean metric
``convergent_seq``  {1/(n+1): n >= 0} U {0} with the metric inherited from the line
``discrete_nat``    the natural numbers with the 0/1 metric, points are ints

Test functions are small expression trees (constants, coordinates, monomials,
piecewise-linear ridges, distance ramps, ``p_{a,b}`` clamps, pointwise minima,
clopen indicators).  Every node can be evaluated, carries a Lipschitz bound,
serializes to JSON, and answers threshold queries ``le``/``ge`` *exactly* even
where the numeric value involves a square root.  The exact queries are what the
discreteness certificates rely on; nothing is ever decided by a float compare.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

from .errors import MeasureError, ParseError, PreconditionError

Number = Fraction | float


# ---------------------------------------------------------------------------
# exact helpers
# ---------------------------------------------------------------------------

def as_fraction(x) -> Fraction:
    """Convert ints, Fractions, ``"p/q"`` strings and decimal strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise MeasureError(f"boolean is not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        # shortest repr is what a JSON writer meant
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise MeasureError(f"not a rational: {x!r}") from exc
    raise MeasureError(f"not a rational: {x!r}")


def frac_str(q: Fraction) -> str:
    return str(Fraction(q))


def exact_sqrt(q: Fraction) -> Fraction | None:
    """Square root of a nonnegative rational if it is rational, else None."""
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt_upper(q: Fraction, bits: int = 40) -> Fraction:
    """Rational upper bound of sqrt(q) within 2**-bits."""
    r = exact_sqrt(q)
    if r is not None:
        return r
    scale = 1 << bits
    # sqrt(q) * scale <= isqrt(floor(q * scale^2)) + 1
    return Fraction(math.isqrt(math.floor(q * scale * scale)) + 1, scale)


def dyadic_floor(q: Fraction) -> Fraction:
    """Largest power of two (possibly negative exponent) not exceeding q > 0."""
    if q <= 0:
        raise ValueError("dyadic_floor needs q > 0")
    e = q.numerator.bit_length() - q.denominator.bit_length()
    p = Fraction(2) ** e
    while p > q:
        p /= 2
    while p * 2 <= q:
        p *= 2
    return p


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Space:
    """A computable metric space with an exact carrier test."""

    id: str
    kind: str
    dim: int  # 0 for discrete spaces

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete_nat"

    def normalize(self, coords):
        """Canonical exact representation of a point; raises if outside the carrier."""
        if self.is_discrete:
            if isinstance(coords, (list, tuple)) and len(coords) == 1:
                coords = coords[0]
            if isinstance(coords, Fraction) and coords.denominator == 1:
                coords = int(coords)
            if isinstance(coords, str) and coords.strip().isdigit():
                coords = int(coords)
            if isinstance(coords, bool) or not isinstance(coords, int) or coords < 0:
                raise MeasureError(f"{coords!r} is not a point of {self.id}")
            return coords
        if not isinstance(coords, (list, tuple)):
            coords = (coords,)
        if len(coords) != self.dim:
            raise MeasureError(f"{coords!r} has wrong dimension for {self.id}")
        pt = tuple(as_fraction(c) for c in coords)
        for c in pt:
            if not 0 <= c <= 1:
                raise MeasureError(f"{pt} lies outside the carrier of {self.id}")
        if self.kind == "convergent_seq":
            x = pt[0]
            if x != 0 and x.numerator != 1:
                raise MeasureError(f"{x} is not of the form 1/(n+1) or 0")
        return pt

    def contains(self, coords) -> bool:
        try:
            self.normalize(coords)
        except MeasureError:
            return False
        return True

    def sq_distance(self, p, q) -> Fraction:
        """Exact squared distance."""
        if self.is_discrete:
            return Fraction(0 if p == q else 1)
        return sum(((a - b) ** 2 for a, b in zip(p, q)), Fraction(0))

    def distance(self, p, q) -> Number:
        """Distance; a Fraction whenever it is rational."""
        sq = self.sq_distance(p, q)
        r = exact_sqrt(sq)
        return r if r is not None else math.sqrt(sq)

    def point_to_json(self, p):
        if self.is_discrete:
            return p
        return [frac_str(c) for c in p]


SPACES: dict[str, Space] = {
    "unit_interval": Space("unit_interval", "unit_interval", 1),
    "unit_square": Space("unit_square", "unit_square", 2),
    "convergent_seq": Space("convergent_seq", "convergent_seq", 1),
    "discrete_nat": Space("discrete_nat", "discrete_nat", 0),
}


def get_space(space) -> Space:
    if isinstance(space, Space):
        return space
    try:
        return SPACES[space]
    except KeyError:
        raise MeasureError(f"unknown space {space!r}; known: {sorted(SPACES)}") from None


def conv_point(n: int) -> tuple:
    """The n-th point 1/(n+1) of the convergent sequence space."""
    return (Fraction(1, n + 1),)


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Finite union of open balls and open boxes, or a set descriptor on discrete spaces.

    Membership is exact: ball membership compares squared distances.
    """

    space: Space
    balls: tuple = ()  # ((center, radius), ...)
    boxes: tuple = ()  # ((lo, hi), ...) open axis-aligned boxes
    setdesc: Any = None

    def __post_init__(self):
        for _, r in self.balls:
            if r <= 0:
                raise PreconditionError("ball radii must be positive")

    @classmethod
    def ball_union(cls, space, balls) -> "Region":
        sp = get_space(space)
        return cls(sp, tuple((sp.normalize(c), as_fraction(r)) for c, r in balls))

    @classmethod
    def box_union(cls, space, boxes) -> "Region":
        sp = get_space(space)
        out = []
        for lo, hi in boxes:
            lo = tuple(as_fraction(v) for v in lo)
            hi = tuple(as_fraction(v) for v in hi)
            out.append((lo, hi))
        return cls(sp, boxes=tuple(out))

    @classmethod
    def from_set(cls, space, setdesc) -> "Region":
        return cls(get_space(space), setdesc=setdesc)

    def __contains__(self, p) -> bool:
        if self.setdesc is not None and self.setdesc.contains(p):
            return True
        sp = self.space
        for c, r in self.balls:
            if sp.sq_distance(p, c) < r * r:
                return True
        for lo, hi in self.boxes:
            if all(a < x < b for a, x, b in zip(lo, p, hi)):
                return True
        return False

    def margin(self, p) -> Fraction:
        """Rational lower bound of the distance from p to the complement; 0 if p is outside."""
        sp = self.space
        if sp.is_discrete:
            return Fraction(1) if p in self else Fraction(0)
        best = Fraction(0)
        for c, r in self.balls:
            sq = sp.sq_distance(p, c)
            if sq < r * r:
                best = max(best, r - sqrt_upper(sq))
        for lo, hi in self.boxes:
            if all(a < x < b for a, x, b in zip(lo, p, hi)):
                best = max(best, min(min(x - a, b - x) for a, x, b in zip(lo, p, hi)))
        return best

    def disjoint_from(self, other: "Region") -> bool:
        """Sufficient certificate of disjointness (ball separation, box separation)."""
        sp = self.space
        if self.setdesc is not None or other.setdesc is not None:
            raise PreconditionError("descriptor regions: use the density module for disjointness")
        for c1, r1 in self.balls:
            for c2, r2 in other.balls:
                if sp.sq_distance(c1, c2) < (r1 + r2) ** 2:
                    return False
        for lo1, hi1 in self.boxes:
            for lo2, hi2 in other.boxes:
                if all(max(a1, a2) < min(b1, b2) for a1, b1, a2, b2 in zip(lo1, hi1, lo2, hi2)):
                    return False
        for c, r in self.balls:
            for lo, hi in other.boxes:
                if _ball_meets_box(sp, c, r, lo, hi):
                    return False
        for c, r in other.balls:
            for lo, hi in self.boxes:
                if _ball_meets_box(sp, c, r, lo, hi):
                    return False
        return True

    def to_json(self):
        out = {"space": self.space.id}
        if self.balls:
            out["balls"] = [
                {"center": self.space.point_to_json(c), "radius": frac_str(r)} for c, r in self.balls
            ]
        if self.boxes:
            out["boxes"] = [
                {"lo": [frac_str(v) for v in lo], "hi": [frac_str(v) for v in hi]}
                for lo, hi in self.boxes
            ]
        if self.setdesc is not None:
            out["set"] = str(self.setdesc)
        return out

    @classmethod
    def from_json(cls, obj) -> "Region":
        sp = get_space(obj["space"])
        balls = tuple(
            (sp.normalize(b["center"]), as_fraction(b["radius"])) for b in obj.get("balls", ())
        )
        boxes = tuple(
            (tuple(map(as_fraction, b["lo"])), tuple(map(as_fraction, b["hi"])))
            for b in obj.get("boxes", ())
        )
        setdesc = None
        if "set" in obj:
            from .density import parse_set

            setdesc = parse_set(obj["set"])
        return cls(sp, balls, boxes, setdesc)


def _ball_meets_box(sp, c, r, lo, hi) -> bool:
    # closest point of the closed box to c
    sq = Fraction(0)
    for x, a, b in zip(c, lo, hi):
        if x < a:
            sq += (a - x) ** 2
        elif x > b:
            sq += (x - b) ** 2
    return sq < r * r


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

class TestFunction:
    """Evaluable function on a space with an exact threshold oracle.

    ``f(p)`` returns a Fraction when the value is rational and a float otherwise.
    ``le(p, t)`` / ``ge(p, t)`` decide ``f(p) <= t`` / ``f(p) >= t`` exactly.
    """

    __test__ = False  # keep pytest from collecting this class
    lipschitz: Fraction | None = None
    description: str = ""

    def __call__(self, p) -> Number:
        raise NotImplementedError

    def le(self, p, t) -> bool:
        v = self(p)
        if isinstance(v, float):
            raise NotImplementedError(f"{type(self).__name__} has no exact threshold test")
        return v <= t

    def ge(self, p, t) -> bool:
        v = self(p)
        if isinstance(v, float):
            raise NotImplementedError(f"{type(self).__name__} has no exact threshold test")
        return v >= t

    def lt(self, p, t) -> bool:
        return not self.ge(p, t)

    def gt(self, p, t) -> bool:
        return not self.le(p, t)

    def is_zero(self, p) -> bool:
        return self.le(p, 0) and self.ge(p, 0)

    def to_json(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.description}>"


class Const(TestFunction):
    def __init__(self, value):
        self.value = as_fraction(value)
        self.lipschitz = Fraction(0)
        self.description = f"const {self.value}"

    def __call__(self, p):
        return self.value

    def to_json(self):
        return {"op": "const", "value": frac_str(self.value)}


class Coord(TestFunction):
    def __init__(self, index: int):
        self.index = index
        self.lipschitz = Fraction(1)
        self.description = f"coord {index}"

    def __call__(self, p):
        return p[self.index]

    def to_json(self):
        return {"op": "coord", "index": self.index}


class Monomial(TestFunction):
    """scale * prod(x_i ** powers[i])."""

    def __init__(self, powers: Sequence[int], scale=1):
        self.powers = tuple(powers)
        self.scale = as_fraction(scale)
        # on the unit cube |grad| <= sum of powers
        self.lipschitz = abs(self.scale) * sum(self.powers)
        self.description = f"{self.scale}*x^{self.powers}"

    def __call__(self, p):
        v = self.scale
        for x, k in zip(p, self.powers):
            if k:
                v *= x**k
        return v

    def to_json(self):
        return {"op": "monomial", "powers": list(self.powers), "scale": frac_str(self.scale)}


class Ridge(TestFunction):
    """Piecewise-linear profile of t = <w, p> on a uniform grid of [0, 1].

    ``w`` has nonnegative entries summing to 1, so t stays in [0, 1] and
    |t(p) - t(q)| <= d(p, q).
    """

    def __init__(self, direction: Sequence, values: Sequence):
        self.direction = tuple(as_fraction(w) for w in direction)
        self.values = tuple(as_fraction(v) for v in values)
        if len(self.values) < 2:
            raise PreconditionError("a ridge needs at least two grid values")
        if any(w < 0 for w in self.direction) or sum(self.direction) != 1:
            raise PreconditionError("ridge direction must be a convex weight vector")
        m = len(self.values) - 1
        self.lipschitz = max(abs(b - a) for a, b in zip(self.values, self.values[1:])) * m
        self.description = f"ridge w={self.direction} m={m}"

    def __call__(self, p):
        t = sum((w * x for w, x in zip(self.direction, p)), Fraction(0))
        m = len(self.values) - 1
        j = min(int(t * m), m - 1)
        s = t * m - j
        return self.values[j] + (self.values[j + 1] - self.values[j]) * s

    def to_json(self):
        return {
            "op": "ridge",
            "direction": [frac_str(w) for w in self.direction],
            "values": [frac_str(v) for v in self.values],
        }


class DistanceRamp(TestFunction):
    """x -> min(1, dist(x, E) / delta) for a finite set E; identically 1 if E is empty."""

    def __init__(self, space, points: Iterable, delta):
        self.space = get_space(space)
        self.points = tuple(points)
        self.delta = as_fraction(delta) if delta is not None else None
        if self.points and (self.delta is None or self.delta <= 0):
            raise PreconditionError("distance ramp needs a positive scale")
        self.lipschitz = Fraction(0) if not self.points else 1 / self.delta
        self.description = f"ramp |E|={len(self.points)} delta={self.delta}"

    def _sqdist(self, p) -> Fraction:
        sp = self.space
        return min(sp.sq_distance(p, e) for e in self.points)

    def __call__(self, p):
        if not self.points:
            return Fraction(1)
        sq = self._sqdist(p)
        if sq >= self.delta**2:
            return Fraction(1)
        r = exact_sqrt(sq)
        if r is not None:
            return r / self.delta
        return math.sqrt(sq) / float(self.delta)

    def le(self, p, t):
        t = as_fraction(t)
        if t >= 1:
            return True
        if t < 0:
            return False
        if not self.points:
            return False
        return self._sqdist(p) <= (t * self.delta) ** 2

    def ge(self, p, t):
        t = as_fraction(t)
        if t <= 0:
            return True
        if t > 1:
            return False
        if not self.points:
            return True
        return self._sqdist(p) >= (t * self.delta) ** 2

    def to_json(self):
        return {
            "op": "ramp",
            "space": self.space.id,
            "points": [self.space.point_to_json(e) for e in self.points],
            "delta": None if self.delta is None else frac_str(self.delta),
        }


class Reparam(TestFunction):
    """p_{a,b} o f: 0 for t <= a, (t - a)/(b - a) on (a, b), 1 for t >= b."""

    def __init__(self, a, b, inner: TestFunction):
        a, b = as_fraction(a), as_fraction(b)
        if not a < b:
            raise PreconditionError(f"reparam needs a < b, got a={a}, b={b}")
        if not (0 <= a and b <= 1):
            raise PreconditionError(f"reparam needs 0 <= a < b <= 1, got a={a}, b={b}")
        self.a, self.b, self.inner = a, b, inner
        self.lipschitz = None if inner.lipschitz is None else inner.lipschitz / (b - a)
        self.description = f"p[{a},{b}]({inner.description})"

    def __call__(self, p):
        t = self.inner(p)
        if t <= self.a:
            return Fraction(0)
        if t >= self.b:
            return Fraction(1)
        if isinstance(t, float):
            return (t - float(self.a)) / float(self.b - self.a)
        return (t - self.a) / (self.b - self.a)

    def _pull(self, t):
        return self.a + t * (self.b - self.a)

    def le(self, p, t):
        t = as_fraction(t)
        if t < 0:
            return False
        if t >= 1:
            return True
        return self.inner.le(p, self._pull(t))

    def ge(self, p, t):
        t = as_fraction(t)
        if t <= 0:
            return True
        if t > 1:
            return False
        return self.inner.ge(p, self._pull(t))

    def to_json(self):
        return {"op": "reparam", "a": frac_str(self.a), "b": frac_str(self.b), "arg": self.inner.to_json()}


class Min(TestFunction):
    def __init__(self, f: TestFunction, g: TestFunction):
        self.f, self.g = f, g
        if f.lipschitz is None or g.lipschitz is None:
            self.lipschitz = None
        else:
            self.lipschitz = max(f.lipschitz, g.lipschitz)
        self.description = f"min({f.description}, {g.description})"

    def __call__(self, p):
        return min(self.f(p), self.g(p))

    def le(self, p, t):
        return self.f.le(p, t) or self.g.le(p, t)

    def ge(self, p, t):
        return self.f.ge(p, t) and self.g.ge(p, t)

    def to_json(self):
        return {"op": "min", "args": [self.f.to_json(), self.g.to_json()]}


class Indicator(TestFunction):
    """Characteristic function of a clopen set given by a set descriptor (discrete spaces)."""

    def __init__(self, setdesc):
        self.setdesc = setdesc
        self.lipschitz = Fraction(1)
        self.description = f"chi[{setdesc}]"

    def __call__(self, p):
        return Fraction(1) if self.setdesc.contains(p) else Fraction(0)

    def to_json(self):
        return {"op": "indicator", "set": str(self.setdesc)}


def function_from_json(obj) -> TestFunction:
    """Inverse of ``TestFunction.to_json``."""
    op = obj.get("op")
    if op == "const":
        return Const(obj["value"])
    if op == "coord":
        return Coord(obj["index"])
    if op == "monomial":
        return Monomial(obj["powers"], obj.get("scale", 1))
    if op == "ridge":
        return Ridge(obj["direction"], obj["values"])
    if op == "ramp":
        sp = get_space(obj["space"])
        return DistanceRamp(sp, [sp.normalize(e) for e in obj["points"]], obj["delta"])
    if op == "reparam":
        return Reparam(obj["a"], obj["b"], function_from_json(obj["arg"]))
    if op == "min":
        f, g = obj["args"]
        return Min(function_from_json(f), function_from_json(g))
    if op == "indicator":
        from .density import parse_set

        return Indicator(parse_set(obj["set"]))
    raise ParseError(f"unknown function node {op!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def reparam(a, b, f: TestFunction) -> TestFunction:
    """Compose f with the clamp p_{a,b}."""
    return Reparam(a, b, f)


def min_combine(f: TestFunction, g: TestFunction) -> TestFunction:
    return Min(f, g)


def urysohn(space, e: Iterable, u: Region) -> TestFunction:
    """Separator vanishing on a neighbourhood of the finite set ``e`` and equal to 1 off ``u``.

    Built as p_{1/2,1} o ramp where ramp(x) = min(1, dist(x, e)/delta) and delta is a
    rational lower bound of dist(e, complement of u).  The clamp forces a plateau of
    zeros of radius delta/2 around every point of e.
    """
    sp = get_space(space)
    pts = tuple(sp.normalize(x) for x in e)
    if not pts:
        return Reparam(Fraction(1, 2), 1, DistanceRamp(sp, (), None))
    margins = []
    for x in pts:
        m = u.margin(x)
        if m <= 0:
            raise PreconditionError(f"point {x} is not inside the region with positive margin")
        margins.append(m)
    return Reparam(Fraction(1, 2), 1, DistanceRamp(sp, pts, min(margins)))


@dataclass(frozen=True)
class CorpusConfig:
    lipschitz: Fraction = Fraction(8)
    count: int = 50
    seed: int = 0
    degree: int = 2

    @classmethod
    def from_json(cls, obj) -> "CorpusConfig":
        return cls(
            lipschitz=as_fraction(obj.get("lipschitz", 8)),
            count=int(obj.get("count", 50)),
            seed=int(obj.get("seed", 0)),
            degree=int(obj.get("degree", 2)),
        )

    def to_json(self):
        return {"lipschitz": frac_str(self.lipschitz), "count": self.count,
                "seed": self.seed, "degree": self.degree}


def _monomial_powers(dim: int, degree: int):
    if dim == 1:
        return [(d,) for d in range(2, degree + 1)]
    out = []
    for total in range(2, degree + 1):
        for a in range(total, -1, -1):
            out.append((a, total - a))
    return out


def corpus(space, config: CorpusConfig | None = None) -> list[TestFunction]:
    """Deterministic finite battery of test functions, every member L-Lipschitz.

    Members, in order: the constant 1, coordinate projections, monomials of total
    degree 2..degree, then seeded ridges and Urysohn bumps alternately until
    ``config.count`` is reached.  On ``discrete_nat`` the members are indicators of
    set descriptors.
    """
    sp = get_space(space)
    cfg = config or CorpusConfig()
    L = as_fraction(cfg.lipschitz)
    rng = random.Random(cfg.seed)
    if sp.is_discrete:
        return _nat_corpus(cfg, rng)

    base: list[TestFunction] = [Const(1)]
    base += [Coord(i) for i in range(sp.dim)]
    for powers in _monomial_powers(sp.dim, cfg.degree):
        d = sum(powers)
        base.append(Monomial(powers, 1 if d <= L else L / d))
    out = base[: cfg.count]

    directions = [(Fraction(1),)] if sp.dim == 1 else [
        (Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)), (Fraction(1, 2), Fraction(1, 2))]
    i = 0
    while len(out) < cfg.count:
        if i % 2 == 0:
            m = rng.choice((4, 8, 16))
            step = L / m  # max increment keeping slope <= L
            vals = [Fraction(rng.randint(-16, 16), 16)]
            for _ in range(m):
                inc = step * Fraction(rng.randint(-8, 8), 8)
                vals.append(max(Fraction(-1), min(Fraction(1), vals[-1] + inc)))
            out.append(Ridge(rng.choice(directions), vals))
        else:
            center = tuple(Fraction(rng.randint(0, 16), 16) for _ in range(sp.dim))
            delta = max(2 / L, Fraction(rng.randint(1, 8), 16))
            out.append(Reparam(Fraction(1, 2), 1, DistanceRamp(sp, (center,), delta)))
        i += 1
    for f in out:
        assert f.lipschitz is not None and f.lipschitz <= L, f
    return out


def _nat_corpus(cfg: CorpusConfig, rng: random.Random) -> list[TestFunction]:
    from . import density as D

    base = [D.ALL, D.Squares(), D.Factorials(), D.AP(0, 2), D.AP(1, 2)]
    out = [Indicator(s) for s in base][: cfg.count]
    while len(out) < cfg.count:
        kind = rng.randrange(3)
        if kind == 0:
            out.append(Indicator(D.AP(rng.randint(0, 20), rng.randint(1, 12))))
        elif kind == 1:
            out.append(Indicator(D.Finite(rng.sample(range(64), rng.randint(1, 6)))))
        else:
            out.append(Indicator(D.Complement(D.AP(rng.randint(0, 5), rng.randint(2, 6)))))
    return out
