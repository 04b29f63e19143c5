import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from jnseq.errors import MeasureError, PreconditionError
from jnseq.spaces import (Const, Coord, CorpusConfig, DistanceRamp, Indicator, Region, as_fraction,
                          corpus, dyadic_floor, exact_sqrt, frac_str, function_from_json, get_space,
                          min_combine, reparam, sqrt_upper, urysohn)

coords = st.fractions(min_value=0, max_value=1, max_denominator=64)


def test_as_fraction_parses_and_rejects():
    assert as_fraction("3/8") == F(3, 8)
    assert as_fraction(2) == 2
    with pytest.raises(ValueError):
        as_fraction("abc")
    assert frac_str(F(-3, 8)) == "-3/8"


def test_exact_sqrt_and_bounds():
    assert exact_sqrt(F(9, 16)) == F(3, 4)
    assert exact_sqrt(F(2)) is None
    assert sqrt_upper(F(2)) ** 2 >= 2
    assert sqrt_upper(F(2)) - F(math.isqrt(2 * 4**20), 2**20) < F(1, 2**19)
    assert dyadic_floor(F(3, 10)) == F(1, 4)


def test_space_registry_and_metrics():
    sq = get_space("unit_square")
    assert sq.sq_distance((F(0), F(0)), (F(3, 5), F(4, 5))) == 1
    assert sq.distance((F(0), F(0)), (F(3, 5), F(4, 5))) == 1
    nat = get_space("discrete_nat")
    assert nat.is_discrete and nat.distance(3, 3) == 0 and nat.distance(3, 4) == 1
    with pytest.raises(MeasureError):
        sq.normalize((F(1, 2),))
    with pytest.raises((KeyError, ValueError)):
        get_space("nowhere")


# -- p_{a,b} ------------------------------------------------------------------

def test_reparam_examples():
    t = Coord(0)
    f = reparam(0, 1, t)
    for q in (F(0), F(1, 3), F(1)):
        assert f((q,)) == q
    assert reparam(F(1, 2), 1, t)((F(1, 4),)) == 0
    assert reparam(F(1, 4), F(1, 2), t)((F(3, 8),)) == F(1, 2)
    with pytest.raises(PreconditionError):
        reparam(F(1, 2), F(1, 2), t)


@given(st.tuples(coords, coords).filter(lambda ab: ab[0] < ab[1]), coords)
def test_reparam_is_monotone_clamp(ab, x):
    a, b = ab
    f = reparam(a, b, Coord(0))
    v = f((x,))
    assert 0 <= v <= 1
    assert (v == 0) == (x <= a)
    assert (v == 1) == (x >= b)
    assert f.le((x,), v) and f.ge((x,), v)


# -- separators ---------------------------------------------------------------

def test_urysohn_interval_example():
    u = Region.ball_union("unit_interval", [((F(1, 2),), F(1, 10))])
    h = urysohn("unit_interval", [(F(1, 2),)], u)
    assert h((F(1, 2),)) == 0
    assert h((F(7, 10),)) == 1
    assert h((F(21, 40),)) == 0


def test_urysohn_empty_set_is_one():
    u = Region.ball_union("unit_interval", [((F(1, 2),), F(1, 10))])
    h = urysohn("unit_interval", [], u)
    assert all(h((q,)) == 1 for q in (F(0), F(1, 2), F(1)))


def test_urysohn_square_example():
    u = Region.ball_union("unit_square", [((0, 0), F(1, 4))])
    h = urysohn("unit_square", [(0, 0)], u)
    assert h((F(0), F(0))) == 0
    assert h((F(1), F(1))) == 1


def test_urysohn_rejects_points_outside():
    u = Region.ball_union("unit_interval", [((F(1, 2),), F(1, 10))])
    with pytest.raises(PreconditionError):
        urysohn("unit_interval", [(F(0),)], u)


@settings(max_examples=60)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=4, unique=True),
       st.fractions(min_value=F(1, 64), max_value=F(1, 4)), st.tuples(coords, coords))
def test_urysohn_zero_on_set_one_off_region(pts, r, x):
    u = Region.ball_union("unit_square", [(p, r) for p in pts])
    h = urysohn("unit_square", pts, u)
    for p in pts:
        assert h.is_zero(p)
    if x not in u:
        assert h(x) == 1
    assert 0 <= h(x) <= 1


def test_min_examples():
    f, one = Coord(0), Const(1)
    for q in (F(0), F(2, 7), F(1)):
        assert min_combine(f, f)((q,)) == f((q,))
        assert min_combine(f, one)((q,)) == f((q,))
    h1 = reparam(0, 1, Coord(0))
    h2 = reparam(0, 1, Coord(1))
    assert min_combine(h1, h2)((F(3, 10), F(7, 10))) == F(3, 10)


def test_region_membership_margin_and_disjointness():
    a = Region.ball_union("unit_square", [((0, 0), F(1, 4))])
    b = Region.ball_union("unit_square", [((1, 1), F(1, 4))])
    assert (F(0), F(0)) in a and (F(1, 4), F(0)) not in a
    assert a.margin((F(0), F(0))) == F(1, 4)
    assert a.disjoint_from(b)
    left = Region.box_union("unit_square", [((-1, -1), (F(1, 2), 2))])
    right = Region.box_union("unit_square", [((F(1, 2), -1), (2, 2))])
    assert left.disjoint_from(right)
    assert not left.disjoint_from(a)
    assert Region.from_json(a.to_json()).balls == a.balls


def test_function_json_round_trip():
    u = Region.ball_union("unit_square", [((F(1, 2), F(1, 2)), F(1, 8))])
    g = min_combine(urysohn("unit_square", [(F(1, 2), F(1, 2))], u), reparam(F(1, 4), F(3, 4), Coord(0)))
    g2 = function_from_json(g.to_json())
    for p in [(F(0), F(0)), (F(1, 2), F(1, 2)), (F(3, 5), F(1, 2)), (F(1), F(1, 3))]:
        assert g(p) == g2(p)


# -- corpus -------------------------------------------------------------------

def test_corpus_base_members_and_determinism():
    fs = corpus("unit_square", CorpusConfig(degree=1))
    descs = [f.to_json() for f in fs]
    assert {"op": "coord", "index": 0} in descs and {"op": "coord", "index": 1} in descs
    assert fs[0](( F(1, 3), F(1, 5))) == 1
    a = corpus("unit_square", CorpusConfig(seed=7))
    b = corpus("unit_square", CorpusConfig(seed=7))
    assert len(a) == 50
    assert [f.to_json() for f in a] == [f.to_json() for f in b]


def test_nat_corpus_is_indicators():
    fs = corpus("discrete_nat", CorpusConfig(count=12))
    assert len(fs) == 12
    assert all(isinstance(f, Indicator) for f in fs)
    assert all(f(n) in (0, 1) for f in fs for n in range(30))


@settings(max_examples=40)
@given(st.tuples(coords, coords), st.tuples(coords, coords))
def test_corpus_members_are_lipschitz(p, q):
    L = 8
    d = get_space("unit_square").distance(p, q)
    for f in corpus("unit_square"):
        assert abs(float(f(p)) - float(f(q))) <= L * float(d) + 1e-12


def test_distance_ramp_threshold_oracle():
    r = DistanceRamp("unit_square", [(F(0), F(0))], F(1, 2))
    p = (F(1, 10), F(1, 10))  # distance sqrt(2)/10, irrational
    assert isinstance(r(p), float)
    assert r.le(p, F(3, 10)) and not r.le(p, F(28, 100))
