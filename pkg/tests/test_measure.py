from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from jnseq.errors import MeasureError, ParseError
from jnseq.measure import (FinSuppMeasure, Point, dirac, dumps, integrate, integration_error_bound,
                           linear_combine, loads, make_measure, normalize, pos_neg_split, restrict,
                           signed_mass, total_variation, zero)
from jnseq.spaces import Coord, Const, Region

MU1_0 = [((0, 0), F(1, 4)), ((0, 1), F(-1, 4)), ((F(1, 2), 0), F(1, 4)), ((F(1, 2), 1), F(-1, 4))]


def mu1_0():
    return make_measure(MU1_0, "unit_square")


# -- construction -------------------------------------------------------------

def test_make_measure_four_atoms():
    mu = mu1_0()
    assert len(mu) == 4
    assert mu((F(0), F(1))) == F(-1, 4)


def test_empty_and_cancellation_give_zero():
    assert len(make_measure([], "unit_square")) == 0
    assert make_measure([((0, 0), F(1, 2)), ((0, 0), F(-1, 2))], "unit_square") == zero("unit_square")


def test_tagged_points_and_mixed_spaces():
    mu = make_measure([(Point("unit_interval", (F(1, 3),)), 1)])
    assert mu.space.id == "unit_interval"
    with pytest.raises(MeasureError):
        make_measure([(Point("unit_interval", (0,)), 1), (Point("unit_square", (0, 0)), 1)])
    with pytest.raises(MeasureError):
        make_measure([((0,), 1)])


def test_point_outside_carrier_rejected():
    with pytest.raises(MeasureError):
        make_measure([((2, 0), 1)], "unit_square")
    with pytest.raises(MeasureError):
        make_measure([((F(2, 3),), 1)], "convergent_seq")
    with pytest.raises(MeasureError):
        make_measure([(-1, 1)], "discrete_nat")


def test_zero_coefficient_rejected_on_direct_construction():
    with pytest.raises(MeasureError):
        FinSuppMeasure("unit_interval", {(F(0),): F(0)})


def test_mixed_space_arithmetic_rejected():
    with pytest.raises(MeasureError):
        dirac("unit_interval", (0,)) + dirac("convergent_seq", (0,))


# -- norms and integrals ------------------------------------------------------

def test_total_variation_examples():
    assert total_variation(mu1_0()) == 1
    assert total_variation(zero("unit_square")) == 0


def test_restrict_examples():
    mu = mu1_0()
    r = restrict(mu, {(F(0), F(0)), (F(1, 2), F(0))})
    assert r == make_measure([((0, 0), F(1, 4)), ((F(1, 2), 0), F(1, 4))], "unit_square")
    assert restrict(mu, lambda p: True) == mu
    assert restrict(mu, set()) == zero("unit_square")
    strip = Region.box_union("unit_square", [((-1, -1), (F(1, 4), 2))])
    assert restrict(mu, strip).support() == ((F(0), F(0)), (F(0), F(1)))


def test_integrate_examples():
    mu = mu1_0()
    assert integrate(mu, Coord(1)) == F(-1, 2)
    assert integrate(mu, Const(1)) == signed_mass(mu) == 0
    # a two-atom member of the second family: 1/2 (delta_(q,0) - delta_(q,1/(k+1)))
    k = 6
    nu = make_measure([((F(1, 3), 0), F(1, 2)), ((F(1, 3), F(1, k + 1)), F(-1, 2))], "unit_square")
    assert integrate(nu, Coord(1)) == F(-1, 2 * (k + 1))


def test_float_integration_and_error_bound():
    mu = mu1_0()
    v = integrate(mu, lambda p: float(p[1]) * 0.1)
    assert isinstance(v, float)
    assert abs(v - (-0.05)) <= integration_error_bound(mu, lambda p: float(p[1]) * 0.1) + 1e-18


def test_pos_neg_split_examples():
    pos, neg = pos_neg_split(mu1_0())
    assert set(pos.support()) == {(F(0), F(0)), (F(1, 2), F(0))}
    assert set(neg.support()) == {(F(0), F(1)), (F(1, 2), F(1))}
    p2, n2 = pos_neg_split(dirac("unit_interval", (0,)))
    assert n2 == zero("unit_interval")
    p3, n3 = pos_neg_split(zero("unit_interval"))
    assert p3 == n3 == zero("unit_interval")


def test_linear_combination_examples():
    mu = mu1_0()
    assert linear_combine([(1, mu), (-1, mu)]) == zero("unit_square")
    a, b = (F(0),), (F(1),)
    nu = dirac("unit_interval", a, F(1, 2)) + dirac("unit_interval", b, F(-1, 2))
    assert total_variation(nu) == 1
    lam = make_measure([(a, F(3, 8)), (b, F(-1, 8))], "unit_interval")
    assert normalize(lam) == make_measure([(a, F(3, 4)), (b, F(-1, 4))], "unit_interval")
    with pytest.raises(MeasureError):
        normalize(zero("unit_interval"))


def test_json_round_trip_and_errors():
    mu = mu1_0()
    assert loads(dumps(mu)) == mu
    with pytest.raises(ParseError):
        loads("{not json")
    with pytest.raises(MeasureError):
        loads('{"space": "unit_interval", "atoms": [{"point": ["1/2"], "coeff": "0/1"}]}')
    with pytest.raises(MeasureError):
        loads('{"space": "unit_interval", "atoms": [{"point": ["1/2"], "coeff": 0.5}]}')
    with pytest.raises(MeasureError):
        loads('{"space": "unit_interval", "atoms": [{"point": ["1/2"], "coeff": "1"},'
              ' {"point": ["1/2"], "coeff": "1"}]}')


# -- properties ---------------------------------------------------------------

fracs = st.fractions(min_value=-4, max_value=4, max_denominator=64).filter(lambda q: q != 0)
coords = st.fractions(min_value=0, max_value=1, max_denominator=32)


@st.composite
def measures(draw, max_atoms=8):
    pts = draw(st.lists(st.tuples(coords, coords), min_size=0, max_size=max_atoms, unique=True))
    cs = draw(st.lists(fracs, min_size=len(pts), max_size=len(pts)))
    return make_measure(list(zip(pts, cs)), "unit_square")


@given(measures(), measures())
def test_norm_is_subadditive_and_cancels(mu, nu):
    assert total_variation(mu + nu) <= total_variation(mu) + total_variation(nu)
    assert total_variation(mu - mu) == 0


@given(measures(), fracs)
def test_norm_is_homogeneous(mu, c):
    assert total_variation(mu.scale(c)) == abs(c) * total_variation(mu)


@given(measures())
def test_split_reconstructs_and_identity_holds(mu):
    pos, neg = pos_neg_split(mu)
    assert pos + neg == mu
    assert not set(pos.support()) & set(neg.support())
    assert total_variation(pos) == (total_variation(mu) + signed_mass(mu)) / 2


@given(measures(), st.lists(st.tuples(coords, coords), max_size=6))
def test_restriction_never_increases_norm(mu, pts):
    assert total_variation(restrict(mu, set(pts))) <= total_variation(mu)


@given(measures(), measures(), fracs)
def test_integration_is_linear(mu, nu, c):
    f = Coord(0)
    assert integrate(mu.scale(c) + nu, f) == c * integrate(mu, f) + integrate(nu, f)


@settings(max_examples=50)
@given(measures())
def test_serialization_round_trip(mu):
    assert loads(dumps(mu)) == mu
