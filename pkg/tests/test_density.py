import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from jnseq import density as D
from jnseq.errors import ParseError, PreconditionError
from jnseq.generators import gen_nat_pairs
from jnseq.measure import make_measure


def test_squares_count_and_density():
    assert D.Squares().count(10**6) == 1000
    v = D.density_profile(D.Squares(), 10**6)
    assert v.ratio == F(1, 1000)
    assert v.verdict == "in-Z"


def test_evens_not_in_algebra():
    v = D.density_profile(D.AP(0, 2), 10**5)
    assert v.ratio == F(1, 2)
    assert v.verdict == "oscillating"


def test_empty_and_all():
    assert D.density_profile(D.EMPTY, 1000).ratio == 0
    assert D.density_profile(D.EMPTY, 1000).verdict == "in-Z"
    assert D.density_profile(D.ALL, 1000).verdict == "in-coZ"


def test_factorials_and_sequences():
    f = D.Factorials()
    assert [n for n in range(130) if f.contains(n)] == [1, 2, 6, 24, 120]
    assert D.SeqImage("cubes").count(1000) == 10
    assert D.SeqImage("powers2").contains(1024)


def test_parser_and_printing():
    a = D.parse_set("squares & !ap(0,2)")
    assert a.contains(9) and not a.contains(4) and not a.contains(10)
    b = D.parse_set("(finite{1,2,3} | factorials) & !empty")
    assert [n for n in range(30) if b.contains(n)] == [1, 2, 3, 6, 24]
    assert D.parse_set(str(b)).count(500) == b.count(500)
    for bad in ("squares &", "ap(1,", "foo", "(squares", "squares squares"):
        with pytest.raises(ParseError):
            D.parse_set(bad)
    with pytest.raises(ParseError):
        D.parse_set("!" * 80 + "squares")


def test_clopen_integrate_examples():
    mu = make_measure([(4, F(1, 2)), (5, F(-1, 2))], "discrete_nat")
    assert D.clopen_integrate(mu, D.Squares()) == F(1, 2)
    assert D.clopen_integrate(mu, D.ALL) == 0
    assert D.clopen_integrate(mu, D.EMPTY) == 0
    with pytest.raises(PreconditionError):
        D.clopen_integrate(make_measure([((F(0),), 1)], "unit_interval"), D.ALL)


def test_witness_for_square_pairs():
    pairs = [(n * n, n * n + 1) for n in range(1, 10**4 + 1)]
    rep = D.obstruction_witness(pairs, 10**6)
    assert rep.found and rep.verdict == "refuted"
    assert str(rep.witness) == "squares"
    assert rep.values == [F(1, 2)] * 10**4
    assert rep.density.ratio == F(1, 1000)


def test_witness_for_even_pairs_uses_thinner_subfamily():
    pairs = [(2 * n, 2 * n + 1) for n in range(10**4)]
    rep = D.obstruction_witness(pairs, 10**6)
    labels = [t[0] for t in rep.tried]
    assert "all" in labels and "even-index" in labels
    assert rep.tried[0][2] != "in-Z"
    assert rep.found
    assert all(v == F(1, 2) for v in rep.values)
    assert rep.density.verdict == "in-Z"


def test_witness_preconditions():
    with pytest.raises(PreconditionError):
        D.obstruction_witness([(n, n) for n in range(5)], 100)
    with pytest.raises(PreconditionError):
        D.obstruction_witness([(1, 2), (2, 3)], 100)


def test_pair_sequence_generator_agrees_with_pair_measure():
    seq = gen_nat_pairs(lambda n: n * n, lambda n: n * n + 1, start=1)
    assert all(seq[k] == D.pair_measure((k + 1) ** 2, (k + 1) ** 2 + 1) for k in range(20))


# -- oracles and properties ---------------------------------------------------

ATOMS = [D.Squares(), D.Factorials(), D.AP(1, 3), D.AP(0, 2), D.Finite([0, 5, 7, 11, 100]),
         D.SeqImage("cubes"), D.AP(7, 0)]


def descriptors():
    leaf = st.sampled_from(ATOMS)
    return st.recursive(leaf, lambda c: st.one_of(
        c.map(lambda a: ~a), st.tuples(c, c).map(lambda t: t[0] & t[1]),
        st.tuples(c, c).map(lambda t: t[0] | t[1])), max_leaves=6)


@settings(max_examples=80, deadline=None)
@given(descriptors(), st.integers(min_value=0, max_value=3000))
def test_count_matches_brute_force(a, N):
    assert a.count(N) == D.brute_count(a, N)
    assert list(a.members(N)) == [n for n in range(N) if a.contains(n)]


@settings(max_examples=40, deadline=None)
@given(descriptors())
def test_round_trip_through_text(a):
    b = D.parse_set(str(a))
    assert [b.contains(n) for n in range(300)] == [a.contains(n) for n in range(300)]


@given(descriptors(), st.integers(min_value=0, max_value=500))
def test_boolean_laws(a, n):
    assert (~~a).contains(n) == a.contains(n)
    assert (a | ~a).contains(n)
    assert not (a & ~a).contains(n)


@given(st.sets(st.integers(min_value=0, max_value=400), max_size=30), st.integers(min_value=1, max_value=500))
def test_finite_count(xs, N):
    assert D.Finite(xs).count(N) == len([x for x in xs if x < N])


def test_large_counts_against_brute_force():
    for a in (D.Squares(), D.Factorials(), D.AP(3, 7), ~D.Squares() & D.AP(0, 3),
              D.SeqImage("powers2") | D.Squares()):
        assert a.count(10**5) == D.brute_count(a, 10**5)
    assert D.Squares().count(10**5) == math.isqrt(10**5 - 1) + 1


def test_clopen_integrate_matches_naive_sum():
    rng = random.Random(3)
    for _ in range(200):
        atoms = {rng.randrange(500): F(rng.randint(-9, 9) or 1, rng.randint(1, 9))
                 for _ in range(rng.randint(1, 20))}
        mu = make_measure(list(atoms.items()), "discrete_nat")
        a = rng.choice(ATOMS)
        assert D.clopen_integrate(mu, a) == sum((c for p, c in mu.items() if p in set(a.members(600))), F(0))
