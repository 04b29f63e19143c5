import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from jnseq.errors import MeasureError, ParseError, PreconditionError
from jnseq.generators import (RationalEnumeration, Square4State, dump_lines, gen_convergent,
                              gen_half_atom, gen_nat_pairs, gen_square, generator, load_sequence,
                              parse_lines, save_sequence, thin_square2, trailing_zeros, GENERATORS)
from jnseq.measure import make_measure, restrict, signed_mass, total_variation


def sq(x, y=0):
    return (F(x), F(y))


def test_square1_odd_member():
    mu = gen_square(1)[1]
    assert len(mu) == 6
    assert sorted(mu.atoms.values()) == sorted([F(1, 4), F(-1, 4), F(1, 8), F(-1, 8), F(1, 8), F(-1, 8)])
    assert mu(sq(1, F(1, 2))) == F(-1, 8)


def test_square1_even_member_matches_formula():
    n = 4
    mu = gen_square(1)[n]
    h = F(1, n + 1)
    expected = make_measure([(sq(0), F(1, 4)), (sq(0, h), F(-1, 4)),
                             (sq(F(1, 2)), F(1, 4)), (sq(F(1, 2), h), F(-1, 4))], "unit_square")
    assert mu == expected


def test_square4_first_member():
    mu = gen_square(4)[0]
    assert mu == make_measure([(sq(0), F(3, 4)), (sq(F(1, 2)), F(-1, 4))], "unit_square")
    assert total_variation(mu) == 1


def test_square4_nu_norm_example():
    assert Square4State(2).nu_norm() == F(7, 8)
    assert total_variation(Square4State(2).nu()) == F(7, 8)


@pytest.mark.parametrize("n", range(0, 9))
def test_square4_closed_form_matches_recursion(n):
    st4 = Square4State(n)
    assert [st4.alpha(k) for k in st4.P] == [st4.alpha_recursive(k) for k in st4.P]
    assert sum(st4.alpha(k) for k in st4.P) == st4.alpha_sum()
    assert len(st4.S()) == 2 ** (n + 1)


def test_square3_mass_on_enumerated_points():
    seq = gen_square(3)
    enum = RationalEnumeration("calkin-wilf")
    n = 7
    mu = seq[n]
    for k in range(n + 1):
        assert mu(sq(enum[k])) == F(1, 2 ** (k + 2))


def test_square3_alpha_parameter():
    mu = gen_square(3, F(1, 4))[5]
    assert total_variation(mu) == 1
    with pytest.raises(PreconditionError):
        gen_square(3, 1)


def test_unknown_variant_rejected():
    with pytest.raises(PreconditionError):
        gen_square(5)
    with pytest.raises(PreconditionError):
        generator("nope")


def test_square2_partition_and_thinning():
    enum = RationalEnumeration("calkin-wilf")
    s2 = gen_square(2)
    for k in range(40):
        mu = s2[k]
        q = enum[trailing_zeros(k + 1)]
        assert mu == make_measure([(sq(q), F(1, 2)), (sq(q, F(1, k + 1)), F(-1, 2))], "unit_square")
    t = thin_square2()
    pts = [p for n in range(12) for p in t[n].support()]
    assert len(pts) == len(set(pts))


def test_rational_enumerations_are_injective():
    for name in ("calkin-wilf", "denominator"):
        e = RationalEnumeration(name)
        vals = [e[k] for k in range(300)]
        assert len(set(vals)) == 300
        assert all(0 <= v <= 1 for v in vals)


def test_convergent_modes():
    c = gen_convergent("to_limit")
    assert c[3] == make_measure([((F(1, 4),), F(1, 2)), ((F(0),), F(-1, 2))], "convergent_seq")
    p = gen_convergent("paired")
    assert p[0] == make_measure([((F(1),), F(1, 2)), ((F(1, 2),), F(-1, 2))], "convergent_seq")
    pts = [x for n in range(100) for x in p[n].support()]
    assert len(pts) == len(set(pts))
    q = gen_convergent("quad")
    assert all(len(q[n]) == 4 and total_variation(q[n]) == 1 for n in range(20))
    with pytest.raises(PreconditionError):
        gen_convergent("bogus")


def test_half_atom_and_nat_pairs():
    h = gen_half_atom()
    assert signed_mass(h[3]) == 1 and not h.meta["claimed_jn"]
    nat = gen_nat_pairs(lambda n: n * n, lambda n: n * n + 1, start=1)
    assert nat[0] == make_measure([(1, F(1, 2)), (2, F(-1, 2))], "discrete_nat")


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_every_generator_has_unit_norms(name):
    seq = generator(name)
    N = 10 if name == "square4" else 60
    expected = 1
    assert all(total_variation(seq[n]) == expected for n in range(N))


def test_subsequence_meta_and_indexing():
    s = gen_square(1).subsequence([0, 2, 4], "evens")
    assert len(s) == 3 and s[1] == gen_square(1)[2]
    assert s.meta["indices"] == [0, 2, 4]
    assert "ground_truth" not in s.meta
    with pytest.raises(IndexError):
        s[3]


# -- JSON lines ---------------------------------------------------------------

def test_round_trip_square1(tmp_path):
    path = tmp_path / "s1.jsonl"
    save_sequence(gen_square(1), path, N=101, header={"meta": {"name": "square1"}})
    back = load_sequence(path)
    assert len(back) == 101
    assert all(back[n] == gen_square(1)[n] for n in range(101))
    assert back.meta["name"] == "square1"
    with pytest.raises(IndexError):
        back[101]


def test_three_line_file(tmp_path):
    path = tmp_path / "three.jsonl"
    path.write_text(dump_lines(gen_convergent("paired").prefix(3)))
    seq = load_sequence(path)
    assert len(seq) == 3 and seq[2] == gen_convergent("paired")[2]


def test_malformed_lines_report_line_numbers():
    good = json.dumps(gen_square(1)[0].to_json())
    bad_coeff = '{"space": "unit_square", "atoms": [{"point": ["0", "0"], "coeff": "0/1"}]}'
    with pytest.raises((ParseError, MeasureError)) as exc:
        parse_lines([good, bad_coeff])
    assert "line 2" in str(exc.value)
    with pytest.raises(ParseError) as exc:
        parse_lines([good, "{oops"])
    assert "line 2" in str(exc.value)
    other = json.dumps(gen_convergent()[0].to_json())
    with pytest.raises(ParseError) as exc:
        parse_lines([good, other])
    assert "line 2" in str(exc.value)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["square1", "square2", "square3", "conv", "pairs", "quad"]),
       st.integers(min_value=0, max_value=80))
def test_members_are_deterministic(name, n):
    assert generator(name)[n] == generator(name)[n]
    mu = generator(name)[n]
    assert restrict(mu, set(mu.support())) == mu


@pytest.mark.parametrize("n", [0, 1, 3, 6])
def test_fast_constructions_match_make_measure(n):
    st4 = Square4State(n)
    entries = [((st4.e(k), 0), st4.alpha(k)) for k in st4.P] + [((st4.o(k), 0), -st4.alpha(k)) for k in st4.P]
    assert st4.measure() == make_measure(entries + [((0, 0), st4.c)], "unit_square")
    enum = RationalEnumeration()
    h = F(1, n + 1)
    entries = []
    for k in range(n + 1):
        c = F(1, 2 ** (k + 2))
        entries += [((enum[k], 0), c), ((enum[k], h), -c)]
    c = F(1, 2 ** (n + 2))
    entries += [((0, 1 - F(1, n + 1)), c), ((0, 1 - F(1, n + 2)), -c)]
    assert gen_square(3)[n] == make_measure(entries, "unit_square")
