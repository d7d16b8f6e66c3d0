import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_any_sbm
from graphpencil.errors import BudgetError, ParseError, ValidationError
from graphpencil.glyphs import (BistarGlyph, GlyphCombination, Rooting, birooted_density,
                                block_degrees, brute_force_density, brute_force_glyph,
                                eval_density, parse_glyph, two_hop_matrix)
from graphpencil.graph import SbmParams

B2 = Rooting.BIROOTED


def test_block_degrees_examples():
    assert np.allclose(block_degrees(SbmParams.erdos_renyi(0.3)), [0.3])
    assert np.allclose(block_degrees(SbmParams([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]])), [0.5, 0.5])
    assert np.allclose(block_degrees(SbmParams([0.3, 0.7], [[1, 0], [0, 0]])), [0.3, 0])


def test_two_hop_examples():
    assert np.allclose(two_hop_matrix(SbmParams.erdos_renyi(0.3)), [[0.09]])
    lam = two_hop_matrix(SbmParams([0.5, 0.5], [[0.8, 0.2], [0.2, 0.8]]))
    assert np.allclose(lam, [[0.34, 0.16], [0.16, 0.34]], atol=1e-15)
    assert not two_hop_matrix(SbmParams([0.2, 0.8], np.zeros((2, 2)))).any()


def test_counts_of_vertices_and_edges():
    g = BistarGlyph(2, 1, 3, True)
    assert g.vertex_count() == 8
    assert g.edge_count() == 8
    n, edges = g.structure()
    assert n == 8 and len(edges) == 8
    assert BistarGlyph.star(3) == BistarGlyph(2, 0, 0, True)
    assert BistarGlyph.star(0) == BistarGlyph()


def test_star_moment_example():
    # two equal blocks with degrees 0.2 and 0.8: <d^2> = (0.04 + 0.64) / 2
    pi, d = np.array([0.5, 0.5]), np.array([0.2, 0.8])
    assert pi @ d**2 == pytest.approx(0.34)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_star_density_is_degree_moment(rng, k):
    p = random_any_sbm(rng, k)
    d = block_degrees(p)
    for j in range(1, 6):
        assert eval_density(p, BistarGlyph.star(j)) == pytest.approx(p.pi @ d**j, abs=1e-14)


def test_er_density_is_power_of_edge_count():
    p = SbmParams.erdos_renyi(0.37)
    for l in range(3):
        for c in range(3):
            for r in range(3):
                for e in (False, True):
                    g = BistarGlyph(l, c, r, e)
                    assert eval_density(p, g) == pytest.approx(0.37 ** g.edge_count(), rel=1e-13)


def test_empty_glyph_has_density_one(rng):
    assert eval_density(random_any_sbm(rng, 3), BistarGlyph()) == pytest.approx(1.0)


def test_triangle_on_er():
    assert brute_force_glyph(SbmParams.erdos_renyi(0.4), BistarGlyph(0, 1, 0, True)) == \
        pytest.approx(0.4**3)


def test_single_edge_birooted_is_b(rng):
    p = random_any_sbm(rng, 3)
    edge = BistarGlyph(0, 0, 0, True, B2)
    assert np.array_equal(eval_density(p, edge), p.b)
    assert np.allclose(brute_force_glyph(p, edge), p.b, atol=1e-15)


def test_brute_force_root_order():
    p = SbmParams([0.5, 0.5], [[0.9, 0.1], [0.1, 0.5]])
    # path 0-1-2 rooted at (2, 0) is the transpose of rooting at (0, 2) with asymmetric pendant
    edges = [(0, 1), (1, 2), (2, 3)]
    a = brute_force_density(p, 4, edges, roots=(0, 2))
    b = brute_force_density(p, 4, edges, roots=(2, 0))
    assert np.allclose(a, b.T)
    assert not np.allclose(a, a.T)


def test_brute_force_budget():
    p = SbmParams(np.full(6, 1 / 6), np.full((6, 6), 0.5))
    with pytest.raises(BudgetError):
        brute_force_density(p, 3, [(0, 1)])
    with pytest.raises(BudgetError):
        brute_force_density(SbmParams.erdos_renyi(0.5), 11, [])


def test_oracle_equivalence_sample(rng):
    for _ in range(20):
        k = int(rng.integers(1, 5))
        p = random_any_sbm(rng, k)
        l, c, r = rng.multinomial(int(rng.integers(0, 5)), [1 / 3] * 3)
        g = BistarGlyph(int(l), int(c), int(r), bool(rng.integers(2)), list(Rooting)[rng.integers(3)])
        assert np.allclose(eval_density(p, g), brute_force_glyph(p, g), rtol=0, atol=1e-12)


def test_gluing_adds_tuples_and_multiplies_densities(rng):
    p = random_any_sbm(rng, 3)
    g1 = BistarGlyph(1, 0, 2, True, B2)
    g2 = BistarGlyph(0, 2, 1, False, B2)
    g = g1.glue(g2)
    assert g == BistarGlyph(1, 2, 3, True, B2)
    assert np.allclose(eval_density(p, g), eval_density(p, g1) * eval_density(p, g2))


def test_gluing_two_bridges_rejected():
    e = BistarGlyph(0, 0, 0, True, B2)
    with pytest.raises(ValidationError, match="parallel"):
        e.glue(e)
    with pytest.raises(ValidationError, match="birooted"):
        BistarGlyph(1).glue(e)


def test_unrooting_contracts_with_pi(rng):
    p = random_any_sbm(rng, 4)
    g = BistarGlyph(2, 1, 1, True, B2)
    mat = eval_density(p, g)
    assert np.allclose(eval_density(p, g.with_rooting(Rooting.LEFT)), mat @ p.pi)
    assert eval_density(p, g.with_rooting(Rooting.UNROOTED)) == pytest.approx(p.pi @ mat @ p.pi)


def test_birooted_mirror_symmetry(rng):
    p = random_any_sbm(rng, 3)
    g = BistarGlyph(3, 1, 0, False, B2)
    assert np.allclose(birooted_density(p, g), birooted_density(p, g.mirrored()).T)


def test_canonical_form():
    assert BistarGlyph(1, 0, 3).canonical() == BistarGlyph(3, 0, 1)
    assert BistarGlyph(1, 0, 3, rooting=B2).canonical() == BistarGlyph(1, 0, 3, rooting=B2)


@pytest.mark.parametrize("text, glyph", [
    ("L2 C1 E", BistarGlyph(2, 1, 0, True)),
    ("L^2 R", BistarGlyph(2, 0, 1)),
    ("e c3", BistarGlyph(0, 3, 0, True)),
    ("1", BistarGlyph()),
    ("", BistarGlyph()),
])
def test_parse_glyph(text, glyph):
    assert parse_glyph(text) == glyph


@pytest.mark.parametrize("text", ["L2 L1", "X", "E2", "L-1"])
def test_parse_glyph_errors(text):
    with pytest.raises(ParseError):
        parse_glyph(text)


def test_str_round_trips_through_parser():
    for g in [BistarGlyph(2, 1, 0, True), BistarGlyph(0, 0, 4), BistarGlyph()]:
        assert parse_glyph(str(g)) == g


def test_combination_gluing_expansion():
    lr = GlyphCombination([(1, BistarGlyph(1, 0, 0, rooting=B2)),
                           (1, BistarGlyph(0, 0, 1, rooting=B2))])
    sq = lr.glue(lr)
    expect = GlyphCombination([(1, BistarGlyph(2, 0, 0, rooting=B2)),
                               (2, BistarGlyph(1, 0, 1, rooting=B2)),
                               (1, BistarGlyph(0, 0, 2, rooting=B2))])
    assert sq == expect
    # unrooted, L^2 and R^2 merge
    assert sq.unrooted() == GlyphCombination([(2, BistarGlyph(2)), (2, BistarGlyph(1, 0, 1))])


def test_combination_density_is_linear(rng):
    p = random_any_sbm(rng, 3)
    a, b = BistarGlyph(1, 1, 0, rooting=B2), BistarGlyph(0, 0, 2, True, B2)
    comb = 2.5 * GlyphCombination.of(a) + GlyphCombination.of(b, -1.0)
    assert np.allclose(eval_density(p, comb), 2.5 * eval_density(p, a) - eval_density(p, b))
    with pytest.raises(ValidationError, match="mixes"):
        eval_density(p, GlyphCombination.of(a) + GlyphCombination.of(BistarGlyph(1)))


sbms = st.integers(1, 4).flatmap(lambda k: st.tuples(
    st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k),
    st.lists(st.floats(0.0, 1.0), min_size=k * k, max_size=k * k)))
glyphs = st.builds(BistarGlyph, st.integers(0, 3), st.integers(0, 2), st.integers(0, 3),
                   st.booleans(), st.sampled_from(list(Rooting)))


def _make(raw):
    w, u = raw
    k = len(w)
    pi = np.array(w) / np.sum(w)
    u = np.array(u).reshape(k, k)
    return SbmParams(pi / pi.sum(), np.triu(u) + np.triu(u, 1).T)


@settings(max_examples=60, deadline=None)
@given(sbms, glyphs)
def test_density_in_unit_interval(raw, g):
    val = np.asarray(eval_density(_make(raw), g))
    assert np.all(val >= -1e-15) and np.all(val <= 1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(sbms, glyphs, glyphs)
def test_gluing_homomorphism_property(raw, g1, g2):
    p = _make(raw)
    g1, g2 = g1.with_rooting(B2), g2.with_rooting(B2)
    if g1.bridge and g2.bridge:
        g2 = BistarGlyph(g2.left, g2.mid, g2.right, False, B2)
    assert np.allclose(eval_density(p, g1.glue(g2)),
                       eval_density(p, g1) * eval_density(p, g2), rtol=1e-12, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(sbms, glyphs)
def test_relabeling_invariance_of_unrooted(raw, g):
    p = _make(raw)
    perm = np.roll(np.arange(p.k), 1)
    g = g.with_rooting(Rooting.UNROOTED)
    assert eval_density(p, g) == pytest.approx(eval_density(p.permuted(perm), g), abs=1e-13)
