import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgraph.errors import ParameterError
from qgraph.graph import GraphParameters, builtin_graph
from qgraph.oracles import (closed_form, cross_condition, dense_scan_roots, grid_newton_roots, loop_condition,
                            special_cross_condition, tgraph_condition)
from qgraph.secular import Open, secular_values
from qgraph.validation import check_cutoff_roots, check_resonances, random_params

P = GraphParameters


@pytest.mark.parametrize("family", ["loop", "cross", "tgraph"])
def test_formal_substitution_reproduces_resonance_form(family):
    p = random_params(family, np.random.default_rng(3))
    k = np.linspace(0.3, 11.0, 37) - 0.2j
    res = closed_form(family, p, "resonance")(k)
    sub = closed_form(family, p, "cutoff", L=1.0, lead_factor=1j)(k)
    assert np.max(np.abs(res - sub)) < 1e-12 * max(1.0, np.max(np.abs(res)))


def test_special_cross_substitution_does_not_hold():
    p = P(l1=0.8, l2=1.1)
    k = np.linspace(0.3, 5.0, 11) - 0.1j
    res = special_cross_condition(p, "resonance")(k)
    sub = special_cross_condition(p, "cutoff", L=1.0, lead_factor=1j)(k)
    assert np.max(np.abs(res - sub)) > 1e-3


def test_decoupled_loop_variants_coincide():
    p = P(l=1.0, lam=0.3, alpha1_inv=0.4, alpha2_inv=-0.2, alpha1_tilde_inv=0.7)
    k = np.linspace(0.5, 8.0, 20)
    assert np.allclose(loop_condition(p, "resonance")(k), loop_condition(p, "cutoff", L=1.3)(k))


def test_symmetric_loop_roots():
    # with decoupled vertices the condition is sin^2 kl: double roots at m pi / l
    f = loop_condition(P(l=1.3, lam=0.0), "resonance")
    roots = np.pi * np.arange(1, 4) / 1.3
    assert np.max(np.abs(f(roots))) < 1e-12
    k = np.linspace(0.1, 10.0, 997)
    assert np.allclose(f(k), np.sin(1.3 * k) ** 2)


@pytest.mark.parametrize("variant,L", [("resonance", None), ("cutoff", 1.3)])
def test_cross_reductions(variant, L):
    k = np.arange(1, 7) * np.pi / 2
    assert np.max(np.abs(cross_condition(P(lam=1.0), variant, L=L)(k))) < 1e-12
    k0 = np.arange(1, 4) * np.pi
    assert np.max(np.abs(cross_condition(P(lam=0.0), variant, L=L)(k0))) < 1e-12


def test_tgraph_zero_coupling_form():
    p = P(l1=1.0, l2=1.0, alpha=0.0)
    k = np.linspace(0.4, 6.0, 9)
    expected = -1j * np.sin(k) ** 2 + np.sin(2 * k)
    assert np.allclose(tgraph_condition(p)(k), expected)


def test_tgraph_rescaled_limit():
    p = P(l1=0.8, l2=1.7, alpha=1e8)
    f = tgraph_condition(p, rescaled=True)
    roots = dense_scan_roots(lambda x: f(x).real, 0.1, 8.0)
    expected = np.sort(np.concatenate([np.pi * np.arange(1, 3) / 0.8, np.pi * np.arange(1, 5) / 1.7]))
    expected = expected[expected < 8.0]
    assert np.allclose(roots, expected, atol=1e-9)
    # the Dirichlet-like limit of the full determinant sits next to these roots
    g = builtin_graph("tgraph", p)
    for r in expected:
        v, s = secular_values(g, np.array([r - 0.3e-7j]), Open(), with_scale=True)
        assert abs(v[0]) / s[0] < 1e-6


def test_special_cross_shared_factor():
    p = P(l1=1.0, l2=1.0)
    k = np.array([np.pi / 2, 3 * np.pi / 2])
    assert np.max(np.abs(special_cross_condition(p)(k))) < 1e-12


def test_special_cross_cutoff_vanishes_on_cot_zero_lines():
    p = P(l1=0.7, l2=1.3)
    L = 1.9
    k = (2 * np.arange(3) + 1) * np.pi / (2 * L)
    assert np.max(np.abs(special_cross_condition(p, "cutoff", L=L)(k))) < 1e-12


def test_hyperbolic_matches_continued_resonance():
    p = P(l=1.0, lam=0.5, alpha=-6.0)
    kap = np.linspace(0.05, 6.0, 50)
    hyp = cross_condition(p, "hyperbolic")(kap)
    res = cross_condition(p, "resonance")(1j * kap)
    ratio = res / hyp
    assert np.max(np.abs(ratio / ratio[0] - 1)) < 1e-8


def test_hyperbolic_cut_matches_continued_cutoff():
    p = P(l=1.0, lam=0.5, alpha=-6.0)
    kap = np.linspace(0.05, 6.0, 50)
    hyp = cross_condition(p, "hyperbolic", L=2.0)(kap)
    cut = cross_condition(p, "cutoff", L=2.0)(1j * kap)
    ratio = cut / hyp
    assert np.max(np.abs(ratio / ratio[0] - 1)) < 1e-8


def test_variant_validation():
    with pytest.raises(ParameterError):
        cross_condition(P(), "cutoff")
    with pytest.raises(ParameterError):
        cross_condition(P(), "bogus")
    with pytest.raises(ParameterError):
        closed_form("pentagon", P())


def test_dense_scan_skips_poles():
    roots = dense_scan_roots(lambda x: np.tan(x), 0.5, 7.0)
    assert np.allclose(roots, [np.pi, 2 * np.pi])


def test_grid_newton_finds_edge_roots():
    f = lambda z: (z - (2.0 - 0.0005j)) * (z - (5.0 - 0.5j))
    roots = grid_newton_roots(f, (0.1, 8.0), (-1.0, -1e-4), n_re=200, n_im=20)
    assert len(roots) == 2 and np.allclose(np.sort_complex(roots), [2.0 - 0.0005j, 5.0 - 0.5j])


@settings(max_examples=4, deadline=None)
@given(st.sampled_from(["loop", "cross", "tgraph", "special_cross"]), st.integers(0, 10 ** 6))
def test_zero_set_equivalence(family, seed):
    p = random_params(family, np.random.default_rng(seed))
    assert check_cutoff_roots(family, p, 1.7).passed
    assert check_resonances(family, p).passed
