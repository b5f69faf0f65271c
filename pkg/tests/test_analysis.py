import numpy as np
import pytest

from qgraph.analysis import (bound_states, bracket_lines, bracketing_check, lattice_crossings, spectral_map,
                             thread_count, width_diagnostic)
from qgraph.errors import ParameterError
from qgraph.graph import GraphParameters, builtin_graph
from qgraph.oracles import closed_form, dense_scan_roots
from qgraph.secular import DirichletCut, NeumannCut, Open

P = GraphParameters
POLE_2PI = 6.3279390972803915 - 0.06790413476748342j
# closed-form oracle: roots of 2 kappa sinh 2 kappa + (-6 + 2 kappa t)(cosh 2 kappa - cosh kappa), lam = 0.5
KAPPA_OPEN = 1.2303026038064
KAPPA_CUT = {1: 1.0455067467646, 2: 1.2187421664907, 3: 1.2293541226769, 5: 1.2302957274511,
             8: 1.2303025995264, 12: 1.2303026038062}


def test_flat_map_at_lambda_one():
    g = builtin_graph("cross", P(lam=1.0))
    sm = spectral_map(g, "dirichlet", np.linspace(1.0, 4.0, 7), (0.1, 10.0))
    assert len(sm.points) == 7 * 6
    assert np.allclose(sm.points[:, 1].reshape(7, 6), np.arange(1, 7) * np.pi / 2, atol=1e-10)
    assert np.max(np.abs(sm.points[:, 2])) < 1e-6


def test_empty_L_grid():
    sm = spectral_map(builtin_graph("cross", P()), DirichletCut, [], (0.1, 5.0))
    assert sm.points.shape == (0, 3)


def test_bad_cut_kind():
    with pytest.raises(ParameterError):
        spectral_map(builtin_graph("cross", P()), Open, [1.0], (0.1, 5.0))
    with pytest.raises(ParameterError):
        spectral_map(builtin_graph("cross", P()), "robin", [1.0], (0.1, 5.0))


def test_map_matches_closed_form_and_slopes():
    p = P(l=1.0, lam=0.95, alpha=1.0)
    g = builtin_graph("cross", p)
    L_grid = np.array([2.3, 4.1, 6.7])
    sm = spectral_map(g, "dirichlet", L_grid, (0.1, 8.0))
    for L in L_grid:
        f = closed_form("cross", p, "cutoff", L=L)
        oracle = dense_scan_roots(lambda x: f(x).real, 0.1, 8.0)
        col = sm.column(L)
        assert len(col) == len(oracle) and np.max(np.abs(col - oracle)) < 1e-9
    # slopes against a finite difference of the roots
    L, h = 4.1, 1e-5
    up = spectral_map(g, "dirichlet", [L + h], (0.1, 8.0)).column(L + h)
    dn = spectral_map(g, "dirichlet", [L - h], (0.1, 8.0)).column(L - h)
    slopes = sm.points[sm.points[:, 0] == L, 2]
    assert np.allclose(slopes, (up - dn) / (2 * h), atol=1e-5)


def test_small_lambda_map_near_m_pi():
    g = builtin_graph("cross", P(lam=0.03))
    col = spectral_map(g, NeumannCut, [3.0], (0.1, 10.0)).column(3.0)
    for m in (1, 2, 3):
        assert np.min(np.abs(col - m * np.pi)) < 0.05


def test_threaded_map_is_identical(monkeypatch):
    g = builtin_graph("cross", P(lam=0.7, alpha=-0.5))
    L_grid = np.linspace(1.0, 5.0, 9)
    serial = spectral_map(g, "dirichlet", L_grid, (0.1, 6.0), workers=1)
    monkeypatch.setenv("QGRAPH_THREADS", "4")
    assert thread_count() == 4
    threaded = spectral_map(g, "dirichlet", L_grid, (0.1, 6.0))
    assert np.array_equal(serial.points, threaded.points)
    monkeypatch.setenv("QGRAPH_THREADS", "many")
    assert thread_count() == 1


def test_bound_states_attractive():
    g = builtin_graph("cross", P(lam=0.5, alpha=-6.0))
    rs = bound_states(g, None, (1e-3, 20.0))
    assert len(rs) == 1 and abs(rs.roots[0] - KAPPA_OPEN) < 1e-10
    kap = []
    for L, ref in KAPPA_CUT.items():
        r = bound_states(g, DirichletCut(L), (1e-3, 20.0)).roots
        assert len(r) == 1 and abs(r[0] - ref) < 1e-10
        kap.append(r[0])
    assert np.all(np.diff(kap) >= 0)


def test_bound_states_repulsive():
    g = builtin_graph("cross", P(lam=0.5, alpha=1.0))
    assert len(bound_states(g, None, (1e-3, 20.0))) == 0
    assert len(bound_states(g, DirichletCut(3.0), (1e-3, 20.0))) == 0


def test_bracket_lines():
    g = builtin_graph("cross", P(lam=0.95))
    bl = bracket_lines(g, (0.1, 12.0))
    expected = np.arange(1, 8) * np.pi / 1.95
    for z in expected:
        assert np.min(np.abs(bl.im_zeros - z)) < 1e-9
    re_oracle = dense_scan_roots(lambda k: 2 * k * np.sin(2 * k) + np.cos(1.9 * k) - np.cos(2 * k), 0.1, 12.0)
    assert len(bl.re_zeros) == len(re_oracle) and np.max(np.abs(bl.re_zeros - re_oracle)) < 1e-9


def test_bracket_lines_lambda_one():
    bl = bracket_lines(builtin_graph("cross", P(lam=1.0)), (0.1, 7.0))
    assert bl.im_identically_zero and len(bl.im_zeros) == 0
    assert np.allclose(bl.analytic_im_zeros, np.arange(1, 5) * np.pi / 2)


def test_lattice_crossings_are_coefficient_zeros():
    g = builtin_graph("cross", P(lam=0.95))
    tan_k, cot_k = lattice_crossings(g, 2 * np.pi, 1.0)
    # c~_1 is the Im-part zero set, c~_0 the Re-part zero set
    assert np.min(np.abs(tan_k - 4 * np.pi / 1.95)) < 1e-9
    assert np.min(np.abs(cot_k - 6.2904521021117)) < 1e-9


def test_bracketing_holds():
    g = builtin_graph("cross", P(lam=0.95))
    checks = bracketing_check(g, POLE_2PI, np.linspace(2.0, 8.0, 12))
    assert len(checks) == 12 and all(c.bracketed for c in checks)


def test_width_of_artificial_pole():
    pole = 3.0 - 0.1j
    rep = width_diagnostic(lambda k: (k - pole) * (1 + 0.01 * k), pole)
    assert not rep.inconclusive and rep.agrees()
    assert abs(rep.delta - 3.0) < 0.02 and abs(rep.eta - 0.1) < 0.02


def test_width_of_cross_pole():
    rep = width_diagnostic(builtin_graph("cross", P(lam=0.95)), POLE_2PI)
    assert rep.agrees()
    assert rep.nearest_re_zero is not None and abs(rep.nearest_re_zero - 6.2904521021117) < 1e-9


def test_width_of_embedded_eigenvalue():
    rep = width_diagnostic(builtin_graph("cross", P(lam=1.0)), 2 * np.pi + 0j)
    assert rep.genuine_eigenvalue and rep.agrees()


def test_width_rejects_broad_pole():
    with pytest.raises(ParameterError):
        width_diagnostic(builtin_graph("cross", P()), 3.0 - 0.7j)
