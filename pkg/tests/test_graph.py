import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgraph.errors import ParameterError, StructureError
from qgraph.graph import (DIRICHLET, GraphParameters, MetricGraph, VertexCoupling, ab_to_unitary,
                          build_flower, builtin_graph, delta_coupling, unitarity_residual, unitary_to_ab)
from qgraph.oracles import closed_form, dense_scan_roots
from qgraph.rootsolve import scan_real_roots
from qgraph.secular import DirichletCut, secular_values


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_ab_roundtrip_is_identity(n, seed):
    U = random_unitary(np.random.default_rng(seed), n)
    # here A + iB = -2I, so the inversion is always well conditioned
    A, B = unitary_to_ab(U)
    assert np.max(np.abs(ab_to_unitary(A, B) - U)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.floats(-50, 50))
def test_delta_coupling_spectrum(d, alpha):
    U = delta_coupling(d, alpha).U
    ev = np.sort_complex(np.linalg.eigvals(U))
    special = 2 * d / (d + 1j * alpha) - 1
    expected = np.sort_complex(np.array([-1.0] * (d - 1) + [special]))
    assert np.allclose(ev, expected, atol=1e-12)
    assert unitarity_residual(U) < 1e-13


def test_delta_zero_strength_is_kirchhoff():
    U = delta_coupling(3, 0.0).U
    assert np.allclose(U, 2 / 3 * np.ones((3, 3)) - np.eye(3))


def test_singular_ab_rejected():
    with pytest.raises(ParameterError):
        ab_to_unitary(np.eye(2), 1j * np.eye(2))  # A + iB = 0


def test_non_selfadjoint_ab_rejected():
    with pytest.raises(ParameterError):
        ab_to_unitary(np.eye(2), np.array([[0, 1], [0, 0]]))


def test_non_unitary_coupling_rejected():
    with pytest.raises(StructureError):
        VertexCoupling(np.array([[1.0, 0], [0, 2.0]]))
    with pytest.raises(StructureError):
        MetricGraph((1.0,), 0, np.diag([1.0, 1.0 + 1e-9]))


def test_shape_mismatch_rejected():
    with pytest.raises(StructureError):
        MetricGraph((1.0, 2.0), 1, np.eye(4))


def test_index_collision_rejected():
    c = delta_coupling(2, 0.0)
    with pytest.raises(StructureError):
        build_flower((1.0,), 0, [c, c], [[0, 1], [1, 0]])
    with pytest.raises(StructureError):
        build_flower((1.0,), 1, [c, DIRICHLET], [[0, 1], [1]])


def test_flower_assembly_places_blocks():
    g = builtin_graph("cross", GraphParameters(l=1, lam=0.5, alpha=2.0))
    U = g.coupling
    centre = [0, 2, 4, 5]
    assert np.allclose(U[np.ix_(centre, centre)], delta_coupling(4, 2.0).U)
    assert U[1, 1] == -1 and U[3, 3] == -1
    assert np.count_nonzero(U[1]) == 1
    assert g.edge_lengths == (0.5, 1.5) and g.lead_count == 2


def test_lambda_one_keeps_zero_length_edge():
    g = builtin_graph("cross", GraphParameters(l=1, lam=1.0))
    assert g.edge_lengths == (0.0, 2.0)
    v = secular_values(g, np.array([1.3 - 0.2j]), DirichletCut(1.0))
    assert np.isfinite(v).all()


def test_parameters_strict_mapping():
    with pytest.raises(ParameterError):
        GraphParameters.from_mapping({"lambda": 0.5})
    p = GraphParameters.from_mapping({"gamma1": [0.5, -0.25], "l1": 1.0, "l2": 2.0})
    assert p.gamma1 == 0.5 - 0.25j
    assert p.lengths == (1.0, 2.0)
    assert GraphParameters.from_mapping(p.to_dict()) == p


def test_parameter_ranges():
    with pytest.raises(ParameterError):
        GraphParameters(lam=1.5)
    with pytest.raises(ParameterError):
        GraphParameters(l=0.0)
    with pytest.raises(ParameterError):
        builtin_graph("pentagon")


@pytest.mark.parametrize("family", ["loop", "cross", "tgraph", "special_cross"])
def test_builtin_unitary(family):
    p = GraphParameters(l=1.1, lam=0.3, alpha=0.7, l1=0.8, l2=1.3, alpha1_inv=0.2, alpha2_inv=-0.4,
                        alpha1_tilde_inv=0.5, alpha2_tilde_inv=0.1, gamma1=0.3 + 0.2j, gamma2=-0.1j)
    g = builtin_graph(family, p)
    assert unitarity_residual(g.coupling) < 1e-10


@pytest.mark.parametrize("edge", [0, 1])
def test_edge_reversal_keeps_cutoff_roots(edge):
    # reversing one Dirichlet-tipped edge swaps which end carries the tip
    p = GraphParameters(l=1.0, lam=0.4, alpha=1.5)
    g = builtin_graph("cross", p)
    h = g.permuted_edge(edge)
    bm = DirichletCut(1.3)
    f = closed_form("cross", p, "cutoff", L=1.3)
    oracle = dense_scan_roots(lambda x: f(x).real, 0.1, 8.0)
    r = scan_real_roots(h, bm, (0.1, 8.0)).roots
    assert len(r) == len(oracle)
    assert np.max(np.abs(r - oracle)) < 1e-9
