"""Secular determinant of a flower graph and its expansion in the lead factor.

The matching system is ``M(k; mu) = (U - I) C1(k) + i k (U + I) C2(k; mu)``
where ``C1``/``C2`` map the edge amplitudes ``(a_i, b_i)`` of
``a_i sin kx + b_i cos kx`` (and the lead amplitudes) to boundary values and
to boundary derivatives divided by ``k``.  Each lead contributes one column
that is affine in its Dirichlet-to-Neumann factor ``mu``, so
``F(k; mu) = det M`` is a polynomial of degree at most ``M`` in ``mu``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, PoleProximityError, RangeError
from .graph import MetricGraph

POLE_GUARD = 1e-10
IM_K_LIMIT = 300.0
RECONSTRUCTION_TOL = 1e-9


class BoundaryModel:
    """Lead model: the factor ``mu(k) = g'(0) / (k g(0))`` of the lead solution.

    Subclasses also expose a pole-free pair ``(p, q)`` with ``mu = q / p``;
    the lead column built from ``(p, q)`` equals ``p`` times the one built
    from ``mu``.
    """

    def pair(self, k):
        raise NotImplementedError

    def factor(self, k):
        p, q = self.pair(k)
        self.check(k)
        return q / p

    def pole_distance(self, k):
        """``|p(k)|``; roughly the distance of ``kL`` to the pole lattice."""
        return np.abs(self.pair(k)[0])

    def check(self, k):
        d = np.min(self.pole_distance(np.asarray(k)))
        if d < POLE_GUARD:
            raise PoleProximityError(f"{self!r}: k={k} is within {POLE_GUARD:g} of a lead-factor pole")

    def poles_in(self, lo: float, hi: float) -> np.ndarray:
        """Real poles of ``mu`` inside ``[lo, hi]``."""
        return np.empty(0)

    @property
    def length(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Open(BoundaryModel):
    """Semi-infinite leads, outgoing waves: ``mu = i``."""

    def pair(self, k):
        k = np.asarray(k, dtype=complex)
        return np.ones_like(k), 1j * np.ones_like(k)


@dataclass(frozen=True)
class DirichletCut(BoundaryModel):
    """Leads cut at length ``L`` with a Dirichlet end: ``mu = -cot(kL)``."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"cut-off length must be positive, got {self.L}")

    def pair(self, k):
        z = np.asarray(k, dtype=complex) * self.L
        return np.sin(z), -np.cos(z)

    def poles_in(self, lo, hi):
        n = np.arange(np.ceil(lo * self.L / np.pi), np.floor(hi * self.L / np.pi) + 1)
        return n[n != 0] * np.pi / self.L

    @property
    def length(self):
        return self.L


@dataclass(frozen=True)
class NeumannCut(BoundaryModel):
    """Leads cut at length ``L`` with a Neumann end: ``mu = tan(kL)``."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"cut-off length must be positive, got {self.L}")

    def pair(self, k):
        z = np.asarray(k, dtype=complex) * self.L
        return np.cos(z), np.sin(z)

    def poles_in(self, lo, hi):
        n = np.arange(np.ceil(lo * self.L / np.pi - 0.5), np.floor(hi * self.L / np.pi - 0.5) + 1)
        return (n + 0.5) * np.pi / self.L

    @property
    def length(self):
        return self.L


@dataclass(frozen=True)
class ExplicitFactor(BoundaryModel):
    """A fixed lead factor ``mu``, independent of ``k``."""

    mu: complex

    def pair(self, k):
        k = np.asarray(k, dtype=complex)
        return np.ones_like(k), complex(self.mu) * np.ones_like(k)


def _check_range(graph: MetricGraph, k, bm: BoundaryModel):
    ell = max([*graph.edge_lengths, bm.length, 1.0])
    if np.max(np.abs(np.imag(k))) * ell > IM_K_LIMIT:
        raise RangeError(f"|Im k| too large for finite evaluation (|Im k| * length > {IM_K_LIMIT})")


def assemble_C1(graph: MetricGraph, k, p=1.0):
    """Value map: blocks ``[[0, 1], [sin kl, cos kl]]`` per edge, ``p * I`` on leads."""
    k = np.asarray(k, dtype=complex)
    n, N = graph.size, graph.edge_count
    C = np.zeros(k.shape + (n, n), dtype=complex)
    for i, l in enumerate(graph.edge_lengths):
        C[..., 2 * i, 2 * i + 1] = 1.0
        C[..., 2 * i + 1, 2 * i] = np.sin(k * l)
        C[..., 2 * i + 1, 2 * i + 1] = np.cos(k * l)
    p = np.broadcast_to(np.asarray(p, dtype=complex), k.shape)
    for j in range(graph.lead_count):
        C[..., 2 * N + j, 2 * N + j] = p
    return C


def assemble_C2(graph: MetricGraph, k, bm: BoundaryModel | None = None, *, q=None):
    """Derivative map (over ``k``): blocks ``[[1, 0], [-cos kl, sin kl]]``, ``mu * I`` on leads.

    With ``q`` given, the lead block is ``q * I`` and no pole check is done.
    """
    k = np.asarray(k, dtype=complex)
    if q is None:
        bm = Open() if bm is None else bm
        q = bm.factor(k)
    n, N = graph.size, graph.edge_count
    C = np.zeros(k.shape + (n, n), dtype=complex)
    for i, l in enumerate(graph.edge_lengths):
        C[..., 2 * i, 2 * i] = 1.0
        C[..., 2 * i + 1, 2 * i] = -np.cos(k * l)
        C[..., 2 * i + 1, 2 * i + 1] = np.sin(k * l)
    q = np.broadcast_to(np.asarray(q, dtype=complex), k.shape)
    for j in range(graph.lead_count):
        C[..., 2 * N + j, 2 * N + j] = q
    return C


def matrix_pq(graph: MetricGraph, k, p, q):
    """Secular matrix with lead columns ``p (U-I) e_j + i k q (U+I) e_j``; batched over ``k``."""
    k = np.asarray(k, dtype=complex)
    U = graph.coupling
    eye = np.eye(graph.size)
    C1 = assemble_C1(graph, k, p)
    C2 = assemble_C2(graph, k, q=q)
    return (U - eye) @ C1 + (1j * k)[..., None, None] * ((U + eye) @ C2)


def secular_matrix(graph: MetricGraph, k, bm: BoundaryModel):
    bm.check(k)
    return matrix_pq(graph, k, 1.0, bm.factor(k))


def row_scale(Mat) -> np.ndarray:
    """Product of row norms: Hadamard's bound on ``|det|``."""
    return np.prod(np.linalg.norm(Mat, axis=-1), axis=-1)


def det_pq(graph: MetricGraph, k, p, q, *, with_scale=False):
    Mat = matrix_pq(graph, k, p, q)
    d = np.linalg.det(Mat)
    return (d, row_scale(Mat)) if with_scale else d


def secular_values(graph: MetricGraph, k, bm: BoundaryModel, *, with_scale=False):
    """Vectorized ``F(k; mu)`` for an array of ``k`` (pole-checked)."""
    k = np.asarray(k, dtype=complex)
    _check_range(graph, k, bm)
    bm.check(k)
    return det_pq(graph, k, 1.0, bm.factor(k), with_scale=with_scale)


def regularized_values(graph: MetricGraph, k, bm: BoundaryModel, *, with_scale=False):
    """``p(k)^M F(k; mu)``: entire in ``k``, finite on the pole lattice of ``mu``."""
    k = np.asarray(k, dtype=complex)
    _check_range(graph, k, bm)
    p, q = bm.pair(k)
    return det_pq(graph, k, p, q, with_scale=with_scale)


@dataclass(frozen=True)
class SecularEvaluation:
    k: complex
    value: complex
    scale: float
    log_derivative: complex | None = None


def fd_step(k) -> float:
    return 1e-6 * max(1.0, abs(k))


def secular_det(graph: MetricGraph, k: complex, bm: BoundaryModel, *, log_derivative=False) -> SecularEvaluation:
    """``F(k; mu) = det[(U-I) C1 + i k (U+I) C2]`` via LAPACK LU."""
    k = complex(k)
    value, scale = secular_values(graph, np.array([k]), bm, with_scale=True)
    logd = None
    if log_derivative:
        h = fd_step(k)
        fp, fm = secular_values(graph, np.array([k + h, k - h]), bm)
        logd = (fp - fm) / (2 * h) / value[0] if value[0] != 0 else complex(np.inf)
    return SecularEvaluation(k, complex(value[0]), float(scale[0]), logd)


def reference_phase(graph: MetricGraph) -> complex:
    """Unit constant ``w`` with ``F(k; mu) / w`` real for real ``k`` and real ``mu``.

    For real momentum the conjugate system is ``-U^{-T}`` times the system
    built from ``U^T``, which has the same determinant, so
    ``F / conj(F) = (-1)^n det U``.
    """
    n = graph.size
    d = np.linalg.det(graph.coupling)
    return complex(1j ** n * np.sqrt(d + 0j))


def dephased_values(graph: MetricGraph, k, bm: BoundaryModel, *, regularized=False, with_scale=False):
    """``F / w`` (or ``p^M F / w``); real up to rounding for real ``k`` and cut-off leads."""
    w = reference_phase(graph)
    fn = regularized_values if regularized else secular_values
    if with_scale:
        v, s = fn(graph, k, bm, with_scale=True)
        return v / w, s
    return fn(graph, k, bm) / w


@dataclass(frozen=True)
class CoefficientVector:
    """``F(k; mu) = sum_j c[j] mu^j``; for a Dirichlet cut ``mu = -cot kL``."""

    k: complex
    c: np.ndarray

    def evaluate(self, mu) -> complex:
        return complex(np.polyval(self.c[::-1], mu))

    @property
    def degree(self) -> int:
        return len(self.c) - 1


def chebyshev_nodes(count: int, radius: float = 2.0) -> np.ndarray:
    m = np.arange(count)
    return radius * np.cos((2 * m + 1) * np.pi / (2 * count))


_HELD_OUT = 0.3141 + 0.2718j


def coefficients(graph: MetricGraph, k, *, check=True) -> np.ndarray:
    """Batched coefficient extraction; returns shape ``k.shape + (M + 1,)``.

    ``F`` is sampled at ``M + 1`` Chebyshev nodes of the lead factor on
    ``[-2, 2]`` and the Vandermonde system is solved.
    """
    k = np.asarray(k, dtype=complex)
    M = graph.lead_count
    t = chebyshev_nodes(M + 1)
    vals = np.stack([det_pq(graph, k, 1.0, tm) for tm in t], axis=-1)
    V = np.vander(t, M + 1, increasing=True)
    if np.linalg.cond(V) > 1e8:
        raise NumericError("Vandermonde system in the lead factor is ill-conditioned")
    c = vals @ np.linalg.inv(V).T
    if check:
        direct = det_pq(graph, k, 1.0, _HELD_OUT)
        powers = _HELD_OUT ** np.arange(M + 1)
        recon = c @ powers
        size = np.abs(c) @ np.abs(powers)
        bad = np.abs(recon - direct) > RECONSTRUCTION_TOL * np.maximum(size, np.finfo(float).tiny)
        if np.any(bad):
            raise NumericError("coefficient reconstruction failed at the held-out lead factor")
    return c


def extract_coefficients(graph: MetricGraph, k: complex) -> CoefficientVector:
    c = coefficients(graph, np.array([complex(k)]))[0]
    return CoefficientVector(complex(k), c)


def expand(c: np.ndarray, mu) -> np.ndarray:
    """``sum_j c[..., j] mu^j``."""
    mu = np.asarray(mu, dtype=complex)
    powers = mu[..., None] ** np.arange(c.shape[-1])
    return np.sum(c * powers, axis=-1)


def effective_degree(graph: MetricGraph, rtol: float = 1e-10) -> int:
    """Highest power of ``mu`` that does not vanish identically (probed at fixed momenta)."""
    probe = np.array([1.237 + 0.11j, 2.91 - 0.07j, 4.433 + 0.03j, 7.77 - 0.21j])
    c = np.abs(coefficients(graph, probe))
    top = np.max(c, axis=-1, keepdims=True)
    alive = np.any(c > rtol * top, axis=0)
    return int(np.flatnonzero(alive).max()) if alive.any() else 0
