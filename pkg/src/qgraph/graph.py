"""Metric graphs with leads and their vertex couplings.

Every graph is stored in "flower" form: all vertices merged into a single
point carrying one unitary matrix ``U`` of size ``2N + M``.  Locality of the
original couplings is kept by ``U`` being block-diagonal up to a permutation.

Boundary-index convention (0-based, frozen; the secular matrices rely on it):

* ``2*i``      -- endpoint ``x = 0`` of internal edge ``i``
* ``2*i + 1``  -- endpoint ``x = l_i`` of internal edge ``i``
* ``2*N + j``  -- the attachment point ``x = 0`` of lead ``j``

Derivatives in the vertex conditions are taken in the direction pointing
into the edge, i.e. ``f'(0)`` at ``x = 0`` and ``-f'(l_i)`` at ``x = l_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, asdict
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError, StructureError

UNITARY_TOL = 1e-12
COMPUTED_UNITARY_TOL = 1e-10
CONDITION_LIMIT = 1e12

FAMILIES = ("loop", "cross", "tgraph", "special_cross")


def unitarity_residual(U: np.ndarray) -> float:
    U = np.asarray(U, dtype=complex)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))) if U.size else 0.0


def _as_square(matrix, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(matrix, dtype=complex))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StructureError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


def ab_to_unitary(A, B) -> np.ndarray:
    """Convert the condition ``A psi + B psi' = 0`` into its unitary form.

    Returns ``U = -(A + iB)^{-1} (A - iB)``, for which
    ``(U - I) psi + i (U + I) psi' = 0`` has the same solution set.
    """
    A = _as_square(A, "A")
    B = _as_square(B, "B")
    if A.shape != B.shape:
        raise ParameterError(f"A and B differ in shape: {A.shape} vs {B.shape}")
    Z = A + 1j * B
    if np.linalg.cond(Z) >= CONDITION_LIMIT:
        raise ParameterError("A + iB is singular; (A, B) is not a self-adjoint parametrization")
    U = -np.linalg.solve(Z, A - 1j * B)
    res = unitarity_residual(U)
    if res >= COMPUTED_UNITARY_TOL:
        raise ParameterError(f"(A, B) does not define a self-adjoint coupling (unitarity residual {res:.2e})")
    return U


def unitary_to_ab(U) -> tuple[np.ndarray, np.ndarray]:
    """The pair ``(U - I, i(U + I))`` read off directly from the unitary form."""
    U = _as_square(U, "U")
    eye = np.eye(U.shape[0])
    return U - eye, 1j * (U + eye)


@dataclass(frozen=True, eq=False)
class VertexCoupling:
    """Coupling at one vertex, always held in unitary form.

    Use :meth:`from_ab` for the ``A psi + B psi' = 0`` parametrization.
    """

    U: np.ndarray
    computed: bool = False

    def __post_init__(self):
        U = _as_square(self.U, "U")
        tol = COMPUTED_UNITARY_TOL if self.computed else UNITARY_TOL
        res = unitarity_residual(U)
        if res >= tol:
            raise StructureError(f"vertex coupling is not unitary (residual {res:.2e})")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @classmethod
    def from_ab(cls, A, B) -> "VertexCoupling":
        return cls(ab_to_unitary(A, B), computed=True)

    @property
    def degree(self) -> int:
        return self.U.shape[0]


def delta_coupling(degree: int, strength: float) -> VertexCoupling:
    """δ coupling: continuity plus (sum of inward derivatives) = strength * value."""
    if degree < 1:
        raise ParameterError("vertex degree must be at least 1")
    d = int(degree)
    U = (2.0 / (d + 1j * float(strength))) * np.ones((d, d)) - np.eye(d)
    return VertexCoupling(U)


DIRICHLET = VertexCoupling(np.array([[-1.0 + 0j]]))
NEUMANN = VertexCoupling(np.array([[1.0 + 0j]]))


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Compact core of ``N`` edges plus ``M`` leads, coupled by one unitary ``U``."""

    edge_lengths: tuple[float, ...]
    lead_count: int
    coupling: np.ndarray
    family: str | None = None
    params: "GraphParameters | None" = None
    unitary_tol: float = field(default=UNITARY_TOL, repr=False)

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.edge_lengths)
        if any(not np.isfinite(x) or x < 0 for x in lengths):
            raise StructureError(f"edge lengths must be finite and nonnegative: {lengths}")
        m = int(self.lead_count)
        if m < 0:
            raise StructureError("lead count must be nonnegative")
        if len(lengths) + m < 1:
            raise StructureError("graph needs at least one edge or lead")
        U = _as_square(self.coupling, "coupling")
        n = 2 * len(lengths) + m
        if U.shape != (n, n):
            raise StructureError(f"coupling must be {n}x{n} for N={len(lengths)}, M={m}; got {U.shape}")
        res = unitarity_residual(U)
        if res >= self.unitary_tol:
            raise StructureError(f"coupling matrix is not unitary (residual {res:.2e})")
        U = U.copy()
        U.setflags(write=False)
        object.__setattr__(self, "edge_lengths", lengths)
        object.__setattr__(self, "lead_count", m)
        object.__setattr__(self, "coupling", U)

    @property
    def edge_count(self) -> int:
        return len(self.edge_lengths)

    @property
    def size(self) -> int:
        return 2 * self.edge_count + self.lead_count

    @property
    def total_length(self) -> float:
        return float(sum(self.edge_lengths))

    def permuted_edge(self, i: int) -> "MetricGraph":
        """Same graph with the two endpoints of edge ``i`` swapped (edge reversed)."""
        perm = np.arange(self.size)
        perm[[2 * i, 2 * i + 1]] = perm[[2 * i + 1, 2 * i]]
        U = self.coupling[np.ix_(perm, perm)]
        return MetricGraph(self.edge_lengths, self.lead_count, U)


def build_flower(
    edge_lengths: Sequence[float],
    lead_count: int,
    couplings: Sequence[VertexCoupling],
    incidence: Sequence[Sequence[int]],
    *,
    family: str | None = None,
    params: "GraphParameters | None" = None,
) -> MetricGraph:
    """Merge per-vertex couplings into a single block-diagonal (permuted) ``U``.

    ``incidence[v]`` lists the global boundary indices of vertex ``v``, in the
    row/column order of ``couplings[v].U``.
    """
    n = 2 * len(edge_lengths) + int(lead_count)
    if len(couplings) != len(incidence):
        raise StructureError("couplings and incidence lists differ in length")
    U = np.zeros((n, n), dtype=complex)
    seen = np.zeros(n, dtype=int)
    for v, (cpl, idx) in enumerate(zip(couplings, incidence)):
        if not isinstance(cpl, VertexCoupling):
            cpl = VertexCoupling(cpl)
        idx = [int(i) for i in idx]
        if len(idx) != cpl.degree:
            raise StructureError(f"vertex {v}: {len(idx)} indices for a degree-{cpl.degree} coupling")
        if any(i < 0 or i >= n for i in idx):
            raise StructureError(f"vertex {v}: boundary index out of range 0..{n - 1}")
        seen[idx] += 1
        U[np.ix_(idx, idx)] = cpl.U
    if np.any(seen != 1):
        bad = [int(i) for i in np.flatnonzero(seen != 1)]
        raise StructureError(f"boundary indices not covered exactly once: {bad}")
    computed = any(getattr(c, "computed", False) for c in couplings)
    return MetricGraph(
        tuple(edge_lengths), lead_count, U, family=family, params=params,
        unitary_tol=COMPUTED_UNITARY_TOL if computed else UNITARY_TOL,
    )


@dataclass(frozen=True)
class GraphParameters:
    """Scalar parameters of the built-in families.

    ``loop`` and ``cross`` use ``l`` and ``lam`` (edge lengths ``l(1-lam)``,
    ``l(1+lam)``); ``tgraph`` and ``special_cross`` use ``l1``/``l2``
    directly.  Loop couplings are stored as inverses, so ``0`` means a
    Dirichlet-type limit rather than infinity.
    """

    l: float = 1.0
    lam: float = 0.0
    alpha: float = 1.0
    l1: float | None = None
    l2: float | None = None
    alpha1_inv: float = 0.0
    alpha2_inv: float = 0.0
    alpha1_tilde_inv: float = 0.0
    alpha2_tilde_inv: float = 0.0
    gamma1: complex = 0.0
    gamma2: complex = 0.0

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ParameterError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.l > 0:
            raise ParameterError(f"l must be positive, got {self.l}")
        for name in ("l1", "l2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive, got {v}")
        for name in ("alpha", "alpha1_inv", "alpha2_inv", "alpha1_tilde_inv", "alpha2_tilde_inv"):
            if np.iscomplexobj(getattr(self, name)) and np.imag(getattr(self, name)) != 0:
                raise ParameterError(f"{name} must be real")
            object.__setattr__(self, name, float(np.real(getattr(self, name))))
        object.__setattr__(self, "gamma1", complex(self.gamma1))
        object.__setattr__(self, "gamma2", complex(self.gamma2))

    @property
    def lengths(self) -> tuple[float, float]:
        """Internal edge lengths: explicit ``l1``/``l2`` or the ``l, lam`` split."""
        if self.l1 is not None and self.l2 is not None:
            return float(self.l1), float(self.l2)
        return self.l * (1.0 - self.lam), self.l * (1.0 + self.lam)

    def replace(self, **changes) -> "GraphParameters":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return GraphParameters(**values)

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if v is None:
                continue
            out[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return out

    @classmethod
    def from_mapping(cls, data: Mapping) -> "GraphParameters":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter(s): {sorted(unknown)}")
        values = {}
        for k, v in data.items():
            if isinstance(v, (list, tuple)):
                if len(v) != 2:
                    raise ParameterError(f"complex parameter {k} must be [re, im]")
                v = complex(float(v[0]), float(v[1]))
            values[k] = v
        return cls(**values)


# The explicit central coupling of the special cross: I + c J with c = (-1-i)/4.
SPECIAL_CROSS_U = np.eye(4) + (-1 - 1j) / 4 * np.ones((4, 4))


def loop_vertex(alpha_inv: float, alpha_tilde_inv: float, gamma: complex) -> VertexCoupling:
    """One end of the loop family, ordered (edge 1, edge 2, lead).

    Encodes continuity on the loop,
    ``f(v) = alpha_inv * (f1' + f2') + gamma * g'`` and
    ``g(v) = conj(gamma) * (f1' + f2') + alpha_tilde_inv * g'``
    with all derivatives pointing away from the vertex.
    """
    a, at, g = float(alpha_inv), float(alpha_tilde_inv), complex(gamma)
    A = np.array([[1, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
    B = np.array([[0, 0, 0], [-a, -a, -g], [-np.conj(g), -np.conj(g), -at]], dtype=complex)
    return VertexCoupling.from_ab(A, B)


def builtin_graph(family: str, params: GraphParameters | Mapping | None = None) -> MetricGraph:
    """The example graphs: ``loop``, ``cross``, ``tgraph`` and ``special_cross``.

    Internal edges of ``cross``/``tgraph``/``special_cross`` run from the
    central vertex (``x = 0``) to a Dirichlet tip (``x = l_i``).
    """
    if params is None:
        params = GraphParameters()
    elif not isinstance(params, GraphParameters):
        params = GraphParameters.from_mapping(params)
    l1, l2 = params.lengths
    if family == "loop":
        v0 = loop_vertex(params.alpha1_inv, params.alpha1_tilde_inv, params.gamma1)
        v1 = loop_vertex(params.alpha2_inv, params.alpha2_tilde_inv, params.gamma2)
        return build_flower((l1, l2), 2, [v0, v1], [[0, 2, 4], [1, 3, 5]], family=family, params=params)
    if family == "cross":
        centre = delta_coupling(4, params.alpha)
        return build_flower((l1, l2), 2, [centre, DIRICHLET, DIRICHLET], [[0, 2, 4, 5], [1], [3]],
                            family=family, params=params)
    if family == "tgraph":
        centre = delta_coupling(3, params.alpha)
        return build_flower((l1, l2), 1, [centre, DIRICHLET, DIRICHLET], [[0, 2, 4], [1], [3]],
                            family=family, params=params)
    if family == "special_cross":
        centre = VertexCoupling(SPECIAL_CROSS_U)
        return build_flower((l1, l2), 2, [centre, DIRICHLET, DIRICHLET], [[0, 2, 4, 5], [1], [3]],
                            family=family, params=params)
    raise ParameterError(f"unknown graph family {family!r}; expected one of {FAMILIES}")
