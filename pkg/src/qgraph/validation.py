"""Cross-validation of the determinant machinery against the closed forms.

Used by ``qgraph validate`` and by the test-suite.  Each check returns a
:class:`CheckResult` with the worst residual it saw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, QGraphError, StructureError
from .graph import FAMILIES, GraphParameters, MetricGraph, builtin_graph, unitarity_residual
from .oracles import closed_form, dense_scan_roots, grid_newton_roots
from .rootsolve import count_zeros, find_complex_roots, scan_real_roots
from .secular import DirichletCut, Open, coefficients, expand, secular_values

WINDOW = (0.1, 12.0)
REGION = (0.1, 12.0, -1.0, -1e-4)
ROOT_TOL = 1e-7


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: residual {self.residual:.3e}" + (f" ({self.detail})" if self.detail else "")


def random_params(family: str, rng: np.random.Generator) -> GraphParameters:
    """A random but well-conditioned parameter draw for a built-in family."""
    if family == "cross":
        return GraphParameters(l=rng.uniform(0.6, 1.4), lam=rng.uniform(0.0, 1.0), alpha=rng.uniform(-3, 3))
    if family == "loop":
        u = lambda: float(rng.uniform(-1, 1))
        return GraphParameters(l=rng.uniform(0.6, 1.4), lam=rng.uniform(0.0, 1.0),
                               alpha1_inv=u(), alpha2_inv=u(), alpha1_tilde_inv=u(), alpha2_tilde_inv=u(),
                               gamma1=complex(u(), u()), gamma2=complex(u(), u()))
    if family in ("tgraph", "special_cross"):
        return GraphParameters(l1=rng.uniform(0.5, 2.0), l2=rng.uniform(0.5, 2.0), alpha=rng.uniform(-3, 3))
    raise ValueError(f"unknown family {family!r}")


def determinant_residual(graph: MetricGraph, bm, k) -> np.ndarray:
    """``|F(k)| / prod(row norms)``, the Hadamard-scaled determinant."""
    v, s = secular_values(graph, np.asarray(k, dtype=complex), bm, with_scale=True)
    return np.abs(v) / s


def closed_form_residual(f, k, half: float = 0.05) -> np.ndarray:
    """``|f(k)|`` relative to the median of ``|f|`` on ``k +- half``.

    A pole of ``f`` mistaken for a root shows up as a large ratio.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    offs = np.linspace(-half, half, 21)
    with np.errstate(all="ignore"):
        ref = np.median(np.abs(f(k[:, None] + offs[None, :])), axis=1)
        return np.abs(f(k)) / np.where(ref > 0, ref, 1.0)


def check_unitary(U, name: str = "unitarity") -> CheckResult:
    U = np.asarray(U, dtype=complex)
    try:
        r = unitarity_residual(U)
    except (ValueError, np.linalg.LinAlgError) as exc:
        return CheckResult(name, False, np.inf, f"structural failure: {exc}")
    ok = r < 1e-12
    return CheckResult(name, ok, r, "" if ok else "structural failure: coupling matrix is not unitary")


def check_reconstruction(graph: MetricGraph, rng: np.random.Generator, n: int = 100, L: float = 1.7,
                         name: str = "reconstruction") -> CheckResult:
    """``sum i^j c_j`` and ``sum (-cot kL)^j c_j`` against direct determinants."""
    k = rng.uniform(*WINDOW, n) + 1j * rng.uniform(-1.0, 1.0, n)
    c = coefficients(graph, k)
    worst = 0.0
    for bm in (Open(), DirichletCut(L)):
        direct = secular_values(graph, k, bm)
        rec = expand(c, bm.factor(k))
        worst = max(worst, float(np.max(np.abs(rec - direct) / np.maximum(np.abs(direct), 1e-300))))
    return CheckResult(name, worst < 1e-9, worst)


def check_structural_zero(graph: MetricGraph, rng: np.random.Generator, n: int = 100,
                          name: str = "structural zero c0") -> CheckResult:
    k = rng.uniform(*WINDOW, n) + 1j * rng.uniform(-1.0, 1.0, n)
    c = coefficients(graph, k)
    r = float(np.max(np.abs(c[:, 0]) / np.max(np.abs(c), axis=1)))
    ok = r < 1e-10
    return CheckResult(name, ok, r, "c0 identically zero confirmed" if ok else "c0 does not vanish")


def check_cutoff_roots(family: str, params: GraphParameters, L: float, name: str | None = None) -> CheckResult:
    """Real roots of the cut-off closed form versus real roots of the determinant, both ways."""
    name = name or f"{family} cut-off roots (L={L:g})"
    graph = builtin_graph(family, params)
    bm = DirichletCut(L)
    f = closed_form(family, params, "cutoff", L=L)
    closed = dense_scan_roots(lambda x: np.real(f(x)), *WINDOW, step=1e-4, xtol=1e-10)
    det = scan_real_roots(graph, bm, WINDOW).roots
    worst, bad = 0.0, []
    if len(closed):
        closed = closed[bm.pole_distance(closed) > 1e-9]
        r1 = determinant_residual(graph, bm, closed)
        worst = max(worst, float(r1.max()))
        bad += [f"closed root {x:.10g}" for x, r in zip(closed, r1) if r >= ROOT_TOL]
    if len(det):
        r2 = closed_form_residual(f, det)
        worst = max(worst, float(r2.max()))
        bad += [f"determinant root {x:.10g}" for x, r in zip(det, r2) if r >= ROOT_TOL]
    detail = f"{len(closed)} closed-form / {len(det)} determinant roots"
    if bad:
        detail += "; off: " + ", ".join(bad[:4])
    return CheckResult(name, not bad, worst, detail)


def check_resonances(family: str, params: GraphParameters, name: str | None = None) -> CheckResult:
    """Complex zeros of the open closed form versus zeros of the determinant.

    Every closed-form zero must be a determinant zero, every refined
    determinant zero a closed-form zero, and the argument-principle count of
    the determinant must equal the number of closed-form zeros.
    """
    name = name or f"{family} resonances"
    graph = builtin_graph(family, params)
    f = closed_form(family, params, "resonance")
    closed = grid_newton_roots(f, REGION[:2], REGION[2:], n_re=2400, n_im=200)
    try:
        found = find_complex_roots(graph, Open(), REGION)
        count = count_zeros(graph, Open(), REGION)
    except NumericError as exc:
        return CheckResult(name, False, np.inf, f"numeric failure: {exc}")
    det = np.array(found.roots, dtype=complex)
    worst, bad = 0.0, []
    if len(closed):
        r1 = determinant_residual(graph, Open(), closed)
        worst = max(worst, float(r1.max()))
        bad += [f"closed root {z:.8g}" for z, r in zip(closed, r1) if r >= ROOT_TOL]
    if len(det):
        r2 = closed_form_residual(f, det)
        worst = max(worst, float(r2.max()))
        bad += [f"determinant root {z:.8g}" for z, r in zip(det, r2) if r >= ROOT_TOL]
    if count != len(closed):
        bad.append(f"count {count} != {len(closed)} closed-form roots")
    if found.flags:
        bad += found.flags
    detail = f"{len(closed)} closed-form / {len(det)} determinant roots, count {count}"
    if bad:
        detail += "; " + ", ".join(bad[:4])
    return CheckResult(name, not bad, worst, detail)


def family_suite(family: str, params: GraphParameters, rng: np.random.Generator, L: float = 1.7,
                 tag: str = "") -> list[CheckResult]:
    graph = builtin_graph(family, params)
    out = [check_unitary(graph.coupling, f"{family}{tag} unitarity"),
           check_reconstruction(graph, rng, L=L, name=f"{family}{tag} reconstruction")]
    if family == "special_cross":
        out.append(check_structural_zero(graph, rng, name=f"{family}{tag} structural zero c0"))
    out.append(check_cutoff_roots(family, params, L, name=f"{family}{tag} cut-off roots (L={L:g})"))
    out.append(check_resonances(family, params, name=f"{family}{tag} resonances"))
    return out


def run_validation(families=FAMILIES, draws: int = 2, seed: int = 0, L: float = 1.7, U=None) -> list[CheckResult]:
    """Oracle suites for the requested families, plus an optional user-supplied coupling matrix."""
    rng = np.random.default_rng(seed)
    results = []
    if U is not None:
        results.append(check_unitary(U, "supplied coupling unitarity"))
    for family in families:
        if family not in FAMILIES:
            results.append(CheckResult(f"{family}", False, np.inf, "unknown family"))
            continue
        for d in range(draws):
            params = random_params(family, rng)
            try:
                results.extend(family_suite(family, params, rng, L, tag=f"[{d}]"))
            except (QGraphError, StructureError) as exc:
                results.append(CheckResult(f"{family}[{d}]", False, np.inf, str(exc)))
    return results
