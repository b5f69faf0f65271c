"""Figure-level data: L-maps of cut-off spectra, bound states, bracket lines
and resonance-width diagnostics.

Everything here is built on the dephased coefficients ``c~_j = c_j / w`` of
the secular determinant, which are real for real ``k``.  For open leads
``F / w = sum_j i^j c~_j``, so its real and imaginary parts are the even and
odd alternating sums of the coefficients.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import NumericError, ParameterError
from .graph import MetricGraph
from .rootsolve import (DEFAULT_DENSITY, RealRootSet, _dedup, _degree, proxy, real_coefficients,
                        real_zeros, scan_grid, scan_on_grid, scan_real_roots)
from .secular import BoundaryModel, DirichletCut, NeumannCut, Open, dephased_values

log = logging.getLogger(__name__)

THREADS_ENV = "QGRAPH_THREADS"
DERIVATIVE_STEP = 1e-6
WIDTH_SAMPLES = 200


def thread_count() -> int:
    """Worker count from ``QGRAPH_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return 1


def _cut_kind(bm_family):
    if isinstance(bm_family, str):
        table = {"dirichlet": DirichletCut, "neumann": NeumannCut}
        try:
            return table[bm_family.lower()]
        except KeyError:
            raise ParameterError(f"unknown cut-off model {bm_family!r}") from None
    if bm_family in (DirichletCut, NeumannCut):
        return bm_family
    raise ParameterError("spectral maps need DirichletCut or NeumannCut")


# ---------------------------------------------------------------------------
# spectral map
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMap:
    """Points ``(L, k, dk/dL)`` of the cut-off spectrum, sorted by ``(L, k)``."""

    L_grid: np.ndarray
    points: np.ndarray
    metadata: dict = field(default_factory=dict)
    skipped: tuple = ()

    def column(self, L: float) -> np.ndarray:
        return self.points[self.points[:, 0] == L, 1]


def implicit_slope(graph: MetricGraph, kind, L: float, k: float, h: float = DERIVATIVE_STEP) -> float:
    """``dk/dL = -(dR/dL) / (dR/dk)`` for the dephased proxy ``R`` at a root ``k``.

    Falls back to differencing the roots at ``L +- h`` when ``dR/dk`` vanishes
    to rounding (roots sitting on the lead-factor pole lattice).
    """
    kk = np.array([k])
    c = real_coefficients(graph, kk)
    dRdL = (proxy(graph, kind(L + h), kk, c=c)[0][0] - proxy(graph, kind(L - h), kk, c=c)[0][0]) / (2 * h)
    bm = kind(L)
    Rk, nrm = proxy(graph, bm, np.array([k + h, k, k - h]))
    dRdk = (Rk[0] - Rk[2]) / (2 * h)
    if abs(dRdk) > 1e-6 * nrm[1]:
        return float(-dRdL / dRdk)
    roots = []
    for Ls in (L + h, L - h):
        rs = scan_real_roots(graph, kind(Ls), (k - 1e-4, k + 1e-4), grid_density=1e6)
        if len(rs) == 0:
            return float("nan")
        roots.append(rs.roots[np.argmin(np.abs(rs.roots - k))])
    return float((roots[0] - roots[1]) / (2 * h))


def spectral_map(graph: MetricGraph, bm_family, L_grid, k_window, grid_density: float | None = None, *,
                 workers: int | None = None) -> SpectralMap:
    """Cut-off eigenvalues over a grid of cut-off lengths, with implicit slopes.

    The coefficients of the secular determinant do not depend on ``L``, so
    they are computed once on the scan grid and shared by all columns.
    Columns that raise a numeric error are logged and skipped.
    """
    kind = _cut_kind(bm_family)
    L_grid = np.asarray(L_grid, dtype=float).ravel()
    if np.any(L_grid <= 0) or not np.all(np.isfinite(L_grid)):
        raise ParameterError("cut-off lengths must be positive and finite")
    lo, hi = float(k_window[0]), max(float(k_window[1]), float(k_window[0]))
    meta = {"family": graph.family, "params": graph.params.to_dict() if graph.params else None,
            "boundary": kind.__name__, "k_window": (lo, hi)}
    if len(L_grid) == 0 or hi <= lo:
        return SpectralMap(L_grid, np.empty((0, 3)), meta)
    if lo <= 0:
        lo = 1e-3
    if grid_density is None:
        grid_density = DEFAULT_DENSITY * max(1.0, float(L_grid.max()), graph.total_length)
    ks = scan_grid(lo, hi, grid_density)
    c_grid = real_coefficients(graph, ks)

    def column(L):
        try:
            rs = scan_on_grid(graph, kind(L), ks, c_grid, grid_density)
            return [(L, k, implicit_slope(graph, kind, L, k)) for k in rs.roots]
        except NumericError as exc:
            log.warning("skipping L=%g: %s", L, exc)
            return None

    n = thread_count() if workers is None else workers
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            cols = list(pool.map(column, L_grid))
    else:
        cols = [column(L) for L in L_grid]
    skipped = tuple(float(L) for L, col in zip(L_grid, cols) if col is None)
    rows = [r for col in cols if col for r in col]
    pts = np.array(rows, dtype=float).reshape(-1, 3)
    if len(pts):
        pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    return SpectralMap(L_grid, pts, meta, skipped)


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------

def bound_states(graph: MetricGraph, bm: BoundaryModel | None, kappa_window,
                 grid_density: float | None = None) -> RealRootSet:
    """Roots ``kappa > 0`` of ``F(i kappa; bm)``; the eigenvalues are ``-kappa^2``.

    The determinant is continued to imaginary momentum as is, so the lead
    factor becomes ``i`` (open) or ``i coth kappa L`` (Dirichlet cut) and is
    never singular for ``kappa > 0``.
    """
    bm = Open() if bm is None else bm
    lo, hi = float(kappa_window[0]), float(kappa_window[1])
    if lo <= 0:
        lo = 1e-3
    if hi <= lo:
        return RealRootSet((lo, hi), np.empty(0), np.empty(0))
    if grid_density is None:
        grid_density = DEFAULT_DENSITY * max(1.0, graph.total_length)
    ks = scan_grid(lo, hi, grid_density)

    def f(x):
        v, s = dephased_values(graph, 1j * np.asarray(x, dtype=float), bm, with_scale=True)
        return v.real, s

    vals, scale = f(ks)
    roots = real_zeros(ks, vals, scale, lambda x: float(f(np.array([x]))[0][0]), grid_density)
    residuals = []
    for r in roots:
        v, s = f(np.array([r - 2 / grid_density, r, r + 2 / grid_density]))
        residuals.append(abs(v[1]) / s.max())
    roots, residuals = _dedup(roots, residuals, lo, hi)
    return RealRootSet((lo, hi), roots, residuals)


# ---------------------------------------------------------------------------
# Re F / Im F bracket lines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BracketLines:
    """Real zeros of the dephased real and imaginary parts of ``F(k; Open)``.

    ``im_identically_zero`` is set when ``F / w`` has no odd coefficients, in
    which case ``im_zeros`` is empty.  ``analytic_im_zeros`` holds the
    closed-form zeros of the cross family (empty for other families).
    """

    window: tuple[float, float]
    re_zeros: np.ndarray
    im_zeros: np.ndarray
    analytic_im_zeros: np.ndarray
    im_identically_zero: bool = False


def open_parts(graph: MetricGraph, k, c=None):
    """``(Re, Im, norm)`` of ``F(k; Open) / w`` from the dephased coefficients."""
    k = np.asarray(k, dtype=float)
    d = _degree(graph)
    c = (real_coefficients(graph, k) if c is None else c)[..., :d + 1].real
    j = np.arange(d + 1)
    sign = np.where((j // 2) % 2 == 0, 1.0, -1.0)
    re = (c * sign * (j % 2 == 0)).sum(axis=-1)
    im = (c * sign * (j % 2 == 1)).sum(axis=-1)
    return re, im, np.abs(c).sum(axis=-1) + np.finfo(float).tiny


def _cross_im_zeros(graph: MetricGraph, lo: float, hi: float) -> np.ndarray:
    if graph.family != "cross" or graph.params is None:
        return np.empty(0)
    l, lam = graph.params.l, graph.params.lam
    out = []
    for s in (1 + lam, 1 - lam):
        if s * l <= 0:
            continue
        step = np.pi / (l * s)
        m = np.arange(np.ceil(lo / step), np.floor(hi / step) + 1)
        out.extend(m[m > 0] * step)
    return np.unique(np.round(np.array(out, dtype=float), 14))


def bracket_lines(graph: MetricGraph, k_window, grid_density: float | None = None) -> BracketLines:
    lo, hi = float(k_window[0]), float(k_window[1])
    lo = max(lo, 1e-3)
    if hi <= lo:
        e = np.empty(0)
        return BracketLines((lo, hi), e, e, e)
    if grid_density is None:
        grid_density = DEFAULT_DENSITY * max(1.0, graph.total_length)
    ks = scan_grid(lo, hi, grid_density)
    re, im, nrm = open_parts(graph, ks)

    def zeros(idx, vals):
        def g(x):
            return float(open_parts(graph, np.array([x]))[idx][0])
        found = real_zeros(ks, vals, nrm, g, grid_density)
        return _dedup(found, np.zeros(len(found)), lo, hi)[0]

    re_zeros = zeros(0, re)
    im_zero = bool(np.max(np.abs(im) / nrm) < 1e-14)
    im_zeros = np.empty(0) if im_zero else zeros(1, im)
    return BracketLines((lo, hi), re_zeros, im_zeros, _cross_im_zeros(graph, lo, hi), im_zero)


def lattice_crossings(graph: MetricGraph, center: float, half_width: float):
    """Where cut-off curves cross the lines ``tan kL = 0`` and ``cot kL = 0``.

    On ``tan kL = 0`` the Dirichlet lead factor is infinite and the condition
    reduces to ``c~_d(k) = 0``; on ``cot kL = 0`` it vanishes and the condition
    is ``c~_0(k) = 0``.  Neither depends on ``L``.  Returns the two sets of
    crossing momenta inside ``center +- half_width``.
    """
    lo, hi = max(center - half_width, 1e-3), center + half_width
    d = _degree(graph)
    grid_density = DEFAULT_DENSITY * max(1.0, graph.total_length, 1.0 / half_width)
    ks = scan_grid(lo, hi, grid_density)
    c = real_coefficients(graph, ks).real
    nrm = np.abs(c).sum(axis=-1) + np.finfo(float).tiny
    out = []
    for j in (d, 0):
        if np.max(np.abs(c[:, j]) / nrm) < 1e-14:
            out.append(np.empty(0))
            continue
        g = lambda x, j=j: float(real_coefficients(graph, np.array([x])).real[0, j])
        found = real_zeros(ks, c[:, j], nrm, g, grid_density)
        out.append(_dedup(found, np.zeros(len(found)), lo, hi)[0])
    return out[0], out[1]


@dataclass(frozen=True)
class BracketCheck:
    L: float
    tan_crossing: float
    cot_crossing: float
    bracketed: bool


def bracketing_check(graph: MetricGraph, pole: complex, L_grid) -> list[BracketCheck]:
    """For each ``L``, the crossings nearest ``Re pole`` within one pole spacing ``pi/L``.

    Grid points where either crossing is missing from the local window are omitted.
    """
    x0 = float(np.real(pole))
    checks = []
    for L in np.asarray(L_grid, dtype=float):
        tan_k, cot_k = lattice_crossings(graph, x0, np.pi / L)
        if len(tan_k) == 0 or len(cot_k) == 0:
            continue
        t = float(tan_k[np.argmin(np.abs(tan_k - x0))])
        c = float(cot_k[np.argmin(np.abs(cot_k - x0))])
        checks.append(BracketCheck(float(L), t, c, min(t, c) < x0 < max(t, c)))
    return checks


# ---------------------------------------------------------------------------
# width diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WidthReport:
    """Lorentzian fit ``(a (k - delta) + b) / ((k - delta)^2 + eta^2)`` of ``Re 1/F``."""

    pole: complex
    delta: float
    eta: float
    amplitude: tuple[float, float]
    nearest_re_zero: float | None
    fit_rms: float
    genuine_eigenvalue: bool = False
    inconclusive: bool = False
    message: str = ""

    def agrees(self, center_tol: float = 0.05, width_rtol: float = 0.5) -> bool:
        if self.inconclusive:
            return False
        if self.genuine_eigenvalue:
            return abs(self.pole.imag) < 1e-10 and abs(self.delta - self.pole.real) < center_tol
        return (abs(self.delta - self.pole.real) < center_tol
                and abs(self.eta + self.pole.imag) < width_rtol * abs(self.pole.imag))


def _lorentz(x, a, b, delta, eta):
    u = x - delta
    return (a * u + b) / (u * u + eta * eta)


def width_diagnostic(target, pole: complex, k_window=None) -> WidthReport:
    """Compare a pole with the Lorentzian shape of ``Re 1/F`` on the real axis.

    ``target`` is a :class:`MetricGraph` (open leads, dephased) or any
    vectorized callable ``F(k)``.  The default window is ``Re k0 +- 5 |Im k0|``.
    """
    pole = complex(pole)
    if abs(pole.imag) >= 0.5:
        raise ParameterError("width diagnostic needs |Im k0| < 0.5")
    if isinstance(target, MetricGraph):
        graph = target

        def F(k):
            return dephased_values(graph, np.asarray(k, dtype=complex), Open())

        def re_part(x):
            return open_parts(graph, x)[0]
    else:
        F = target

        def re_part(x):
            return np.real(F(np.asarray(x, dtype=float)))

    x0, w = pole.real, abs(pole.imag)
    half = 5 * w if k_window is None else 0.5 * (k_window[1] - k_window[0])
    centre = x0 if k_window is None else 0.5 * (k_window[0] + k_window[1])
    nearest = _nearest_zero(re_part, x0, max(half, 0.5))
    if w < 1e-12:
        return WidthReport(pole, x0, 0.0, (0.0, 0.0), nearest, 0.0, genuine_eigenvalue=True,
                           message="pole on the real axis")
    x = np.linspace(centre - half, centre + half, WIDTH_SAMPLES)
    with np.errstate(all="ignore"):
        y = np.real(1.0 / np.asarray(F(x), dtype=complex))
    if not np.all(np.isfinite(y)):
        return WidthReport(pole, np.nan, np.nan, (np.nan, np.nan), nearest, np.inf, inconclusive=True,
                           message="Re 1/F not finite on the window")
    ys = np.max(np.abs(y))
    y = y / ys
    # amplitude guess by linear least squares at the pole's own centre and width
    basis = np.stack([_lorentz(x, 1, 0, x0, w), _lorentz(x, 0, 1, x0, w)], axis=1)
    (a0, b0), *_ = np.linalg.lstsq(basis, y, rcond=None)
    res = optimize.least_squares(lambda p: _lorentz(x, *p) - y, [a0, b0, x0, w],
                                 bounds=([-np.inf, -np.inf, x[0], 0.0], [np.inf, np.inf, x[-1], np.inf]),
                                 x_scale="jac", xtol=1e-14, ftol=1e-14, gtol=1e-14)
    a, b, delta, eta = res.x
    rms = float(np.sqrt(np.mean(res.fun ** 2)))
    inconclusive = bool((not res.success) or rms > 0.05)
    genuine = bool((not inconclusive) and eta < 1e-8 * max(1.0, abs(x0)))
    msg = "" if not inconclusive else f"poor Lorentzian fit (rms {rms:.3g})"
    return WidthReport(pole, float(delta), float(eta), (float(a * ys), float(b * ys)), nearest, rms,
                       genuine_eigenvalue=genuine, inconclusive=inconclusive, message=msg)


def _nearest_zero(fun: Callable, x0: float, half: float, n: int = 2001) -> float | None:
    x = np.linspace(x0 - half, x0 + half, n)
    y = fun(x)
    flips = np.flatnonzero(np.sign(y[:-1]) * np.sign(y[1:]) <= 0)
    if len(flips) == 0:
        return None
    roots = []
    for i in flips:
        if y[i] == 0:
            roots.append(x[i])
            continue
        roots.append(optimize.brentq(lambda t: float(fun(np.array([t]))[0]), x[i], x[i + 1], xtol=1e-14))
    roots = np.array(roots)
    return float(roots[np.argmin(np.abs(roots - x0))])
