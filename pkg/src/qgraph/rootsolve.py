"""Real eigenvalue scans, complex pole search and parameter continuation.

Real scans work on the pole-free proxy ``R_d(k) = p^d F / w`` where ``d`` is
the effective degree of ``F`` in the lead factor, ``(p, q)`` the pole-free
pair of the boundary model and ``w`` the constant phase that makes ``F``
real on the real axis.  ``R_d`` is built from the extracted coefficients,
so it is entire and never divides by a small number.  Its zeros are those
of ``F`` plus possibly points of the pole lattice, which are sorted out with
a local Laurent expansion of ``F``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage, optimize

from .errors import (BoundaryZeroError, ConvergenceError, NumericError, ParameterError,
                     TrajectoryBreakError)
from .graph import GraphParameters, MetricGraph, builtin_graph
from .secular import (BoundaryModel, Open, coefficients, effective_degree, fd_step,
                      reference_phase, row_scale, secular_matrix, secular_values)

log = logging.getLogger(__name__)

ROOT_XTOL = 1e-13
DEDUP_TOL = 1e-10
POLE_NEIGHBOURHOOD = 1e-5
MIN_RESIDUAL = 1e-10
DEFAULT_DENSITY = 200.0
K_MIN = 1e-3


# ---------------------------------------------------------------------------
# real proxy
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def _degree(graph: MetricGraph) -> int:
    return effective_degree(graph)


def real_coefficients(graph: MetricGraph, k) -> np.ndarray:
    """Dephased lead-factor coefficients ``c_j(k) / w`` (real for real ``k``)."""
    c = coefficients(graph, k, check=False) / reference_phase(graph)
    return c


def proxy(graph: MetricGraph, bm: BoundaryModel, k, *, real=True, c=None):
    """``(R_d(k), norm(k))`` with ``norm`` the sum of term magnitudes.

    ``c`` may supply precomputed dephased coefficients at ``k`` (only the
    boundary model then enters).
    """
    k = np.asarray(k, dtype=float if real else complex)
    d = _degree(graph)
    c = (real_coefficients(graph, k) if c is None else c)[..., :d + 1]
    p, q = bm.pair(k)
    j = np.arange(d + 1)
    terms = c * q[..., None] ** j * p[..., None] ** (d - j)
    val = terms.sum(axis=-1)
    nrm = np.abs(terms).sum(axis=-1) + np.finfo(float).tiny
    return (val.real if real else val), nrm


@dataclass(frozen=True)
class RealRootSet:
    window: tuple[float, float]
    roots: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.roots)


def _pole_spacing(bm: BoundaryModel) -> float:
    return np.pi / bm.length if bm.length > 0 else np.inf


def laurent_coefficients(fun, center: complex, radius: float, n: int = 64):
    """Laurent coefficients ``a_m`` (``m = -n/2 .. n/2-1``) on a circle, by FFT.

    Returns ``(m, a, fmax)``.
    """
    theta = 2 * np.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * theta)
    vals = np.asarray(fun(z), dtype=complex)
    b = np.fft.fft(vals) / n  # b[m] = a_m radius^m for m >= 0, wraps for m < 0
    m = np.fft.fftfreq(n, 1.0 / n).astype(int)
    order = np.argsort(m)
    m, b = m[order], b[order]
    a = b / radius ** m.astype(float)
    return m, a, float(np.max(np.abs(vals)))


def local_real_roots(fun, center: float, radius: float, *, n: int = 64, rtol: float = 1e-11):
    """Real zeros of a meromorphic ``fun`` within ``radius/2`` of ``center``.

    ``fun`` may have a pole at ``center``; it must be analytic elsewhere in the
    closed disk of ``radius``.
    """
    m, a, fmax = laurent_coefficients(fun, center, radius, n)
    b = np.abs(a) * radius ** m.astype(float)
    keep = b > rtol * fmax
    if not keep.any():
        return np.array([]), fmax
    lo = int(m[keep].min())
    hi = int(m[keep].max())
    lo = min(lo, 0)
    sel = (m >= lo) & (m <= hi)
    # fun(w) * w^{-lo} is a polynomial in w = k - center
    poly = a[sel][::-1]
    w = np.roots(poly) if len(poly) > 1 else np.array([])
    w = w[(np.abs(w) < radius / 2) & (np.abs(w.imag) < 1e-7 * radius)]
    return center + np.sort(w.real), fmax


def _f_of(graph, bm):
    def f(z):
        return secular_values(graph, z, bm) / reference_phase(graph)
    return f


def real_zeros(ks, vals, nrm, g, grid_density) -> list:
    """Zeros of a real function sampled as ``vals`` on the grid ``ks``.

    Sign changes are refined with Brent's method; local minima of ``|vals|``
    without a sign change are minimized and kept if they reach zero relative
    to the local magnitude envelope of ``nrm`` (even-order zeros).
    """
    # local magnitude envelope: individual terms may all vanish at a root
    env = ndimage.maximum_filter1d(nrm, size=2 * max(int(grid_density / 2), 1) + 1, mode="nearest")
    a = np.abs(vals) / env
    out = list(ks[vals == 0])
    flips = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    for i in flips:
        out.append(optimize.brentq(g, ks[i], ks[i + 1], xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps))
    mins = np.flatnonzero((a[1:-1] < a[:-2]) & (a[1:-1] < a[2:])) + 1
    for i in mins:
        if np.sign(vals[i - 1]) != np.sign(vals[i]) or np.sign(vals[i + 1]) != np.sign(vals[i]):
            continue
        s = env[i]
        res = optimize.minimize_scalar(lambda x: abs(g(x)) / s, bounds=(ks[i - 1], ks[i + 1]),
                                       method="bounded", options={"xatol": 1e-14})
        if res.fun < MIN_RESIDUAL:
            out.append(float(res.x))
    return out


def _dedup(roots, residuals, lo, hi):
    order = np.argsort(roots)
    roots = np.asarray(roots, dtype=float)[order]
    residuals = np.asarray(residuals, dtype=float)[order]
    inside = (roots >= lo) & (roots <= hi)
    roots, residuals = roots[inside], residuals[inside]
    if len(roots) > 1:
        keep = np.concatenate([[True], np.diff(roots) > DEDUP_TOL])
        roots, residuals = roots[keep], residuals[keep]
    return roots, residuals


def scan_real_roots(graph: MetricGraph, bm: BoundaryModel, window, grid_density: float | None = None,
                    ) -> RealRootSet:
    """Real zeros of ``F(k; bm)`` in ``window`` for a cut-off (or real explicit) lead model."""
    if isinstance(bm, Open):
        raise ParameterError("real scans need a cut-off boundary model; open leads have complex poles")
    lo, hi = float(window[0]), float(window[1])
    if lo <= 0:
        warnings.warn(f"window starts at k={lo}; shrinking to k={K_MIN}", stacklevel=2)
        lo = K_MIN
    if hi <= lo:
        return RealRootSet((lo, hi), np.empty(0), np.empty(0))
    if grid_density is None:
        grid_density = DEFAULT_DENSITY * max(1.0, bm.length, graph.total_length)
    ks = scan_grid(lo, hi, grid_density)
    return scan_on_grid(graph, bm, ks, None, grid_density)


def scan_grid(lo: float, hi: float, grid_density: float) -> np.ndarray:
    n = max(int(np.ceil((hi - lo) * grid_density)), 8) + 1
    return np.linspace(lo, hi, n)


def scan_on_grid(graph: MetricGraph, bm: BoundaryModel, ks: np.ndarray, c_grid, grid_density: float,
                 ) -> RealRootSet:
    """Real-root scan on a prepared grid; ``c_grid`` caches coefficients on ``ks`` (or ``None``)."""
    lo, hi = float(ks[0]), float(ks[-1])

    def g(x):
        return float(proxy(graph, bm, np.array([x]))[0][0])

    def scale_at(x):
        s = proxy(graph, bm, x + np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) / grid_density)[1]
        return float(np.max(s))

    vals, nrm = proxy(graph, bm, ks, c=c_grid)
    candidates = real_zeros(ks, vals, nrm, g, grid_density)

    d = _degree(graph)
    spacing = _pole_spacing(bm)
    roots, residuals, poles_done = [], [], set()
    for r in candidates:
        near = bm.poles_in(r - POLE_NEIGHBOURHOOD, r + POLE_NEIGHBOURHOOD) if d >= 1 else []
        if len(near):
            kp = float(near[0])
            if kp in poles_done:
                continue
            poles_done.add(kp)
            radius = min(0.2 * spacing, 0.05)
            local, _ = local_real_roots(_f_of(graph, bm), kp, radius)
            for x in local:
                roots.append(float(x))
                residuals.append(abs(g(x)) / scale_at(x))
            continue
        roots.append(float(r))
        residuals.append(abs(g(r)) / scale_at(r))

    roots, residuals = _dedup(roots, residuals, lo, hi)
    return RealRootSet((lo, hi), roots, residuals)


# ---------------------------------------------------------------------------
# complex roots
# ---------------------------------------------------------------------------

_XGK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                 0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                 0.207784955007898467600689403773245, 0.0])
_WGK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                 0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                 0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def log_derivative(graph: MetricGraph, bm: BoundaryModel, z) -> np.ndarray:
    """``F'/F`` by central differences with ``h = 1e-6 max(1, |z|)``."""
    z = np.asarray(z, dtype=complex)
    h = 1e-6 * np.maximum(1.0, np.abs(z))
    F = secular_values(graph, np.concatenate([z, z + h, z - h]), bm)
    f0, fp, fm = F[:len(z)], F[len(z):2 * len(z)], F[2 * len(z):]
    return (fp - fm) / (2 * h) / f0


@dataclass(frozen=True)
class Rectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ParameterError(f"degenerate rectangle {self}")

    @property
    def corners(self):
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def contains(self, z, pad=0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def split(self, frac=0.5):
        w, h = self.re_max - self.re_min, self.im_max - self.im_min
        if w >= h:
            x = self.re_min + frac * w
            return (Rectangle(self.re_min, x, self.im_min, self.im_max),
                    Rectangle(x, self.re_max, self.im_min, self.im_max))
        y = self.im_min + frac * h
        return (Rectangle(self.re_min, self.re_max, self.im_min, y),
                Rectangle(self.re_min, self.re_max, y, self.im_max))

    def jittered(self, eps):
        return Rectangle(self.re_min - eps, self.re_max + 0.7 * eps, self.im_min - 0.3 * eps, self.im_max + eps)

    @property
    def diameter(self):
        return float(np.hypot(self.re_max - self.re_min, self.im_max - self.im_min))


def _as_rect(region) -> Rectangle:
    if isinstance(region, Rectangle):
        return region
    a, b, c, d = region
    return Rectangle(float(a), float(b), float(c), float(d))


def _segment_integral(fun, a: complex, b: complex, tol: float, max_panels: int = 4000):
    """Adaptive Gauss-Kronrod (7/15) integral of ``fun`` along the segment ``a -> b``."""
    length = abs(b - a)
    n0 = max(4, int(np.ceil(4 * length)))
    edges = np.linspace(0.0, 1.0, n0 + 1)
    panels = list(zip(edges[:-1], edges[1:]))
    done_total, done_err = 0j, 0.0
    while panels:
        t0 = np.array([p[0] for p in panels])
        t1 = np.array([p[1] for p in panels])
        mid, half = (t0 + t1) / 2, (t1 - t0) / 2
        t = mid[:, None] + half[:, None] * _NODES[None, :]
        z = a + (b - a) * t
        vals = fun(z.ravel()).reshape(z.shape) * (b - a)
        k15 = (vals * _WK).sum(axis=1) * half
        g7 = (vals * _WG15).sum(axis=1) * half
        err = np.abs(k15 - g7)
        if not np.all(np.isfinite(vals)):
            raise BoundaryZeroError("non-finite log-derivative on the contour (zero on the boundary?)")
        budget = tol * (t1 - t0)
        ok = err <= budget
        done_total += k15[ok].sum()
        done_err += err[ok].sum()
        bad = [panels[i] for i in np.flatnonzero(~ok)]
        if len(bad) + len(panels) > max_panels:
            raise BoundaryZeroError("contour quadrature did not converge (zero close to the boundary?)")
        panels = []
        for lo, hi in bad:
            m = (lo + hi) / 2
            if hi - lo < 1e-12:
                raise BoundaryZeroError("contour quadrature panel underflow (zero on the boundary?)")
            panels += [(lo, m), (m, hi)]
    return done_total, done_err


def contour_moments(graph: MetricGraph, bm: BoundaryModel, region, orders=(0,), tol: float = 1e-4):
    """``(1/2 pi i) \\oint z^m F'/F dz`` around the rectangle, for each ``m`` in ``orders``."""
    rect = _as_rect(region)
    cs = rect.corners

    out = []
    for m in orders:
        def fun(z, m=m):
            return z ** m * log_derivative(graph, bm, z)
        total = 0j
        for a, b in zip(cs, cs[1:] + cs[:1]):
            val, _ = _segment_integral(fun, a, b, tol / 4)
            total += val
        out.append(total / (2j * np.pi))
    return out


def count_zeros(graph: MetricGraph, bm: BoundaryModel | None, region) -> int:
    """Number of zeros of ``F`` inside the rectangle ``(re_min, re_max, im_min, im_max)``."""
    bm = Open() if bm is None else bm
    (w,) = contour_moments(graph, bm, region, (0,), tol=2 * np.pi * 1e-3)
    n = int(round(w.real))
    if abs(w - n) > 0.2:
        raise BoundaryZeroError(f"winding number {w:.4f} is not close to an integer")
    return n


@dataclass(frozen=True)
class RefinedRoot:
    k: complex
    residual: float
    iterations: int


def refine_root(graph: MetricGraph, bm: BoundaryModel | None, k0: complex, *, maxiter: int = 60) -> RefinedRoot:
    """Damped Newton iteration on ``F`` with a central-difference derivative."""
    bm = Open() if bm is None else bm
    k = complex(k0)

    def F(z):
        return complex(secular_values(graph, np.array([z]), bm)[0])

    fk = F(k)
    trace = [k]
    for it in range(1, maxiter + 1):
        if fk == 0:
            break
        h = fd_step(k)
        d = (F(k + h) - F(k - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            raise ConvergenceError(f"vanishing derivative at k={k}", trace)
        step = -fk / d
        for _ in range(9):
            kn = k + step
            try:
                fn = F(kn)
            except NumericError:
                fn = np.inf
            if abs(fn) < abs(fk) or abs(step) < 1e-12 * max(1.0, abs(k)):
                break
            step /= 2
        k, fk = kn, fn
        trace.append(k)
        if abs(step) < 1e-12 * max(1.0, abs(k)):
            break
    else:
        raise ConvergenceError(f"Newton did not converge from k0={k0}", trace)
    if not np.isfinite(fk):
        raise ConvergenceError(f"Newton diverged from k0={k0}", trace)
    scale = float(row_scale(secular_matrix(graph, np.array([k]), bm))[0])
    return RefinedRoot(k, abs(fk) / scale, len(trace) - 1)


@dataclass(frozen=True)
class ComplexRootSet:
    region: Rectangle
    roots: list
    count: int
    flags: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return self.count == len(self.roots) and not self.flags


def _count_with_jitter(graph, bm, rect, tries=5):
    eps = 1e-7 * max(1.0, rect.diameter)
    for t in range(tries):
        try:
            return count_zeros(graph, bm, rect), rect
        except BoundaryZeroError:
            rect = rect.jittered(eps * (1 + 3 * t))
    raise BoundaryZeroError(f"could not obtain an integer winding number for {rect}")


def find_complex_roots(graph: MetricGraph, bm: BoundaryModel | None, region, *, max_depth: int = 40,
                       ) -> ComplexRootSet:
    """All zeros of ``F`` in a rectangle: argument-principle bisection, then Newton.

    A cell holding exactly one zero is seeded with the first contour moment
    (the zero itself, up to quadrature error) before Newton polishing.
    """
    bm = Open() if bm is None else bm
    rect = _as_rect(region)
    if rect.re_min < K_MIN and rect.im_min <= 0 <= rect.im_max:
        # F vanishes at k = 0 for every graph in this parametrization
        warnings.warn(f"region touches k=0; raising re_min to {K_MIN}", stacklevel=2)
        if rect.re_max <= K_MIN:
            return ComplexRootSet(rect, [], 0, [])
        rect = Rectangle(K_MIN, rect.re_max, rect.im_min, rect.im_max)
    total, rect = _count_with_jitter(graph, bm, rect)
    flags = []
    found = []

    def solve(cell: Rectangle, count: int, depth: int):
        if count <= 0:
            return
        if count == 1:
            try:
                n0, m1 = contour_moments(graph, bm, cell, (0, 1))
                guess = m1 / n0 if abs(n0) > 0.5 else complex((cell.re_min + cell.re_max) / 2,
                                                               (cell.im_min + cell.im_max) / 2)
                r = refine_root(graph, bm, guess)
                if cell.contains(r.k, pad=1e-9 * max(1.0, abs(r.k))):
                    found.append(r)
                    return
            except (ConvergenceError, BoundaryZeroError):
                pass
        if depth >= max_depth or cell.diameter < 1e-9:
            centre = complex((cell.re_min + cell.re_max) / 2, (cell.im_min + cell.im_max) / 2)
            try:
                r = refine_root(graph, bm, centre)
                found.extend([r] * count)
                flags.append(f"unresolved cluster of {count} zeros near {centre}")
            except ConvergenceError:
                flags.append(f"lost {count} zeros near {centre}")
            return
        for frac in (0.5, 0.5 + 0.0618, 0.5 - 0.0382, 0.5 + 0.1459):
            a, b = cell.split(frac)
            try:
                na, nb = count_zeros(graph, bm, a), count_zeros(graph, bm, b)
            except BoundaryZeroError:
                continue
            if na + nb == count:
                break
        else:
            flags.append(f"count mismatch while splitting {cell}")
            return
        solve(a, na, depth + 1)
        solve(b, nb, depth + 1)

    solve(rect, total, 0)
    roots = []
    for r in sorted(found, key=lambda r: (r.k.real, r.k.imag)):
        if roots and abs(r.k - roots[-1].k) < 1e-9 * max(1.0, abs(r.k)) and not flags:
            flags.append(f"duplicate root {r.k}")
        roots.append(r)
    return ComplexRootSet(rect, [r.k for r in roots], total, flags)


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoleTrajectory:
    family: str
    params: GraphParameters
    lam: np.ndarray
    k: np.ndarray

    def __len__(self):
        return len(self.lam)

    def interpolate(self, lam):
        """Cubic interpolation of the pole position at parameter ``lam``."""
        from scipy.interpolate import CubicSpline
        order = np.argsort(self.lam)
        x = self.lam[order]
        if len(x) < 4:
            return np.interp(lam, x, self.k.real[order]) + 1j * np.interp(lam, x, self.k.imag[order])
        return CubicSpline(x, self.k.real[order])(lam) + 1j * CubicSpline(x, self.k.imag[order])(lam)


def continue_root(family: str, params: GraphParameters, bm: BoundaryModel | None, lam_start: float,
                  lam_end: float, k_start: complex, *, step: float = 0.01, max_step: float = 0.02,
                  min_step: float = 1e-6, jump: float = 0.08) -> PoleTrajectory:
    """Follow a zero of ``F`` while the asymmetry parameter moves from ``lam_start`` to ``lam_end``."""
    bm = Open() if bm is None else bm
    if not isinstance(params, GraphParameters):
        params = GraphParameters.from_mapping(params)

    def graph_at(lam):
        return builtin_graph(family, params.replace(lam=float(lam)))

    k0 = refine_root(graph_at(lam_start), bm, k_start).k
    lams, ks = [float(lam_start)], [k0]
    direction = np.sign(lam_end - lam_start)
    h = min(step, max_step)
    while direction != 0 and (lam_end - lams[-1]) * direction > 1e-15:
        lam_new = lams[-1] + direction * min(h, abs(lam_end - lams[-1]))
        if len(ks) >= 2:
            slope = (ks[-1] - ks[-2]) / (lams[-1] - lams[-2])
            pred = ks[-1] + slope * (lam_new - lams[-1])
        else:
            pred = ks[-1]
        ok = False
        try:
            r = refine_root(graph_at(lam_new), bm, pred).k
            ok = abs(r - ks[-1]) < jump and abs(r - pred) < 0.25 * jump
        except NumericError:
            pass
        if ok:
            lams.append(float(lam_new))
            ks.append(r)
            h = min(1.5 * h, max_step)
        else:
            h /= 2
            if h < min_step:
                raise TrajectoryBreakError(f"step underflow at lambda={lams[-1]}", (lams[-1], ks[-1]),
                                           list(zip(lams, ks)))
    return PoleTrajectory(family, params, np.array(lams), np.array(ks, dtype=complex))
