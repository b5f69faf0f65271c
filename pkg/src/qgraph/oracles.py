"""Hand-derived closed-form conditions for the built-in families.

These are written out term by term, without touching the determinant code,
so they can cross-check it.  Each evaluator returns a complex value whose
zero set is the spectral (cut-off) or resonance (open) condition; they differ
from the determinant by nonvanishing factors, so only zero sets compare.

Cut-off evaluators accept ``lead_factor`` to override ``-cot kL`` with any
formal value; passing ``1j`` must reproduce the resonance evaluator for the
loop, cross and T-graph families (not for the special cross, whose
coefficients mix powers of the lead factor).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import ParameterError
from .graph import GraphParameters

VARIANTS = ("resonance", "cutoff", "hyperbolic")


@dataclass(frozen=True)
class ClosedFormCondition:
    family: str
    params: GraphParameters
    variant: str
    L: float | None
    evaluator: Callable

    def __call__(self, k):
        return self.evaluator(np.asarray(k, dtype=complex))


def _cot(z):
    return np.cos(z) / np.sin(z)


def _coth(z):
    return np.cosh(z) / np.sinh(z)


def _lead(k, L, lead_factor):
    if lead_factor is not None:
        return lead_factor
    return -_cot(k * L)


def _need_L(variant, L):
    if variant in ("cutoff",) and L is None:
        raise ParameterError("cut-off variant needs a cut-off length L")
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}")


def loop_condition(params: GraphParameters, variant: str = "resonance", L: float | None = None,
                   lead_factor=None) -> ClosedFormCondition:
    """Loop with two leads: ``sin kl1 sin kl2 - 4k^2 b1 b2 sin^2 kl + k (b1 + b2) sin 2kl``.

    ``b_j`` is the inverse effective coupling ``1/beta_j``.
    """
    _need_L(variant, L)
    if variant == "hyperbolic":
        raise ParameterError("the loop family has no separate hyperbolic form; use k = i*kappa")
    l, lam = params.l, params.lam
    a = (params.alpha1_inv, params.alpha2_inv)
    at = (params.alpha1_tilde_inv, params.alpha2_tilde_inv)
    g2 = (abs(params.gamma1) ** 2, abs(params.gamma2) ** 2)

    def beta_inv(k, j):
        if variant == "resonance":
            return a[j] + 1j * k * g2[j] / (1 - 1j * k * at[j])
        t = _lead(k, L, lead_factor)
        # the cut-off form, written with t = -cot kL
        return a[j] + (k * g2[j] * t) / (1 - k * at[j] * t)

    def f(k):
        b1, b2 = beta_inv(k, 0), beta_inv(k, 1)
        return (np.sin(k * l * (1 - lam)) * np.sin(k * l * (1 + lam))
                - 4 * k ** 2 * b1 * b2 * np.sin(k * l) ** 2
                + k * (b1 + b2) * np.sin(2 * k * l))

    return ClosedFormCondition("loop", params, variant, L, f)


def cross_condition(params: GraphParameters, variant: str = "resonance", L: float | None = None,
                    lead_factor=None) -> ClosedFormCondition:
    """Cross: ``2k sin 2kl + (alpha - 2ik)(cos 2kl lam - cos 2kl)``; cut-off has ``alpha + 2k cot kL``.

    The hyperbolic variant is a function of ``kappa > 0`` (energy ``-kappa^2``):
    ``2 kappa sinh 2 kappa l + (alpha + 2 kappa t)(cosh 2 kappa l - cosh 2 kappa l lam)``
    with ``t = 1`` for open leads and ``t = coth kappa L`` for cut leads.
    """
    _need_L(variant, L)
    l, lam, alpha = params.l, params.lam, params.alpha

    if variant == "resonance":
        def f(k):
            return 2 * k * np.sin(2 * k * l) + (alpha - 2j * k) * (np.cos(2 * k * l * lam) - np.cos(2 * k * l))
    elif variant == "cutoff":
        def f(k):
            t = _lead(k, L, lead_factor)
            return 2 * k * np.sin(2 * k * l) + (alpha - 2 * k * t) * (np.cos(2 * k * l * lam) - np.cos(2 * k * l))
    else:
        def f(kappa):
            t = 1.0 if L is None else _coth(kappa * L)
            return (2 * kappa * np.sinh(2 * kappa * l)
                    + (alpha + 2 * kappa * t) * (np.cosh(2 * kappa * l) - np.cosh(2 * kappa * l * lam)))

    return ClosedFormCondition("cross", params, variant, L, f)


def tgraph_condition(params: GraphParameters, variant: str = "resonance", L: float | None = None,
                     lead_factor=None, *, rescaled=False) -> ClosedFormCondition:
    """T-graph: ``(alpha/k - i) sin kl1 sin kl2 + sin kl1 cos kl2 + sin kl2 cos kl1``.

    ``rescaled=True`` returns the strong-coupling limit ``sin kl1 sin kl2``
    (the condition divided by ``alpha/k`` as ``alpha -> infinity``).
    """
    _need_L(variant, L)
    if variant == "hyperbolic":
        raise ParameterError("T-graph hyperbolic form is obtained via k = i*kappa")
    l1, l2 = params.lengths
    alpha = params.alpha

    if rescaled:
        def f(k):
            return np.sin(k * l1) * np.sin(k * l2)
    elif variant == "resonance":
        def f(k):
            return ((alpha / k - 1j) * np.sin(k * l1) * np.sin(k * l2)
                    + np.sin(k * l1) * np.cos(k * l2) + np.sin(k * l2) * np.cos(k * l1))
    else:
        def f(k):
            t = _lead(k, L, lead_factor)
            # alpha/k + cot kL, i.e. alpha/k - t
            return ((alpha / k - t) * np.sin(k * l1) * np.sin(k * l2)
                    + np.sin(k * l1) * np.cos(k * l2) + np.sin(k * l2) * np.cos(k * l1))

    return ClosedFormCondition("tgraph", params, variant, L, f)


def special_cross_condition(params: GraphParameters, variant: str = "resonance", L: float | None = None,
                            lead_factor=None) -> ClosedFormCondition:
    """Cross with the explicit ``I + (-1-i)/4 J`` centre.

    Resonance: ``sin k(l1+l2) + 4k cos kl1 cos kl2 + 2i cos kl1 cos kl2``;
    cut-off: ``cot^2 kL (sin k(l1+l2) + 4k cos kl1 cos kl2) + 2 cot kL cos kl1 cos kl2``.
    """
    _need_L(variant, L)
    if variant == "hyperbolic":
        raise ParameterError("special cross hyperbolic form is obtained via k = i*kappa")
    l1, l2 = params.lengths

    if variant == "resonance":
        def f(k):
            cc = np.cos(k * l1) * np.cos(k * l2)
            return np.sin(k * (l1 + l2)) + 4 * k * cc + 2j * cc
    else:
        def f(k):
            cot = -_lead(k, L, lead_factor)
            cc = np.cos(k * l1) * np.cos(k * l2)
            return cot ** 2 * (np.sin(k * (l1 + l2)) + 4 * k * cc) + 2 * cot * cc

    return ClosedFormCondition("special_cross", params, variant, L, f)


def special_cross_coefficients(params: GraphParameters, k) -> np.ndarray:
    """Printed cut-off coefficients of ``(-cot kL)^j``: ``(0, -2 cc, S + 4k cc)``."""
    l1, l2 = params.lengths
    k = np.asarray(k, dtype=complex)
    cc = np.cos(k * l1) * np.cos(k * l2)
    return np.stack([np.zeros_like(k), -2 * cc, np.sin(k * (l1 + l2)) + 4 * k * cc], axis=-1)


def closed_form(family: str, params: GraphParameters, variant: str = "resonance",
                L: float | None = None, **kw) -> ClosedFormCondition:
    table = {
        "loop": loop_condition,
        "cross": cross_condition,
        "tgraph": tgraph_condition,
        "special_cross": special_cross_condition,
    }
    try:
        return table[family](params, variant, L, **kw)
    except KeyError:
        raise ParameterError(f"no closed form for family {family!r}") from None


def dense_scan_roots(f: Callable, lo: float, hi: float, step: float = 1e-4, *,
                     xtol: float = 1e-12, accept: float = 1e-6) -> np.ndarray:
    """Real roots of a real-valued closed form by sign changes on a fine grid.

    Brackets are refined with Brent's method; a bracket is kept only if the
    function is small at the refined point relative to its bracket values,
    which discards sign flips across poles.
    """
    n = int(np.ceil((hi - lo) / step)) + 1
    x = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        y = np.real(f(x))
    ok = np.isfinite(y)
    flips = np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(y[:-1]) * np.sign(y[1:]) < 0))
    roots = [x[i] for i in np.flatnonzero(ok & (y == 0))]
    g = lambda t: float(np.real(f(np.array([t]))[0]))
    for i in flips:
        r = optimize.brentq(g, x[i], x[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)
        ref = max(abs(y[i]), abs(y[i + 1]), 1.0)
        if abs(g(r)) <= accept * ref:
            roots.append(r)
    return np.unique(np.round(np.asarray(roots, dtype=float), 13))


def grid_newton_roots(f: Callable, re_range, im_range, n_re: int = 120, n_im: int = 40,
                      tol: float = 1e-13) -> np.ndarray:
    """Complex zeros of a closed form: local minima of ``|f|`` on a grid, polished by secant steps."""
    xr = np.linspace(*re_range, n_re)
    xi = np.linspace(*im_range, n_im)
    Z = xr[None, :] + 1j * xi[:, None]
    with np.errstate(all="ignore"):
        A = np.abs(f(Z))
    A = np.where(np.isfinite(A), A, np.inf)
    # pad with +inf so that minima on the boundary rows and columns count too
    Ap = np.pad(A, 1, constant_values=np.inf)
    is_min = np.ones_like(A, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= A <= Ap[1 + di:1 + di + n_im, 1 + dj:1 + dj + n_re]
    found = []
    for i, j in zip(*np.nonzero(is_min & np.isfinite(A))):
        z = _secant(f, Z[i, j], tol)
        if z is not None and re_range[0] <= z.real <= re_range[1] and im_range[0] <= z.imag <= im_range[1]:
            found.append(z)
    out = []
    for z in sorted(found, key=lambda c: (c.real, c.imag)):
        if not out or min(abs(z - o) for o in out) > 1e-8:
            out.append(z)
    return np.array(out, dtype=complex)


def _secant(f, z0, tol, maxiter=80):
    z1 = z0 + 1e-4
    f0, f1 = complex(f(np.array([z0]))[0]), complex(f(np.array([z1]))[0])
    for _ in range(maxiter):
        if f1 == f0:
            break
        z2 = z1 - f1 * (z1 - z0) / (f1 - f0)
        z0, f0 = z1, f1
        z1, f1 = z2, complex(f(np.array([z2]))[0])
        if abs(z1 - z0) < tol * max(1.0, abs(z1)):
            return z1 if abs(f1) < 1e-8 * max(1.0, abs(z1)) else None
    return None
