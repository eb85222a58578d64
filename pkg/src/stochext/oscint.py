"""High-frequency integrals  I(k, w) = int phi(t) exp(i k f(t, w)) dt.

Composite Gauss-Legendre on panels sized so that each holds a bounded number
of phase oscillations, with per-panel error control by comparing an order-p
rule against an order-2p rule.  The order-2p value is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import expr as ex
from .bump import BumpSpec, bump_eval, bump_expr, bump_mass
from .errors import PanelBudgetExceededError, StationaryPointInSupportError, ToleranceNotMetError

__all__ = [
    "QuadPlan", "QuadResult", "DecayFit", "gauss_legendre", "panel_edges", "phase_env",
    "max_abs_slope", "oscillatory_integral", "integrate_amplitude", "ibp_transform",
    "decay_exponent",
]


@dataclass(frozen=True)
class QuadPlan:
    order: int = 12
    tol: float = 1e-10
    max_panels: int = 200_000
    oscillations_per_panel: float = 2.0
    min_panels: int = 16

    def n_panels(self, k, slope, width):
        """Panel count for frequency ``k`` when the phase slope is at most ``slope``."""
        need = abs(k) * slope * width / (2.0 * math.pi * self.oscillations_per_panel)
        return max(self.min_panels, int(math.ceil(need)))


class QuadResult(NamedTuple):
    value: complex
    error: float
    panels: int


class DecayFit(NamedTuple):
    slope: float
    k: np.ndarray
    magnitude: np.ndarray
    truncated: bool


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights on [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def panel_edges(breakpoints, n_total):
    """Split consecutive breakpoints into about ``n_total`` panels, proportional to length.

    Every breakpoint is an edge; every segment gets at least one panel.
    """
    bp = np.asarray(breakpoints, dtype=float)
    width = bp[-1] - bp[0]
    edges = [bp[:1]]
    for lo, hi in zip(bp[:-1], bp[1:]):
        if hi <= lo:
            continue
        m = max(1, int(math.ceil(n_total * (hi - lo) / width)))
        edges.append(np.linspace(lo, hi, m + 1)[1:])
    out = np.concatenate(edges)
    out[-1] = bp[-1]
    return out


def phase_env(omega, t):
    env = {"t": t}
    for i, w in enumerate(np.atleast_1d(np.asarray(omega, dtype=float)) if omega is not None else ()):
        env[f"w{i + 1}"] = float(w)
    return env


def _fn(e, omega):
    def f(t):
        val = ex.evaluate(e, phase_env(omega, t))
        return np.broadcast_to(val, np.shape(t))
    return f


def max_abs_slope(f, omega, support, n=2048):
    """max |df/dt| sampled on ``n`` points of ``support``."""
    ft = ex.diff(f, "t", 1)
    t = np.linspace(support[0], support[1], n)
    return float(np.max(np.abs(_fn(ft, omega)(t))))


def _panel_sums(amp, phase, k, left, right, order):
    x, w = gauss_legendre(order)
    half = 0.5 * (right - left)[:, None]
    t = 0.5 * (right + left)[:, None] + half * x[None, :]
    vals = amp(t) * np.exp(1j * k * phase(t))
    return (vals * (half * w[None, :])).sum(axis=1), (np.abs(amp(t)) * (half * w[None, :])).sum(axis=1)


def _adaptive(amp, phase, k, breakpoints, plan, slope):
    width = breakpoints[-1] - breakpoints[0]
    edges = panel_edges(breakpoints, plan.n_panels(k, slope, width))
    left, right = edges[:-1], edges[1:]
    if len(left) > plan.max_panels:
        raise PanelBudgetExceededError(f"{len(left)} panels needed, budget {plan.max_panels}")
    _, l1 = _panel_sums(amp, phase, 0.0, left, right, 2 * plan.order)
    scale = max(float(l1.sum()), np.finfo(float).tiny)
    total = 0.0 + 0.0j
    err = 0.0
    count = 0
    min_len = width * 1e-9
    while len(left):
        lo, _ = _panel_sums(amp, phase, k, left, right, plan.order)
        hi, mag = _panel_sums(amp, phase, k, left, right, 2 * plan.order)
        diff = np.abs(hi - lo)
        allowed = np.maximum(plan.tol * scale * (right - left) / width, 64 * np.finfo(float).eps * mag)
        ok = diff <= allowed
        stuck = ~ok & ((right - left) < min_len)
        if np.any(stuck):
            raise ToleranceNotMetError(
                f"panel refinement stalled; achieved error {err + diff.sum():.3e}",
                achieved=(err + float(diff.sum())) / scale)
        total += hi[ok].sum()
        err += float(diff[ok].sum())
        count += int(ok.sum())
        left, right = left[~ok], right[~ok]
        if len(left):
            mid = 0.5 * (left + right)
            left, right = np.concatenate([left, mid]), np.concatenate([mid, right])
            if count + len(left) > plan.max_panels:
                raise PanelBudgetExceededError(
                    f"panel budget {plan.max_panels} exceeded at k={k}")
    return QuadResult(complex(total), err, count)


def integrate_amplitude(amplitude, f, omega, breakpoints, k, plan=None, full_output=False):
    """int amplitude(t) exp(i k f(t, w)) dt over [breakpoints[0], breakpoints[-1]].

    ``amplitude`` is an Expr in t (and w) or a vectorized callable of t.
    """
    plan = plan or QuadPlan()
    if k < 0:
        res = integrate_amplitude(amplitude, f, omega, breakpoints, -k, plan, True)
        res = QuadResult(res.value.conjugate(), res.error, res.panels)
        return res if full_output else res.value
    amp = _fn(amplitude, omega) if isinstance(amplitude, ex.Expr) else amplitude
    phase = _fn(f, omega)
    bp = tuple(sorted(breakpoints))
    slope = max_abs_slope(f, omega, (bp[0], bp[-1])) if k else 0.0
    res = _adaptive(amp, phase, float(k), bp, plan, slope)
    return res if full_output else res.value


def oscillatory_integral(f, omega, bump: BumpSpec, k, plan=None, full_output=False):
    """I(k, w) with the cutoff ``bump`` as amplitude.

    ``f`` is the phase Expr; ``omega`` the values of w1..wn (empty for none).
    Returns the complex value, or a :class:`QuadResult` when ``full_output``.
    The error estimate is absolute; the tolerance is relative to int |phi|.
    """
    if k == 0:
        res = QuadResult(complex(bump_mass(bump), 0.0), 0.0, 0)
        return res if full_output else res.value
    return integrate_amplitude(lambda t: bump_eval(bump, t), f, omega, bump.breakpoints,
                               k, plan, full_output)


def ibp_transform(phi, f, n, support=None, omega=(), grid=2048, zero_tol=1e-9):
    """n-fold application of  L(phi) = -d/dt (phi / f_t).

    ``phi`` is an Expr or a :class:`BumpSpec` (converted with ``bump_expr``).
    Raises StationaryPointInSupportError when |f_t| < ``zero_tol`` on the grid
    or f_t changes sign between neighbouring grid points.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(phi, BumpSpec):
        support = support or phi.support
        phi = bump_expr(phi)
    if support is None:
        raise ValueError("support is required for an expression amplitude")
    ft = ex.diff(f, "t", 1)
    t = np.linspace(support[0], support[1], grid)
    ftv = _fn(ft, omega)(t)
    # a sign change between grid points is a zero the grid itself missed
    crossing = np.concatenate([np.sign(ftv[:-1]) * np.sign(ftv[1:]) < 0, [False]])
    bad = np.nonzero((np.abs(ftv) < zero_tol) | crossing)[0]
    if bad.size:
        raise StationaryPointInSupportError(
            f"f_t vanishes near t={t[bad[0]]:.6g} inside the support", t=float(t[bad[0]]))
    out = phi
    for _ in range(n):
        out = ex.neg(ex.diff(ex.div(out, ft), "t", 1))
    return out


def decay_exponent(f, bump, k_grid, omega=(), plan=None, full_output=False):
    """Least-squares slope of log|I(k)| against log k."""
    k = np.asarray(k_grid, dtype=float)
    if k.size < 5 or np.any(np.diff(k) <= 0) or k[0] <= 0:
        raise ValueError("need at least 5 increasing positive frequencies")
    mag = np.array([abs(oscillatory_integral(f, omega, bump, kk, plan)) for kk in k])
    keep = mag > 1e-300
    truncated = not keep.all()
    if truncated:
        cut = int(np.argmin(keep))
        k, mag = k[:cut], mag[:cut]
        if k.size < 2:
            raise ValueError("|I| underflowed on almost the whole grid")
    slope = float(np.polyfit(np.log(k), np.log(mag), 1)[0])
    fit = DecayFit(slope, k, mag, truncated)
    return fit if full_output else slope
