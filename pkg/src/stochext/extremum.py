"""Extremal range of a process from the winding of its characteristic curve.

The curve is lambda -> J(lambda) = E_w int phi(t) exp(i lambda xi(t, w)) dt
for 0 <= lambda <= k.  Its continuous argument theta(k) (the imaginary part
of the integral of dz/z along the curve) gives E(k) = theta(k) / k, whose
upper and lower limits bound the extremal values of xi.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .bump import BumpSpec, bump_eval
from .errors import DegenerateFitError, NumericalError, PanelBudgetExceededError, WindingAmbiguousError
from .oscint import QuadPlan, gauss_legendre, panel_edges
from .prob import Box, MonteCarlo

__all__ = [
    "CharacteristicFunction", "CurveTrace", "ExtremumEstimate", "default_k_grid",
    "trace_curve", "estimate", "no_extrema_test", "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("lambda", "re_J", "im_J", "abs_J", "theta_unwrapped", "E_of_lambda")
DIP = 1e-3
ZERO = 1e-13
MAX_DEPTH = 12
MAX_NODES = 30_000_000
CHUNK = 2_000_000
BLOCK = 96


def default_k_grid(k_max, size=24):
    """Geometric grid from k_max/16 to k_max."""
    return np.geomspace(k_max / 16.0, k_max, size)


def _t_nodes(breakpoints, panels, order):
    edges = panel_edges(breakpoints, panels)
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _expi(x):
    out = np.empty(x.shape, dtype=complex)
    np.cos(x, out=out.real)
    np.sin(x, out=out.imag)
    return out


@dataclass
class _Rule:
    xi: np.ndarray
    weight: np.ndarray
    error: float = 0.0

    def _dot(self, e):
        re, im = self.weight @ e.view(float).reshape(-1, 2)
        return complex(re, im)

    def block(self, lams):
        """J at sorted ``lams``; uniform runs advance exp(i lam xi) by multiplication."""
        lams = np.asarray(lams, dtype=float)
        if self.xi.size * len(lams) <= CHUNK or len(lams) < 3:
            ph = np.multiply.outer(lams, self.xi)
            return _expi(ph) @ self.weight.astype(complex)
        out = np.empty(len(lams), dtype=complex)
        e = _expi(lams[0] * self.xi)
        out[0] = self._dot(e)
        steps = []
        for j in range(1, len(lams)):
            d = lams[j] - lams[j - 1]
            factor = next((f for dd, f in steps if abs(dd - d) <= 1e-12 * abs(d)), None)
            if factor is None:
                factor = _expi(d * self.xi)
                steps = [(d, factor)] + steps[:2]
            e *= factor
            out[j] = self._dot(e)
        return out

    def __call__(self, lams):
        lams = np.asarray(lams, dtype=float)
        return np.concatenate([self.block(lams[s:s + BLOCK]) for s in range(0, len(lams), BLOCK)]
                              or [np.empty(0, complex)])


class CharacteristicFunction:
    """J(lambda) = int_Omega int phi(t) exp(i lambda xi(t, w)) dt dP(w).

    Tensor quadrature: composite Gauss-Legendre in t (and in w for Box
    models) sized for the upper edge of a sqrt(2)-wide frequency band, so
    low frequencies use cheap rules.  Each rule is checked at its band edge
    against a rule of twice the order and refined if the two disagree by
    more than ``plan.tol`` relative to int |phi| dP.
    """

    def __init__(self, process, model, bump: BumpSpec, plan=None, k_max=1.0):
        if model.dim != process.omega_dim:
            raise ValueError(f"model dimension {model.dim} != process omega_dim {process.omega_dim}")
        self.process = process
        self.model = model
        self.bump = bump
        self.plan = plan or QuadPlan()
        self.k_max = float(k_max)
        self.names = ["t"] + [f"w{i + 1}" for i in range(process.omega_dim)]
        lo, hi = bump.support
        t = np.linspace(lo, hi, 257)
        pts = model.support_points(33)
        env = self._env(t[:, None], pts[None, :, :])
        shape = (t.size, len(pts))
        self.xi_max = float(np.max(np.abs(np.broadcast_to(ex.evaluate(process.expr, env), shape))))
        slopes = []
        for name in self.names:
            d = ex.diff(process.expr, name, 1)
            slopes.append(float(np.max(np.abs(np.broadcast_to(ex.evaluate(d, env), shape)))))
        self.slope_t = slopes[0]
        self.slope_w = np.array(slopes[1:])
        self._rules = {}
        self.max_error = 0.0

    def _env(self, t, pts):
        env = {"t": t}
        for i in range(self.process.omega_dim):
            env[f"w{i + 1}"] = pts[..., i]
        return env

    def band(self, lam):
        """Upper edge of the frequency band containing ``lam``."""
        if lam > self.k_max:
            return float(lam)
        if lam <= 0:
            j = 60
        else:
            j = min(60, int(math.floor(2.0 * math.log2(self.k_max / lam))))
        return self.k_max * 2.0 ** (-j / 2.0)

    def _key(self, cap, refine):
        width = self.bump.support[1] - self.bump.support[0]
        nt = self.plan.n_panels(cap, self.slope_t, width) * refine
        if isinstance(self.model, Box):
            nw = tuple(p * refine for p in self.model.panels_for(
                cap * self.slope_w, self.plan.order, self.plan.oscillations_per_panel))
        else:
            nw = ()
        return nt, nw

    def _build(self, cap, refine, order):
        nt, nw = self._key(cap, refine)
        t, wt = _t_nodes(self.bump.breakpoints, nt, order)
        if isinstance(self.model, Box):
            pts, wp = self.model.rule(cap * self.slope_w, order, self.plan.oscillations_per_panel,
                                      refine)
        else:
            pts, wp = self.model.rule()
        if t.size * len(pts) > MAX_NODES:
            raise PanelBudgetExceededError(
                f"{t.size} x {len(pts)} quadrature nodes exceed the budget of {MAX_NODES}")
        xi = np.broadcast_to(ex.evaluate(self.process.expr, self._env(t[:, None], pts[None, :, :])),
                             (t.size, len(pts)))
        weight = np.outer(bump_eval(self.bump, t) * wt, wp)
        return _Rule(np.ascontiguousarray(xi).ravel(), weight.ravel())

    def rule(self, cap):
        if cap in self._rules:
            return self._rules[cap]
        order = self.plan.order
        for refine in (1, 2, 4, 8):
            base = self._build(cap, refine, order)
            check = self._build(cap, refine, 2 * order)
            scale = float(np.sum(np.abs(base.weight)))
            err = abs(base(np.array([cap]))[0] - check(np.array([cap]))[0])
            if err <= self.plan.tol * scale:
                break
        else:
            raise NumericalError(f"quadrature of J did not converge at lambda={cap} (error {err:.2e})")
        base.error = err
        self.max_error = max(self.max_error, err)
        self._rules[cap] = base
        return base

    def __call__(self, lams, threads=1):
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        out = np.empty(lams.size, dtype=complex)
        caps = np.array([self.band(abs(v)) for v in lams])
        groups = [(cap, np.nonzero(caps == cap)[0]) for cap in np.unique(caps)]
        for cap, _ in groups:
            self.rule(cap)

        # fixed-size blocks keep results bit-identical for any thread count
        pieces = [(cap, idx[s:s + BLOCK]) for cap, idx in groups for s in range(0, idx.size, BLOCK)]

        def work(item):
            cap, idx = item
            return idx, self._rules[cap].block(lams[idx])

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(work, pieces))
        else:
            results = [work(p) for p in pieces]
        for idx, vals in results:
            out[idx] = vals
        return out


@dataclass
class CurveTrace:
    """Samples of the characteristic curve with the unwrapped argument."""

    lam: np.ndarray
    J: np.ndarray
    theta: np.ndarray
    k_grid: np.ndarray
    k_max: float
    epsilon: float
    min_abs_J: float
    refinements: int
    quad_error: float
    xi_max: float

    @property
    def E(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.lam > 0, self.theta / np.where(self.lam > 0, self.lam, 1.0), np.nan)

    def index_of(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        idx = np.clip(np.searchsorted(self.lam, k), 0, len(self.lam) - 1)
        lower = np.clip(idx - 1, 0, len(self.lam) - 1)
        pick = np.where(np.abs(self.lam[lower] - k) < np.abs(self.lam[idx] - k), lower, idx)
        if not np.allclose(self.lam[pick], k, rtol=1e-12, atol=0):
            raise ValueError("requested frequencies are not on the traced grid")
        return pick

    def theta_at(self, k):
        return self.theta[self.index_of(k)]

    def E_at(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return self.theta_at(k) / k

    def rows(self):
        E = self.E
        for lam, J, th, e in zip(self.lam, self.J, self.theta, E):
            yield (lam, J.real, J.imag, abs(J), th, e)

    def write_csv(self, fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])


def trace_curve(process, model, bump: BumpSpec, k_max=800.0, plan=None, k_grid=None,
                lambda_refine=1, threads=1, max_depth=MAX_DEPTH, cf=None):
    """Sample J on [0, k_max] and unwrap its argument.

    The base step is pi / (4 max|xi|) (divided by ``lambda_refine``).  Steps
    whose argument jumps by more than pi/2, or that pass through a dip
    |J| < 1e-3 |J(0)| with a jump above pi/8, are bisected up to
    ``max_depth`` times.  A jump still above pi/2 after that, or any
    |J| < 1e-13 |J(0)|, raises WindingAmbiguousError.
    """
    if not bump.normalized:
        raise ValueError("trace_curve needs a normalized bump")
    if k_max <= 0:
        raise ValueError("k_max must be positive")
    process.check_nonnegative(model.support_points(17))
    cf = cf or CharacteristicFunction(process, model, bump, plan, k_max)
    k_grid = default_k_grid(k_max) if k_grid is None else np.asarray(k_grid, dtype=float)
    if np.any(k_grid <= 0) or np.any(k_grid > k_max):
        raise ValueError("k_grid must lie in (0, k_max]")

    step = k_max / 64.0
    if cf.xi_max > 0:
        step = min(step, math.pi / (4.0 * cf.xi_max))
    step /= lambda_refine
    n = int(math.ceil(k_max / step))
    lam = np.unique(np.concatenate([np.linspace(0.0, k_max, n + 1), k_grid]))
    J = cf(lam, threads)
    J0 = J[0]
    if J0.imag != 0 or not J0.real > 0:
        raise NumericalError(f"J(0) = {J0} is not real and positive")

    depth = np.zeros(len(lam) - 1, dtype=int)
    inserted = 0
    ref = abs(J0)
    while True:
        mags = np.abs(J)
        if np.any(mags < ZERO * ref):
            bad = int(np.argmin(mags))
            raise WindingAmbiguousError(
                f"|J| = {mags[bad]:.3e} near lambda={lam[bad]:.6g}: winding undecidable",
                lam=float(lam[bad]))
        d = np.abs(np.angle(J[1:] * np.conj(J[:-1])))
        low = np.minimum(mags[:-1], mags[1:]) < DIP * ref
        need = (d > math.pi / 2) | (low & (d > math.pi / 8))
        stuck = need & (depth >= max_depth) & (d > math.pi / 2)
        if stuck.any():
            i = int(np.nonzero(stuck)[0][0])
            raise WindingAmbiguousError(
                f"argument jump {d[i]:.3f} rad persists on [{lam[i]:.9g}, {lam[i + 1]:.9g}] "
                f"after {max_depth} bisections (|J| = {mags[i]:.3e})", lam=float(lam[i]))
        need &= depth < max_depth
        if not need.any():
            break
        idx = np.nonzero(need)[0]
        mids = 0.5 * (lam[idx] + lam[idx + 1])
        Jm = cf(mids, threads)
        depth[idx] += 1
        lam = np.insert(lam, idx + 1, mids)
        J = np.insert(J, idx + 1, Jm)
        depth = np.insert(depth, idx + 1, depth[idx])
        inserted += idx.size

    theta = np.concatenate([[0.0], np.cumsum(np.angle(J[1:] * np.conj(J[:-1])))])
    return CurveTrace(lam=lam, J=J, theta=theta, k_grid=np.asarray(k_grid), k_max=float(k_max),
                      epsilon=bump.epsilon, min_abs_J=float(np.min(np.abs(J))),
                      refinements=inserted, quad_error=cf.max_error, xi_max=cf.xi_max)


@dataclass
class ExtremumEstimate:
    k: np.ndarray
    E: np.ndarray
    limit: float | None
    smax: float
    smin: float
    converged: bool
    intercept: float
    coefficient: float
    residual: float
    correction_exponent: float | None
    window_limits: np.ndarray
    epsilon: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "k": [float(v) for v in self.k],
            "E": [float(v) for v in self.E],
            "limit": self.limit,
            "smax": self.smax,
            "smin": self.smin,
            "converged": self.converged,
            "fit": {"intercept": self.intercept, "coefficient": self.coefficient,
                    "residual": self.residual, "correction_exponent": self.correction_exponent},
            "window_limits": [float(v) for v in self.window_limits],
            "epsilon": self.epsilon,
            **self.extras,
        }


def _fit(k, E):
    A = np.stack([np.ones_like(k), 1.0 / k], axis=1)
    (a, b), *_ = np.linalg.lstsq(A, E, rcond=None)
    resid = float(np.sqrt(np.mean((E - a - b / k) ** 2)))
    return float(a), float(b), resid


def estimate(trace: CurveTrace, k_grid=None, window=None):
    """Fit E(k) = a + b/k on the top half of ``k_grid`` and derive Smax/Smin.

    A residual below 1e-3 (1 + |a|) counts as convergence and sets
    smax = smin = a.  Otherwise smax/smin are the extremes of the same fit
    over sliding windows of the top half.
    """
    k = np.asarray(trace.k_grid if k_grid is None else k_grid, dtype=float)
    E = trace.E_at(k)
    top = slice(len(k) // 2, None)
    kt, Et = k[top], E[top]
    if kt.size < 4:
        raise DegenerateFitError(f"only {kt.size} points in the top half of the k grid; need 4")
    a, b, resid = _fit(kt, Et)
    w = window or max(4, kt.size // 2)
    wins = np.array([_fit(kt[i:i + w], Et[i:i + w])[0] for i in range(kt.size - w + 1)])
    converged = resid < 1e-3 * (1.0 + abs(a))
    if converged:
        smax = smin = a
    else:
        smax, smin = float(wins.max()), float(wins.min())

    dev = np.abs(Et - a)
    use = dev > 1e-12 * (1.0 + abs(a))
    exponent = None
    if use.sum() >= 3:
        exponent = float(np.polyfit(np.log(kt[use]), np.log(dev[use]), 1)[0])
    return ExtremumEstimate(k=k, E=E, limit=a if converged else None, smax=smax, smin=smin,
                            converged=converged, intercept=a, coefficient=b, residual=resid,
                            correction_exponent=exponent, window_limits=wins,
                            epsilon=trace.epsilon)


def no_extrema_test(est: ExtremumEstimate, tolerance: float):
    """True when E(k) converged to a limit within ``tolerance`` of zero."""
    verdict = bool(est.converged and abs(est.limit) <= tolerance)
    report = {
        "no_extrema": verdict,
        "tolerance": tolerance,
        "converged": est.converged,
        "limit": est.limit,
        "k": [float(v) for v in est.k],
        "E": [float(v) for v in est.E],
    }
    return verdict, report
