"""Independent reference values: brute-force extrema and fine trapezoid quadrature.

Deliberately uses different discretizations from the production paths so
that agreement is evidence rather than a tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import expr as ex
from .bump import BumpSpec, bump_eval, bump_mass
from .errors import CostGuardError, DomainError
from .oscint import QuadResult, max_abs_slope, phase_env
from .prob import Box, Deterministic, Discrete, MonteCarlo

__all__ = ["GridExtrema", "grid_extrema", "reference_integral", "K_GUARD"]

K_GUARD = 5000.0


@dataclass(frozen=True)
class GridExtrema:
    min: float
    max: float
    argmin: tuple
    argmax: tuple

    def to_dict(self):
        return {"min": self.min, "max": self.max,
                "argmin": list(self.argmin), "argmax": list(self.argmax)}


def _omega_axes(model, resolution):
    if isinstance(model, Deterministic):
        return None
    if isinstance(model, Discrete):
        return model.rule()[0]
    if isinstance(model, (Box, MonteCarlo)):
        return [np.linspace(lo, hi, resolution) for lo, hi in model.bounds]
    raise TypeError(f"unsupported model {model!r}")


def grid_extrema(process, model, resolution=129):
    """Min and max of xi over [a, b] x support(P): tensor grid, then bounded polish."""
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    n = process.omega_dim
    names = ["t"] + [f"w{i + 1}" for i in range(n)]
    t = np.linspace(process.a, process.b, resolution)
    axes = _omega_axes(model, resolution)
    if axes is None:
        pts = t[:, None]
    elif isinstance(model, Discrete):
        pts = np.array([[tt, *w] for tt in t for w in axes])
    else:
        mesh = np.meshgrid(t, *axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    env = {name: pts[:, i] for i, name in enumerate(names)}
    vals = np.broadcast_to(ex.evaluate(process.expr, env), (len(pts),))
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite process value on the oracle grid")

    if isinstance(model, Discrete):
        free = [0]
    else:
        free = list(range(n + 1))
    bounds = [(process.a, process.b)] + ([] if axes is None or isinstance(model, Discrete)
                                          else [(ax[0], ax[-1]) for ax in axes])
    grads = [ex.diff(process.expr, names[i], 1) for i in free]

    def polish(start, sign):
        x0 = np.array(start, dtype=float)

        def full(z):
            x = x0.copy()
            x[free] = z
            return {name: x[i] for i, name in enumerate(names)}

        def fun(z):
            return sign * float(ex.evaluate(process.expr, full(z)))

        def jac(z):
            e = full(z)
            return sign * np.array([float(ex.evaluate(g, e)) for g in grads])

        res = optimize.minimize(fun, x0[free], jac=jac, method="L-BFGS-B", bounds=bounds,
                                options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
        x = x0.copy()
        x[free] = res.x
        return sign * float(res.fun), tuple(float(v) for v in x)

    best = []
    for sign, pick in ((1.0, int(np.argmin(vals))), (-1.0, int(np.argmax(vals)))):
        grid_val, grid_pt = float(vals[pick]), tuple(float(v) for v in pts[pick])
        val, pt = polish(grid_pt, sign)
        if sign * val > sign * grid_val:
            val, pt = grid_val, grid_pt
        best.append((val, pt))
    (lo, argmin), (hi, argmax) = best
    return GridExtrema(lo, hi, argmin, argmax)


def reference_integral(f, omega, bump: BumpSpec, k, nodes_per_period=200, full_output=False):
    """I(k, w) by the composite trapezoid rule with at least ``nodes_per_period``
    nodes per oscillation.  The error estimate compares against every other node.
    """
    if abs(k) > K_GUARD:
        raise CostGuardError(f"|k| = {abs(k)} exceeds the reference-quadrature guard {K_GUARD}")
    lo, hi = bump.support
    if k == 0:
        res = QuadResult(complex(bump_mass(bump)), 0.0, 0)
        return res if full_output else res.value
    slope = max_abs_slope(f, omega, (lo, hi))
    periods = abs(k) * slope * (hi - lo) / (2 * math.pi)
    n = max(4096, int(math.ceil(nodes_per_period * periods)))
    n += n % 2
    t = np.linspace(lo, hi, n + 1)
    phase = np.broadcast_to(ex.evaluate(f, phase_env(omega, t)), t.shape)
    y = bump_eval(bump, t) * np.exp(1j * k * phase)
    h = (hi - lo) / n
    fine = h * (y.sum() - 0.5 * (y[0] + y[-1]))
    coarse = 2 * h * (y[::2].sum() - 0.5 * (y[0] + y[-1]))
    res = QuadResult(complex(fine), float(abs(fine - coarse)), n)
    return res if full_output else res.value
