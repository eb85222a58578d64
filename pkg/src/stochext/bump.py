"""Smooth compactly supported cutoff equal to 1 on [a, b]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from . import expr as ex

__all__ = ["BumpSpec", "smoothstep", "bump_eval", "bump_mass", "bump_expr"]


def _flat(u):
    u = np.asarray(u, dtype=float)
    pos = u > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, u, 1.0)), 0.0)


def smoothstep(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, S(u) + S(1-u) = 1."""
    g0 = _flat(u)
    g1 = _flat(1.0 - np.asarray(u, dtype=float))
    return g0 / (g0 + g1)


@dataclass(frozen=True)
class BumpSpec:
    """Cutoff equal to 1 on [a, b], vanishing outside (a - epsilon, b + epsilon).

    With ``normalized=True`` the function is divided by its integral.
    """

    a: float
    b: float
    epsilon: float
    normalized: bool = False

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"bump needs a < b, got a={self.a}, b={self.b}")
        if not self.epsilon > 0:
            raise ValueError(f"bump needs epsilon > 0, got {self.epsilon}")

    @property
    def support(self):
        return (self.a - self.epsilon, self.b + self.epsilon)

    @property
    def breakpoints(self):
        """Support ends and plateau ends, in increasing order."""
        return (self.a - self.epsilon, self.a, self.b, self.b + self.epsilon)

    def with_normalized(self, normalized=True):
        return BumpSpec(self.a, self.b, self.epsilon, normalized)

    @cached_property
    def raw_mass(self):
        """Integral of the unnormalized cutoff."""
        ramp, _ = integrate.quad(smoothstep, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        return (self.b - self.a) + 2.0 * self.epsilon * ramp

    @property
    def scale(self):
        return 1.0 / self.raw_mass if self.normalized else 1.0

    def __call__(self, t):
        return bump_eval(self, t)


def bump_eval(spec: BumpSpec, t):
    """Value of the cutoff at ``t`` (scalar or array)."""
    t = np.asarray(t, dtype=float)
    eps = spec.epsilon
    val = smoothstep((t - spec.a + eps) / eps) * smoothstep((spec.b + eps - t) / eps)
    val = val * spec.scale
    return val if val.ndim else float(val)


def bump_mass(spec: BumpSpec) -> float:
    """Integral of the cutoff over the real line (1 when normalized)."""
    lo, a, b, hi = spec.breakpoints
    total = 0.0
    for left, right in ((lo, a), (a, b), (b, hi)):
        piece, _ = integrate.quad(lambda t: bump_eval(spec, t), left, right,
                                  epsabs=0.0, epsrel=1e-13, limit=200)
        total += piece
    return total


def _step_expr(u):
    g0 = ex.FlatExp(u, 0)
    g1 = ex.FlatExp(ex.sub(ex.ONE, u), 0)
    return ex.Div(g0, ex.Add(g0, g1))


def bump_expr(spec: BumpSpec) -> ex.Expr:
    """The cutoff written in the expression language, for symbolic work."""
    eps = spec.epsilon
    inv = ex.Const(1.0 / eps)
    rise = ex.mul(inv, ex.sub(ex.T, ex.Const(spec.a - eps)))
    fall = ex.mul(inv, ex.sub(ex.Const(spec.b + eps), ex.T))
    body = ex.Mul(_step_expr(rise), _step_expr(fall))
    if spec.normalized:
        body = ex.Mul(ex.Const(spec.scale), body)
    return body
