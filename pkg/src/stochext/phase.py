"""Stationary points of a phase and the leading stationary-phase terms.

One-dimensional case: every stationary point t_j of order m_j contributes

    phi(t_j) C_m (m! / (k |f^(m)|))^(1/m) e^{ik f(t_j)}  x  e^{+-i pi/(2m)}   (m even)
                                                         x  cos(pi/(2m))     (m odd)

with C_m = 2 int_0^inf exp(-x^m) dx.  Joint (t, w) case: a single
non-degenerate critical point of xi gives

    density(w*) (2 pi / k)^((n+1)/2) |det H|^(-1/2) e^{i pi/4 sig H} e^{ik xi*}.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import expr as ex
from .bump import BumpSpec, bump_eval
from .errors import (
    MultipleStationaryPointsError, NonPositiveDensityError, NoStationaryPointError,
    SingularHessianError, UnclassifiedPointError, UnsupportedModelError,
)
from .oscint import phase_env
from .prob import Box, Deterministic, density_at

__all__ = [
    "M_MAX", "StationaryPoint", "Theorem2Report", "find_stationary_points", "cm_constant",
    "asymptotic_sum", "joint_stationary_points", "theorem2_asymptotic",
]

M_MAX = 6
ORDER_TOL = 1e-7
MERGE_DIST = 1e-8


@dataclass(frozen=True)
class StationaryPoint:
    """A zero of f_t.  ``order`` is None when no derivative up to M_MAX is nonzero.

    ``verified`` is False for tangential zeros (no sign change of f_t), which
    were located by minimizing |f_t| rather than by bracketing.
    """

    t_star: float
    omega_star: tuple
    order: int | None
    mth_derivative: float | None
    phase_value: float
    verified: bool = True

    def to_dict(self):
        d = asdict(self)
        d["omega_star"] = list(self.omega_star)
        return d


@dataclass
class Theorem2Report:
    t_star: float
    omega_star: tuple
    hessian: list
    det: float
    signature: int
    density_value: float
    phi_value: float
    leading_amplitude: float
    predicted_limit: float
    k: float
    value: complex = field(default=0j)

    def to_dict(self):
        d = asdict(self)
        d["omega_star"] = list(self.omega_star)
        d["value"] = [self.value.real, self.value.imag]
        return d


def _scalar_fn(e, omega):
    return lambda t: float(ex.evaluate(e, phase_env(omega, t)))


def _classify(f, t, omega, tol, m_max):
    env = phase_env(omega, t)
    for m in range(2, m_max + 1):
        d = float(ex.evaluate(ex.diff(f, "t", m), env))
        if abs(d) > tol:
            return m, d
    return None, None


def find_stationary_points(f, omega=(), window=(0.0, 1.0), m_max=M_MAX, grid=4096):
    """All zeros of f_t in the open ``window``, each with its order.

    Sign changes of f_t on a ``grid``-point mesh are bracketed and polished
    with Newton; zeros without a sign change are found at local minima of
    |f_t| and reported with ``verified=False``.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must be nondegenerate")
    omega = tuple(float(w) for w in np.atleast_1d(np.asarray(omega, dtype=float)))
    ft_e = ex.diff(f, "t", 1)
    ftt_e = ex.diff(f, "t", 2)
    ft, ftt = _scalar_fn(ft_e, omega), _scalar_fn(ftt_e, omega)
    t = np.linspace(lo, hi, grid)
    v = np.broadcast_to(ex.evaluate(ft_e, phase_env(omega, t)), t.shape)
    fvals = np.broadcast_to(ex.evaluate(f, phase_env(omega, t)), t.shape)
    zero_tol = ORDER_TOL * (1.0 + float(np.max(np.abs(fvals))))

    found = []
    for i in np.nonzero(v == 0)[0]:
        found.append((float(t[i]), True))
    for i in np.nonzero(v[:-1] * v[1:] < 0)[0]:
        r = optimize.brentq(ft, t[i], t[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        for _ in range(4):
            slope = ftt(r)
            if slope == 0:
                break
            step = ft(r) / slope
            cand = r - step
            if not t[i] <= cand <= t[i + 1] or abs(ft(cand)) >= abs(ft(r)):
                break
            r = cand
        found.append((r, True))

    a = np.abs(v)
    flat_cut = 1e-3 * (1.0 + float(np.max(a)))
    for i in range(1, grid - 1):
        if not (a[i] < a[i - 1] and a[i] <= a[i + 1] and a[i] < flat_cut):
            continue
        if v[i - 1] * v[i] <= 0 or v[i] * v[i + 1] <= 0:
            continue
        left, right = t[i - 1], t[i + 1]
        if ftt(left) * ftt(right) < 0:
            r = optimize.brentq(ftt, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            r = optimize.minimize_scalar(lambda s: abs(ft(s)), bounds=(left, right),
                                         method="bounded", options={"xatol": 1e-14}).x
        if abs(ft(r)) <= zero_tol:
            found.append((float(r), False))

    found.sort()
    merged = []
    for r, ok in found:
        if merged and abs(r - merged[-1][0]) < MERGE_DIST:
            merged[-1] = (merged[-1][0], merged[-1][1] or ok)
        else:
            merged.append((r, ok))

    points = []
    for r, ok in merged:
        if not lo < r < hi:
            continue
        m, d = _classify(f, r, omega, zero_tol, m_max)
        fv = float(ex.evaluate(f, phase_env(omega, r)))
        points.append(StationaryPoint(r, omega, m, d, fv, ok))
    return points


def cm_constant(m: int) -> float:
    """C_m = 2 * integral_0^inf exp(-x^m) dx."""
    if not 2 <= m <= M_MAX:
        raise ValueError(f"m must be in [2, {M_MAX}]")
    val, _ = integrate.quad(lambda x: math.exp(-x ** m), 0.0, np.inf, epsabs=0.0, epsrel=1e-13)
    return 2.0 * val


def asymptotic_sum(points, phi_values, k):
    """Sum of the leading contributions of ``points`` at frequency ``k``.

    Negative ``k`` returns the complex conjugate of the value at ``-k``.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    if k < 0:
        return asymptotic_sum(points, phi_values, -k).conjugate()
    total = 0j
    for p, phi in zip(points, phi_values, strict=True):
        if p.order is None:
            raise UnclassifiedPointError(f"stationary point at t={p.t_star} has order > {M_MAX}")
        m, d = p.order, p.mth_derivative
        amp = phi * cm_constant(m) * (math.factorial(m) / (k * abs(d))) ** (1.0 / m)
        if m % 2 == 0:
            factor = np.exp(1j * math.copysign(1.0, d) * math.pi / (2 * m))
        else:
            factor = math.cos(math.pi / (2 * m))
        total += amp * factor * np.exp(1j * k * p.phase_value)
    return complex(total)


# --------------------------------------------------------------------------
# joint (t, w) critical points


def _joint_window(process, model, bump):
    lo, hi = bump.support
    box = [(lo, hi)]
    if isinstance(model, Box):
        box += list(model.bounds)
    elif not isinstance(model, Deterministic):
        raise UnsupportedModelError(
            f"joint stationary analysis needs a density; {type(model).__name__} has none")
    if len(box) != process.omega_dim + 1:
        raise ValueError("model dimension does not match the process")
    return np.array(box, dtype=float)


def _names(n):
    return ["t"] + [f"w{i + 1}" for i in range(n)]


def joint_stationary_points(xi, window, starts=17, iters=60, tol=1e-10, dedupe=1e-6):
    """Critical points of ``xi`` in the box ``window`` ((n+1) x 2) by multi-start Newton."""
    window = np.asarray(window, dtype=float)
    dim = len(window)
    names = _names(dim - 1)
    grad = [ex.diff(xi, v, 1) for v in names]
    hess = [[ex.diff(g, v, 1) for v in names] for g in grad]

    axes = [np.linspace(lo, hi, starts) for lo, hi in window]
    x = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    width = window[:, 1] - window[:, 0]

    def env(x):
        return {name: x[:, i] for i, name in enumerate(names)}

    def ev(e, x):
        return np.broadcast_to(ex.evaluate(e, env(x)), (len(x),))

    for _ in range(iters):
        g = np.stack([ev(e, x) for e in grad], axis=1)
        h = np.stack([np.stack([ev(e, x) for e in row], axis=1) for row in hess], axis=1)
        det = np.linalg.det(h)
        ok = np.abs(det) > 1e-14
        step = np.zeros_like(x)
        if ok.any():
            step[ok] = np.linalg.solve(h[ok], g[ok][..., None])[..., 0]
        step = np.clip(step, -0.25 * width, 0.25 * width)
        x = x - step
        if np.all(np.abs(step) < 1e-15 * (1 + np.abs(x))):
            break

    g = np.stack([ev(e, x) for e in grad], axis=1)
    gnorm = np.linalg.norm(g, axis=1)
    inside = np.all((x > window[:, 0]) & (x < window[:, 1]), axis=1)
    good = x[(gnorm <= tol) & inside]
    out = []
    for p in good:
        if all(np.linalg.norm(p - q) > dedupe for q in out):
            out.append(p)
    return [tuple(float(v) for v in p) for p in out], hess


def theorem2_asymptotic(process, model, bump: BumpSpec, k: float):
    """Leading term of the double integral at its unique joint critical point.

    Returns ``(value, Theorem2Report)``.  The Deterministic model is treated
    as n = 0 with unit density.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    window = _joint_window(process, model, bump)
    points, hess = joint_stationary_points(process.expr, window)
    if not points:
        raise NoStationaryPointError("xi has no critical point in the window")
    if len(points) > 1:
        raise MultipleStationaryPointsError(f"{len(points)} critical points: {points}")
    p = np.array(points[0])
    n = len(p) - 1
    names = _names(n)
    env = {name: p[i] for i, name in enumerate(names)}
    h = np.array([[float(ex.evaluate(e, env)) for e in row] for row in hess])
    det = float(np.linalg.det(h))
    if abs(det) < 1e-10:
        raise SingularHessianError(f"Hessian determinant {det:.3e} is (numerically) zero")
    eig = np.linalg.eigvalsh(0.5 * (h + h.T))
    signature = int(np.sum(eig > 0) - np.sum(eig < 0))
    dens = 1.0 if n == 0 else density_at(model, p[1:])
    if dens <= 0:
        raise NonPositiveDensityError(f"density at w*={p[1:].tolist()} is {dens}")
    phi = float(bump_eval(bump, p[0]))
    xi_star = float(ex.evaluate(process.expr, env))
    amp = phi * dens * (2 * math.pi / k) ** ((n + 1) / 2) / math.sqrt(abs(det))
    value = amp * np.exp(1j * math.pi / 4 * signature) * np.exp(1j * k * xi_star)
    report = Theorem2Report(
        t_star=float(p[0]), omega_star=tuple(float(v) for v in p[1:]), hessian=h.tolist(),
        det=det, signature=signature, density_value=dens, phi_value=phi,
        leading_amplitude=amp, predicted_limit=xi_star, k=float(k), value=complex(value))
    return complex(value), report
