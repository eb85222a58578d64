"""Concrete probability spaces for the random input w and integration against dP."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import DomainError, ModelError, UnsupportedModelError
from .oscint import gauss_legendre

__all__ = [
    "Deterministic", "Discrete", "Box", "MonteCarlo", "OmegaModel",
    "integrate_over_omega", "density_at", "composite_gauss",
]

MAX_BOX_DIM = 2


def composite_gauss(lo, hi, panels, order):
    """Composite Gauss-Legendre nodes/weights on [lo, hi]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def _density_expr(density, dim):
    if isinstance(density, ex.Expr):
        e = density
    else:
        e = ex.parse(str(density), dim)
    if "t" in ex.variables(e):
        raise ModelError("density may not depend on t")
    return e


def _eval_density(e, points, dim):
    env = {f"w{i + 1}": points[:, i] for i in range(dim)}
    return np.broadcast_to(ex.evaluate(e, env), (len(points),)).astype(float)


def _tensor(axes_nodes, axes_weights):
    grids = np.meshgrid(*axes_nodes, indexing="ij")
    wgrids = np.meshgrid(*axes_weights, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


@dataclass(frozen=True)
class Deterministic:
    """No randomness: a single point of the empty Omega."""

    dim: int = field(default=0, init=False)

    def rule(self, frequency=None, order=12, oscillations_per_panel=2.0, refine=1):
        return np.zeros((1, 0)), np.ones(1)

    def support_points(self, resolution=65):
        return np.zeros((1, 0))


@dataclass(frozen=True)
class Discrete:
    """Finitely many atoms ``((w1, ..., wn), weight)``; weights sum to one."""

    atoms: tuple

    def __post_init__(self):
        if not self.atoms:
            raise ModelError("discrete model needs at least one atom")
        pts = [tuple(float(v) for v in np.atleast_1d(p)) for p, _ in self.atoms]
        wts = [float(w) for _, w in self.atoms]
        dims = {len(p) for p in pts}
        if len(dims) != 1:
            raise ModelError("atoms have inconsistent dimensions")
        if any(w < 0 for w in wts):
            raise ModelError("atom weights must be non-negative")
        if abs(sum(wts) - 1.0) > 1e-12:
            raise ModelError(f"atom weights sum to {sum(wts)!r}, not 1")
        object.__setattr__(self, "atoms", tuple(zip(pts, wts)))

    @property
    def dim(self):
        return len(self.atoms[0][0])

    def rule(self, frequency=None, order=12, oscillations_per_panel=2.0, refine=1):
        pts = np.array([p for p, _ in self.atoms], dtype=float).reshape(len(self.atoms), self.dim)
        return pts, np.array([w for _, w in self.atoms])

    def support_points(self, resolution=65):
        return self.rule()[0]


@dataclass(frozen=True)
class Box:
    """Continuous w on a box with density ``density`` (an Expr or formula in w1..wn).

    Plain integration uses ``nodes`` Gauss-Legendre points per dimension.
    When a frequency bound is passed to :meth:`rule` each dimension is split
    into panels holding at most ``oscillations_per_panel`` oscillations.
    """

    bounds: tuple
    density: object = "1"
    nodes: int = 64

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not 1 <= len(bounds) <= MAX_BOX_DIM:
            raise ModelError(f"box dimension must be 1..{MAX_BOX_DIM}, got {len(bounds)}")
        if any(not lo < hi for lo, hi in bounds):
            raise ModelError("box bounds must satisfy lo < hi")
        if self.nodes < 2:
            raise ModelError("nodes must be >= 2")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "density", _density_expr(self.density, len(bounds)))
        grid = self.support_points(33)
        if np.min(_eval_density(self.density, grid, self.dim)) < 0:
            raise ModelError("density is negative somewhere on the box")
        mass = self.raw_mass
        if abs(mass - 1.0) > 1e-3:
            raise ModelError(f"density integrates to {mass:.6g} over the box, not 1")

    @property
    def dim(self):
        return len(self.bounds)

    @cached_property
    def raw_mass(self):
        pts, wts = _tensor(*zip(*(gauss_legendre_on(lo, hi, self.nodes) for lo, hi in self.bounds)))
        return float(np.dot(wts, _eval_density(self.density, pts, self.dim)))

    @property
    def norm(self):
        return 1.0 / self.raw_mass

    def panels_for(self, frequency, order=12, oscillations_per_panel=2.0):
        """Panels per dimension so each holds at most ``oscillations_per_panel`` periods."""
        freq = np.broadcast_to(np.asarray(frequency, dtype=float), (self.dim,))
        out = []
        for f, (lo, hi) in zip(freq, self.bounds):
            need = f * (hi - lo) / (2 * math.pi * oscillations_per_panel)
            out.append(max(int(math.ceil(self.nodes / order)), int(math.ceil(need))))
        return tuple(out)

    def rule(self, frequency=None, order=12, oscillations_per_panel=2.0, refine=1):
        """Tensor nodes and weights with the (normalized) density folded in.

        ``refine`` multiplies the panel count of a frequency-adapted rule.
        """
        axes = []
        if frequency is None:
            axes = [gauss_legendre_on(lo, hi, self.nodes) for lo, hi in self.bounds]
        else:
            panels = self.panels_for(frequency, order, oscillations_per_panel)
            axes = [composite_gauss(lo, hi, p * refine, order)
                    for p, (lo, hi) in zip(panels, self.bounds)]
        pts, wts = _tensor(*zip(*axes))
        return pts, wts * _eval_density(self.density, pts, self.dim) * self.norm

    def support_points(self, resolution=65):
        axes = [np.linspace(lo, hi, resolution) for lo, hi in self.bounds]
        return _tensor(axes, [np.ones(resolution)] * self.dim)[0]

    def contains(self, omega, tol=0.0):
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return all(lo - tol <= w <= hi + tol for w, (lo, hi) in zip(omega, self.bounds))


def gauss_legendre_on(lo, hi, n):
    x, w = gauss_legendre(n)
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * x, half * w


@dataclass(frozen=True)
class MonteCarlo:
    """Seeded uniform sampling of a box, each sample weighted by the density."""

    bounds: tuple
    density: object = "1"
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not 1 <= len(bounds):
            raise ModelError("Monte Carlo model needs at least one dimension")
        if any(not lo < hi for lo, hi in bounds):
            raise ModelError("bounds must satisfy lo < hi")
        if self.samples < 1:
            raise ModelError("samples must be positive")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "density", _density_expr(self.density, len(bounds)))

    @property
    def dim(self):
        return len(self.bounds)

    @cached_property
    def _draw(self):
        rng = np.random.default_rng(self.seed)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        pts = lo + (hi - lo) * rng.random((self.samples, self.dim))
        vol = float(np.prod(hi - lo))
        wts = _eval_density(self.density, pts, self.dim) * vol / self.samples
        pts.flags.writeable = False
        wts.flags.writeable = False
        return pts, wts

    def rule(self, frequency=None, order=12, oscillations_per_panel=2.0, refine=1):
        return self._draw

    def support_points(self, resolution=65):
        axes = [np.linspace(lo, hi, resolution) for lo, hi in self.bounds]
        return _tensor(axes, [np.ones(resolution)] * self.dim)[0]


OmegaModel = (Deterministic, Discrete, Box, MonteCarlo)


def integrate_over_omega(integrand, model, frequency=None, order=12, threads=1):
    """Integral of ``integrand(w)`` against dP.

    ``integrand`` receives each node as a 1-D array (length 0 for the
    deterministic model).  ``frequency`` is an optional per-dimension bound
    on the integrand's oscillation, used to panel Box quadrature.
    """
    pts, wts = model.rule(frequency, order)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(integrand, pts))
    else:
        vals = [integrand(p) for p in pts]
    vals = np.asarray(vals, dtype=complex)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise DomainError(f"non-finite integrand at w={pts[np.argmax(bad)].tolist()}")
    total = complex(np.dot(wts, vals))
    return total


def density_at(model, omega):
    """Probability density of a Box model at ``omega``."""
    if not isinstance(model, Box):
        raise UnsupportedModelError(f"{type(model).__name__} has no pointwise density")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.shape != (model.dim,):
        raise ModelError(f"expected a point of dimension {model.dim}")
    if not model.contains(omega):
        raise ModelError(f"w={omega.tolist()} lies outside the box {model.bounds}")
    return float(_eval_density(model.density, omega[None, :], model.dim)[0]) * model.norm
