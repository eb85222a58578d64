"""PNG figures for CLI outputs.  matplotlib is optional and imported lazily."""

from __future__ import annotations

import numpy as np

__all__ = ["available", "plot_trace", "plot_estimate", "plot_asym", "plot_phases",
           "plot_integrand", "plot_oracle"]


def available():
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _figure(nrows=1, height=3.2):
    try:
        from matplotlib.backends.backend_agg import FigureCanvasAgg
        from matplotlib.figure import Figure
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib (pip install 'artifact[plot]')") from exc
    fig = Figure(figsize=(6.4, height * nrows), layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, 1, squeeze=False)[:, 0]
    for ax in axes:
        ax.spines[["top", "right"]].set_visible(False)
        ax.grid(alpha=0.3, lw=0.5)
    return fig, axes


def _save(fig, path):
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_trace(trace, path, title=""):
    """|J(lambda)| on a log scale above E(lambda) = theta / lambda."""
    fig, (top, bottom) = _figure(2)
    top.semilogy(trace.lam, np.abs(trace.J), lw=0.8)
    top.set_ylabel("|J(λ)|")
    E = trace.E
    bottom.plot(trace.lam[1:], E[1:], lw=0.8)
    bottom.plot(trace.k_grid, trace.E_at(trace.k_grid), "o", ms=3, label="k grid")
    bottom.set_xlabel("λ")
    bottom.set_ylabel("E(λ)")
    bottom.legend(frameon=False)
    if title:
        top.set_title(title)
    return _save(fig, path)


def plot_estimate(est, path, title="", oracle=None):
    """E(k) against 1/k with the fitted line and the Smax/Smin band."""
    fig, (ax,) = _figure()
    inv = 1.0 / np.asarray(est.k)
    ax.plot(inv, est.E, "o", ms=4, label="E(k)")
    line = np.linspace(0.0, inv.max(), 50)
    ax.plot(line, est.intercept + est.coefficient * line, "-", lw=1, label="a + b/k")
    ax.axhspan(est.smin, est.smax, color="C2", alpha=0.2, lw=0)
    ax.axhline(est.smax, color="C2", lw=0.8, label="Smin / Smax")
    ax.axhline(est.smin, color="C2", lw=0.8)
    if oracle is not None:
        ax.axhline(oracle.min, color="k", ls=":", lw=0.8, label="grid min / max")
        ax.axhline(oracle.max, color="k", ls=":", lw=0.8)
    ax.set_xlabel("1/k")
    ax.set_ylabel("E(k)")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_asym(rows, path, title=""):
    """|quadrature| and |asymptotic| against k, and their relative gap."""
    fig, (top, bottom) = _figure(2)
    k = np.array([r["k"] for r in rows])
    q = np.array([abs(complex(*r["quadrature"])) for r in rows])
    top.loglog(k, q, "o-", ms=4, label="quadrature")
    a = [r["asymptotic"] for r in rows]
    if all(v is not None for v in a):
        top.loglog(k, [abs(complex(*v)) for v in a], "s--", ms=4, label="leading term")
    top.set_ylabel("|I(k)|")
    top.legend(frameon=False)
    rel = [r.get("relative_error") for r in rows]
    if all(v is not None for v in rel):
        bottom.loglog(k, rel, "o-", ms=4)
    bottom.set_xlabel("k")
    bottom.set_ylabel("relative error")
    if title:
        top.set_title(title)
    return _save(fig, path)


def plot_phases(f_vals, t, points, path, title=""):
    fig, (ax,) = _figure()
    ax.plot(t, f_vals, lw=1)
    for p in points:
        ax.plot(p["t_star"], p["phase_value"], "o", ms=5)
        ax.annotate(f"m={p['order']}", (p["t_star"], p["phase_value"]),
                    textcoords="offset points", xytext=(4, 6), fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("f(t)")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_integrand(t, values, path, title=""):
    fig, (ax,) = _figure()
    ax.plot(t, values.real, lw=0.6, label="Re")
    ax.plot(t, values.imag, lw=0.6, label="Im")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_oracle(t, lower, upper, ext, path, title=""):
    """Pointwise min and max of xi over the w grid, with the global extrema marked."""
    fig, (ax,) = _figure()
    ax.fill_between(t, lower, upper, alpha=0.3, lw=0)
    ax.plot(t, lower, lw=0.8)
    ax.plot(t, upper, lw=0.8)
    ax.plot(ext.argmin[0], ext.min, "v", ms=6)
    ax.plot(ext.argmax[0], ext.max, "^", ms=6)
    ax.set_xlabel("t")
    ax.set_ylabel("ξ(t, ·)")
    if title:
        ax.set_title(title)
    return _save(fig, path)
