"""The three report figures: convergence, error growth, scaling-field heatmap.

All plotters take a FigureSpec, write one image, and return a small result
record with the fitted numbers so callers can gate on them.  Output is
byte-stable for identical inputs: fixed style, fixed svg hash salt, no
timestamps in the file.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg", force=True)

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .csvio import SchemaError, read_table  # noqa: E402

KINDS = ("convergence", "growth", "mu_heatmap")

_STYLE = {
    "svg.hashsalt": "dgfigures",
    "svg.fonttype": "none",
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
}


@dataclass
class FigureSpec:
    inputs: Sequence[Path]
    kind: str
    out: Path
    title: Optional[str] = None
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"have {', '.join(KINDS)}")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)


@dataclass
class ConvergenceResult:
    out: Path
    slopes: dict  # (problem, degree) -> fitted slope


@dataclass
class GrowthResult:
    out: Path
    n_samples: int
    rate: float
    reference_factor: float


@dataclass
class HeatmapResult:
    out: Path
    shape: tuple
    overlay: Optional[str]


def _save(fig, out: Path) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {"Date": None} if out.suffix == ".svg" else {}
    fig.savefig(out, metadata=meta)
    plt.close(fig)


def plot_convergence(spec: FigureSpec) -> ConvergenceResult:
    """Log-log error vs h per degree with least-squares slopes.

    Guide lines at h^(p + 1/2) and h^(p + 1) are anchored at each finest
    point so the fitted slope can be compared against both.
    """
    groups: dict[tuple, list[tuple]] = {}
    for path in spec.inputs:
        tab = read_table(path)
        tab.require(["problem", "p", "h", "linf_l2"])
        hs = tab.floats("h")
        errs = tab.floats("linf_l2")
        probs = tab.strings("problem")
        degs = tab.floats("p").astype(int)
        for prob, p, h, e in zip(probs, degs, hs, errs):
            groups.setdefault((prob, int(p)), []).append((h, e))

    slopes: dict = {}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.2, 4.0))
        for idx, (key, pts) in enumerate(sorted(groups.items())):
            prob, p = key
            pts = sorted(pts, reverse=True)
            h = np.array([q[0] for q in pts])
            e = np.array([q[1] for q in pts])
            keep = e > 0
            if keep.sum() < 2:
                raise SchemaError(
                    f"{spec.inputs[0]}: need at least 2 positive error "
                    f"samples for {prob} p={p} to fit a slope")
            h, e = h[keep], e[keep]
            slope = float(np.polyfit(np.log(h), np.log(e), 1)[0])
            slopes[key] = slope
            color = f"C{idx}"
            ax.loglog(h, e, "o-", color=color,
                      label=f"{prob} p={p}: slope {slope:.2f}")
            # anchor the expected-rate guides at the finest point
            for rate, ls in ((p + 0.5, "--"), (p + 1.0, ":")):
                ax.loglog(h, e[-1] * (h / h[-1]) ** rate, ls, color=color,
                          alpha=0.45, linewidth=1.0)
        ax.set_xlabel(spec.xlabel or "h")
        ax.set_ylabel(spec.ylabel or "worst-in-time L2 error")
        ax.set_title(spec.title or "convergence under mesh refinement")
        ax.legend(fontsize=8)
        _save(fig, spec.out)
    return ConvergenceResult(out=spec.out, slopes=slopes)


def plot_growth(spec: FigureSpec) -> GrowthResult:
    """Error history next to the naive exponential-in-time reference.

    Linear-y and log-y panels; the reference curve grows at the
    gronwall_rate recorded in the CSV metadata and is normalized to the
    first error sample.
    """
    if len(spec.inputs) != 1:
        raise SchemaError("growth figure takes exactly one CSV")
    tab = read_table(spec.inputs[0])
    tab.require(["t", "l2_error"])
    t = tab.floats("t")
    err = tab.floats("l2_error")
    if len(t) < 2:
        raise SchemaError(f"{tab.path}: need at least 2 samples to draw "
                          "a growth curve")
    order = np.argsort(t)
    t, err = t[order], err[order]
    rate = tab.meta_float("gronwall_rate", default=0.0)
    anchor = err[0] if err[0] > 0 else max(float(err.max()), 1e-300)
    ref = anchor * np.exp(np.minimum(rate * (t - t[0]), 700.0))
    factor = float(ref[-1] / ref[0])

    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.6))
        for ax, logy in zip(axes, (False, True)):
            ax.plot(t, err, label="measured error")
            ax.plot(t, ref, "--", label=f"exp({rate:g} t) reference")
            if logy:
                ax.set_yscale("log")
            ax.set_xlabel(spec.xlabel or "t")
            ax.set_ylabel(spec.ylabel or "L2 error")
            ax.legend(fontsize=8)
        probname = tab.meta.get("problem", "")
        fig.suptitle(spec.title
                     or f"error growth {probname}".strip())
        fig.tight_layout()
        _save(fig, spec.out)
    return GrowthResult(out=spec.out, n_samples=len(t), rate=rate,
                        reference_factor=factor)


def _pivot(a: np.ndarray, b: np.ndarray, v: np.ndarray):
    # scattered (a, b, v) samples on a tensor grid -> dense array
    av = np.unique(a)
    bv = np.unique(b)
    grid = np.full((len(bv), len(av)), np.nan)
    grid[np.searchsorted(bv, b), np.searchsorted(av, a)] = v
    return av, bv, grid


def plot_mu_heatmap(spec: FigureSpec) -> HeatmapResult:
    """Heatmap of the inside-time field over (x, t), or an (x, y) slice.

    For the two catalog flows with a closed-form field the separating
    pathline is overlaid: t = ln(1 + x) for stretch1d, t = x for
    translate1d.
    """
    if len(spec.inputs) != 1:
        raise SchemaError("mu_heatmap takes exactly one CSV")
    tab = read_table(spec.inputs[0])
    tab.require(["x", "t", "mu1"])
    x = tab.floats("x")
    t = tab.floats("t")
    mu = tab.floats("mu1")
    if "status" in tab.header:
        bad = np.array([s != "ok" for s in tab.strings("status")])
        mu = np.where(bad, np.nan, mu)

    two_d = "y" in tab.header
    if two_d:
        # show the latest time slice of a volume sampling
        y = tab.floats("y")
        t_sel = np.unique(t).max()
        sel = t == t_sel
        av, bv, grid = _pivot(x[sel], y[sel], mu[sel])
        blabel = "y"
    else:
        av, bv, grid = _pivot(x, t, mu)
        blabel = "t"

    overlay = None
    problem = tab.meta.get("problem", "")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.2, 4.0))
        mesh = ax.pcolormesh(av, bv, grid, shading="nearest",
                             cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="time spent inside the domain")
        if not two_d and problem in ("stretch1d", "translate1d"):
            xx = np.linspace(av.min(), av.max(), 256)
            tt = np.log1p(xx) if problem == "stretch1d" else xx
            keep = (tt >= bv.min()) & (tt <= bv.max())
            ax.plot(xx[keep], tt[keep], "w--", linewidth=1.4,
                    label="separating pathline")
            ax.legend(fontsize=8, loc="upper right")
            overlay = "ln(1+x)" if problem == "stretch1d" else "x"
        ax.set_xlabel(spec.xlabel or "x")
        ax.set_ylabel(spec.ylabel or blabel)
        ax.set_title(spec.title or f"inside-time field {problem}".strip())
        _save(fig, spec.out)
    return HeatmapResult(out=spec.out, shape=grid.shape, overlay=overlay)


_PLOTTERS = {
    "convergence": plot_convergence,
    "growth": plot_growth,
    "mu_heatmap": plot_mu_heatmap,
}


def render(spec: FigureSpec):
    return _PLOTTERS[spec.kind](spec)
