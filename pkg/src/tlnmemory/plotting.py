"""Static SVG figures written by hand, so identical inputs give identical bytes.

Numbers are printed with a fixed number of decimals and elements are emitted
in a fixed order; nothing depends on time, locale or hash ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import IntegratorConfig, settle_batch
from .network import Network, SupportSet

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")
# lighter versions for filled regions
PALE = ("#c6dbef", "#fdd0a2", "#c7e9c0", "#fcbba1", "#dadaeb", "#d9c4bd", "#f7d0ea",
        "#d9d9d9", "#ecedb0", "#c2ebf0")


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


class Svg:
    """Minimal SVG document builder."""

    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.items: list[str] = []

    def add(self, raw: str) -> None:
        self.items.append(raw)

    def rect(self, x, y, w, h, fill, stroke="none", cls: Optional[str] = None) -> None:
        c = f' class="{cls}"' if cls else ""
        self.add(f'<rect{c} x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                 f'fill="{fill}" stroke="{stroke}"/>')

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, cls: Optional[str] = None) -> None:
        c = f' class="{cls}"' if cls else ""
        self.add(f'<line{c} x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def polyline(self, xs, ys, stroke, width=1.5, cls: Optional[str] = None) -> None:
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
        c = f' class="{cls}"' if cls else ""
        self.add(f'<polyline{c} points="{pts}" fill="none" stroke="{stroke}" '
                 f'stroke-width="{_f(width)}"/>')

    def circle(self, x, y, r, fill, cls: Optional[str] = None) -> None:
        c = f' class="{cls}"' if cls else ""
        self.add(f'<circle{c} cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{fill}"/>')

    def text(self, x, y, s, size=11, anchor="start") -> None:
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
                 f'text-anchor="{anchor}">{_esc(s)}</text>')

    def comment(self, s: str) -> None:
        self.add(f"<!-- {_esc(s).replace('--', '- -')} -->")

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.width)}" '
                f'height="{_f(self.height)}" viewBox="0 0 {_f(self.width)} {_f(self.height)}">')
        return "\n".join([head, *self.items, "</svg>"]) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())


@dataclass
class Axes:
    """Linear map from data coordinates to a pixel box."""

    x0: float
    y0: float
    w: float
    h: float
    xlim: tuple
    ylim: tuple

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - lo) / (hi - lo) * self.h

    def frame(self, svg: Svg, xlabel: str = "", ylabel: str = "", ticks: int = 4) -> None:
        svg.rect(self.x0, self.y0, self.w, self.h, "none", "#000000")
        for k in range(ticks + 1):
            xv = self.xlim[0] + (self.xlim[1] - self.xlim[0]) * k / ticks
            yv = self.ylim[0] + (self.ylim[1] - self.ylim[0]) * k / ticks
            svg.text(float(self.px(xv)), self.y0 + self.h + 14, f"{xv:.3g}", 9, "middle")
            svg.text(self.x0 - 4, float(self.py(yv)) + 3, f"{yv:.3g}", 9, "end")
        if xlabel:
            svg.text(self.x0 + self.w / 2, self.y0 + self.h + 30, xlabel, 11, "middle")
        if ylabel:
            svg.add(f'<text x="{_f(self.x0 - 38)}" y="{_f(self.y0 + self.h / 2)}" font-family="sans-serif" '
                    f'font-size="11" text-anchor="middle" transform="rotate(-90 {_f(self.x0 - 38)} '
                    f'{_f(self.y0 + self.h / 2)})">{_esc(ylabel)}</text>')


def _limits(v, pad: float = 0.05) -> tuple:
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return (lo - pad * span, hi + pad * span)


# --------------------------------------------------------------------------
# fixed 2-D projection

@dataclass
class Projection:
    """Affine chart x = center + u e1 + v e2 from the principal axes of the attractors."""

    center: np.ndarray
    basis: np.ndarray            # (2, n) orthonormal rows

    def to_plane(self, X) -> np.ndarray:
        return (np.atleast_2d(X) - self.center) @ self.basis.T

    def lift(self, UV) -> np.ndarray:
        return self.center + np.atleast_2d(UV) @ self.basis

    def to_json(self) -> dict:
        return {"center": self.center.tolist(), "basis": self.basis.tolist(),
                "method": "principal axes of the stored attractor set, sign fixed so the "
                          "largest-magnitude entry of each axis is positive"}


def attractor_projection(X_att: np.ndarray) -> Projection:
    X_att = np.atleast_2d(np.asarray(X_att, dtype=float))
    n = X_att.shape[1]
    center = X_att.mean(axis=0)
    if X_att.shape[0] < 2:
        basis = np.eye(n)[:2]
        return Projection(center, basis)
    _, _, Vt = np.linalg.svd(X_att - center, full_matrices=True)
    basis = Vt[:2].copy()
    for k in range(2):
        j = int(np.argmax(np.abs(basis[k])))
        if basis[k, j] < 0:
            basis[k] = -basis[k]
    return Projection(center, basis)


def roa_grid(net: Network, proj: Projection, ulim, vlim, resolution: int = 200,
             settle_tol: float = 1e-8, t_max: float = 100.0):
    """Label each grid point of the projection plane by the attractor it settles to.

    Returns a (res, res) integer array holding m - 1 for the attractor with
    support {m, m+1} and -1 for anything else. Row 0 is the top of the plot.
    """
    us = np.linspace(ulim[0], ulim[1], resolution)
    vs = np.linspace(vlim[1], vlim[0], resolution)
    UU, VV = np.meshgrid(us, vs)
    X = proj.lift(np.column_stack([UU.ravel(), VV.ravel()]))
    cfg = IntegratorConfig(dt=5e-2, t_max=t_max, settle_tol=settle_tol, settle_window=10)
    Xf, _, _ = settle_batch(net, X, cfg)
    labels = np.full(X.shape[0], -1, dtype=int)
    for b, x in enumerate(Xf):
        s = SupportSet.from_state(x, 10 * settle_tol)
        if len(s) == 2 and s[1] == s[0] + 1:
            labels[b] = s[0] - 1
    return labels.reshape(resolution, resolution)


# --------------------------------------------------------------------------
# figures

def projection_figure(net: Network, attractors: np.ndarray, traj_states: Optional[np.ndarray],
                      resolution: int = 200, title: str = "latent trajectory") -> tuple[Svg, dict]:
    """Trajectory in the attractor plane over the settle-grid basin map."""
    proj = attractor_projection(attractors)
    pts = [proj.to_plane(attractors)]
    if traj_states is not None and len(traj_states):
        pts.append(proj.to_plane(traj_states))
    allp = np.vstack(pts)
    ulim, vlim = _limits(allp[:, 0], 0.15), _limits(allp[:, 1], 0.15)
    svg = Svg(520, 480)
    ax = Axes(60, 30, 420, 400, ulim, vlim)
    svg.text(ax.x0 + ax.w / 2, 18, title, 13, "middle")
    labels = roa_grid(net, proj, ulim, vlim, resolution)
    cw, ch = ax.w / resolution, ax.h / resolution
    svg.add('<g class="roa">')
    for r in range(resolution):
        row = labels[r]
        start = 0
        for c in range(1, resolution + 1):
            if c == resolution or row[c] != row[start]:
                lab = int(row[start])
                fill = "#ffffff" if lab < 0 else PALE[lab % len(PALE)]
                svg.rect(ax.x0 + start * cw, ax.y0 + r * ch, (c - start) * cw, ch + 0.01, fill)
                start = c
    svg.add("</g>")
    ax.frame(svg, "PC 1", "PC 2")
    A = proj.to_plane(attractors)
    for k, (u, v) in enumerate(A):
        svg.circle(float(ax.px(u)), float(ax.py(v)), 4.0, PALETTE[k % len(PALETTE)], "attractor")
        svg.text(float(ax.px(u)) + 6, float(ax.py(v)) - 6, f"{{{k + 1},{k + 2}}}", 9)
    if traj_states is not None and len(traj_states):
        T = proj.to_plane(traj_states)
        svg.polyline(ax.px(T[:, 0]), ax.py(T[:, 1]), "#000000", 1.5, "trajectory")
    meta = {"projection": proj.to_json(), "grid_resolution": int(resolution),
            "ulim": list(ulim), "vlim": list(vlim)}
    svg.comment("projection " + " ".join(f"{v:.6f}" for v in proj.basis.ravel()))
    return svg, meta


def rates_figure(times: np.ndarray, states: np.ndarray, gate: Optional[np.ndarray] = None,
                 title: str = "firing rates") -> Svg:
    """One polyline per latent coordinate, stacked panels sharing the time axis."""
    times = np.asarray(times, dtype=float)
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[1]
    panels = n + (1 if gate is not None else 0)
    ph, gap = 50.0, 8.0
    svg = Svg(560, 50 + panels * (ph + gap) + 30)
    svg.text(280, 18, title, 13, "middle")
    tlim = (float(times[0]), float(times[-1])) if times.size > 1 else (0.0, 1.0)
    top = float(np.nanmax(states)) if states.size else 1.0
    ylim = (0.0, top if top > 0 else 1.0)
    for i in range(n):
        ax = Axes(70, 30 + i * (ph + gap), 460, ph, tlim, ylim)
        svg.rect(ax.x0, ax.y0, ax.w, ax.h, "none", "#999999")
        svg.text(ax.x0 - 6, ax.y0 + ph / 2 + 4, f"x{i + 1}", 10, "end")
        svg.polyline(ax.px(times), ax.py(states[:, i]), PALETTE[i % len(PALETTE)], 1.2, "rate")
    if gate is not None:
        ax = Axes(70, 30 + n * (ph + gap), 460, ph, tlim, (0.0, 1.0))
        svg.rect(ax.x0, ax.y0, ax.w, ax.h, "none", "#999999")
        svg.text(ax.x0 - 6, ax.y0 + ph / 2 + 4, "G", 10, "end")
        g = np.nan_to_num(np.asarray(gate, dtype=float))
        svg.polyline(ax.px(times), ax.py(g), "#000000", 1.2, "gate")
    svg.text(300, svg.height - 8, "time", 11, "middle")
    return svg


def accuracy_figure(curves: dict, title: str = "retrieval accuracy vs noise radius") -> Svg:
    """curves: label -> (radii, accuracy); optional vertical markers via key '__marks__'."""
    marks = curves.get("__marks__", {})
    data = {k: v for k, v in curves.items() if k != "__marks__"}
    allr = np.concatenate([np.asarray(v[0], dtype=float) for v in data.values()]) if data else np.zeros(1)
    svg = Svg(520, 380)
    ax = Axes(60, 30, 420, 300, _limits(np.append(allr, list(marks.values()) or [0.0]), 0.02), (0.0, 1.05))
    svg.text(ax.x0 + ax.w / 2, 18, title, 13, "middle")
    ax.frame(svg, "noise radius", "accuracy")
    for k, label in enumerate(sorted(data)):
        r, a = (np.asarray(v, dtype=float) for v in data[label])
        o = np.argsort(r, kind="stable")
        col = PALETTE[k % len(PALETTE)]
        svg.polyline(ax.px(r[o]), ax.py(a[o]), col, 1.5, "accuracy")
        svg.text(ax.x0 + ax.w - 4, ax.y0 + 14 + 13 * k, label, 10, "end")
    for k, label in enumerate(sorted(marks)):
        x = float(ax.px(marks[label]))
        svg.line(x, ax.y0, x, ax.y0 + ax.h, "#555555", 1.0, "radius-mark")
        svg.text(x + 3, ax.y0 + ax.h - 6 - 12 * k, label, 9)
    return svg


def _box_stats(v: np.ndarray) -> tuple:
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = float(v[v >= q1 - 1.5 * iqr].min())
    hi = float(v[v <= q3 + 1.5 * iqr].max())
    return float(q1), float(med), float(q3), lo, hi


def box_figure(groups: dict, title: str = "certified radius by method") -> Svg:
    """Tukey box plots for each named group of radii (ordered by name)."""
    names = sorted(groups)
    vals = [np.asarray(groups[k], dtype=float) for k in names]
    allv = np.concatenate([v for v in vals if v.size]) if any(v.size for v in vals) else np.zeros(1)
    svg = Svg(420, 380)
    ax = Axes(70, 30, 320, 300, (0.0, float(len(names))), _limits(np.append(allv, 0.0), 0.05))
    svg.text(ax.x0 + ax.w / 2, 18, title, 13, "middle")
    svg.rect(ax.x0, ax.y0, ax.w, ax.h, "none", "#000000")
    for k in range(5):
        yv = ax.ylim[0] + (ax.ylim[1] - ax.ylim[0]) * k / 4
        svg.text(ax.x0 - 4, float(ax.py(yv)) + 3, f"{yv:.3g}", 9, "end")
    for k, (name, v) in enumerate(zip(names, vals)):
        xc = float(ax.px(k + 0.5))
        svg.text(xc, ax.y0 + ax.h + 16, f"{name} (n={v.size})", 10, "middle")
        if v.size == 0:
            continue
        q1, med, q3, lo, hi = _box_stats(v)
        col = PALETTE[k % len(PALETTE)]
        bw = 0.3 * ax.w / len(names)
        svg.rect(xc - bw / 2, float(ax.py(q3)), bw, float(ax.py(q1) - ax.py(q3)), PALE[k % len(PALE)], col, "box")
        svg.line(xc - bw / 2, float(ax.py(med)), xc + bw / 2, float(ax.py(med)), col, 2.0, "median")
        svg.line(xc, float(ax.py(q3)), xc, float(ax.py(hi)), col)
        svg.line(xc, float(ax.py(q1)), xc, float(ax.py(lo)), col)
        for o in v[(v < lo) | (v > hi)]:
            svg.circle(xc, float(ax.py(o)), 2.0, col, "outlier")
    return svg


def read_csv_columns(path) -> dict:
    """Numeric CSV with a header row -> {column: array}; non-numeric cells become nan."""
    import csv
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    head, body = rows[0], rows[1:]
    out = {}
    for j, h in enumerate(head):
        col = []
        for r in body:
            try:
                col.append(float(r[j]))
            except (ValueError, IndexError):
                col.append(np.nan)
        out[h] = np.array(col)
    return out


def stack_states(cols: dict, n: Optional[int] = None) -> np.ndarray:
    keys = [k for k in cols if k.startswith("x") and k[1:].isdigit()]
    keys.sort(key=lambda k: int(k[1:]))
    if n is not None:
        keys = keys[:n]
    return np.column_stack([cols[k] for k in keys]) if keys else np.zeros((0, 0))


__all__ = [
    "Svg", "Axes", "Projection", "attractor_projection", "roa_grid", "projection_figure",
    "rates_figure", "accuracy_figure", "box_figure", "read_csv_columns", "stack_states",
]
