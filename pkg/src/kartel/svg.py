"""Tiny static SVG charts: polylines, horizontal bars and dot strips.

Just enough to eyeball the figures; the CSV/JSON outputs carry the numbers.
"""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd")
W, H = 640, 400
PAD_L, PAD_R, PAD_T, PAD_B = 60, 20, 30, 45


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


class _Frame:
    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
            'font-family="sans-serif" font-size="11">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
        ]
        if title:
            self.parts.append(f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
        bx, by = PAD_L, H - PAD_B
        self.parts.append(f'<line x1="{bx}" y1="{by}" x2="{W - PAD_R}" y2="{by}" stroke="black"/>')
        self.parts.append(f'<line x1="{bx}" y1="{PAD_T}" x2="{bx}" y2="{by}" stroke="black"/>')
        if xlabel:
            self.parts.append(f'<text x="{(PAD_L + W - PAD_R) / 2}" y="{H - 8}" text-anchor="middle">{escape(xlabel)}</text>')
        if ylabel:
            self.parts.append(f'<text x="14" y="{(PAD_T + by) / 2}" text-anchor="middle" '
                              f'transform="rotate(-90 14 {(PAD_T + by) / 2})">{escape(ylabel)}</text>')

    def sx(self, x: float) -> float:
        return PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)

    def sy(self, y: float) -> float:
        return H - PAD_B - (y - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)

    def xticks(self, values=None):
        for v in values if values is not None else _ticks(self.x0, self.x1):
            x = self.sx(v)
            self.parts.append(f'<line x1="{x:.1f}" y1="{H - PAD_B}" x2="{x:.1f}" y2="{H - PAD_B + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{x:.1f}" y="{H - PAD_B + 16}" text-anchor="middle">{_fmt(v)}</text>')

    def yticks(self, values=None, labels=None):
        values = values if values is not None else _ticks(self.y0, self.y1)
        for k, v in enumerate(values):
            y = self.sy(v)
            text = labels[k] if labels is not None else _fmt(v)
            self.parts.append(f'<line x1="{PAD_L - 4}" y1="{y:.1f}" x2="{PAD_L}" y2="{y:.1f}" stroke="black"/>')
            self.parts.append(f'<text x="{PAD_L - 6}" y="{y + 4:.1f}" text-anchor="end">{escape(str(text))}</text>')

    def legend(self, names: Sequence[str]):
        for k, name in enumerate(names):
            y = PAD_T + 6 + 14 * k
            x = W - PAD_R - 110
            self.parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="2"/>')
            self.parts.append(f'<text x="{x + 22}" y="{y + 4}">{escape(name)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(x: Sequence[float], series: dict[str, Sequence[float]], title="", xlabel="", ylabel="",
               ylim=None) -> str:
    """One polyline per named series over a shared x axis."""
    ys = [v for vals in series.values() for v in vals]
    ylim = ylim or (min(ys, default=0.0), max(ys, default=1.0))
    fr = _Frame((min(x, default=0), max(x, default=1)), ylim, title, xlabel, ylabel)
    fr.xticks()
    fr.yticks()
    for k, (name, vals) in enumerate(series.items()):
        pts = " ".join(f"{fr.sx(a):.1f},{fr.sy(b):.1f}" for a, b in zip(x, vals))
        fr.parts.append(f'<polyline fill="none" stroke="{PALETTE[k % len(PALETTE)]}" stroke-width="1.5" points="{pts}"/>')
    fr.legend(list(series))
    return fr.render()


def waterfall_chart(labels: Sequence[str], starts: Sequence[float], ends: Sequence[float], title="",
                    xlabel="cartel probability") -> str:
    """Horizontal bars from ``start`` to ``end``, first label at the bottom."""
    lo = min(list(starts) + list(ends) + [0.0])
    hi = max(list(starts) + list(ends) + [1.0])
    n = len(labels)
    fr = _Frame((lo, hi), (-0.5, n - 0.5), title, xlabel, "bid")
    fr.xticks()
    fr.yticks(list(range(n)), list(labels))
    bar = 0.6 * (H - PAD_T - PAD_B) / max(n, 1)
    for k, (a, b) in enumerate(zip(starts, ends)):
        x, w = fr.sx(min(a, b)), abs(fr.sx(b) - fr.sx(a))
        color = PALETTE[0] if b > a else PALETTE[1]
        if a == b:
            fr.parts.append(f'<line x1="{x:.1f}" y1="{fr.sy(k) - bar / 2:.1f}" x2="{x:.1f}" '
                            f'y2="{fr.sy(k) + bar / 2:.1f}" stroke="gray"/>')
        else:
            fr.parts.append(f'<rect x="{x:.1f}" y="{fr.sy(k) - bar / 2:.1f}" width="{max(w, 0.5):.1f}" '
                            f'height="{bar:.1f}" fill="{color}"/>')
    return fr.render()


def strip_chart(rows: Sequence[tuple[int, float]], means: Sequence[float], title="", xlabel="|phi|") -> str:
    """Dots at ``(value, row)`` plus a tick mark per row mean."""
    n = len(means)
    hi = max([v for _, v in rows] + list(means) + [1e-12])
    fr = _Frame((0.0, hi), (0.5, n + 0.5), title, xlabel, "bid")
    fr.xticks()
    fr.yticks(list(range(1, n + 1)))
    for r, v in rows:
        fr.parts.append(f'<circle cx="{fr.sx(v):.1f}" cy="{fr.sy(r):.1f}" r="2.5" fill="{PALETTE[1]}" fill-opacity="0.5"/>')
    for k, m in enumerate(means, start=1):
        y = fr.sy(k)
        fr.parts.append(f'<line x1="{fr.sx(m):.1f}" y1="{y - 7:.1f}" x2="{fr.sx(m):.1f}" y2="{y + 7:.1f}" stroke="{PALETTE[0]}" stroke-width="2"/>')
    return fr.render()
