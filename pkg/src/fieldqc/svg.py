"""Minimal self-contained SVG line charts (log-y), written as plain markup."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=78, right=20, top=36, bottom=56)
COLORS = ("#1f4e99", "#b3411b", "#2b8a3e", "#6b3fa0")


def _fmt(x):
    return f"{x:.2f}"


def _log_ticks(lo, hi):
    return [10.0**e for e in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def _lin_ticks(lo, hi, n=6):
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_chart(series, xlabel, ylabel, title="", hlines=()):
    """Render ``series`` = [(label, xs, ys), ...] with a logarithmic y axis.

    Non-positive or non-finite y values are skipped.  ``hlines`` holds
    (y, label) reference lines.
    """
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y) and y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    ys = [y for _, y in pts] + [y for y, _ in hlines]
    xs = [x for x, _ in pts]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    yt = _log_ticks(min(ys), max(ys))
    ly0, ly1 = math.log10(yt[0]), math.log10(yt[-1])
    if ly1 == ly0:
        ly1 = ly0 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def X(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return MARGIN["top"] + (ly1 - math.log10(y)) / (ly1 - ly0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    left, right = MARGIN["left"], WIDTH - MARGIN["right"]
    top, bottom = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    for t in yt:
        y = Y(t)
        out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{right}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">1e{round(math.log10(t))}</text>')
    for t in _lin_ticks(x0, x1):
        x = X(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{top}" x2="{_fmt(x)}" y2="{bottom}" stroke="#eee"/>')
        out.append(f'<text x="{_fmt(x)}" y="{bottom + 16}" text-anchor="middle">{t:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18 {(top + bottom) / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for y, label in hlines:
        out.append(f'<line x1="{left}" y1="{_fmt(Y(y))}" x2="{right}" y2="{_fmt(Y(y))}" '
                   f'stroke="#888" stroke-dasharray="5,4"/>')
        out.append(f'<text x="{right - 4}" y="{_fmt(Y(y) - 4)}" text-anchor="end" fill="#555">{escape(label)}</text>')
    for i, (label, sx, sy) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        seg = [f"{_fmt(X(x))},{_fmt(Y(y))}" for x, y in zip(sx, sy)
               if math.isfinite(x) and math.isfinite(y) and y > 0]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{" ".join(seg)}"/>')
        ly = top + 16 + 16 * i
        out.append(f'<line x1="{right - 150}" y1="{ly}" x2="{right - 126}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right - 120}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
