"""Standalone SVG phase portraits: no external assets, bounded file size.

Points are grouped into hue buckets and emitted as one path per bucket with
round line caps, which renders each point as a dot at a fraction of the byte
cost of individual circle elements.
"""

from __future__ import annotations

import colorsys
import math

TWO_PI = 2.0 * math.pi

_HUE_BUCKETS = 64
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 20, 34, 46


def hue_for_initial(psi0):
    """HSV hue in degrees, 240 (cool) at psi0 = 0 down to 0 (warm) at psi0 = pi."""
    x = min(max(psi0 / math.pi, 0.0), 1.0)
    return 240.0 * (1.0 - x)


def _hex_color(hue_deg):
    r, g, b = colorsys.hsv_to_rgb(hue_deg / 360.0, 0.85, 0.92)
    return "#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255))


def write_phase_portrait(
    path,
    theta,
    psi,
    psi0,
    title="",
    width=1280,
    height=640,
    point_limit=500_000,
):
    """Scatter of (theta, psi) points colored by the orbit's initial psi0.

    theta spans [0, 2*pi), psi spans [0, pi] with psi increasing upward.
    Decimates deterministically by stride above ``point_limit`` points.
    """
    n = len(theta)
    stride = max(1, -(-n // point_limit))  # ceil division
    idx = range(0, n, stride)

    px_w = width - _MARGIN_L - _MARGIN_R
    px_h = height - _MARGIN_T - _MARGIN_B

    def to_px(th, ps):
        x = _MARGIN_L + px_w * (th % TWO_PI) / TWO_PI
        y = _MARGIN_T + px_h * (1.0 - ps / math.pi)
        return x, y

    buckets = [[] for _ in range(_HUE_BUCKETS)]
    for i in idx:
        b = min(int(psi0[i] / math.pi * _HUE_BUCKETS), _HUE_BUCKETS - 1)
        x, y = to_px(theta[i], psi[i])
        buckets[b].append("M%.1f %.1fv.01" % (x, y))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{px_w}" height="{px_h}" '
        'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        lines.append(
            f'<text x="{_MARGIN_L}" y="22" font-family="sans-serif" font-size="15" '
            f'fill="#222222">{title}</text>'
        )

    # axis ticks and labels
    for frac, lab in ((0.0, "0"), (0.5, "&#960;"), (1.0, "2&#960;")):
        x = _MARGIN_L + px_w * frac
        y0 = _MARGIN_T + px_h
        lines.append(
            f'<line x1="{x:.1f}" y1="{y0}" x2="{x:.1f}" y2="{y0 + 6}" stroke="#444444"/>'
        )
        lines.append(
            f'<text x="{x:.1f}" y="{y0 + 22}" font-family="sans-serif" font-size="13" '
            f'fill="#222222" text-anchor="middle">{lab}</text>'
        )
    for frac, lab in ((0.0, "0"), (0.5, "&#960;/2"), (1.0, "&#960;")):
        y = _MARGIN_T + px_h * (1.0 - frac)
        lines.append(
            f'<line x1="{_MARGIN_L - 6}" y1="{y:.1f}" x2="{_MARGIN_L}" y2="{y:.1f}" '
            'stroke="#444444"/>'
        )
        lines.append(
            f'<text x="{_MARGIN_L - 10}" y="{y + 4:.1f}" font-family="sans-serif" '
            f'font-size="13" fill="#222222" text-anchor="end">{lab}</text>'
        )
    lines.append(
        f'<text x="{_MARGIN_L + px_w / 2:.0f}" y="{height - 8}" font-family="sans-serif" '
        'font-size="14" fill="#222222" text-anchor="middle">&#952;</text>'
    )
    lines.append(
        f'<text x="18" y="{_MARGIN_T + px_h / 2:.0f}" font-family="sans-serif" '
        'font-size="14" fill="#222222">&#968;</text>'
    )

    for b, cmds in enumerate(buckets):
        if not cmds:
            continue
        hue = hue_for_initial((b + 0.5) * math.pi / _HUE_BUCKETS)
        lines.append(
            f'<path stroke="{_hex_color(hue)}" stroke-width="1.4" stroke-linecap="round" '
            f'fill="none" d="{"".join(cmds)}"/>'
        )
    lines.append("</svg>")

    with open(path, "w", encoding="utf8") as fh:
        fh.write("\n".join(lines))
