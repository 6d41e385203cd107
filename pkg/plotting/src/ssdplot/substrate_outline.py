"""Substrate polylines rebuilt from the meta.json substrate table.

Only the documented config schema is consumed; nothing is imported from the
simulator.
"""

from __future__ import annotations

import math

import numpy as np


def substrate_polyline(spec: dict, c_min: float, c_max: float, n: int = 800):
    """Sample the substrate position map on [c_min, c_max]."""
    kind = spec["kind"]
    cs = np.linspace(c_min, c_max, n)
    if kind == "line":
        origin = np.asarray(spec.get("origin", (0.0, 0.0)), dtype=float)
        d = np.asarray(spec.get("direction", (1.0, 0.0)), dtype=float)
        d = d / np.hypot(*d)
        return origin + cs[:, None] * d
    if kind == "circle":
        radius = float(spec["radius"])
        center = np.asarray(spec.get("center", (0.0, 0.0)), dtype=float)
        theta0 = float(spec.get("theta0", 0.0))
        spin = int(spec.get("spin", 1))
        th = theta0 + spin * cs / radius
        return center + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    if kind in ("cos", "sin"):
        amp = float(spec["amplitude"])
        k = float(spec["wavenumber"])
        f = np.cos if kind == "cos" else np.sin
        fp = (lambda x: -amp * k * np.sin(k * x)) if kind == "cos" else (
            lambda x: amp * k * np.cos(k * x)
        )
        # arclength -> x by integrating dx/dc = 1/sqrt(1 + f'(x)^2)
        span = c_max - c_min
        m = max(4 * n, 4096)
        xs = np.empty(m)
        step = span / (m - 1)
        x = _graph_x_of_c(amp, k, kind, c_min)
        for i in range(m):
            xs[i] = x
            x += step / math.sqrt(1.0 + fp(x) ** 2)
        xs = np.interp(cs, np.linspace(c_min, c_max, m), xs)
        return np.stack([xs, amp * f(k * xs)], axis=1)
    if kind == "smoothed_corner":
        rho = float(spec.get("radius", 1.0))
        q = math.pi * rho / 2.0
        pts = []
        for c in cs:
            if c <= 0.0:
                pts.append((-rho + c, 0.0))
            elif c <= q:
                th = -math.pi / 2.0 + c / rho
                pts.append((-rho + rho * math.cos(th), rho + rho * math.sin(th)))
            elif c <= 2 * q:
                th = math.pi - (c - q) / rho
                pts.append((rho + rho * math.cos(th), rho + rho * math.sin(th)))
            else:
                pts.append((rho + (c - 2 * q), 2 * rho))
        return np.asarray(pts)
    raise ValueError(f"unknown substrate kind {kind!r}")


def _graph_x_of_c(amp, k, kind, c_target, step=1e-3):
    """x-coordinate at arclength c_target for y = amp f(k x), f(0)-anchored."""
    fp = (lambda x: -amp * k * math.sin(k * x)) if kind == "cos" else (
        lambda x: amp * k * math.cos(k * x)
    )
    c, x = 0.0, 0.0
    sgn = 1.0 if c_target >= 0.0 else -1.0
    while sgn * (c_target - c) > 0.0:
        dc = sgn * min(step, abs(c_target - c))
        x += dc / math.sqrt(1.0 + fp(x) ** 2)
        c += dc
    return x
