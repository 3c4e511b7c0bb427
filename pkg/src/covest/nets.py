"""Deterministic direction grids on low-dimensional spheres."""

import math

import numpy as np

from .errors import UnsupportedDimensionError

# Geodesic radius whose chord length is exactly 1/4.
QUARTER_ANGLE = 2.0 * math.asin(1.0 / 8.0)


def quarter_net(d):
    """A 1/4-net of the unit sphere in R^d (chord distance), d <= 3.

    d = 2 uses equally spaced angles with step <= 2*asin(1/8).  d = 3 uses
    latitude rings spaced by at most QUARTER_ANGLE, each ring carrying
    enough points that its arc spacing is at most QUARTER_ANGLE; every
    point of the sphere is then within geodesic distance QUARTER_ANGLE
    (chord 1/4) of the grid.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        k = math.ceil(2.0 * math.pi / QUARTER_ANGLE)
        t = 2.0 * math.pi * np.arange(k) / k
        return np.column_stack([np.cos(t), np.sin(t)])
    if d == 3:
        rings = math.ceil(math.pi / QUARTER_ANGLE)
        pts = []
        for i in range(rings):
            theta = (i + 0.5) * math.pi / rings
            count = max(1, math.ceil(2.0 * math.pi * math.sin(theta) / QUARTER_ANGLE))
            phi = 2.0 * math.pi * np.arange(count) / count
            st = math.sin(theta)
            pts.append(np.column_stack([st * np.cos(phi), st * np.sin(phi),
                                        np.full(count, math.cos(theta))]))
        return np.vstack(pts)
    raise UnsupportedDimensionError(f"explicit nets are only built for d <= 3, got d={d}")


def canonical_sign(u, tol=1e-12):
    """Flip each row so its first non-negligible coordinate is positive."""
    u = np.array(u, dtype=float, ndmin=2, copy=True)
    big = np.abs(u) > tol
    first = np.argmax(big, axis=1)
    lead = u[np.arange(len(u)), first]
    flip = big.any(axis=1) & (lead < 0)
    u[flip] *= -1.0
    return u


def unique_up_to_sign(u, decimals=12):
    u = canonical_sign(u)
    _, idx = np.unique(np.round(u, decimals), axis=0, return_index=True)
    return u[np.sort(idx)]


def half_circle(step_deg):
    """Directions at multiples of `step_deg` degrees in [0, 180)."""
    k = int(round(180.0 / step_deg))
    t = np.pi * np.arange(k) / k
    return np.column_stack([np.cos(t), np.sin(t)])


def fibonacci_sphere(n):
    """`n` nearly uniform points on S^2 (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
