"""Built-in region sets."""
from __future__ import annotations

import numpy as np

from .sphere import RegionSet, is_inf, rasterize

SCENARIOS = ("unit_circle", "half_planes", "newton")

# boundary point used to move infinity into J when it is not there already
NORMALIZATION_HINTS = {"unit_circle": 1.0 + 0j}


def unit_circle_labels(z):
    z = np.asarray(z, dtype=complex)
    inf = is_inf(z)
    a = np.abs(np.where(inf, 0, z))
    lab = np.where(a < 1, 1, np.where(a > 1, 2, 0))
    return np.where(inf, 2, lab)


def half_plane_labels(z):
    z = np.asarray(z, dtype=complex)
    inf = is_inf(z)
    y = np.where(inf, 0, z).imag
    return np.where(inf, 0, np.where(y > 0, 1, np.where(y < 0, 2, 0)))


def newton_labels(z, d: int, steps: int = 200, tol: float = 1e-8):
    """Label k+1 when Newton's method for z^d - 1 reaches exp(2 pi i k/d)."""
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    w = np.where(is_inf(z), 0, z).ravel().copy()
    active = np.isfinite(z).ravel() & (w != 0)
    roots = np.exp(2j * np.pi * np.arange(d) / d)
    lab = np.zeros(w.size, dtype=np.int16)
    idx = np.flatnonzero(active)
    for _ in range(steps):
        if idx.size == 0:
            break
        v = w[idx]
        with np.errstate(all="ignore"):
            vp = v ** (d - 1)
            v = v - (vp * v - 1) / (d * vp)
        w[idx] = v
        bad = ~np.isfinite(v)
        dist = np.abs(v[:, None] - roots[None, :])
        k = np.argmin(dist, axis=1)
        hit = (dist[np.arange(v.size), k] < tol) & ~bad
        lab[idx[hit]] = k[hit] + 1
        idx = idx[~hit & ~bad]
    return lab.reshape(shape)


def generate_scenario(name: str, d: int | None = None, resolution: int = 512, chart_radius: float = 32.0) -> RegionSet:
    """Rasterize a named scenario on [-chart_radius, chart_radius]^2.

    ``unit_circle`` and ``half_planes`` have d = 2; ``newton`` takes
    d in 3..5 and labels the root basins of Newton's method for z^d - 1.
    """
    if name == "unit_circle":
        if d not in (None, 2):
            raise ValueError("unit_circle has d = 2")
        out = rasterize(unit_circle_labels, 2, resolution, chart_radius)
    elif name == "half_planes":
        if d not in (None, 2):
            raise ValueError("half_planes has d = 2")
        out = rasterize(half_plane_labels, 2, resolution, chart_radius)
    elif name == "newton":
        if d not in (3, 4, 5):
            raise ValueError("newton needs d in 3..5")
        out = rasterize(lambda z: newton_labels(z, d), d, resolution, chart_radius)
    else:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    out.validate()
    return out
