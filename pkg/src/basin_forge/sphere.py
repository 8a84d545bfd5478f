"""Riemann sphere geometry: chordal metric, disks, region rasters, Hausdorff distance.

Points of the sphere are plain Python/numpy complex numbers; the point at
infinity is the value ``INF``.  Any magnitude above ``OVERFLOW_CAP`` is
treated as infinity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

OVERFLOW_CAP = 1e150
INF = complex(np.inf, 0.0)


class ResolutionError(ValueError):
    """The raster is too coarse for the requested operation."""


def is_inf(z):
    z = np.asarray(z, dtype=complex)
    return ~np.isfinite(z) | (np.abs(z) > OVERFLOW_CAP)


def normalize_point(z) -> complex:
    """Map a scalar to a sphere point: huge or infinite values become ``INF``."""
    z = complex(z)
    if np.isnan(z.real) or np.isnan(z.imag):
        raise ValueError("NaN is not a point of the sphere")
    if is_inf(z):
        return INF
    return z


def chordal_distance(a, b):
    """Chordal distance on the sphere of diameter 2; broadcasts over arrays."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    a, b = np.broadcast_arrays(a, b)
    ia, ib = is_inf(a), is_inf(b)
    af = np.where(ia, 0, a)
    bf = np.where(ib, 0, b)
    with np.errstate(invalid="ignore", over="ignore"):
        both = 2 * np.abs(af - bf) / np.sqrt((1 + np.abs(af) ** 2) * (1 + np.abs(bf) ** 2))
    out = np.where(ia & ~ib, 2 / np.sqrt(1 + np.abs(bf) ** 2), both)
    out = np.where(ib & ~ia, 2 / np.sqrt(1 + np.abs(af) ** 2), out)
    out = np.where(ia & ib, 0.0, out)
    return out[()] if out.ndim == 0 else out


def to_unit_sphere(z) -> np.ndarray:
    """Inverse stereographic projection onto the unit sphere, shape (..., 3).

    Euclidean distance between the images equals the chordal distance.
    """
    z = np.asarray(z, dtype=complex)
    inf = is_inf(z)
    zf = np.where(inf, 0, z)
    m = np.abs(zf) ** 2
    out = np.stack([2 * zf.real, 2 * zf.imag, m - 1], axis=-1) / (1 + m)[..., None]
    out[inf] = (0.0, 0.0, 1.0)
    return out


def euclidean_radius_of_infinity_disk(r: float) -> float:
    """Threshold rho with D(inf, r) = {|z| > rho} together with infinity."""
    if not 0 < r < 2:
        raise ValueError(f"chordal radius must lie in (0, 2), got {r}")
    return float(np.sqrt(4 / r**2 - 1))


@dataclass(frozen=True)
class SphereDisk:
    """Open chordal disk D(center, radius)."""

    center: complex
    radius: float

    def __post_init__(self):
        if not 0 < self.radius <= 2:
            raise ValueError(f"chordal radius must lie in (0, 2], got {self.radius}")
        object.__setattr__(self, "center", normalize_point(self.center))

    @property
    def at_infinity(self) -> bool:
        return bool(is_inf(self.center))

    def contains(self, z):
        return chordal_distance(z, self.center) < self.radius

    def euclidean(self):
        """Coordinate form ``(c, R, outside)``.

        ``outside=False`` means the disk is {|z - c| < R}; ``outside=True``
        means it is {|z - c| > R} plus infinity.
        """
        if self.at_infinity:
            return 0j, euclidean_radius_of_infinity_disk(self.radius), True
        c = self.center
        s = 1 + abs(c) ** 2
        k = self.radius**2 * s / 4
        if abs(1 - k) < 1e-14:
            raise ValueError("disk boundary passes through infinity")
        cen = c / (1 - k)
        rad = np.sqrt(k * (s - k)) / abs(1 - k)
        return cen, float(rad), k > 1

    def inner_radius(self) -> float:
        """Largest Euclidean radius rho with {|z - center| < rho} inside the disk."""
        cen, rad, outside = self.euclidean()
        if outside:
            return np.inf if self.at_infinity else rad - abs(cen - self.center)
        return rad - abs(cen - self.center)

    def boundary_points(self, count: int) -> np.ndarray:
        cen, rad, _ = self.euclidean()
        t = 2 * np.pi * np.arange(count) / count
        return cen + rad * np.exp(1j * t)


# ---------------------------------------------------------------------------
# region rasters


@dataclass
class RegionSet:
    """Labelled N x N raster over the chart [-L, L]^2.

    ``labels[row, col]`` is the label of the pixel centred at
    x = -L + (col + 1/2) h, y = -L + (row + 1/2) h, h = 2L/N.  Label 0 is
    the common boundary J, labels 1..d are the regions.  ``source`` is an
    optional exact labelling function (complex array -> label array), kept
    so that coordinate changes can be re-rasterized without resampling loss.
    """

    labels: np.ndarray
    chart_radius: float
    d: int
    source: Optional[Callable] = field(default=None, repr=False, compare=False)
    infinity_in_J: bool = True

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2 or self.labels.shape[0] != self.labels.shape[1]:
            raise ValueError("labels must be a square grid")

    @property
    def resolution(self) -> int:
        return self.labels.shape[0]

    @property
    def pixel_size(self) -> float:
        return 2 * self.chart_radius / self.resolution

    def pixel_centers(self) -> np.ndarray:
        return grid_centers(self.resolution, self.chart_radius)

    def label_points(self, label: int) -> np.ndarray:
        return self.pixel_centers()[self.labels == label]

    def pixel_index(self, z):
        """Row/column of the pixel containing z, and an in-chart mask."""
        z = np.asarray(z, dtype=complex)
        inf = is_inf(z)
        zf = np.where(inf, 0, z)
        h = self.pixel_size
        col = np.floor((zf.real + self.chart_radius) / h).astype(np.int64)
        row = np.floor((zf.imag + self.chart_radius) / h).astype(np.int64)
        n = self.resolution
        ok = ~inf & (col >= 0) & (col < n) & (row >= 0) & (row < n)
        return np.clip(row, 0, n - 1), np.clip(col, 0, n - 1), ok

    def label_at(self, z, outside: int = 0):
        row, col, ok = self.pixel_index(z)
        return np.where(ok, self.labels[row, col], outside)

    def validate(self, eps: Optional[float] = None) -> None:
        lab = self.labels
        if self.d < 2:
            raise ValueError("need d >= 2 regions")
        if lab.max() > self.d:
            raise ValueError(f"label {lab.max()} exceeds d = {self.d}")
        present = set(np.unique(lab).tolist())
        missing = [j for j in range(self.d + 1) if j not in present]
        if missing:
            raise ValueError(f"labels {missing} do not occur")
        bad = adjacent_conflicts(lab)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(f"regions touch without a boundary pixel at row {r}, col {c}")
        if eps is not None and self.chart_radius < 8 / eps:
            raise ValueError(f"chart radius {self.chart_radius} < 8/eps = {8 / eps}")


def grid_centers(n: int, radius: float) -> np.ndarray:
    h = 2 * radius / n
    t = -radius + (np.arange(n) + 0.5) * h
    return t[None, :] + 1j * t[:, None]


def adjacent_conflicts(labels: np.ndarray) -> np.ndarray:
    """Mask of pixels 4-adjacent (right or up) to a different nonzero label."""
    lab = labels.astype(np.int16)
    bad = np.zeros(lab.shape, dtype=bool)
    right = (lab[:, :-1] > 0) & (lab[:, 1:] > 0) & (lab[:, :-1] != lab[:, 1:])
    up = (lab[:-1, :] > 0) & (lab[1:, :] > 0) & (lab[:-1, :] != lab[1:, :])
    bad[:, :-1] |= right
    bad[:-1, :] |= up
    return bad


def separate_labels(labels: np.ndarray) -> np.ndarray:
    """Insert boundary pixels until no two distinct regions are 4-adjacent."""
    lab = labels.copy()
    while True:
        bad = adjacent_conflicts(lab)
        if not bad.any():
            return lab
        lab[bad] = 0


def rasterize(label_fn: Callable, d: int, resolution: int, chart_radius: float) -> RegionSet:
    """Corner rule: a pixel keeps a region label only if its centre and four
    corners all carry it; otherwise it becomes a boundary pixel.  Two
    4-adjacent pixels share two corners, so regions are always separated."""
    n = resolution
    h = 2 * chart_radius / n
    t = -chart_radius + np.arange(n + 1) * h
    corners = np.asarray(label_fn(t[None, :] + 1j * t[:, None]), dtype=np.int16)
    centre = np.asarray(label_fn(grid_centers(n, chart_radius)), dtype=np.int16)
    same = (
        (corners[:-1, :-1] == centre)
        & (corners[1:, :-1] == centre)
        & (corners[:-1, 1:] == centre)
        & (corners[1:, 1:] == centre)
    )
    labels = np.where(same & (centre > 0), centre, 0)
    at_inf = int(np.asarray(label_fn(np.array([INF])))[0])
    return RegionSet(separate_labels(labels), chart_radius, d, source=label_fn, infinity_in_J=at_inf == 0)


def infinity_in_boundary(regions: RegionSet) -> bool:
    """At chart resolution, infinity lies in J when the chart border meets
    two or more distinct regions (or only boundary pixels)."""
    lab = regions.labels
    border = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    return len(set(border[border > 0].tolist())) != 1


# ---------------------------------------------------------------------------
# Mobius normalization


@dataclass(frozen=True)
class MobiusTransform:
    """z -> 1/(z - p), or the identity when p is infinity."""

    p: complex = INF

    @property
    def identity(self) -> bool:
        return bool(is_inf(self.p))

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        if self.identity:
            return z.copy()
        inf = is_inf(z)
        d = np.where(inf, 1, z - self.p)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(d == 0, INF, 1 / np.where(d == 0, 1, d))
        return np.where(inf, 0j, w)

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        if self.identity:
            return w.copy()
        inf = is_inf(w)
        zero = ~inf & (w == 0)
        safe = np.where(inf | zero, 1, w)
        z = self.p + 1 / safe
        return np.where(inf, self.p, np.where(zero, INF, z))

    def serialize(self) -> str:
        if self.identity:
            return "identity"
        return f"invert {self.p.real!r} {self.p.imag!r}"

    @classmethod
    def parse(cls, text: str) -> "MobiusTransform":
        parts = text.split()
        if parts == ["identity"]:
            return cls()
        if len(parts) == 3 and parts[0] == "invert":
            return cls(complex(float(parts[1]), float(parts[2])))
        raise ValueError(f"bad transform descriptor {text!r}")


def resample(regions: RegionSet, transform: MobiusTransform, resolution=None, chart_radius=None) -> RegionSet:
    """Image of ``regions`` under ``transform`` on a fresh chart."""
    n = resolution or regions.resolution
    radius = chart_radius or regions.chart_radius
    if transform.identity and n == regions.resolution and radius == regions.chart_radius:
        return RegionSet(regions.labels.copy(), radius, regions.d, regions.source, regions.infinity_in_J)
    if regions.source is not None:
        src = regions.source
        out = rasterize(lambda w: src(transform.inverse(w)), regions.d, n, radius)
    else:
        z = transform.inverse(grid_centers(n, radius))
        lab = regions.label_at(z, outside=0)
        out = RegionSet(separate_labels(lab), radius, regions.d)
    present = set(np.unique(out.labels).tolist())
    if any(j not in present for j in range(1, regions.d + 1)):
        raise ResolutionError("resampling emptied a region label")
    return out


def mobius_normalize(regions: RegionSet, p) -> tuple[RegionSet, MobiusTransform]:
    """Move the boundary point p to infinity."""
    p = normalize_point(p)
    transform = MobiusTransform(p)
    if transform.identity:
        return resample(regions, transform), transform
    if regions.label_at(p, outside=0) != 0:
        raise ValueError(f"normalization point {p} is not a boundary pixel")
    out = resample(regions, transform)
    out.infinity_in_J = True
    return out, transform


# ---------------------------------------------------------------------------
# Hausdorff distance


def directed_hausdorff(a, b) -> float:
    """sup over a of the chordal distance to the nearest point of b."""
    a = np.ravel(np.asarray(a, dtype=complex))
    b = np.ravel(np.asarray(b, dtype=complex))
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff distance of an empty set is undefined")
    dist, _ = cKDTree(to_unit_sphere(b)).query(to_unit_sphere(a))
    return float(dist.max())


def hausdorff_distance(a, b) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


# ---------------------------------------------------------------------------
# boundary covering


def pixel_clearance(regions: RegionSet, j: int) -> np.ndarray:
    """Chordal lower bound, per pixel of region j, on the distance to the
    nearest pixel square not labelled j (the exterior of the chart counts
    as not j).  Zero outside region j."""
    inside = regions.labels == j
    h = regions.pixel_size
    edt = ndimage.distance_transform_edt(np.pad(inside, 1))[1:-1, 1:-1] * h
    rho = np.clip(edt - h / np.sqrt(2), 0, None)
    a = np.abs(regions.pixel_centers())
    return np.where(inside, 2 * rho / np.sqrt((1 + a**2) * (1 + (a + rho) ** 2)), 0.0)


def boundary_pixels(regions: RegionSet, j: int) -> np.ndarray:
    """Flat row-major indices of label-0 pixels 8-adjacent to region j."""
    near = ndimage.binary_dilation(regions.labels == j, structure=np.ones((3, 3), bool))
    return np.flatnonzero(near & (regions.labels == 0))


def cover_boundary(regions: RegionSet, j: int, eps: float, reach: float = 0.5) -> list[SphereDisk]:
    """Finitely many disks inside region j coming close to all of its boundary.

    Boundary pixels are scanned in row-major order.  For each one not yet
    within ``reach * eps`` of a chosen centre, the region-j pixel of largest
    clearance within ``reach * eps`` becomes a new centre (the nearest
    region-j pixel within ``eps`` if there is none), with radius half its
    clearance.  The doubled closed disks therefore stay inside region j.
    """
    h = regions.pixel_size
    centers = regions.pixel_centers().ravel()
    if eps <= 0:
        raise ValueError("eps must be positive")
    cand = np.flatnonzero(regions.labels.ravel() == j)
    if cand.size == 0:
        raise ValueError(f"region {j} is empty")
    bidx = boundary_pixels(regions, j)
    if bidx.size == 0:
        return []
    if eps <= 2 * float(np.min(chordal_distance(centers[bidx], centers[bidx] + h * (1 + 1j)))):
        raise ResolutionError(f"eps = {eps} is below twice the chordal pixel diameter")
    cz = centers[cand]
    cclear = pixel_clearance(regions, j).ravel()[cand]
    bz = centers[bidx]
    covered = np.zeros(bz.size, dtype=bool)
    disks = []
    for t in range(bz.size):
        if covered[t]:
            continue
        dist = chordal_distance(bz[t], cz)
        near = dist < reach * eps
        if near.any():
            k = int(np.argmax(np.where(near, cclear, -1.0)))
        else:
            k = int(np.argmin(dist))
            if dist[k] >= eps:
                raise ResolutionError(f"no pixel of region {j} within eps of boundary point {bz[t]}")
        if cclear[k] <= 0:
            raise ResolutionError(f"pixel {cz[k]} of region {j} has no clearance")
        disks.append(SphereDisk(cz[k], 0.4999 * cclear[k]))
        covered |= chordal_distance(bz, cz[k]) < reach * eps
        covered[t] = True
    return disks


def check_cover(regions: RegionSet, j: int, eps: float, disks: list[SphereDisk], rim: int = 64) -> list[str]:
    """Re-check the covering postconditions; returns a list of violations."""
    problems = []
    for disk in disks:
        doubled = SphereDisk(disk.center, min(2 * disk.radius, 2.0))
        pts = np.append(doubled.boundary_points(rim), disk.center)
        lab = regions.label_at(pts, outside=-1)
        if np.any(lab != j):
            problems.append(f"doubled disk at {disk.center} leaves region {j}")
    bidx = boundary_pixels(regions, j)
    if bidx.size and disks:
        bz = regions.pixel_centers().ravel()[bidx]
        c = np.array([disk.center for disk in disks])
        best, _ = cKDTree(to_unit_sphere(c)).query(to_unit_sphere(bz))
        for z in bz[best >= eps]:
            problems.append(f"boundary pixel {z} is not within eps of a disk")
    elif bidx.size:
        problems.append("boundary present but no disks")
    return problems
