"""The composed map S_n = P_lam^n o R, its basins and the Hausdorff check."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .model import ConstructionError, ModelFamily, poly_step, trap_index
from .polyrat import PoleSumRational, rational_eval
from .sphere import (
    INF,
    OVERFLOW_CAP,
    MobiusTransform,
    RegionSet,
    chordal_distance,
    grid_centers,
    hausdorff_distance,
    is_inf,
)

DEFAULT_OUTER = 500


@dataclass(frozen=True, eq=False)
class ConstructedMap:
    """S_n = P_lam^n o R for the perturbed pole sum R (already scaled by 1 + eta).

    ``owners[t]`` is the region label attached to trap t.  ``rational=None``
    stands for the identity, which is only useful for testing the
    polynomial part.  ``transform`` records the coordinate change applied to
    the input regions before the construction."""

    model: ModelFamily
    rational: PoleSumRational | None
    eta: complex = 0j
    n: int = 1
    owners: tuple = ()
    transform: MobiusTransform = field(default_factory=MobiusTransform)
    certs: dict = field(default_factory=dict)
    cap: float = OVERFLOW_CAP

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        owners = tuple(int(o) for o in self.owners) or tuple(range(1, self.model.d + 1))
        if sorted(owners) != list(range(1, self.model.d + 1)):
            raise ValueError(f"trap owners {owners} are not a permutation of 1..d")
        object.__setattr__(self, "owners", owners)

    def kernel_args(self):
        cen, rad, rho = self.model.trap_arrays()
        r = self.rational
        if r is None:
            anchor, poles, res, ident = 0j, np.zeros(0, complex), np.zeros(0, complex), True
        else:
            anchor, poles, res, ident = r.anchor, np.asarray(r.poles), np.asarray(r.residues), False
        owners = np.array(self.owners, dtype=np.int64)
        return (anchor, poles, res, ident, self.model.coefficients(), self.n, cen, rad, rho, owners)


@nb.njit(cache=True)
def _eval_r(z, anchor, poles, res, ident):
    if ident:
        return z
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        return anchor
    acc = anchor
    for k in range(poles.size):
        dz = z - poles[k]
        if abs(dz) < 1e-12:
            return complex(np.inf, 0.0)
        acc += res[k] / dz
    return acc


@nb.njit(cache=True)
def _sn_step(z, anchor, poles, res, ident, coef, n, cen, rad, rho):
    """One application of S_n with early exit: (value, trap index or -1, P-steps used)."""
    w = _eval_r(z, anchor, poles, res, ident)
    k = trap_index(w, cen, rad, rho)
    if k >= 0:
        return w, k, 0
    for i in range(n):
        w = poly_step(w, coef)
        k = trap_index(w, cen, rad, rho)
        if k >= 0:
            return w, k, i + 1
    return w, -1, n


@nb.njit(cache=True)
def _sn_full(z, anchor, poles, res, ident, coef, n, cap):
    w = _eval_r(z, anchor, poles, res, ident)
    for i in range(n):
        if not (np.isfinite(w.real) and np.isfinite(w.imag)) or abs(w) > cap:
            return complex(np.inf, 0.0)
        w = poly_step(w, coef)
    if not (np.isfinite(w.real) and np.isfinite(w.imag)) or abs(w) > cap:
        return complex(np.inf, 0.0)
    return w


@nb.njit(cache=True)
def _classify_one(z, anchor, poles, res, ident, coef, n, cen, rad, rho, owners, max_outer):
    k = trap_index(z, cen, rad, rho)
    if k >= 0:
        return owners[k], 0
    for it in range(1, max_outer + 1):
        z, k, _ = _sn_step(z, anchor, poles, res, ident, coef, n, cen, rad, rho)
        if k >= 0:
            return owners[k], it
    return 0, max_outer


@nb.njit(cache=True, parallel=True)
def _classify_many(zs, anchor, poles, res, ident, coef, n, cen, rad, rho, owners, max_outer, labels, counts):
    for i in nb.prange(zs.size):
        lab, it = _classify_one(zs[i], anchor, poles, res, ident, coef, n, cen, rad, rho, owners, max_outer)
        labels[i] = lab
        counts[i] = it


@nb.njit(cache=True, parallel=True)
def _full_many(zs, anchor, poles, res, ident, coef, n, cap, out):
    for i in nb.prange(zs.size):
        out[i] = _sn_full(zs[i], anchor, poles, res, ident, coef, n, cap)


def eval_map(m: ConstructedMap, z):
    """R then up to n P-steps, stopping at the first half-trap.

    Returns (value, region label or 0, P-steps used)."""
    anchor, poles, res, ident, coef, n, cen, rad, rho, owners = m.kernel_args()
    w, k, used = _sn_step(complex(z), anchor, poles, res, ident, coef, n, cen, rad, rho)
    w = INF if not np.isfinite(w) or abs(w) > m.cap else w
    return w, (int(owners[k]) if k >= 0 else 0), int(used)


def apply_map(m: ConstructedMap, z) -> np.ndarray:
    """S_n(z) without early exit; overflow beyond the cap becomes INF."""
    z = np.ascontiguousarray(np.asarray(z, dtype=complex).ravel())
    anchor, poles, res, ident, coef, n, *_ = m.kernel_args()
    out = np.empty_like(z)
    _full_many(z, anchor, poles, res, ident, coef, n, m.cap, out)
    return out


def classify_points(m: ConstructedMap, z, max_outer: int = DEFAULT_OUTER):
    """(labels, outer iteration counts) for arbitrary points."""
    z = np.asarray(z, dtype=complex)
    flat = np.ascontiguousarray(z.ravel())
    labels = np.empty(flat.size, dtype=np.uint8)
    counts = np.empty(flat.size, dtype=np.uint16)
    _classify_many(flat, *m.kernel_args(), int(max_outer), labels, counts)
    return labels.reshape(z.shape), counts.reshape(z.shape)


def choose_n(steps) -> int:
    """Smallest n >= 1 taking every critical value of R into a half-trap."""
    steps = np.asarray(steps)
    if np.any(steps < 0):
        raise ConstructionError(f"{int(np.sum(steps < 0))} critical values never entered a half-trap")
    return int(max(1, steps.max(initial=0)))


def find_fixed_point(m: ConstructedMap, j: int, max_steps: int = 10000):
    """Attracting fixed point of S_n in trap j; INF stands for the INF trap."""
    c = m.model.xi[j]
    if is_inf(c):
        return INF
    z = complex(c)
    for _ in range(max_steps):
        w = complex(apply_map(m, z)[0])
        if chordal_distance(w, z) < 1e-12:
            if not m.model.in_trap(w, j, 0.5):
                raise ConstructionError(f"fixed point of trap {j} left its half-trap")
            return w
        z = w
    raise ConstructionError(f"no convergence to the fixed point of trap {j} in {max_steps} steps")


def exterior_certificate(m: ConstructedMap, radius: float, samples: int = 4096):
    """Bound on |R - anchor| over |z| >= radius (maximum modulus, sampled with a
    derivative bound); returns (bound, holds) where ``holds`` means the whole
    exterior maps into the INF half-trap."""
    r = m.rational
    if r is None:
        return np.inf, False
    pmax = np.abs(r.poles).max(initial=0.0)
    if radius <= pmax:
        return np.inf, False
    t = 2 * np.pi * np.arange(samples) / samples
    z = radius * np.exp(1j * t)
    err = np.abs(rational_eval(r, z) - r.anchor).max()
    lip = np.sum(np.abs(r.residues) / (radius - np.abs(r.poles)) ** 2)
    bound = float(err + lip * np.pi * radius / samples)
    _, _, rho = m.model.trap_arrays()
    holds = abs(r.anchor) - bound > rho
    return bound, bool(holds)


# ---------------------------------------------------------------------------
# basin charts


@dataclass
class BasinChart:
    labels: np.ndarray  # uint8, region label or 0
    counts: np.ndarray  # uint16 outer iterations
    chart_radius: float
    d: int

    @property
    def resolution(self) -> int:
        return self.labels.shape[0]

    @property
    def pixel_size(self) -> float:
        return 2 * self.chart_radius / self.resolution

    def pixel_centers(self) -> np.ndarray:
        return grid_centers(self.resolution, self.chart_radius)


def chart_radius_for(m: ConstructedMap, regions: RegionSet) -> float:
    """Chart holding the region grid, the finite traps and every pole, with
    the region pixels aligned to chart pixels."""
    h = regions.pixel_size
    xi = m.model.xi[:-1]
    want = max(regions.chart_radius, 1.5 * float(np.abs(xi).max(initial=0)))
    if m.rational is not None and m.rational.size:
        want = max(want, 1.05 * float(np.abs(m.rational.poles).max()))
    k = int(np.ceil((want - regions.chart_radius) / h - 1e-9))
    return regions.chart_radius + k * h


def classify_grid(m: ConstructedMap, resolution: int, chart_radius: float, max_outer_iters: int = DEFAULT_OUTER, transform: MobiusTransform | None = None) -> BasinChart:
    """Label every pixel centre by the first half-trap its S_n-orbit enters.

    With ``transform`` the chart is in the input coordinates and each pixel
    is moved by the transform before iterating."""
    z = grid_centers(resolution, chart_radius)
    if transform is not None and not transform.identity:
        z = transform.forward(z)
    labels, counts = classify_points(m, z, max_outer_iters)
    return BasinChart(labels, counts, float(chart_radius), m.model.d)


def chart_boundary(labels: np.ndarray) -> np.ndarray:
    """Julia proxy: unconverged pixels, and basin pixels with a 4-neighbour
    in a different basin."""
    lab = labels.astype(np.int16)
    out = lab == 0
    dx = (lab[:, 1:] != lab[:, :-1]) & (lab[:, 1:] > 0) & (lab[:, :-1] > 0)
    dy = (lab[1:, :] != lab[:-1, :]) & (lab[1:, :] > 0) & (lab[:-1, :] > 0)
    out[:, 1:] |= dx
    out[:, :-1] |= dx
    out[1:, :] |= dy
    out[:-1, :] |= dy
    return out


def _on_region_grid(regions: RegionSet, chart: BasinChart):
    """Chart labels and Julia proxy on the region grid (nearest chart pixel)."""
    jul = chart_boundary(chart.labels)
    n = regions.resolution
    hc = chart.pixel_size
    off = (chart.chart_radius - regions.chart_radius) / hc
    if abs(hc - regions.pixel_size) < 1e-12 * hc and abs(off - round(off)) < 1e-6:
        o = int(round(off))
        if o >= 0 and o + n <= chart.resolution:
            sl = (slice(o, o + n), slice(o, o + n))
            return chart.labels[sl], jul[sl]
    z = regions.pixel_centers()
    col = np.clip(np.floor((z.real + chart.chart_radius) / hc).astype(np.int64), 0, chart.resolution - 1)
    row = np.clip(np.floor((z.imag + chart.chart_radius) / hc).astype(np.int64), 0, chart.resolution - 1)
    return chart.labels[row, col], jul[row, col]


@dataclass
class VerificationReport:
    values: dict

    @property
    def passed(self) -> bool:
        return bool(self.values.get("pass", False))

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if isinstance(v, (bool, np.bool_)):
                v = "true" if v else "false"
            elif isinstance(v, (float, np.floating)):
                v = f"{float(v):.17g}"
            elif isinstance(v, complex):
                v = f"{v.real:.17g} {v.imag:.17g}"
            elif isinstance(v, (list, tuple, np.ndarray)):
                v = " ".join(str(int(x)) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VerificationReport":
        vals = {}
        for line in text.splitlines():
            if "=" not in line or line.lstrip().startswith("#"):
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            vals[k] = {"true": True, "false": False}.get(v, v)
        return cls(vals)


def verify_approximation(regions: RegionSet, chart: BasinChart, eps: float, extra: dict | None = None) -> VerificationReport:
    """Chordal Hausdorff distances between each A_j and its basin, and
    between J and the chart's Julia proxy, on the region grid."""
    lab, jul = _on_region_grid(regions, chart)
    z = regions.pixel_centers()
    vals = {"eps": float(eps), "d": regions.d, "resolution": regions.resolution, "chart_radius": float(regions.chart_radius)}
    if extra:
        vals.update(extra)
    ok = True
    for j in range(1, regions.d + 1):
        a, b = z[regions.labels == j], z[lab == j]
        if a.size == 0 or b.size == 0:
            raise ValueError(f"label {j} is empty on {'input' if a.size == 0 else 'chart'} side")
        dist = hausdorff_distance(a, b)
        vals[f"hausdorff_A{j}"] = dist
        ok &= dist < eps
    a, b = z[regions.labels == 0], z[jul]
    if a.size == 0 or b.size == 0:
        raise ValueError("boundary set is empty")
    dist = hausdorff_distance(a, b)
    vals["hausdorff_J"] = dist
    ok &= dist < eps
    h = regions.pixel_size
    vals["far_cap_diameter"] = float(2 * chordal_distance(regions.chart_radius, INF))
    vals["grid_error"] = float(2 * chordal_distance(0, h * (1 + 1j)))
    vals["nonconverged_fraction"] = float(np.mean(lab == 0))
    vals["pass"] = bool(ok)
    return VerificationReport(vals)
