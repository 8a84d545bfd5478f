"""Shrunken regions, quadrature contours and the Cauchy-integral Runge step."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import scipy.fft
from scipy import ndimage
from scipy.spatial import cKDTree

from .model import ConstructionError, ModelFamily, orbit_entry
from .polyrat import PoleSumRational, critical_values, rational_eval
from .sphere import (
    INF,
    RegionSet,
    SphereDisk,
    chordal_distance,
    euclidean_radius_of_infinity_disk,
    grid_centers,
    hausdorff_distance,
    is_inf,
    to_unit_sphere,
)

NODE_BUDGET = 2000  # critical points are found up to this many poles
MIN_NODES = 16
MIN_OPEN = 8


@dataclass
class RegionPart:
    label: int
    core: np.ndarray  # boolean mask on the region grid
    disks: list
    trap: int  # index into model.xi
    target: complex
    samples: np.ndarray = field(repr=False, default=None)


@dataclass
class ShrunkenRegions:
    regions: RegionSet
    eps: float
    model: ModelFamily
    parts: list
    anchor: int  # label of the region owning the INF trap
    hausdorff: dict

    def part(self, label: int) -> RegionPart:
        return self.parts[label - 1]

    @property
    def sample_count(self) -> int:
        return sum(p.samples.size for p in self.parts)

    def owners(self) -> list[int]:
        """Region label attached to each trap, in trap order."""
        out = [0] * self.model.d
        for p in self.parts:
            out[p.trap] = p.label
        return out


def infinity_proxy(delta: float) -> complex:
    """Finite stand-in for the INF target: twice the radius of D(INF, delta/2)."""
    return complex(2 * euclidean_radius_of_infinity_disk(delta / 2), 0.0)


def assign_traps(regions: RegionSet, model: ModelFamily, near: int = 200) -> list[int]:
    """Region label for each trap: the permutation maximizing the share of
    the ``near`` chordally-nearest region pixels carrying that label."""
    d = model.d
    pts = regions.pixel_centers().ravel()
    lab = regions.labels.ravel()
    keep = lab > 0
    tree = cKDTree(to_unit_sphere(pts[keep]))
    k = min(near, int(keep.sum()))
    share = np.zeros((d, d))
    for t, c in enumerate(model.xi):
        _, idx = tree.query(to_unit_sphere(np.array([c])), k=k)
        got = lab[keep][np.atleast_1d(idx).ravel()]
        share[t] = np.bincount(got, minlength=d + 1)[1:] / k
    best, best_score = None, -1.0
    for perm in itertools.permutations(range(1, d + 1)):
        score = sum(share[t, perm[t] - 1] for t in range(d))
        if score > best_score + 1e-12:
            best, best_score = list(perm), score
    return best


def _disk_samples(disk: SphereDisk, rings=(0.0, 0.5, 0.999), count: int = 16) -> np.ndarray:
    c, r, outside = disk.euclidean()
    if outside:
        raise ConstructionError("covering disk contains infinity")
    t = 2 * np.pi * np.arange(count) / count
    pts = [np.array([disk.center])]
    for s in rings:
        if s > 0:
            pts.append(c + s * r * np.exp(1j * t))
    return np.concatenate(pts)


def trap_samples(model: ModelFamily, j: int, count: int = 64) -> np.ndarray:
    t = 2 * np.pi * np.arange(count) / count
    if is_inf(model.xi[j]):
        rho = euclidean_radius_of_infinity_disk(model.delta)
        rings = [rho * s * np.exp(1j * t) for s in (1.0001, 1.5, 3.0)]
        return np.concatenate(rings + [np.array([INF])])
    c, r, _ = SphereDisk(model.xi[j], model.delta).euclidean()
    rings = [c + r * s * np.exp(1j * t) for s in (0.25, 0.5, 0.75, 0.999)]
    return np.concatenate([np.array([c, model.xi[j]])] + rings)


def core_mask(regions: RegionSet, j: int, eps: float) -> np.ndarray:
    """Pixels of region j at chordal distance > eps from J (INF included)."""
    pts = regions.pixel_centers()
    jpts = pts[regions.labels == 0]
    if regions.infinity_in_J:
        jpts = np.append(jpts, INF)
    mask = regions.labels == j
    if jpts.size == 0:
        return mask
    dist, _ = cKDTree(to_unit_sphere(jpts)).query(to_unit_sphere(pts[mask]))
    out = np.zeros_like(mask)
    out[mask] = dist > eps
    return out


def build_A_eps(regions: RegionSet, eps: float, model: ModelFamily, covers: dict, owners=None) -> ShrunkenRegions:
    """Assemble core, covering disks and trap of every region and check that
    parts of different regions are disjoint."""
    d = regions.d
    if owners is None:
        owners = assign_traps(regions, model)
    pts = regions.pixel_centers()
    parts = []
    trap_of = {lab: t for t, lab in enumerate(owners)}
    anchor = owners[-1]
    w_inf = infinity_proxy(model.delta)
    for j in range(1, d + 1):
        t = trap_of[j]
        target = w_inf if is_inf(model.xi[t]) else complex(model.xi[t])
        parts.append(RegionPart(j, core_mask(regions, j, eps), list(covers.get(j, [])), t, target))

    # disjointness of the parts of different regions
    for p in parts:
        trap = SphereDisk(model.xi[p.trap], model.delta)
        for q in parts:
            if q.label == p.label:
                continue
            zc = pts[q.core]
            if zc.size and np.any(trap.contains(zc)):
                raise ConstructionError(f"trap of region {p.label} meets the core of region {q.label}")
            for disk in q.disks:
                if chordal_distance(disk.center, trap.center) < disk.radius + trap.radius:
                    raise ConstructionError(f"trap of region {p.label} meets a covering disk of region {q.label}")
            if p.label < q.label:
                for a in p.disks:
                    for b in q.disks:
                        if chordal_distance(a.center, b.center) < a.radius + b.radius:
                            raise ConstructionError(f"covering disks of regions {p.label} and {q.label} overlap")
            if p.disks and zc.size:
                cen = np.array([a.center for a in p.disks])
                rad = np.array([a.radius for a in p.disks])
                dist, idx = cKDTree(to_unit_sphere(cen)).query(to_unit_sphere(zc))
                # chordal balls on the sphere are Euclidean balls in R^3
                if np.any(dist < rad[idx]):
                    raise ConstructionError(f"covering disk of region {p.label} meets the core of region {q.label}")

    hd = {}
    for p in parts:
        in_disks = np.zeros(regions.labels.shape, dtype=bool)
        extra = []
        for disk in p.disks:
            extra.append(_disk_samples(disk))
        ex = np.concatenate(extra) if extra else np.zeros(0, dtype=complex)
        if p.disks:
            cen = np.array([a.center for a in p.disks])
            rad = np.array([a.radius for a in p.disks])
            dist, idx = cKDTree(to_unit_sphere(cen)).query(to_unit_sphere(pts.ravel()))
            in_disks = (dist < rad[idx]).reshape(pts.shape)
        tr = trap_samples(model, p.trap)
        chart_trap = SphereDisk(model.xi[p.trap], model.delta).contains(pts)
        union = p.core | in_disks | chart_trap
        p.samples = np.concatenate([pts[union], ex, tr])
        aeps = np.concatenate([pts[p.core | in_disks], ex, tr if not is_inf(model.xi[p.trap]) else np.array([INF])])
        hd[p.label] = hausdorff_distance(aeps, regions.label_points(p.label))
    return ShrunkenRegions(regions, eps, model, parts, anchor, hd)


# ---------------------------------------------------------------------------
# contours

GRADE = 2.0  # width, in node spacings, of the graded ends of an open edge
GRADE_POWER = 4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _grade(x):
    xp = np.maximum(x, 0.0) ** GRADE_POWER
    return xp / (1 + xp)


def _grade_rate(t, span, width):
    # d u / d t: 1 in the middle of the edge, vanishing like t^p at both ends
    return _grade(t / width) * _grade((span - t) / width)


def _grade_integral(a, b, span, width):
    """Integral of _grade_rate over each [a_i, b_i] by 8-point Gauss-Legendre."""
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    return (half * _GL_W * _grade_rate(mid + half * _GL_X, span, width)).sum(axis=1)


def grade_width(total: float) -> float:
    return min(GRADE, total / 2)


def _grade_span(total: float) -> float:
    """Graded parameter length whose rate integrates to ``total``."""
    width = grade_width(total)

    def mass(span):
        k = 256
        t = np.linspace(0, span, k + 1)
        return _grade_integral(t[:-1], t[1:], span, width).sum()

    lo, hi = total, total + 4 * width + 8
    while mass(hi) < total:
        hi *= 2
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mass(mid) < total:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class Contour:
    """A smoothed cell edge carrying the jump w(left) - w(right).

    Closed edges are loops with a single cell on each side.  Open edges run
    from junction to junction; they are stored as chord plus sine series in
    u = integral(ds / spacing) and integrated with a trapezoid rule in a
    parameter t whose rate du/dt vanishes at the ends, so the rule stays
    accurate up to the junctions."""

    left: int
    right: int
    vertices: np.ndarray  # polyline; the first vertex is not repeated on loops
    spacing: np.ndarray  # allowed node spacing at each vertex
    clearance: float  # distance to the nearest sample
    closed: bool = True
    jump: complex = 0j
    coef: np.ndarray = field(repr=False, default=None)
    weight: float = 0.0  # nodes per unit density
    length: float = 0.0  # integral of ds / spacing
    ends: tuple = None

    def nodes(self, m: int):
        """Quadrature nodes and weights dzeta for m trapezoid steps."""
        if self.closed:
            k = self.coef.size
            n = np.fft.fftfreq(k, 1.0 / k)
            keep = np.abs(n) < m / 2
            ft = np.zeros(m, dtype=complex)
            idx = n[keep].astype(np.int64) % m
            ft[idx] = self.coef[keep]
            z = np.fft.ifft(ft) * m
            dft = np.zeros(m, dtype=complex)
            dft[idx] = 1j * n[keep] * self.coef[keep]
            dz = np.fft.ifft(dft) * m
            return z, dz * (2 * np.pi / m)
        span, total = self.weight, self.length
        t = span * np.arange(m + 1) / m
        width = grade_width(total)
        cum = np.concatenate([[0.0], np.cumsum(_grade_integral(t[:-1], t[1:], span, width))])
        fix = total / cum[-1]  # absorbs the tolerance of the span search
        u = cum[1:-1] * fix
        rate = _grade_rate(t[1:-1], span, width) * fix * span / m
        a, b = self.ends
        n = np.arange(1, self.coef.size + 1)
        arg = np.pi * np.outer(u, n) / total
        z = a + (b - a) * u / total + np.sin(arg) @ self.coef
        dz = (b - a) / total + np.cos(arg) @ (self.coef * n * np.pi / total)
        return z, dz * rate

    def min_nodes(self) -> int:
        if self.coef is None or not np.any(self.coef):
            return MIN_NODES if self.closed else MIN_OPEN
        if self.closed:
            k = self.coef.size
            n = np.abs(np.fft.fftfreq(k, 1.0 / k))
            live = n[np.abs(self.coef) > 0]
            return int(2 * live.max() + 2)
        live = np.flatnonzero(self.coef)[-1] + 1
        return max(MIN_OPEN, int(np.ceil(live * self.weight / self.length)) + 2)


@dataclass
class ContourSet:
    contours: list
    work_radius: float
    work_step: float
    partition: np.ndarray = field(default=None, repr=False)  # cell label of every work-grid pixel
    anchor: int = 0

    @property
    def clearance(self) -> float:
        return min((c.clearance for c in self.contours), default=np.inf)

    @property
    def junctions(self) -> int:
        return len({e for c in self.contours if not c.closed for e in c.ends})


TRAP_MARGIN = 1.3


def _partition(shrunk: ShrunkenRegions):
    """Nearest-region label of every region pixel, extended past the chart
    with the anchor label except around the finite traps, which take their
    owner's label out to TRAP_MARGIN times their radius."""
    reg = shrunk.regions
    h = reg.pixel_size
    lab = reg.labels
    idx = ndimage.distance_transform_edt(lab == 0, return_distances=False, return_indices=True)
    near = lab[idx[0], idx[1]]
    reach = reg.chart_radius
    traps = []
    for p in shrunk.parts:
        if not is_inf(shrunk.model.xi[p.trap]):
            c, r, _ = SphereDisk(shrunk.model.xi[p.trap], shrunk.model.delta).euclidean()
            traps.append((c, TRAP_MARGIN * r, p.label))
            reach = max(reach, max(abs(c.real), abs(c.imag)) + TRAP_MARGIN * r)
    pad = int(np.ceil((reach - reg.chart_radius) / h)) + 3
    n = reg.resolution
    part = np.full((n + 2 * pad, n + 2 * pad), shrunk.anchor, dtype=np.int16)
    part[pad : pad + n, pad : pad + n] = merge_cells(near, shrunk)
    lw = reg.chart_radius + pad * h
    z = grid_centers(part.shape[0], lw)
    for c, r, label in traps:
        part[np.abs(z - c) < r] = label
    return part, lw, h, pad


def _chordal_bound(D, az):
    # largest chordal distance from a point of modulus az to points D away
    return 2 * D / np.sqrt((1 + az**2) * (1 + np.maximum(az - D, 0) ** 2))


def merge_cells(near: np.ndarray, shrunk: ShrunkenRegions, margin: float = 0.9) -> np.ndarray:
    """Relabel small cells of the nearest-region partition where it is harmless.

    A cell holding no sample is merged into the neighbouring cell when
    every pixel of it lies within margin * eps of that neighbour's region,
    every region pixel it held stays within margin * eps of a remaining
    cell of its own label, and every boundary pixel of the regions stays
    within margin * eps of a cell edge.  Fewer, longer edges need fewer
    quadrature nodes."""
    reg = shrunk.regions
    h = reg.pixel_size
    lab = reg.labels
    az = np.abs(reg.pixel_centers())
    tol = margin * shrunk.eps
    part = near.copy()
    dist = {j: ndimage.distance_transform_edt(lab != j) * h for j in range(1, reg.d + 1)}
    fixed = np.zeros(lab.shape, dtype=bool)
    for p in shrunk.parts:
        fixed |= p.core
    samples = np.concatenate([p.samples for p in shrunk.parts])
    samples = samples[~is_inf(samples)]
    rr, cc, ok = reg.pixel_index(samples)
    fixed[rr[ok], cc[ok]] = True
    julia = lab == 0
    struct = ndimage.generate_binary_structure(2, 1)
    changed = True
    while changed:
        changed = False
        cells = []
        for j in range(1, reg.d + 1):
            cl, k = ndimage.label(part == j, structure=struct)
            sizes = np.bincount(cl.ravel(), minlength=k + 1)
            for i, sl in enumerate(ndimage.find_objects(cl), start=1):
                cells.append((sizes[i], j, i, sl, cl))
        cells.sort(key=lambda t: t[0])
        touched = np.zeros(lab.shape, dtype=bool)
        for size, j, i, sl, cl in cells:
            r0, r1 = max(sl[0].start - 1, 0), min(sl[0].stop + 1, lab.shape[0])
            c0, c1 = max(sl[1].start - 1, 0), min(sl[1].stop + 1, lab.shape[1])
            win = (slice(r0, r1), slice(c0, c1))
            mask = cl[win] == i
            if touched[win][mask].any() or fixed[win][mask].any():
                continue
            ring = ndimage.binary_dilation(mask, struct) & ~mask
            nb_ = part[win][ring]
            nb_ = nb_[nb_ != j]
            if nb_.size == 0:
                continue
            k = int(np.bincount(nb_).argmax())
            if np.any(_chordal_bound(dist[k][win][mask], az[win][mask]) >= tol):
                continue
            trial = part.copy()
            trial[win][mask] = k
            # region pixels of label j stay near a cell of label j
            own = (lab == j) & np.pad(mask, ((r0, lab.shape[0] - r1), (c0, lab.shape[1] - c1)))
            if own.any():
                dj = ndimage.distance_transform_edt(trial != j) * h
                if not np.all(_chordal_bound(dj[own], az[own]) < tol):
                    continue
            # boundary pixels of the regions stay near a cell edge
            edge = _edge_pixels(trial)
            de = ndimage.distance_transform_edt(~edge) * h
            if not np.all(_chordal_bound(de[julia], az[julia]) < tol):
                continue
            part = trial
            touched[win] |= mask | ring
            changed = True
    return part


def _edge_pixels(part):
    e = np.zeros(part.shape, dtype=bool)
    dv = part[1:, :] != part[:-1, :]
    dh = part[:, 1:] != part[:, :-1]
    e[1:, :] |= dv
    e[:-1, :] |= dv
    e[:, 1:] |= dh
    e[:, :-1] |= dh
    return e


def cell_edges(part: np.ndarray):
    """Edges between the cells of a label grid, on the dual grid.

    Vertices are midpoints between 4-adjacent pixel centres with different
    labels, plus square centres where three or more cells meet (or two meet
    diagonally).  Returns a list of (points, closed, (label_a, label_b))
    with points in (row, col) coordinates; label_a is the label on the left
    of the walk."""
    n0, n1 = part.shape
    P = part.astype(np.int64)
    a, b, c, d = P[:-1, :-1], P[:-1, 1:], P[1:, 1:], P[1:, :-1]
    act = np.stack([a != b, b != c, d != c, a != d], axis=-1)
    rows, cols = np.nonzero(act.any(axis=-1))
    # vertex ids: horizontal-side midpoints, vertical-side midpoints, square centres
    nh = n0 * n1

    def hid(i, j):
        return i * n1 + j

    def vid(i, j):
        return nh + i * n1 + j

    def cid(i, j):
        return 2 * nh + i * n1 + j

    adj = {}
    pair = {}

    def link(u, v, lab):
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
        pair[(min(u, v), max(u, v))] = lab

    for i, j in zip(rows.tolist(), cols.tolist()):
        la, lb, lc, ld = P[i, j], P[i, j + 1], P[i + 1, j + 1], P[i + 1, j]
        sides = []
        if la != lb:
            sides.append((hid(i, j), (la, lb)))
        if lb != lc:
            sides.append((vid(i, j + 1), (lb, lc)))
        if ld != lc:
            sides.append((hid(i + 1, j), (ld, lc)))
        if la != ld:
            sides.append((vid(i, j), (la, ld)))
        if len(sides) == 2:
            link(sides[0][0], sides[1][0], frozenset(sides[0][1]))
        else:
            for v, lab in sides:
                link(cid(i, j), v, frozenset(lab))

    def coords(v):
        if v >= 2 * nh:
            i, j = divmod(v - 2 * nh, n1)
            return i + 0.5, j + 0.5
        if v >= nh:
            i, j = divmod(v - nh, n1)
            return i + 0.5, float(j)
        i, j = divmod(v, n1)
        return float(i), j + 0.5

    def sides_of(v):
        # the two pixel centres a side midpoint sits between
        if v >= nh:
            i, j = divmod(v - nh, n1)
            return (i, j), (i + 1, j)
        i, j = divmod(v, n1)
        return (i, j), (i, j + 1)

    used = set()
    out = []

    def walk(start, nxt):
        path = [start, nxt]
        used.add((min(start, nxt), max(start, nxt)))
        prev, cur = start, nxt
        while len(adj[cur]) == 2 and cur != start:
            a0, a1 = adj[cur]
            step = a1 if a0 == prev else a0
            key = (min(cur, step), max(cur, step))
            if key in used:
                break
            used.add(key)
            path.append(step)
            prev, cur = cur, step
        return path

    junctions = [v for v, nb_ in adj.items() if len(nb_) != 2]
    chains = []
    for v in junctions:
        for w in adj[v]:
            if (min(v, w), max(v, w)) not in used:
                chains.append((walk(v, w), False))
    for (u, v) in list(pair):
        if (u, v) not in used:
            path = walk(u, v)
            if path[-1] == path[0]:
                path = path[:-1]
            chains.append((path, True))
    for path, closed in chains:
        labs = {pair[(min(p, q), max(p, q))] for p, q in zip(path[:-1], path[1:])}
        if len(labs) != 1:
            raise ConstructionError("cell edge changes its label pair")
        pts = np.array([coords(v) for v in path])
        # which label lies left of the walk: look at the first side midpoint
        k = next(i for i, v in enumerate(path) if v < 2 * nh)
        (ia, ja), (ib, jb) = sides_of(path[k])
        tz = complex(*(pts[(k + 1) % len(path)] - pts[k - 1])[::-1])
        oz = complex(ja - pts[k][1], ia - pts[k][0])
        left = P[ia, ja] if (np.conj(tz) * oz).imag > 0 else P[ib, jb]
        other = (set(next(iter(labs))) - {left}).pop()
        out.append((pts, closed, (int(left), int(other))))
    return out


def _strict_distance(shrunk: ShrunkenRegions, margin: float = 0.9):
    """Distance from every region pixel to the nearest strict pixel.

    A pixel is strict when some region lies farther than margin * eps
    (chordal) from it, so a wrong basin label there could break the
    Hausdorff bound.  Away from strict pixels any label is harmless."""
    reg = shrunk.regions
    h = reg.pixel_size
    z = reg.pixel_centers()
    az = np.abs(z)
    strict = np.zeros(reg.labels.shape, dtype=bool)
    for j in range(1, reg.d + 1):
        if not np.any(reg.labels == j):
            strict[:] = True
            break
        D = ndimage.distance_transform_edt(reg.labels != j) * h
        strict |= _chordal_bound(D, az) >= margin * shrunk.eps
    if not strict.any():
        return np.full(strict.shape, np.inf)
    return ndimage.distance_transform_edt(~strict) * h


def _vertex_spacing(z, shrunk: ShrunkenRegions, tree, h: float, beta: float, c_s: float, c_p: float, strict=None):
    """Allowed node spacing at contour points z.

    The spacing must stay below the distance to the nearest sample (so the
    quadrature resolves the targets there).  Inside the chart it must also
    stay below the distance to the nearest pixel centre, so that pixels
    next to a contour get the value of their cell, unless beta times the
    Euclidean size of the chordal eps-ball is larger or no strict pixel
    (see _strict_distance) lies within reach of the poorly resolved strip."""
    d_samp, _ = tree.query(np.c_[z.real, z.imag])
    reg = shrunk.regions
    L = reg.chart_radius
    inside = (np.abs(z.real) < L) & (np.abs(z.imag) < L)
    d_pix = h / (2 * np.sqrt(2))
    eps_e = shrunk.eps * (1 + np.abs(z) ** 2) / 2
    lim = np.maximum(d_pix / c_p, beta * eps_e)
    if strict is not None:
        n = reg.resolution
        col = np.clip(np.floor((z.real + L) / h).astype(np.int64), 0, n - 1)
        row = np.clip(np.floor((z.imag + L) / h).astype(np.int64), 0, n - 1)
        lim = np.maximum(lim, (strict[row, col] - h) / c_p)
    lim = np.where(inside, lim, np.inf)
    return np.minimum(d_samp / c_s, lim)


def _lowpass(coef, n, cut0, back, target, ds, k):
    cut = cut0
    while True:
        c = coef * np.exp(-((n / cut) ** 4))
        if np.max(np.abs(back(c) - target) / ds) < 0.25 or cut >= k:
            return c
        cut *= 1.5


def _reparam(zz, sp):
    seg = np.abs(np.diff(zz))
    u = seg / (0.5 * (sp[:-1] + sp[1:]))
    return np.concatenate([[0.0], np.cumsum(u)])


def _smooth_curve(z: np.ndarray, spacing: np.ndarray):
    """Fourier coefficients of the closed curve z reparametrized by
    integral(ds / spacing), low-passed at the local spacing scale."""
    zz = np.append(z, z[0])
    sp = np.append(spacing, spacing[0])
    tau = _reparam(zz, sp)
    total = tau[-1]
    k = 1 << int(np.ceil(np.log2(max(64, 8 * total, 2 * z.size))))
    s = np.arange(k) * total / k
    zs = np.interp(s, tau, zz.real) + 1j * np.interp(s, tau, zz.imag)
    ds = np.interp(s, tau, sp)
    coef = np.fft.fft(zs) / k
    n = np.abs(np.fft.fftfreq(k, 1.0 / k))
    c = _lowpass(coef, n, max(total / 2, 4.0), lambda c: np.fft.ifft(c) * k, zs, ds, k / 2)
    c[np.abs(c) < 1e-3 * spacing.min()] = 0
    return c, total


def _smooth_open(z: np.ndarray, spacing: np.ndarray):
    """Sine coefficients of an edge minus its chord, in u = integral(ds / spacing)."""
    tau = _reparam(z, spacing)
    total = tau[-1]
    k = 1 << int(np.ceil(np.log2(max(64, 8 * total, 2 * z.size))))
    s = np.arange(k + 1) * total / k
    zs = np.interp(s, tau, z.real) + 1j * np.interp(s, tau, z.imag)
    ds = np.interp(s, tau, spacing)
    chord = z[0] + (z[-1] - z[0]) * s / total
    r = (zs - chord)[1:-1]
    coef = scipy.fft.dst(r, type=1) / k
    n = np.arange(1, k)
    c = _lowpass(coef, n, max(total / 2, 4.0), lambda c: scipy.fft.idst(c * k, type=1), r, ds[1:-1], k)
    c[np.abs(c) < 1e-3 * spacing.min()] = 0
    live = np.flatnonzero(c)
    c = c[: live[-1] + 1] if live.size else c[:1] * 0
    return c, total


def build_contours(shrunk: ShrunkenRegions, beta: float = 0.1, c_s: float = 1.6, c_p: float = 1.25) -> ContourSet:
    """Cell edges of the nearest-region partition as quadrature contours.

    Every pixel takes the label of its nearest region pixel; past the chart
    the anchor label is used, except around the finite traps.  Each edge
    between two cells is used once with jump w(left) - w(right), so the
    sum of the edge integrals is the target of the cell's region everywhere
    and no double rows of nodes appear where cells meet.  Every edge runs
    between pixel centres."""
    part, lw, h, pad = _partition(shrunk)
    targets = {p.label: p.target for p in shrunk.parts}
    samples = np.concatenate([p.samples for p in shrunk.parts])
    samples = samples[~is_inf(samples)]
    tree = cKDTree(np.c_[samples.real, samples.imag])
    strict = _strict_distance(shrunk)
    out = []
    for pts, closed, (left, right) in cell_edges(part):
        z = (-lw + (pts[:, 1] + 0.5) * h) + 1j * (-lw + (pts[:, 0] + 0.5) * h)
        sp = _vertex_spacing(z, shrunk, tree, h, beta, c_s, c_p, strict)
        clear = float(tree.query(np.c_[z.real, z.imag])[0].min())
        if clear <= 0:
            raise ConstructionError(f"cell edge between regions {left} and {right} meets a sample")
        # running minimum keeps the spacing from jumping between vertices
        sp = ndimage.minimum_filter1d(sp, 5, mode="wrap" if closed else "nearest")
        con = Contour(left, right, z, sp, clear, closed, jump=targets[left] - targets[right])
        if closed:
            con.coef, con.length = _smooth_curve(z, sp)
            con.weight = con.length
        else:
            con.coef, con.length = _smooth_open(z, sp)
            con.weight = _grade_span(con.length)
            con.ends = (complex(z[0]), complex(z[-1]))
        out.append(con)
    return ContourSet(out, lw, h, part, shrunk.anchor)

# ---------------------------------------------------------------------------
# Cauchy integrals


def _assemble(contours: ContourSet, anchor: complex, density: float):
    poles, res = [], []
    for c in contours.contours:
        floor = MIN_NODES if c.closed else MIN_OPEN
        m = max(int(np.ceil(density * floor)), c.min_nodes(), int(np.ceil(density * c.weight)))
        z, dz = c.nodes(m)
        poles.append(z)
        # 1/(zeta - z) = -1/(z - zeta)
        res.append(-c.jump * dz / (2j * np.pi))
    if not poles:
        return PoleSumRational(anchor, [], [])
    return PoleSumRational(anchor, np.concatenate(poles), np.concatenate(res))


def runge_error(r: PoleSumRational, shrunk: ShrunkenRegions):
    """(sup |R - target| over all samples, number of samples outside their delta-trap)."""
    worst, miss = 0.0, 0
    for p in shrunk.parts:
        v = rational_eval(r, p.samples)
        fin = ~is_inf(v)
        err = np.abs(np.where(fin, v, 0) - p.target)
        err[~fin] = np.inf
        worst = max(worst, float(err.max()))
        miss += int(np.count_nonzero(~shrunk.model.in_trap(v, p.trap)))
    return worst, miss


def runge_tolerance(model: ModelFamily) -> float:
    """0.45 times the Euclidean inner radius of the tightest finite delta-trap."""
    radii = [disk.inner_radius() for disk in model.traps()[:-1]]
    return 0.45 * min(radii)


@dataclass
class RungeResult:
    rational: PoleSumRational
    sup_error: float
    tol: float
    history: list


def cauchy_runge(contours: ContourSet, shrunk: ShrunkenRegions, tol: float = None, budget: int = NODE_BUDGET, density: float = 1.0) -> RungeResult:
    """Discretized Cauchy integral of the piecewise-constant target.

    Nodes per contour grow with the integral of ds/spacing; the density is
    doubled until every sample lies within ``tol`` of its target and in
    its trap."""
    if tol is None:
        tol = runge_tolerance(shrunk.model)
    targets = {p.label: p.target for p in shrunk.parts}
    anchor = targets[shrunk.anchor]
    history = []
    while True:
        r = _assemble(contours, anchor, density)
        if r.size > budget:
            raise ConstructionError(f"node budget {budget} exhausted; last error {history[-1][1] if history else np.inf:.3g}")
        err, miss = runge_error(r, shrunk)
        history.append((r.size, err))
        if err < tol and miss == 0:
            return RungeResult(r, err, tol, history)
        density *= 2


# ---------------------------------------------------------------------------
# critical values and the eta perturbation


def julia_avoidance_test(v, model: ModelFamily, budget: int = 200) -> int:
    """Entry step of the P_lam-orbit of v into a half-trap, or -1 when it
    has not entered within ``budget`` steps."""
    if is_inf(v):
        return 0
    cen, rad, rho = model.trap_arrays()
    step, _ = orbit_entry(complex(v), model.coefficients(), cen, rad, rho, budget)
    return int(step)


def entry_steps(values, model: ModelFamily, budget: int = 200) -> np.ndarray:
    cen, rad, rho = model.trap_arrays()
    coef = model.coefficients()
    return _entry_many(np.ascontiguousarray(values, dtype=complex), coef, cen, rad, rho, budget)


@nb.njit(cache=True, parallel=True)
def _entry_many(vals, coef, cen, rad, rho, budget):
    out = np.empty(vals.size, dtype=np.int64)
    for i in nb.prange(vals.size):
        out[i], _ = orbit_entry(vals[i], coef, cen, rad, rho, budget)
    return out


def eta_schedule(start: int = -6, stop: int = -1, count: int = 16):
    yield 0j
    for e in range(start, stop + 1):
        for k in range(count):
            yield 10.0**e * np.exp(2j * np.pi * k / count)


@dataclass
class PerturbResult:
    rational: PoleSumRational
    eta: complex
    critical_values: np.ndarray
    steps: np.ndarray


def perturb_eta(r: PoleSumRational, shrunk: ShrunkenRegions, budget: int = 200, start: int = -6, stop: int = -1, cv=None) -> PerturbResult:
    """Smallest eta on the schedule making every critical value of (1+eta)R
    enter a half-trap and keeping all samples in their delta-traps."""
    model = shrunk.model
    if cv is None:
        cv = critical_values(r)
    fin = ~is_inf(cv)
    worst = None
    for eta in eta_schedule(start, stop):
        re = r.scaled(1 + eta)
        vals = cv * (1 + eta)
        steps = np.zeros(cv.size, dtype=np.int64)
        if fin.any():
            steps[fin] = entry_steps(vals[fin], model, budget)
        if np.any(steps < 0):
            if worst is None:
                worst = vals[steps < 0]
            continue
        _, miss = runge_error(re, shrunk)
        if miss:
            continue
        return PerturbResult(re, complex(eta), np.where(fin, vals, INF), steps)
    shown = ", ".join(f"{v:.6g}" for v in (worst if worst is not None else [])[:5])
    raise ConstructionError(f"eta schedule exhausted; critical values not entering a trap: {shown}")
