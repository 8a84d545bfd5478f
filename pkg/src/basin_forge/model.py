"""The model polynomial P(z) = z^d + d/(d-1) z, its rescalings and trap disks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .polyrat import Polynomial, poly_eval
from .sphere import INF, SphereDisk, chordal_distance, euclidean_radius_of_infinity_disk, is_inf

LAMBDA_STEPS = 61  # 1, 2, 4, ..., 2^60
DELTA_FLOOR = 1e-12
CERT_SAMPLES = 720
CERT_MARGIN = 0.9


class ConstructionError(RuntimeError):
    pass


def _check_degree(d):
    if int(d) != d or d < 2:
        raise ValueError(f"degree must be an integer >= 2, got {d}")
    return int(d)


def build_model(d: int) -> Polynomial:
    d = _check_degree(d)
    c = np.zeros(d + 1, dtype=complex)
    c[1] = d / (d - 1)
    c[d] = 1
    return Polynomial(c)


def scale_model(d: int, lam: float) -> Polynomial:
    """lam * P(z / lam) = z^d / lam^(d-1) + d/(d-1) z."""
    d = _check_degree(d)
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    c = np.zeros(d + 1, dtype=complex)
    c[1] = d / (d - 1)
    c[d] = float(lam) ** (1 - d)
    return Polynomial(c)


def fixed_critical_points(d: int) -> np.ndarray:
    """Solutions of z^(d-1) = -1/(d-1) followed by INF."""
    d = _check_degree(d)
    k = np.arange(d - 1)
    r = (d - 1) ** (-1.0 / (d - 1))
    xi = r * np.exp(1j * np.pi * (2 * k + 1) / (d - 1))
    p = build_model(d)
    dp = p.derivative()
    if np.abs(poly_eval(p, xi) - xi).max(initial=0) > 1e-12 or np.abs(poly_eval(dp, xi)).max(initial=0) > 1e-12:
        raise ArithmeticError("fixed critical point formula lost accuracy")
    return np.append(xi, INF)


# ---------------------------------------------------------------------------
# trap geometry


def _in_forbidden(z, forbidden) -> bool:
    for f in forbidden:
        if isinstance(f, SphereDisk):
            if f.contains(z):
                return True
        elif callable(f):
            if f(z):
                return True
        else:
            raise TypeError("forbidden sets are SphereDisks or predicates")
    return False


def choose_lambda(d: int, eps: float, forbidden=()) -> float:
    """Smallest power of two putting every finite lam*xi within eps/2 of INF
    and outside all forbidden sets."""
    # eps = 2 (the whole sphere) is accepted here as a boundary case
    if not 0 < eps <= 2:
        raise ValueError(f"eps must lie in (0, 2], got {eps}")
    xi = fixed_critical_points(d)[:-1]
    for k in range(LAMBDA_STEPS):
        lam = 2.0**k
        pts = lam * xi
        if np.all(chordal_distance(pts, INF) < eps / 2) and not any(_in_forbidden(z, forbidden) for z in pts):
            return lam
    raise ConstructionError("lambda schedule exhausted at 2^60")


def contraction_ratio(d: int, lam: float, center, delta: float, samples: int = CERT_SAMPLES) -> float:
    """max over the boundary of D(center, delta) of dist(P_lam(z), center) / (delta/2).

    The INF trap is sampled on |z| = rho(delta) and measured in w = 1/z."""
    p = scale_model(d, lam)
    t = 2 * np.pi * np.arange(samples) / samples
    if is_inf(center):
        rho = euclidean_radius_of_infinity_disk(delta)
        z = rho * np.exp(1j * t)
        # chordal distance to INF from the reciprocal: 2|w| / sqrt(1 + |w|^2)
        w = 1 / np.asarray(poly_eval(p, z))
        img = 2 * np.abs(w) / np.sqrt(1 + np.abs(w) ** 2)
    else:
        z = SphereDisk(center, delta).boundary_points(samples)
        img = chordal_distance(np.asarray(poly_eval(p, z)), center)
    return float(np.max(img) / (delta / 2))


def _pair_gap(pts) -> float:
    gap = np.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = min(gap, float(chordal_distance(pts[i], pts[j])))
    return gap


def choose_delta(d: int, lam: float, eps: float, clearance=(), samples: int = CERT_SAMPLES, margin: float = CERT_MARGIN, separation: float = 1.0):
    """Largest delta = delta0 / 2^k passing disjointness and the sampled contraction check.

    ``clearance`` is a list of SphereDisks the traps must avoid; with
    ``separation`` > 1 the traps are inflated by that factor for the
    disjointness test, which leaves room for quadrature contours.
    Returns (delta, worst contraction ratio)."""
    centers = list(lam * fixed_critical_points(d)[:-1]) + [INF]
    delta = min(eps / 4, _pair_gap(centers) / 2)
    while delta >= DELTA_FLOOR:
        ok = _pair_gap(centers) > 2 * separation * delta
        if ok:
            for c in centers:
                for disk in clearance:
                    if chordal_distance(c, disk.center) <= separation * delta + disk.radius:
                        ok = False
                        break
                if not ok:
                    break
        if ok:
            worst = max(contraction_ratio(d, lam, c, delta, samples) for c in centers)
            if worst <= margin:
                return delta, worst
        delta /= 2
    raise ConstructionError("trap radius fell below 1e-12 before all checks passed")


# ---------------------------------------------------------------------------
# half-trap membership, shared with the iteration kernels


@nb.njit(cache=True)
def trap_index(z, cen, rad, rho_inf):
    """Index of the Euclidean disk |z - cen[k]| < rad[k] holding z, len(cen)
    for the INF half-trap {|z| > rho_inf}, or -1."""
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        return cen.size
    if abs(z) > rho_inf:
        return cen.size
    for k in range(cen.size):
        if abs(z - cen[k]) < rad[k]:
            return k
    return -1


@nb.njit(cache=True)
def poly_step(z, coef):
    acc = 0j
    for k in range(coef.size - 1, -1, -1):
        acc = acc * z + coef[k]
    return acc


@nb.njit(cache=True)
def orbit_entry(z, coef, cen, rad, rho_inf, budget):
    """Steps until the P_lam-orbit of z enters a half-trap, and which one."""
    for step in range(budget + 1):
        k = trap_index(z, cen, rad, rho_inf)
        if k >= 0:
            return step, k
        z = poly_step(z, coef)
    return -1, -1


@dataclass(frozen=True, eq=False)
class ModelFamily:
    """P_lam with trap disks D(lam xi_j, delta); the INF trap is last."""

    d: int
    lam: float
    delta: float
    contraction: float = np.nan
    xi: np.ndarray = field(init=False)
    poly: Polynomial = field(init=False)

    def __post_init__(self):
        _check_degree(self.d)
        if not 0 < self.delta < 2:
            raise ValueError("trap radius must lie in (0, 2)")
        object.__setattr__(self, "xi", np.append(self.lam * fixed_critical_points(self.d)[:-1], INF))
        object.__setattr__(self, "poly", scale_model(self.d, self.lam))

    @classmethod
    def select(cls, d, eps, forbidden=(), clearance=(), separation=1.0):
        lam = choose_lambda(d, eps, forbidden)
        delta, worst = choose_delta(d, lam, eps, clearance, separation=separation)
        return cls(d, lam, delta, worst)

    def traps(self, scale: float = 1.0) -> list[SphereDisk]:
        return [SphereDisk(c, scale * self.delta) for c in self.xi]

    def half_traps(self) -> list[SphereDisk]:
        return self.traps(0.5)

    def trap_arrays(self, scale: float = 0.5):
        """(centres, radii, rho_inf) of the Euclidean form of the scaled traps."""
        cen, rad = [], []
        for disk in self.traps(scale)[:-1]:
            c, r, outside = disk.euclidean()
            if outside:
                raise ConstructionError("finite trap contains infinity")
            cen.append(c)
            rad.append(r)
        rho = euclidean_radius_of_infinity_disk(scale * self.delta)
        return np.array(cen, dtype=complex), np.array(rad, dtype=float), rho

    def coefficients(self) -> np.ndarray:
        return np.ascontiguousarray(self.poly.coeffs, dtype=complex)

    def half_trap_index(self, z) -> np.ndarray:
        """Index of the half-trap holding each z (d-1 for INF), -1 when none."""
        z = np.asarray(z, dtype=complex)
        cen, rad, rho = self.trap_arrays()
        out = np.array([trap_index(complex(v), cen, rad, rho) for v in z.ravel()], dtype=np.int64)
        return out.reshape(z.shape)

    def in_trap(self, z, j: int, scale: float = 1.0):
        """Exact chordal membership in D(xi_j, scale * delta)."""
        return chordal_distance(z, self.xi[j]) < scale * self.delta

    def identities(self):
        """(max |P_lam(c) - c| / lam, max |P_lam'(c)|) over finite centres."""
        c = self.xi[:-1]
        fix = np.abs(np.asarray(poly_eval(self.poly, c)) - c).max(initial=0) / self.lam
        crit = np.abs(np.asarray(poly_eval(self.poly.derivative(), c))).max(initial=0)
        return float(fix), float(crit)
