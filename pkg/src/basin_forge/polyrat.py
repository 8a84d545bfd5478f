"""Dense polynomials and pole-sum rationals: evaluation, roots, critical points."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from scipy.spatial import cKDTree

from .sphere import INF, OVERFLOW_CAP, is_inf, to_unit_sphere

POLE_EPS = 1e-12
DEFAULT_SEED = 20240521


class RootFindingError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def _to_sphere_array(values):
    values = np.asarray(values, dtype=complex)
    bad = ~np.isfinite(values) | (np.abs(values) > OVERFLOW_CAP)
    return np.where(bad, INF, values)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Coefficients c_0..c_m in ascending degree."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1] * 0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0])
        return Polynomial(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def __call__(self, z):
        return poly_eval(self, z)

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


def poly_eval(p: Polynomial, z):
    """Horner evaluation on the sphere: infinity maps to infinity unless p is constant."""
    z = np.asarray(z, dtype=complex)
    inf = is_inf(z)
    zf = np.where(inf, 0, z)
    acc = np.zeros_like(zf)
    with np.errstate(over="ignore", invalid="ignore"):
        for c in p.coeffs[::-1]:
            acc = acc * zf + c
    at_inf = p.coeffs[0] if p.degree == 0 else INF
    out = np.where(inf, at_inf, _to_sphere_array(acc))
    return out[()] if out.ndim == 0 else out


@nb.njit(cache=True)
def _horner2(c, z):
    p = c[-1]
    dp = 0j
    for k in range(len(c) - 2, -1, -1):
        dp = dp * z + p
        p = p * z + c[k]
    return p, dp


@nb.njit(cache=True)
def _aberth_poly(c, z, max_iter):
    # Gauss-Seidel Aberth-Ehrlich sweeps on ascending coefficients c.
    m = len(z)
    done = np.zeros(m, dtype=np.bool_)
    for it in range(max_iter):
        moving = 0
        for i in range(m):
            if done[i]:
                continue
            p, dp = _horner2(c, z[i])
            if p == 0:
                done[i] = True
                continue
            s = 0j
            for j in range(m):
                if j != i:
                    s += 1.0 / (z[i] - z[j])
            ratio = p / dp if dp != 0 else 1e300 + 0j
            delta = ratio / (1.0 - ratio * s)
            z[i] -= delta
            if abs(delta) <= 4e-16 * (1.0 + abs(z[i])):
                done[i] = True
            else:
                moving += 1
        if moving == 0:
            return it + 1
    return max_iter


def _initial_circle(c: np.ndarray, seed: int) -> np.ndarray:
    m = len(c) - 1
    # Fujiwara-type bound on the root moduli, then geometric mean scale
    lead = c[-1]
    bound = 2 * max(abs(c[m - k] / lead) ** (1 / k) for k in range(1, m + 1))
    scale = abs(c[0] / lead) ** (1 / m) if c[0] != 0 else bound / 2
    radius = min(bound, max(scale, 1e-3 * bound))
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * (np.arange(m) + 0.25) / m + rng.uniform(-0.1, 0.1, m) / m
    return radius * (1 + 0.05 * rng.uniform(-1, 1, m)) * np.exp(1j * angles)


def poly_roots(p: Polynomial, tol: float = 1e-10, max_iter: int = 2000, seed: int = DEFAULT_SEED) -> np.ndarray:
    """All roots with multiplicity by Aberth-Ehrlich iteration.

    Raises RootFindingError if some root has scaled residual
    |p(root)| / (1 + max|c|) above ``tol``.
    """
    if p.degree < 1:
        raise ValueError("root finding needs degree >= 1")
    c = np.asarray(p.coeffs, dtype=np.complex128)
    if p.degree == 1:
        return np.array([-c[0] / c[1]])
    z = _initial_circle(c, seed)
    _aberth_poly(c, z, max_iter)
    res = np.abs(np.asarray(poly_eval(p, z))) / (1 + np.abs(c).max())
    if not np.all(np.isfinite(res)) or res.max() > tol:
        raise RootFindingError(f"Aberth iteration did not converge (residual {res.max():.3g})", res.max())
    return z


# ---------------------------------------------------------------------------
# pole sums


@nb.njit(cache=True, parallel=True)
def _polesum_eval(anchor, poles, res, z, out):
    for i in nb.prange(z.size):
        zi = z[i]
        if not (np.isfinite(zi.real) and np.isfinite(zi.imag)):
            out[i] = anchor
            continue
        acc = anchor
        hit = False
        for k in range(poles.size):
            dz = zi - poles[k]
            if abs(dz) < 1e-12:
                hit = True
                break
            acc += res[k] / dz
        out[i] = complex(np.inf, 0.0) if hit else acc


@nb.njit(cache=True)
def _polesum_derivs(poles, res, z):
    # R'(z), R''(z), sum 1/(z - p) and the rounding scale of R'
    s1 = 0j
    s2 = 0j
    s3 = 0j
    noise = 0.0
    for k in range(poles.size):
        u = 1.0 / (z - poles[k])
        u2 = u * u
        t = res[k] * u2
        s1 += t
        s2 += t * u
        s3 += u
        noise += abs(t)
    return -s1, 2.0 * s2, s3, noise


@nb.njit(cache=True)
def _aberth_polesum(poles, res, z, max_iter, rtol):
    m = z.size
    done = np.zeros(m, dtype=np.bool_)
    flat = np.zeros(m, dtype=np.bool_)
    for it in range(max_iter):
        moving = 0
        for i in range(m):
            if done[i]:
                continue
            zi = z[i]
            d1, d2, s3, noise = _polesum_derivs(poles, res, zi)
            # log-derivative of the cleared numerator N = R' * prod (z - p)^2
            if abs(d1) <= 1e-13 * noise:
                # R' is at rounding level: nothing left to resolve here
                flat[i] = True
                done[i] = True
                continue
            logd = d2 / d1 + 2.0 * s3
            s = 0j
            for j in range(m):
                if j != i:
                    s += 1.0 / (zi - z[j])
            den = logd - s
            if den == 0:
                continue
            delta = 1.0 / den
            z[i] = zi - delta
            if abs(delta) <= rtol * (1.0 + abs(z[i])):
                done[i] = True
            else:
                moving += 1
        if moving == 0:
            break
    return done, flat


@dataclass(frozen=True, eq=False)
class PoleSumRational:
    """anchor + sum_k residue_k / (z - pole_k); coincident poles are merged."""

    anchor: complex
    poles: np.ndarray
    residues: np.ndarray

    def __post_init__(self):
        poles = np.atleast_1d(np.asarray(self.poles, dtype=complex))
        res = np.atleast_1d(np.asarray(self.residues, dtype=complex))
        if poles.shape != res.shape:
            raise ValueError("poles and residues must have equal length")
        if poles.size:
            uniq, inv = np.unique(poles, return_inverse=True)
            if uniq.size < poles.size:
                merged = np.zeros(uniq.size, dtype=complex)
                np.add.at(merged, inv, res)
                poles, res = uniq, merged
        poles = np.ascontiguousarray(poles)
        res = np.ascontiguousarray(res)
        poles.setflags(write=False)
        res.setflags(write=False)
        object.__setattr__(self, "anchor", complex(self.anchor))
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "residues", res)

    @property
    def size(self) -> int:
        return self.poles.size

    def scaled(self, factor: complex) -> "PoleSumRational":
        return PoleSumRational(self.anchor * factor, self.poles, self.residues * factor)

    def __call__(self, z):
        return rational_eval(self, z)


def rational_eval(r: PoleSumRational, z):
    z = np.asarray(z, dtype=complex)
    flat = np.ascontiguousarray(z.ravel())
    out = np.empty_like(flat)
    if r.size == 0:
        out[:] = r.anchor
    else:
        _polesum_eval(r.anchor, r.poles, r.residues, flat, out)
    out = _to_sphere_array(out).reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def rational_derivative(r: PoleSumRational, z):
    z = np.asarray(z, dtype=complex)
    u = 1.0 / (z[..., None] - r.poles)
    return -(r.residues * u * u).sum(axis=-1)


def _initial_gaps(poles: np.ndarray, m: int, seed: int) -> np.ndarray:
    # two guesses per gap between consecutive poles (cyclic, in stored order)
    nxt = np.roll(poles, -1)
    mid = (poles + nxt) / 2
    gap = nxt - poles
    tiny = np.abs(gap) == 0
    gap[tiny] = 1.0
    guesses = np.concatenate([mid + 0.3j * gap, mid - 0.3j * gap])
    rng = np.random.default_rng(seed)
    guesses = guesses + 1e-3 * np.abs(gap).mean() * (rng.uniform(-1, 1, guesses.size) + 1j * rng.uniform(-1, 1, guesses.size))
    return np.ascontiguousarray(guesses[:m])


def polesum_critical_points(r: PoleSumRational, tol: float = 1e-12, max_iter: int = 400, seed: int = DEFAULT_SEED):
    """Finite zeros of R' (the cleared numerator has degree 2M - 2).

    Aberth iteration is run on the numerator implicitly, through R'/R'' and
    the known poles, so no coefficients are ever formed.  Roots that settle
    where R' is at rounding level (``flat``) are accepted: R is constant to
    working precision there, which is all a critical value needs.
    Returns (points, flat_mask)."""
    m = 2 * r.size - 2
    if m <= 0:
        return np.zeros(0, dtype=complex), np.zeros(0, dtype=bool)
    z = _initial_gaps(np.asarray(r.poles), m, seed)
    done, flat = _aberth_polesum(r.poles, r.residues, z, max_iter, tol)
    bad = ~(done | flat) & np.isfinite(z)
    if bad.any():
        d1 = rational_derivative(r, z[bad])
        raise RootFindingError(f"{bad.sum()} critical points did not converge (max |R'| {np.abs(d1).max():.3g})", np.abs(d1).max())
    return _to_sphere_array(z), flat


def critical_points(f, tol: float = 1e-10):
    """Critical points on the sphere; ``INF`` is included for polynomials of degree >= 2."""
    if isinstance(f, Polynomial):
        if f.degree < 1:
            raise ValueError("constant map has no critical points")
        if f.degree == 1:
            return np.zeros(0, dtype=complex)
        pts = poly_roots(f.derivative(), tol=tol)
        return np.append(pts, INF)
    if isinstance(f, PoleSumRational):
        if f.size == 0 or not np.any(f.residues):
            raise ValueError("constant map has no critical points")
        pts, _ = polesum_critical_points(f)
        return pts
    raise TypeError(f"unsupported map type {type(f).__name__}")


def dedupe(points, tol: float = 1e-9) -> np.ndarray:
    """Drop points within chordal ``tol`` of an earlier one (order kept)."""
    points = np.asarray(points, dtype=complex)
    if points.size == 0:
        return points
    tree = cKDTree(to_unit_sphere(points))
    removed = np.zeros(points.size, dtype=bool)
    for i, near in enumerate(tree.query_ball_point(to_unit_sphere(points), tol)):
        if not removed[i]:
            removed[[j for j in near if j > i]] = True
    return points[~removed]


def evaluate(f, z):
    return poly_eval(f, z) if isinstance(f, Polynomial) else rational_eval(f, z)


def critical_values(f, tol: float = 1e-9):
    return dedupe(evaluate(f, critical_points(f)), tol)

