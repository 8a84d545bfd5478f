import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basin_forge.polyrat import (
    PoleSumRational,
    Polynomial,
    critical_points,
    critical_values,
    dedupe,
    poly_eval,
    poly_roots,
    polesum_critical_points,
    rational_derivative,
    rational_eval,
)
from basin_forge.sphere import INF, is_inf


def _match(a, b):
    a, b = np.sort_complex(np.asarray(a)), np.asarray(b)
    return max(np.abs(b - x).min() for x in a)


def test_poly_eval_examples():
    p = Polynomial([0, 2, 1])
    assert poly_eval(p, -1) == -1
    assert poly_eval(p, 0) == 0
    assert is_inf(poly_eval(p, INF))
    assert poly_eval(Polynomial([5]), INF) == 5


def test_polynomial_derivative():
    assert Polynomial([0, 2, 1]).derivative() == Polynomial([2, 2])


@pytest.mark.parametrize("k", range(1, 13))
def test_roots_of_unity(k):
    c = np.zeros(k + 1, complex)
    c[0], c[k] = -1, 1
    roots = poly_roots(Polynomial(c))
    exact = np.exp(2j * np.pi * np.arange(k) / k)
    assert roots.size == k
    assert _match(exact, roots) < 1e-10
    assert _match(roots, exact) < 1e-10


def test_roots_multiple():
    roots = poly_roots(Polynomial([-8, 12, -6, 1]), tol=1e-12)
    assert np.all(np.abs(roots - 2) < 1e-4)


@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=1, max_size=8))
@settings(max_examples=40, deadline=None)
def test_roots_recover_separated_roots(rts):
    rts = dedupe(np.array(rts), 1e-3)
    if rts.size > 1:
        gap = np.abs(rts[:, None] - rts[None, :])[~np.eye(rts.size, dtype=bool)].min()
        if gap < 0.05:
            return
    c = np.polynomial.polynomial.polyfromroots(rts)
    got = poly_roots(Polynomial(c))
    assert _match(rts, got) < 1e-7


def test_critical_points_examples():
    pts = critical_points(Polynomial([0, 2, 1]))
    assert pts[0] == pytest.approx(-1)
    assert is_inf(pts[-1])
    assert critical_points(PoleSumRational(3.0, [0], [1])).size == 0
    two = PoleSumRational(0, [1, -1], [1, 1])
    assert _match([1j, -1j], critical_points(two)) < 1e-10
    assert _match(critical_points(two), [1j, -1j]) < 1e-10


def test_critical_values_examples():
    cv = critical_values(Polynomial([0, 2, 1]))
    assert cv[0] == pytest.approx(-1) and is_inf(cv[1])
    cv = critical_values(Polynomial([0, 0, 1]))
    assert cv[0] == 0 and is_inf(cv[1])
    cv = critical_values(PoleSumRational(0, [1, -1], [1, 1]))
    assert _match([1j, -1j], cv) < 1e-10


def test_rational_eval_examples():
    assert rational_eval(PoleSumRational(5, [], []), 3.0) == 5
    r = PoleSumRational(0, [1, -1], [1, 1])
    assert rational_eval(r, 0) == 0
    assert rational_eval(r, INF) == 0
    assert is_inf(rational_eval(r, 1.0))


def test_coincident_poles_merge():
    r = PoleSumRational(0, [1, 2, 1], [1, 1, 2])
    assert r.size == 2
    assert rational_eval(r, 0) == pytest.approx(-3 - 0.5)


def test_rational_derivative_matches_difference():
    rng = np.random.default_rng(0)
    r = PoleSumRational(1, rng.standard_normal(5) + 1j * rng.standard_normal(5), rng.standard_normal(5) + 0j)
    z = 3 + 2j
    h = 1e-6
    fd = (rational_eval(r, z + h) - rational_eval(r, z - h)) / (2 * h)
    assert rational_derivative(r, z) == pytest.approx(fd, rel=1e-6)


def _dense_critical_points(r):
    poles, res = r.poles, r.residues
    num = np.zeros(1, complex)
    for k in range(poles.size):
        term = np.array([-res[k]], complex)
        for j in range(poles.size):
            if j != k:
                term = np.polynomial.polynomial.polymul(term, np.polynomial.polynomial.polyfromroots([poles[j], poles[j]]))
        num = np.polynomial.polynomial.polyadd(num, term)
    return np.polynomial.polynomial.polyroots(num)


@pytest.mark.parametrize("seed", range(5))
def test_polesum_critical_points_match_dense(seed):
    rng = np.random.default_rng(seed)
    m = 6
    r = PoleSumRational(0.5, 2 * np.exp(2j * np.pi * (np.arange(m) + rng.uniform(0, 0.3, m)) / m), rng.uniform(0.5, 1.5, m) + 0.2j * rng.standard_normal(m))
    pts, flat = polesum_critical_points(r)
    dense = _dense_critical_points(r)
    assert pts.size == 2 * m - 2
    assert _match(dense, pts) < 1e-8
    assert np.abs(rational_derivative(r, pts)).max() < 1e-8
