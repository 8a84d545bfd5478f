import numpy as np
import pytest

from basin_forge.model import (
    ConstructionError,
    ModelFamily,
    build_model,
    choose_delta,
    choose_lambda,
    contraction_ratio,
    fixed_critical_points,
    scale_model,
)
from basin_forge.polyrat import Polynomial, poly_eval
from basin_forge.sphere import INF, SphereDisk, chordal_distance, is_inf


def test_build_model():
    assert build_model(2) == Polynomial([0, 2, 1])
    assert build_model(3) == Polynomial([0, 1.5, 0, 1])
    with pytest.raises(ValueError):
        build_model(1)


def test_fixed_critical_points_low_degree():
    xi = fixed_critical_points(2)
    assert xi[0] == pytest.approx(-1) and is_inf(xi[-1])
    xi = fixed_critical_points(3)
    assert np.sort(xi[:-1].imag) == pytest.approx([-1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert np.abs(xi[:-1].real).max() < 1e-15


@pytest.mark.parametrize("d", range(2, 9))
def test_fixed_critical_point_modulus(d):
    xi = fixed_critical_points(d)[:-1]
    assert np.abs(xi) == pytest.approx((d - 1) ** (-1 / (d - 1)))


def test_scale_model():
    assert scale_model(2, 1) == build_model(2)
    assert scale_model(2, 2) == Polynomial([0, 2, 0.5])


def test_scaled_julia_circle_d2():
    # P_lam is conjugate to w -> w^2 / lam with w = z + lam
    lam = 8.0
    p = scale_model(2, lam)
    z = -lam + lam * np.exp(1j * np.linspace(0, 2 * np.pi, 50))
    assert np.abs(np.abs(poly_eval(p, z) + lam) - lam).max() < 1e-9


def test_choose_lambda_examples():
    assert choose_lambda(2, 0.5) == 8
    assert choose_lambda(2, 2) == 2
    assert choose_lambda(2, 0.5, forbidden=[SphereDisk(-8, 1e-3)]) == 16
    with pytest.raises(ValueError):
        choose_lambda(2, 0)


def test_choose_delta_d2_and_infinity_bound():
    lam = 8.0
    delta, worst = choose_delta(2, lam, 0.5)
    assert worst <= 0.9
    assert contraction_ratio(2, lam, -lam, delta) <= 0.9
    rho = np.sqrt(4 / delta**2 - 1)
    lower = rho**2 / lam - 2 * rho
    assert lower > np.sqrt(4 / (delta / 2) ** 2 - 1)


def test_choose_delta_clearance_halves():
    lam = 8.0
    delta0, _ = choose_delta(2, lam, 0.5)
    block = SphereDisk(-lam + 0.0, 1e-3)
    # a point at chordal distance 0.9 delta0 from the finite trap centre
    lo, hi = 0.0, 4.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if chordal_distance(-lam + mid, -lam) < 0.9 * delta0 else (lo, mid)
    far = -lam + lo
    delta1, _ = choose_delta(2, lam, 0.5, clearance=[SphereDisk(far, 1e-6)])
    assert delta1 < delta0
    with pytest.raises(ConstructionError):
        choose_delta(2, lam, 0.5, clearance=[block])


def test_model_family_trap_geometry():
    m = ModelFamily.select(3, 0.35)
    fix, crit = m.identities()
    assert fix < 1e-9 and crit < 1e-12
    c = m.xi
    for i in range(len(c)):
        for j in range(i + 1, len(c)):
            assert chordal_distance(c[i], c[j]) > 2 * m.delta
    assert m.half_trap_index(np.array([c[0], 1e200, 0.0])).tolist() == [0, 2, -1]
    assert m.in_trap(INF, 2)
