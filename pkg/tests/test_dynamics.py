import numpy as np
import pytest

from basin_forge.dynamics import (
    BasinChart,
    ConstructedMap,
    apply_map,
    chart_boundary,
    choose_n,
    classify_grid,
    classify_points,
    eval_map,
    find_fixed_point,
    verify_approximation,
)
from basin_forge.model import ConstructionError, ModelFamily, choose_delta
from basin_forge.polyrat import PoleSumRational, Polynomial, poly_eval
from basin_forge.scenarios import generate_scenario
from basin_forge.sphere import chordal_distance, is_inf


@pytest.fixture(scope="module")
def test_map():
    delta, worst = choose_delta(2, 1.0, 0.5)
    return ConstructedMap(ModelFamily(2, 1.0, delta, worst), None, n=1)


def test_identity_surrogate_matches_model(test_map):
    rng = np.random.default_rng(0)
    z = rng.standard_normal(10_000) * 3 + 1j * rng.standard_normal(10_000) * 3
    ref = poly_eval(Polynomial([0, 2, 1]), z)
    got = apply_map(test_map, z)
    assert np.allclose(got, ref, rtol=1e-14, atol=1e-14)


def test_identity_surrogate_classification(test_map):
    lab, cnt = classify_points(test_map, np.array([1.0, -1.0, 0.0, -1.0 + 0.5j]), max_outer=200)
    assert lab.tolist() == [2, 1, 0, 1]
    assert cnt[1] == 0 and cnt[2] == 200


def test_eval_map_early_exit(test_map):
    w, label, steps = eval_map(test_map, -1.0)
    assert (label, steps) == (1, 0)
    w, label, steps = eval_map(test_map, -1.0 + 0.5j)
    assert label in (0, 1) and steps == 1
    assert w == pytest.approx(-1.25)


def test_growth_near_infinity():
    delta, worst = choose_delta(2, 8.0, 0.5)
    m = ConstructedMap(ModelFamily(2, 8.0, delta, worst), None, n=1)
    z = 1e6
    w = complex(apply_map(m, z)[0])
    assert abs(w) == pytest.approx(z**2 / 8, rel=1e-4)


def test_choose_n_examples():
    assert choose_n([0, 0, 0]) == 1
    assert choose_n([3, 7, 1]) == 7
    with pytest.raises(ConstructionError):
        choose_n([2, -1])


def test_fixed_point_of_constant_map():
    model = ModelFamily.select(3, 0.35)
    for j in range(2):
        c = complex(model.xi[j])
        m = ConstructedMap(model, PoleSumRational(c, [], []), n=2)
        assert find_fixed_point(m, j) == pytest.approx(c, abs=1e-12)
    assert is_inf(find_fixed_point(m, 2))


def test_owners_must_be_a_permutation():
    model = ModelFamily.select(3, 0.35)
    with pytest.raises(ValueError):
        ConstructedMap(model, None, owners=(1, 1, 2))
    with pytest.raises(ValueError):
        ConstructedMap(model, None, n=0)


def test_verify_self_comparison_and_swap():
    reg = generate_scenario("half_planes", resolution=64, chart_radius=32)
    chart = BasinChart(reg.labels.copy(), np.zeros(reg.labels.shape, np.uint16), reg.chart_radius, 2)
    rep = verify_approximation(reg, chart, 0.25)
    assert rep.passed
    assert rep.values["hausdorff_A1"] == rep.values["hausdorff_A2"] == rep.values["hausdorff_J"] == 0
    swapped = np.choose(reg.labels, [0, 2, 1]).astype(np.uint8)
    rep = verify_approximation(reg, BasinChart(swapped, chart.counts, reg.chart_radius, 2), 0.25)
    assert not rep.passed
    # every upper pixel far from the real axis is now far from label 1
    assert rep.values["hausdorff_A1"] > 1.0


def test_verify_rejects_empty_label():
    reg = generate_scenario("half_planes", resolution=64, chart_radius=32)
    lab = np.where(reg.labels == 2, 1, reg.labels).astype(np.uint8)
    with pytest.raises(ValueError):
        verify_approximation(reg, BasinChart(lab, np.zeros_like(lab, np.uint16), reg.chart_radius, 2), 0.25)


def test_chart_boundary():
    lab = np.array([[1, 1, 2], [1, 1, 2], [1, 0, 2]], np.uint8)
    jul = chart_boundary(lab)
    assert jul[2, 1] and jul[0, 1] and jul[0, 2]
    assert not jul[0, 0] and not jul[1, 0]


def test_unit_circle_fixed_point_contraction(unit_circle_run):
    m = unit_circle_run.map
    j = 0 if not is_inf(m.model.xi[0]) else 1
    zeta = find_fixed_point(m, j)
    assert chordal_distance(complex(apply_map(m, zeta)[0]), zeta) < 1e-10
    z = complex(m.model.xi[j])
    dist = []
    for _ in range(6):
        z = complex(apply_map(m, z)[0])
        dist.append(chordal_distance(z, zeta))
    assert all(b < a or a == 0 for a, b in zip(dist[1:], dist[2:]))


def test_trap_soundness(unit_circle_run):
    # orbits never leave a half-trap once inside
    m = unit_circle_run.map
    cen, rad, rho = m.model.trap_arrays()
    for k, (c, r) in enumerate(zip(cen, rad)):
        z = c + 0.99 * r * np.exp(2j * np.pi * np.arange(256) / 256)
        w = poly_eval(m.model.poly, z)
        assert np.all(np.abs(w - c) < r)
    z = 1.01 * rho * np.exp(2j * np.pi * np.arange(256) / 256)
    assert np.all(np.abs(poly_eval(m.model.poly, z)) > rho)


def test_pixel_at_attractor(unit_circle_run):
    m = unit_circle_run.map
    j = 0 if not is_inf(m.model.xi[0]) else 1
    lab, cnt = classify_points(m, np.array([find_fixed_point(m, j)]))
    assert lab[0] == m.owners[j] and cnt[0] <= 1


def test_classify_grid_deterministic(unit_circle_run):
    m = unit_circle_run.map
    a = classify_grid(m, 96, 40.0)
    b = classify_grid(m, 96, 40.0)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.counts, b.counts)


def test_samples_classified_by_their_region(unit_circle_run):
    m, sh = unit_circle_run.map, unit_circle_run.shrunk
    for p in sh.parts:
        z = p.samples[~is_inf(p.samples)]
        lab, _ = classify_points(m, z)
        assert np.all(lab == p.label)
