import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basin_forge.scenarios import generate_scenario, unit_circle_labels
from basin_forge.sphere import (
    INF,
    MobiusTransform,
    RegionSet,
    SphereDisk,
    check_cover,
    chordal_distance,
    cover_boundary,
    euclidean_radius_of_infinity_disk,
    hausdorff_distance,
    is_inf,
    mobius_normalize,
    normalize_point,
    rasterize,
    to_unit_sphere,
)

from conftest import brute_hausdorff

finite = st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)


def test_chordal_examples():
    assert chordal_distance(0, 0) == 0
    assert chordal_distance(0, INF) == pytest.approx(2, abs=1e-15)
    assert chordal_distance(1, -1) == pytest.approx(2, abs=1e-15)
    assert chordal_distance(INF, INF) == 0


def test_chordal_metric_axioms_random():
    rng = np.random.default_rng(1)
    z = (rng.standard_normal((3, 10_000)) + 1j * rng.standard_normal((3, 10_000))) * 10.0 ** rng.uniform(-3, 3, (3, 10_000))
    z[0, :10] = INF
    a, b, c = z
    ab, bc, ac = chordal_distance(a, b), chordal_distance(b, c), chordal_distance(a, c)
    assert np.all(ab <= 2 + 1e-12)
    assert np.allclose(ab, chordal_distance(b, a), atol=1e-15)
    assert np.all(ac <= ab + bc + 1e-12)
    assert np.all(chordal_distance(a, a) == 0)


@given(finite, finite)
def test_chordal_matches_sphere_embedding(a, b):
    e = np.linalg.norm(to_unit_sphere(a) - to_unit_sphere(b))
    assert chordal_distance(a, b) == pytest.approx(e, abs=1e-12)


@given(finite, finite)
def test_chordal_zero_only_on_equal_points(a, b):
    if a != b and abs(a - b) > 1e-9 * max(1, abs(a)):
        assert chordal_distance(a, b) > 0


def test_overflow_cap_is_infinity():
    assert is_inf(1e151)
    assert not is_inf(1e149)
    assert normalize_point(complex(1e200, 0)) == INF
    with pytest.raises(ValueError):
        normalize_point(complex(np.nan, 0))


def test_infinity_disk_radius():
    assert euclidean_radius_of_infinity_disk(np.sqrt(2)) == pytest.approx(1)
    assert euclidean_radius_of_infinity_disk(0.2) == pytest.approx(np.sqrt(99))
    assert euclidean_radius_of_infinity_disk(2 - 1e-9) < 1e-4
    with pytest.raises(ValueError):
        euclidean_radius_of_infinity_disk(2.0)


@given(finite, st.floats(0.01, 1.99), finite)
@settings(max_examples=200)
def test_disk_euclidean_form_matches_membership(c, r, z):
    disk = SphereDisk(c, r)
    try:
        cen, rad, outside = disk.euclidean()
    except ValueError:
        return
    d = chordal_distance(z, c)
    if abs(d - r) < 1e-7:
        return
    inside = abs(z - cen) < rad
    assert (inside != outside) == bool(disk.contains(z))


def test_infinity_disk_membership():
    disk = SphereDisk(INF, 0.5)
    rho = euclidean_radius_of_infinity_disk(0.5)
    assert disk.contains(INF)
    assert disk.contains(rho * 1.001)
    assert not disk.contains(rho * 0.999)


def test_hausdorff_examples():
    a = np.array([0, 1, 1j])
    assert hausdorff_distance(a, a) == 0
    assert hausdorff_distance([0], [INF]) == pytest.approx(2)


def test_hausdorff_brute_force_small_grids():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 17))
        reg = RegionSet(rng.integers(0, 3, (n, n)), 4.0, 2)
        z = reg.pixel_centers()
        a, b = z[reg.labels == 1], z[reg.labels == 2]
        if a.size and b.size:
            assert hausdorff_distance(a, b) == pytest.approx(brute_hausdorff(a, b), abs=1e-12)


def test_regionset_validation():
    lab = np.zeros((8, 8), np.uint8)
    lab[:3] = 1
    lab[5:] = 2
    RegionSet(lab, 1.0, 2).validate()
    lab[3] = 1  # now 1 and 2 are not adjacent yet
    RegionSet(lab, 1.0, 2).validate()
    lab[4, :4] = 2
    with pytest.raises(ValueError, match="touch"):
        RegionSet(lab, 1.0, 2).validate()
    with pytest.raises(ValueError, match="do not occur"):
        RegionSet(np.ones((4, 4)), 1.0, 2).validate()
    with pytest.raises(ValueError, match="8/eps"):
        generate_scenario("unit_circle", resolution=64, chart_radius=4).validate(0.25)


def test_mobius_examples():
    t = MobiusTransform(0j)
    assert complex(t.forward(1)) == 1
    assert complex(t.forward(2)) == 0.5
    assert is_inf(t.forward(0))
    assert t.forward(INF) == 0
    assert MobiusTransform().identity
    assert MobiusTransform.parse(t.serialize()) == t
    assert MobiusTransform.parse("identity").identity


def test_mobius_identity_leaves_regions():
    reg = generate_scenario("half_planes", resolution=64, chart_radius=32)
    out, tr = mobius_normalize(reg, INF)
    assert tr.identity
    assert np.array_equal(out.labels, reg.labels)


def test_inversion_swaps_unit_circle_regions():
    # p = 0 is inside A_1, so the transform is applied to the labelling directly
    t = MobiusTransform(0j)
    moved = rasterize(lambda w: unit_circle_labels(t.inverse(w)), 2, 128, 4.0)
    inner = moved.label_at([0.5, 0.3j])
    outer = moved.label_at([2.0, -3j])
    assert list(inner) == [2, 2] and list(outer) == [1, 1]


@given(st.complex_numbers(max_magnitude=30, allow_nan=False, allow_infinity=False))
def test_mobius_round_trip(z):
    t = MobiusTransform(1 + 0.5j)
    if abs(z - t.p) < 1e-6:
        return
    back = complex(t.inverse(t.forward(z)))
    assert abs(back - z) <= 1e-9 * max(1, abs(z)) ** 2


def test_normalized_unit_circle_puts_infinity_in_boundary():
    reg = generate_scenario("unit_circle", resolution=128, chart_radius=32)
    out, tr = mobius_normalize(reg, 1.0)
    assert out.infinity_in_J
    # the pixel at 0 now stands for z = infinity in the input, region 2
    h = out.pixel_size
    assert out.label_at(h / 2 * (1 + 1j)) in (0, 2)
    with pytest.raises(ValueError):
        mobius_normalize(reg, 0.0)


def test_cover_boundary_postconditions_unit_disk():
    reg = generate_scenario("unit_circle", resolution=512, chart_radius=16)
    for j in (1, 2):
        disks = cover_boundary(reg, j, 0.5)
        assert disks
        assert check_cover(reg, j, 0.5, disks) == []


def test_cover_boundary_annulus():
    def ann(z):
        a = np.abs(np.where(is_inf(z), 10, z))
        return np.where((a > 0.5) & (a < 1), 1, np.where((a < 0.48) | (a > 1.02), 2, 0))

    reg = rasterize(ann, 2, 512, 2.0)
    disks = cover_boundary(reg, 1, 0.3)
    assert check_cover(reg, 1, 0.3, disks) == []
    c = np.abs([dk.center for dk in disks])
    assert np.any(c < 0.75) and np.any(c > 0.75)


def test_cover_boundary_empty_boundary():
    reg = RegionSet(np.ones((16, 16), np.uint8), 2.0, 2)
    assert cover_boundary(reg, 1, 1.0) == []
