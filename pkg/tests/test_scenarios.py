import numpy as np
import pytest

from basin_forge.scenarios import generate_scenario, newton_labels
from basin_forge.sphere import INF, infinity_in_boundary


def test_unit_circle_examples():
    reg = generate_scenario("unit_circle", resolution=512, chart_radius=32)
    h = reg.pixel_size
    assert reg.label_at(h / 2 * (1 + 1j)) == 1
    assert reg.labels[0, 0] == 2
    assert reg.label_at(1.0 + h / 2 * 1j) in (0,) or reg.label_at(1.0) == 0
    assert not infinity_in_boundary(reg)


def test_half_planes():
    reg = generate_scenario("half_planes", resolution=64, chart_radius=32)
    assert reg.label_at(5j) == 1 and reg.label_at(-5j) == 2
    assert infinity_in_boundary(reg)


def test_newton_root_label():
    assert newton_labels(np.array([1.0 + 0j]), 3)[0] == 1
    roots = np.exp(2j * np.pi * np.arange(4) / 4)
    assert newton_labels(roots, 4).tolist() == [1, 2, 3, 4]
    assert newton_labels(np.array([0j, INF]), 3).tolist() == [0, 0]


def test_newton_fractions_resolution_stable():
    a = generate_scenario("newton", d=3, resolution=256, chart_radius=8)
    b = generate_scenario("newton", d=3, resolution=512, chart_radius=8)
    fa = np.bincount(a.labels.ravel(), minlength=4)[1:] / a.labels.size
    fb = np.bincount(b.labels.ravel(), minlength=4)[1:] / b.labels.size
    assert np.abs(fa - fb).max() < 0.01


def test_unknown_scenarios():
    with pytest.raises(ValueError):
        generate_scenario("lakes")
    with pytest.raises(ValueError):
        generate_scenario("newton", d=6)
    with pytest.raises(ValueError):
        generate_scenario("unit_circle", d=3)
