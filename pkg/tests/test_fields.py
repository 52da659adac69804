import math

import numpy as np
import pytest

from regloss import (
    Box,
    Cube,
    GeometryError,
    Grid,
    ScalarField,
    VectorField,
    cube_distance_to_complement,
    demean,
    extend_to_dimension,
    field_to_csv,
    hs_norm,
    load_field,
    make_bump,
    save_field,
)
from regloss.fields import radial_cutoff, smooth_bridge


def test_grid_validation():
    with pytest.raises(GeometryError):
        Grid(0, 64)
    with pytest.raises(GeometryError):
        Grid(2, 100)  # not a power of two
    with pytest.raises(GeometryError):
        Grid(2, 2)
    with pytest.raises(GeometryError):
        Grid(2, 64, -1.0)


def test_grid_geometry():
    g = Grid(2, 8, 2.0)
    assert g.spacing == 0.25
    assert g.shape == (8, 8)
    assert np.allclose(g.axis(), np.arange(8) * 0.25)
    assert np.allclose(g.min_image(np.array([1.9])), np.array([-0.1]))


def test_bump_zero_amplitude_is_zero_field():
    g = Grid(2, 64)
    b = make_bump(g, (0.5, 0.5), 0.2, 0.0)
    assert np.all(b.values == 0.0)


def test_bump_center_value_is_amplitude():
    g = Grid(2, 256)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.7)
    assert b.values[128, 128] == pytest.approx(1.7, rel=0, abs=0)


def test_bump_l2_against_refined_quadrature():
    coarse = hs_norm(make_bump(Grid(2, 256), (0.5, 0.5), 0.25, 1.0), 0.0).value
    fine = hs_norm(make_bump(Grid(2, 512), (0.5, 0.5), 0.25, 1.0), 0.0).value
    assert abs(coarse - fine) / fine < 1e-6


def test_bump_vanishes_on_cell_boundary():
    g = Grid(2, 64)
    b = make_bump(g, (0.5, 0.5), 0.4, 1.0)
    assert np.all(b.values[0, :] == 0.0)
    assert np.all(b.values[:, 0] == 0.0)


def test_bump_periodic_wrap_matches_roll():
    g = Grid(2, 64)
    centered = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    near_edge = make_bump(g, (0.5 + 32 * g.spacing, 0.5), 0.2, 1.0)
    assert np.allclose(np.roll(centered.values, 32, axis=0), near_edge.values, atol=0)


def test_bump_radius_validation():
    g = Grid(2, 64)
    with pytest.raises(GeometryError):
        make_bump(g, (0.5, 0.5), 0.0, 1.0)
    with pytest.raises(GeometryError):
        make_bump(g, (0.5, 0.5), 0.5, 1.0)


def test_scalar_field_support_enforced():
    g = Grid(2, 64)
    vals = np.ones(g.shape)
    with pytest.raises(GeometryError):
        ScalarField(g, vals, Box((0.5, 0.5), (0.1, 0.1)))


def test_scalar_field_mean_metadata_and_immutability():
    g = Grid(2, 64)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    assert b.mean == pytest.approx(float(b.values.mean()), rel=0, abs=0)
    with pytest.raises(ValueError):
        b.values[0, 0] = 1.0


def test_demean():
    g = Grid(2, 64)
    d = demean(make_bump(g, (0.5, 0.5), 0.2, 1.0))
    assert abs(d.mean) < 1e-15
    assert d.support.covers_cell(g)


def test_vector_field_divergence_flag():
    g = Grid(2, 64)
    x = g.coordinates()
    shear = np.sin(2 * np.pi * x[1])
    VectorField(g, (shear, np.zeros(g.shape)), divergence_free=True)
    with pytest.raises(GeometryError):
        VectorField(g, (np.sin(2 * np.pi * x[0]), np.zeros(g.shape)), divergence_free=True)


def test_cube_distance_to_complement_concentric():
    inner = Cube((0.0, 0.0), 1.0)
    outer = Cube((0.0, 0.0), 3.0)
    assert cube_distance_to_complement(inner, outer) == pytest.approx(1.0)
    assert cube_distance_to_complement(Cube((0.0, 0.0), 3.0), outer) == pytest.approx(0.0)
    assert cube_distance_to_complement(Cube((0.0, 0.0), 0.5), outer) == pytest.approx(1.25)


def test_cube_distance_requires_containment():
    with pytest.raises(GeometryError):
        cube_distance_to_complement(Cube((2.0, 0.0), 1.0), Cube((0.0, 0.0), 3.0))


def test_cube_gap():
    a = Cube((0.0, 0.0), 1.0)
    b = Cube((2.0, 0.0), 1.0)
    assert a.distance_to(b) == pytest.approx(1.0)
    assert a.distance_to(Cube((0.5, 0.0), 1.0)) == 0.0


def test_smooth_bridge_profile():
    t = np.linspace(-0.5, 1.5, 101)
    v = smooth_bridge(t)
    assert np.all(v[t <= 0] == 0.0)
    assert np.all(v[t >= 1] == 1.0)
    assert np.all(np.diff(v) >= -1e-15)
    assert smooth_bridge(0.5) == pytest.approx(0.5)


def test_extension_matches_planar_on_core_slice():
    g = Grid(2, 32)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    ext = extend_to_dimension(b, 0.125, 0.25, 3)
    assert ext.grid.dimension == 3
    assert np.max(np.abs(ext.values[:, :, 0] - b.values)) == 0.0


def test_extension_vanishes_outside_cutoff():
    g = Grid(2, 32)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    ext = extend_to_dimension(b, 0.125, 0.25, 3)
    x3 = g.axis()
    far = np.minimum(x3, 1.0 - x3) > 0.25
    assert np.max(np.abs(ext.values[:, :, far])) == 0.0


def test_extension_l2_tensor_oracle():
    from scipy.integrate import quad

    g = Grid(2, 64)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    ext = extend_to_dimension(b, 0.125, 0.25, 3)
    eta_sq, _ = quad(
        lambda y: radial_cutoff(np.abs(np.array([y])), 0.125, 0.25)[0] ** 2,
        -0.5,
        0.5,
        limit=200,
    )
    predicted = hs_norm(b, 0.0).value * math.sqrt(eta_sq)
    assert hs_norm(ext, 0.0).value == pytest.approx(predicted, rel=1e-5)


def test_extension_validation():
    g = Grid(2, 32)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    with pytest.raises(GeometryError):
        extend_to_dimension(b, 0.125, 0.25, 2)
    with pytest.raises(GeometryError):
        extend_to_dimension(b, 0.25, 0.125, 3)


def test_binary_round_trip(tmp_path):
    g = Grid(2, 32)
    b = make_bump(g, (0.4, 0.6), 0.15, 2.0)
    path = tmp_path / "field.bin"
    save_field(b, path)
    loaded = load_field(path)
    assert loaded.grid == b.grid
    assert np.array_equal(loaded.values, b.values)
    assert loaded.support == b.support


def test_csv_export(tmp_path):
    g = Grid(2, 4)
    f = ScalarField(g, np.arange(16, dtype=float).reshape(4, 4), Box.whole(g))
    path = tmp_path / "field.csv"
    field_to_csv(f, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "i0,i1,value"
    assert len(lines) == 17
    assert lines[1].startswith("0,0,")
