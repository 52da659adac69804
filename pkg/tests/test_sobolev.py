import math

import numpy as np
import pytest

from regloss import (
    Box,
    Cube,
    Grid,
    NormValue,
    ScalarField,
    SobolevIndex,
    UnsupportedIndexError,
    demean,
    gagliardo_seminorm,
    hs_norm,
    interpolation_bound,
    make_bump,
    orthogonality_lower_bound,
    rescaled_norm,
    sphere_surface_area,
    wsp_norm,
)
from conftest import dipole


@pytest.fixture(scope="module")
def grid():
    return Grid(2, 256)


@pytest.fixture(scope="module")
def single_mode(grid):
    x = grid.coordinates()
    return ScalarField(grid, np.sin(2 * np.pi * x[0]), Box.whole(grid))


def test_single_mode_closed_form(single_mode):
    for s in (-1.0, 0.0, 0.5, 1.0, 2.0):
        want = (2 * math.pi) ** s / math.sqrt(2)
        assert hs_norm(single_mode, s).value == pytest.approx(want, rel=1e-12)


def test_zero_field_any_order(grid):
    zero = ScalarField(grid, np.zeros(grid.shape), Box.whole(grid))
    for s in (-1.0, 0.0, 0.7, 2.0):
        assert hs_norm(zero, s).value == 0.0


def test_order_zero_is_l2_even_with_mean(grid):
    b = make_bump(grid, (0.5, 0.5), 0.2, 1.0)
    direct = math.sqrt(float(np.sum(b.values**2)) * grid.spacing**2)
    assert hs_norm(b, 0.0).value == pytest.approx(direct, rel=1e-12)


def test_negative_order_requires_zero_mean(grid):
    b = make_bump(grid, (0.5, 0.5), 0.2, 1.0)
    assert math.isinf(hs_norm(b, -1.0).value)
    assert math.isfinite(hs_norm(demean(b), -1.0).value)


def test_negative_order_poisson_oracle(grid):
    f = demean(make_bump(grid, (0.5, 0.5), 0.2, 1.0))
    measured = hs_norm(f, -1.0).value
    fhat = np.fft.fftn(f.values)
    xi = grid.xi_magnitude()
    inv = np.zeros_like(xi)
    inv[xi > 0] = xi[xi > 0] ** (-2.0)
    ghat = fhat * inv
    k = grid.wavenumbers()
    grad_sq = 0.0
    for i in range(2):
        gi = np.fft.ifftn(2j * np.pi * k[i] * ghat).real
        grad_sq += float(np.sum(gi**2)) * grid.spacing**2
    assert measured == pytest.approx(math.sqrt(grad_sq), rel=1e-10)


def test_wsp_matches_hs_at_p2(grid, single_mode):
    b = make_bump(grid, (0.5, 0.5), 0.2, 1.0)
    for f in (single_mode, b):
        for s in (0.0, 0.5, 1.0):
            assert wsp_norm(f, s, 2.0).value == pytest.approx(
                hs_norm(f, s).value, rel=1e-10
            )
    assert wsp_norm(single_mode, 2.0, 2.0).value == pytest.approx(
        (2 * math.pi) ** 2 / math.sqrt(2), rel=1e-12
    )


def test_wsp_index_validation(single_mode):
    with pytest.raises(UnsupportedIndexError):
        wsp_norm(single_mode, 1.0, 1.0)
    with pytest.raises(UnsupportedIndexError):
        wsp_norm(single_mode, 1.0, math.inf)
    with pytest.raises(UnsupportedIndexError):
        SobolevIndex(1.0, 0.5)


def test_wsp_refined_grid_oracle():
    coarse = wsp_norm(make_bump(Grid(2, 256), (0.5, 0.5), 0.25, 1.0), 1.0, 4.0).value
    fine = wsp_norm(make_bump(Grid(2, 512), (0.5, 0.5), 0.25, 1.0), 1.0, 4.0).value
    assert coarse == pytest.approx(fine, rel=1e-4)


def test_wsp_vector_l2_combination(grid):
    from regloss import VectorField

    x = grid.coordinates()
    shear = np.sin(2 * np.pi * x[1])
    vec = VectorField(grid, (shear, np.zeros(grid.shape)), divergence_free=True)
    scalar = ScalarField(grid, shear, Box.whole(grid))
    assert wsp_norm(vec, 1.0, 2.0).value == pytest.approx(
        wsp_norm(scalar, 1.0, 2.0).value, rel=1e-12
    )


def test_gagliardo_zero_field():
    g = Grid(2, 16)
    zero = ScalarField(g, np.zeros(g.shape), Box.whole(g))
    assert gagliardo_seminorm(zero, 0.5).value == 0.0


def test_gagliardo_translation_invariance():
    g = Grid(2, 32)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    shifted = b.shifted((3, 5))
    a = gagliardo_seminorm(b, 0.5).value
    c = gagliardo_seminorm(shifted, 0.5).value
    assert a == pytest.approx(c, rel=1e-12)


def test_gagliardo_order_validation():
    g = Grid(2, 16)
    b = make_bump(g, (0.5, 0.5), 0.2, 1.0)
    for s in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(UnsupportedIndexError):
            gagliardo_seminorm(b, s)


def test_gagliardo_multiplier_ratio_constant_at_half(bump_corpus):
    grid, bumps = bump_corpus
    ratios = [
        gagliardo_seminorm(b, 0.5).value / hs_norm(b, 0.5).value for b in bumps
    ]
    assert (max(ratios) - min(ratios)) / min(ratios) < 0.02


def test_gagliardo_multiplier_simultaneous_positivity(bump_corpus):
    grid, bumps = bump_corpus
    for s in (0.25, 0.5, 0.75):
        ratios = []
        for b in bumps:
            gag = gagliardo_seminorm(b, s).value
            mult = hs_norm(b, s).value
            assert (gag > 0) == (mult > 0)
            ratios.append(gag / mult)
        # the equivalence factor stays inside a fixed interval on the corpus
        assert (max(ratios) - min(ratios)) / min(ratios) < 0.10


def test_monotone_in_order_for_unit_l2_mean_zero(grid):
    f = demean(make_bump(grid, (0.5, 0.5), 0.15, 1.0))
    scale = hs_norm(f, 0.0).value
    f = ScalarField(grid, f.values / scale, Box.whole(grid))
    previous = 0.0
    for s in (0.0, 0.25, 0.5, 1.0, 2.0):
        value = hs_norm(f, s).value
        assert value >= previous - 1e-12
        previous = value


def test_rescaled_norm_identity_and_critical():
    nv = NormValue(3.0, SobolevIndex(0.5, 2.0), "multiplier")
    assert rescaled_norm(nv, 1.0, 2).value == 3.0
    critical = NormValue(3.0, SobolevIndex(1.0, 2.0), "multiplier")
    assert rescaled_norm(critical, 0.37, 2).value == pytest.approx(3.0, rel=1e-15)


def test_rescaled_norm_group_action():
    nv = NormValue(2.0, SobolevIndex(0.25, 2.0), "multiplier")
    once = rescaled_norm(rescaled_norm(nv, 0.5, 2), 0.25, 2).value
    direct = rescaled_norm(nv, 0.125, 2).value
    assert once == pytest.approx(direct, rel=1e-15)


def test_rescaled_norm_validation():
    nv = NormValue(1.0, SobolevIndex(0.5, 2.0), "multiplier")
    with pytest.raises(ValueError):
        rescaled_norm(nv, 0.0, 2)


def test_rescale_and_measure_on_grid(grid):
    f1 = dipole(grid, (0.5, 0.5), 0.07, 0.06)
    f2 = dipole(grid, (0.5, 0.5), 0.035, 0.03)
    for s in (0.25, 0.5, 0.75):
        predicted = rescaled_norm(hs_norm(f1, s), 0.5, 2).value
        assert hs_norm(f2, s).value == pytest.approx(predicted, rel=1e-3)


def test_interpolation_bound_single_mode_equality(single_mode):
    bound = interpolation_bound(
        hs_norm(single_mode, -0.5), hs_norm(single_mode, 1.5), 0.5
    )
    assert hs_norm(single_mode, 0.5).value == pytest.approx(bound, rel=1e-12)


def test_interpolation_bound_l2_between_dual_orders(grid):
    f = demean(make_bump(grid, (0.5, 0.5), 0.2, 1.0))
    bound = interpolation_bound(hs_norm(f, -0.5), hs_norm(f, 0.5), 0.0)
    assert hs_norm(f, 0.0).value <= bound * (1 + 1e-12)


def test_interpolation_bound_two_mode_strict_gap(grid):
    x = grid.coordinates()
    f = ScalarField(grid, np.sin(2 * np.pi * x[0]) + np.sin(8 * np.pi * x[0]), Box.whole(grid))
    bound = interpolation_bound(hs_norm(f, 0.0), hs_norm(f, 1.0), 0.5)
    assert bound - hs_norm(f, 0.5).value > 1e-3


def test_interpolation_bound_range_validation(single_mode):
    with pytest.raises(ValueError):
        interpolation_bound(hs_norm(single_mode, 0.0), hs_norm(single_mode, 1.0), 1.5)


def test_sphere_surface_area():
    assert sphere_surface_area(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_surface_area(3) == pytest.approx(4 * math.pi, rel=1e-15)


def test_orthogonality_lower_bound_basics():
    assert orthogonality_lower_bound([], 0.5, 2) == 0.0
    single = orthogonality_lower_bound([(4.0, 1.0, 0.5)], 0.5, 2)
    expected = 4.0 - (2 * math.pi / 0.5) * 0.5 ** (-1.0) * 1.0
    assert single == pytest.approx(expected, rel=1e-15)
    with pytest.raises(ValueError):
        orthogonality_lower_bound([(1.0, 1.0, 0.0)], 0.5, 2)


def test_orthogonality_bound_against_direct_double_sum():
    g = Grid(2, 64)
    b1 = make_bump(g, (0.25, 0.25), 0.1, 1.0)
    b2 = make_bump(g, (0.75, 0.75), 0.1, -0.8)
    total = ScalarField(g, b1.values + b2.values, Box.whole(g))
    for s in (0.25, 0.5, 0.75):
        direct = gagliardo_seminorm(total, s).value ** 2
        pieces = [
            (gagliardo_seminorm(b, s).value ** 2, hs_norm(b, 0.0).value ** 2, 0.15)
            for b in (b1, b2)
        ]
        assert direct >= orthogonality_lower_bound(pieces, s, 2)


def test_localization_tail_bound():
    g = Grid(2, 64)
    b = make_bump(g, (0.25, 0.25), 0.1, 1.0)
    region = Cube((0.25, 0.25), 0.5)
    for s in (0.25, 0.5, 0.75):
        global_sq = gagliardo_seminorm(b, s).value ** 2
        local_sq = gagliardo_seminorm(b, s, within=region).value ** 2
        tail = (
            sphere_surface_area(2) / s * 0.15 ** (-2 * s) * hs_norm(b, 0.0).value ** 2
        )
        assert global_sq <= local_sq + tail
