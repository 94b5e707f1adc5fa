import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nmorbeam.constants import MU0
from nmorbeam.errors import ApproximationDomainWarning
from nmorbeam.physics import (BeamParams, GeometryParams, b_field_magnitude, b_field_x, b_field_y,
                              closed_form_jacobian, closed_form_signal, current_density, erf,
                              integrated_bx_quadrature, quadrature_signal)

from oracles import circulation, erf_series, field_peak_radius


def test_beam_params_validation():
    with pytest.raises(ValueError, match="width_w"):
        BeamParams(1e-4, 0.0)
    with pytest.raises(ValueError):
        BeamParams(float("nan"), 1e-3)
    with pytest.raises(ValueError):
        GeometryParams(cell_path_L=-1.0)


def test_current_density_peak_and_falloff():
    p = BeamParams(math.pi * 1e-6, 1e-3, center_y0=2e-4, center_x0=-1e-4)
    assert current_density(-1e-4, 2e-4, p) == pytest.approx(1.0, rel=1e-15)
    assert current_density(-1e-4 + 1e-3, 2e-4, p) == pytest.approx(math.exp(-1), rel=1e-14)


def test_current_density_integrates_to_total(beam):
    w = beam.width_w
    total, _ = integrate.dblquad(
        lambda r, th: current_density(r * math.cos(th), r * math.sin(th), beam) * r,
        0, 2 * math.pi, 0, 8 * w, epsabs=0, epsrel=1e-13)
    assert total == pytest.approx(beam.total_current, rel=1e-9)


def test_field_on_axis_and_far_field(beam):
    assert b_field_magnitude(0.0, 0.0, beam) == 0.0
    assert b_field_magnitude(1e-12, 0.0, beam) == pytest.approx(
        MU0 * 100e-6 * 1e-12 / (2 * math.pi * 1e-6), rel=1e-9)
    r = 10 * beam.width_w
    ratio = b_field_magnitude(r, 0.0, beam) * 2 * math.pi * r / (MU0 * beam.total_current)
    assert abs(ratio - 1) < 1e-10


def test_field_hand_value(beam):
    # mu0 I0 (1 - e^-25) / (2 pi r) at r = 5 mm
    assert b_field_magnitude(3e-3, 4e-3, beam) == pytest.approx(4.0000000021219511e-9, rel=1e-12)
    assert b_field_x(3e-3, 4e-3, beam) == pytest.approx(4.0000000021219511e-9 * 0.8, rel=1e-12)


def test_series_branch_is_continuous(beam):
    w = beam.width_w
    inside = b_field_magnitude(0.999e-6 * w, 0.0, beam)
    outside = b_field_magnitude(1.001e-6 * w, 0.0, beam)
    assert outside / inside == pytest.approx(1.001 / 0.999, rel=1e-9)


@given(st.floats(-5e-3, 5e-3), st.integers(1, 2**17))
def test_bx_antisymmetric(x, k):
    # dyadic center and offset so that y0 +/- d are exactly representable
    d = k * 2.0**-25
    p = BeamParams(80e-6, 0.7e-3, center_y0=2.0**-12)
    assert b_field_x(x, p.center_y0 + d, p) == -b_field_x(x, p.center_y0 - d, p)
    assert b_field_x(x, p.center_y0, p) == 0.0


def test_bx_sign_follows_current(beam):
    neg = BeamParams(-beam.total_current, beam.width_w)
    assert b_field_x(0.0, 1e-3, beam) > 0
    assert b_field_x(0.0, 1e-3, neg) == -b_field_x(0.0, 1e-3, beam)


@pytest.mark.parametrize("factor", [0.5, 1.0, 3.0, 10.0])
def test_ampere_enclosed_current(beam, factor):
    R = factor * beam.width_w
    circ = circulation(lambda x, y: b_field_x(x, y, beam), lambda x, y: b_field_y(x, y, beam), R)
    # field circulates clockwise in (x, y) under this package's sign convention
    expected = MU0 * beam.total_current * (1 - math.exp(-(factor**2)))
    assert -circ == pytest.approx(expected, rel=1e-8)


def test_field_maximum_radius(beam):
    w = beam.width_w
    r = np.linspace(0.5 * w, 2 * w, 150001)
    step = r[1] - r[0]
    r_grid = r[np.argmax(b_field_magnitude(r, 0.0, beam))]
    assert abs(r_grid - field_peak_radius(w)) <= step
    assert field_peak_radius(1.0) == pytest.approx(1.1209064227785340, rel=1e-12)


def test_erf_values_and_symmetry():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-15)
    rng = np.random.default_rng(0)
    x = rng.uniform(-10, 10, 1000)
    assert np.all(erf(-x) + erf(x) == 0)
    assert erf(6.5) == 1.0 and erf(-7.0) == -1.0


def test_erf_matches_series():
    x = np.linspace(-6, 6, 20001)
    assert np.max(np.abs(erf(x) - erf_series(x))) <= 1e-12


def test_quadrature_zero_on_axis(beam, geometry):
    assert integrated_bx_quadrature(beam.center_y0, beam, geometry) == 0.0


def test_quadrature_matches_closed_form_at_w(beam, geometry):
    q = integrated_bx_quadrature(beam.width_w, beam, geometry) / MU0
    c = closed_form_signal(beam.width_w, beam, geometry)
    assert q == pytest.approx(c, rel=1e-8)


def test_quadrature_tolerance_monotone(beam, geometry):
    y = 0.8e-3
    errs = [integrated_bx_quadrature(y, beam, geometry, tol, full_output=True).error
            for tol in (1e-4 / 1.01, 1e-5, 1e-6, 5e-7, 1e-8, 5e-9, 1e-11, 5e-12)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_quadrature_tol_bounds(beam, geometry):
    with pytest.raises(ValueError):
        integrated_bx_quadrature(1e-3, beam, geometry, tol=1e-2)
    with pytest.raises(ValueError):
        integrated_bx_quadrature(1e-3, beam, geometry, tol=1e-15)


def test_closed_form_odd_and_limits(beam, geometry):
    assert closed_form_signal(0.0, beam, geometry) == 0.0
    d = np.linspace(1e-5, 20e-3, 500)
    assert np.array_equal(closed_form_signal(d, beam, geometry), -closed_form_signal(-d, beam, geometry))
    far = closed_form_signal(1e6, beam, geometry)
    assert abs(far) < 1e-6 * beam.total_current
    # peak sits between w and L/2
    ys = np.linspace(0, geometry.cell_path_L / 2, 20001)
    y_peak = ys[np.argmax(closed_form_signal(ys, beam, geometry))]
    assert beam.width_w < y_peak < geometry.cell_path_L / 2


def test_closed_form_domain_warning(geometry):
    wide = BeamParams(1e-4, 5e-3)
    with pytest.warns(ApproximationDomainWarning):
        closed_form_signal(1e-3, wide, geometry)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        closed_form_signal(1e-3, BeamParams(1e-4, 1e-3), geometry)


def test_closed_form_profile_vs_quadrature(beam, geometry):
    ys = np.linspace(-5e-3, 5e-3, 101)
    q = quadrature_signal(ys, beam, geometry)
    c = closed_form_signal(ys, beam, geometry)
    nz = np.abs(c) > 0
    assert np.max(np.abs(q[nz] - c[nz]) / np.abs(c[nz])) < 1e-6


def test_x_offset_biases_closed_form_only(geometry):
    centred = BeamParams(1e-4, 1e-3)
    shifted = BeamParams(1e-4, 1e-3, center_x0=15e-3)
    y = 2e-3
    q_c = quadrature_signal(y, centred, geometry)
    q_s = quadrature_signal(y, shifted, geometry)
    assert closed_form_signal(y, shifted, geometry) == closed_form_signal(y, centred, geometry)
    assert abs(q_s - q_c) > 1e-3 * abs(q_c)


def test_jacobian_matches_central_differences(geometry):
    y = np.linspace(-4e-3, 4e-3, 41)
    p0 = np.array([70e-6, 3e-4, 0.8e-3])
    J = np.column_stack(closed_form_jacobian(y, *p0, geometry.cell_path_L))

    def model(p):
        return closed_form_signal(y, BeamParams(p[0], p[2], center_y0=p[1]), geometry)

    for k, h in enumerate([1e-9, 1e-9, 1e-9]):
        dp = np.zeros(3)
        dp[k] = h
        fd = (model(p0 + dp) - model(p0 - dp)) / (2 * h)
        assert np.allclose(J[:, k], fd, rtol=1e-6, atol=1e-9 * np.max(np.abs(J[:, k])))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3e-3, 2e-3), st.floats(-1e-3, 1e-3), st.floats(-1e-3, 1e-3))
def test_oracle_equivalence_property(w, y0, dy):
    g = GeometryParams()
    p = BeamParams(55e-6, w, center_y0=y0)
    y = y0 + dy
    q = quadrature_signal(y, p, g)
    c = closed_form_signal(y, p, g)
    assert abs(q - c) <= max(1e-6 * abs(c), math.exp(-(g.cell_path_L**2) / (4 * w * w)) * p.total_current) + 1e-18
