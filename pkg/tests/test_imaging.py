import math
import warnings

import numpy as np
import pytest
from scipy import stats

from nmorbeam.constants import MU0
from nmorbeam.errors import DegenerateFrame, MaskMismatch, SaturationWarning
from nmorbeam.imaging import (CameraConfig, Frame, expose, frame_rng, inversion_error_bound,
                              laser_profile, mean_photoelectrons, normalize_map, phi_from_channels,
                              rotation_from_frames, rotation_variance, synthesize_frame_pair)
from nmorbeam.maps import Grid, ResponseMap, RotationMap
from nmorbeam.physics import GeometryParams

CAM = CameraConfig(pixels_y=32, pixels_z=32)
GEO = GeometryParams()


def uniform_phi(value, cam=CAM):
    g = cam.grid()
    return RotationMap(np.full(g.shape, value), np.ones(g.shape, bool), g)


def laser(cam=CAM, peak=30.0):
    return laser_profile(cam, GEO, peak)


def pairs(phi_map, cam=CAM, noise_on=False, stray=0.0, peak=30.0):
    L = laser(cam, peak)
    on = synthesize_frame_pair(phi_map, L, cam, "on", noise_on, stray_phi=stray, acquisition_index=0)
    off = synthesize_frame_pair(phi_map, L, cam, "off", noise_on, stray_phi=stray, acquisition_index=1)
    return on, off


def test_camera_validation_and_pixel_size():
    assert CameraConfig().object_pixel_size == pytest.approx(31.25e-6, rel=1e-15)
    with pytest.raises(ValueError):
        CameraConfig(magnification=0.0)
    with pytest.raises(ValueError):
        CameraConfig(quantum_efficiency=1.5)
    with pytest.raises(ValueError):
        CameraConfig(rng_seed=-1)


def test_laser_profile_values():
    cam = CameraConfig(pixels_y=33, pixels_z=33)
    g = cam.grid()
    L = laser_profile(cam, GEO, 7.0)
    assert L[16, 16] == 7.0
    shifted = Grid(33, 33, cam.object_pixel_size, center_y=-GEO.laser_radius)
    L2 = laser_profile(cam, GEO, 7.0, grid=shifted)
    # pixel 16 sits at y = center_y, the reference centre is also center_y
    assert L2[16, 16] == 7.0
    assert np.argmin(np.abs(g.y)) == 16
    with pytest.raises(ValueError):
        laser_profile(cam, GEO, 0.0)


def test_laser_profile_at_radius():
    r = GEO.laser_radius
    cam = CameraConfig(pixels_y=3, pixels_z=3, pixel_pitch=r * 0.5, magnification=0.5)
    L = laser_profile(cam, GEO, 2.0)
    assert L[2, 1] == pytest.approx(2.0 * math.exp(-2), rel=1e-15)


def test_laser_profile_power():
    cam = CameraConfig(pixels_y=1000, pixels_z=1000, pixel_pitch=10e-6, magnification=0.5)
    L = laser_profile(cam, GEO, 30.0)
    power = L.sum() * cam.object_pixel_size**2
    assert power == pytest.approx(math.pi * GEO.laser_radius**2 * 30.0 / 2, rel=1e-4)


def test_balanced_null():
    on, _ = pairs(uniform_phi(0.0))
    assert np.array_equal(on[0].data, on[1].data)
    assert not on[0].quantized


def test_uniform_rotation_contrast():
    on, _ = pairs(uniform_phi(1e-3))
    i1, i2 = on[0].data, on[1].data
    ratio = (i2 - i1) / (i1 + i2)
    assert np.allclose(ratio, 1.99999866666693e-3, rtol=1e-12, atol=0)


def test_photoelectron_scale():
    e = mean_photoelectrons(30.0, CameraConfig())
    hand = 30.0 * 3e-3 * (31.25e-6) ** 2 * 200e-6 * 0.5 / (6.62607015e-34 * 299792458.0 / 780e-9)
    assert e == pytest.approx(hand, rel=1e-14)


def test_noise_variance_and_mean():
    cam = CameraConfig(pixels_y=100, pixels_z=100, read_noise=7.0, rng_seed=11)
    mean = np.full(cam.grid().shape, 2500.0)
    data, quantized = expose(mean, cam, True, frame_rng(11, 0, "ch1"))
    assert quantized and data.dtype == np.uint16
    x = data.astype(float)
    assert x.mean() == pytest.approx(2500.0, rel=5e-3)
    assert x.var(ddof=1) == pytest.approx(2500.0 + 49.0, rel=0.05)


def test_poisson_chi_square():
    cam = CameraConfig(read_noise=0.0)
    mean = np.full(10_000, 6.0)
    data, _ = expose(mean, cam, True, frame_rng(2024, 0, "ch2"))
    k = data.astype(int)
    edges = np.arange(0, 15)
    observed = np.array([np.sum(k == v) for v in edges[:-1]] + [np.sum(k >= edges[-1])])
    probs = np.append(stats.poisson.pmf(edges[:-1], 6.0), stats.poisson.sf(edges[-1] - 1, 6.0))
    expected = probs * k.size
    keep = expected >= 5
    obs, exp_ = observed[keep], expected[keep]
    if (~keep).any():
        obs = np.append(obs, observed[~keep].sum())
        exp_ = np.append(exp_, expected[~keep].sum())
    p = stats.chisquare(obs, exp_).pvalue
    assert p > 0.01


def test_determinism_and_channel_independence():
    cam = CameraConfig(pixels_y=16, pixels_z=16, rng_seed=99)
    a = pairs(uniform_phi(1e-3, cam), cam, noise_on=True)
    b = pairs(uniform_phi(1e-3, cam), cam, noise_on=True)
    for pa, pb in zip(a, b):
        for fa, fb in zip(pa, pb):
            assert np.array_equal(fa.data, fb.data)
    assert not np.array_equal(a[0][0].data, a[1][0].data)
    other = CameraConfig(pixels_y=16, pixels_z=16, rng_seed=100)
    c = pairs(uniform_phi(1e-3, other), other, noise_on=True)
    assert not np.array_equal(a[0][0].data, c[0][0].data)


def test_parallel_streams_match_sequential():
    # each (seed, acquisition, channel) stream can be regenerated on its own
    s1 = frame_rng(5, 3, "ch2").poisson(100.0, size=50)
    frame_rng(5, 0, "ch1").poisson(100.0, size=1000)
    s2 = frame_rng(5, 3, "ch2").poisson(100.0, size=50)
    assert np.array_equal(s1, s2)


def test_noise_requires_seed():
    with pytest.raises(ValueError):
        pairs(uniform_phi(0.0), noise_on=True)


def test_saturation_warning():
    with pytest.warns(SaturationWarning):
        pairs(uniform_phi(0.0), peak=1e6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pairs(uniform_phi(0.0))


def test_identical_pairs_give_zero():
    on, off = pairs(uniform_phi(0.0))
    off_as_on = tuple(Frame(f.data, f.channel, "on", f.config, grid=f.grid, quantized=False) for f in off)
    rot = rotation_from_frames(off_as_on, off)
    assert np.all(rot.phi[rot.mask] == 0.0)


@pytest.mark.parametrize("exact", [False, True])
def test_round_trip_half_mrad(exact):
    on, off = pairs(uniform_phi(0.5e-3))
    rot = rotation_from_frames(on, off, exact=exact)
    assert np.max(np.abs(rot.phi[rot.mask] - 0.5e-3)) <= 1e-9


def test_inversion_residual_at_50_mrad():
    phi = np.linspace(-0.05, 0.05, 2001)
    i1, i2 = 0.5 * (1 - np.sin(2 * phi)), 0.5 * (1 + np.sin(2 * phi))
    resid = phi_from_channels(i1, i2) - phi
    assert np.all(np.abs(resid) <= inversion_error_bound(phi) + 1e-15)
    # the bound is tight to leading order
    assert abs(resid[-1]) == pytest.approx(0.05**3 / 2, rel=0.02)
    assert np.max(np.abs(phi_from_channels(i1, i2, exact=True) - phi)) <= 1e-12


def test_small_angle_form_difference():
    x = math.sin(2e-3)
    assert abs(math.asin(x / 2) - x / 2) < 2e-8


def test_stray_rotation_cancels():
    on0, off0 = pairs(uniform_phi(0.8e-3))
    on1, off1 = pairs(uniform_phi(0.8e-3), stray=4e-3)
    r0 = rotation_from_frames(on0, off0, exact=True)
    r1 = rotation_from_frames(on1, off1, exact=True)
    assert np.max(np.abs(r1.phi[r1.mask] - r0.phi[r0.mask])) < 1e-12
    # with noise, the offset vanishes to noise level
    cam = CameraConfig(pixels_y=32, pixels_z=32, rng_seed=3)
    on2, off2 = pairs(uniform_phi(0.0, cam), cam, noise_on=True, stray=4e-3)
    r2 = rotation_from_frames(on2, off2, exact=True)
    sigma = np.sqrt(rotation_variance(on2, off2))[r2.mask]
    assert abs(np.mean(r2.phi[r2.mask])) < 4 * np.sqrt(np.mean(sigma**2) / r2.mask.sum())


def test_mask_threshold():
    on, off = pairs(uniform_phi(0.0))
    total = off[0].data + off[1].data
    rot = rotation_from_frames(on, off, mask_threshold=0.3)
    assert np.array_equal(rot.mask, total >= 0.3 * total.max())
    assert np.all(np.isnan(rot.phi[~rot.mask]))


def test_degenerate_frames():
    on, off = pairs(uniform_phi(0.0))
    dark_on = tuple(Frame(np.zeros_like(f.data), f.channel, "on", f.config, quantized=False) for f in on)
    with pytest.raises(DegenerateFrame):
        rotation_from_frames(dark_on, off)
    with pytest.raises(ValueError):
        rotation_from_frames(off, on)


def test_normalize_map():
    g = CAM.grid()
    beta_val = 123.0
    mask = np.ones(g.shape, bool)
    mask[0] = False
    beta = ResponseMap(np.where(mask, beta_val, np.nan), mask, g)
    phi = RotationMap(np.full(g.shape, MU0 * beta_val * 1e-6), np.ones(g.shape, bool), g)
    n = normalize_map(phi, beta)
    assert np.allclose(n.signal[n.mask], 1e-6, rtol=1e-15)
    assert not n.mask[0].any() and np.all(np.isnan(n.signal[0]))
    n2 = normalize_map(phi, ResponseMap(beta.beta * 2, mask, g))
    assert np.allclose(n2.signal[mask], n.signal[mask] / 2, rtol=1e-15)
    with pytest.raises(MaskMismatch):
        normalize_map(RotationMap(phi.phi, ~np.ones(g.shape, bool), g), beta)
