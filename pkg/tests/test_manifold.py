import numpy as np
import pytest

from clkl import manifold
from clkl.manifold import ArrayConfig

CFG = ArrayConfig()  # 28 GHz, 64 elements, half-wavelength spacing


def test_centred_index_examples():
    assert np.allclose(manifold.centred_index(4), [-1.5, -0.5, 0.5, 1.5])
    assert np.allclose(manifold.centred_index(3), [-1.0, 0.0, 1.0])
    m64 = manifold.centred_index(64)
    assert m64[0] == -31.5 and m64[-1] == 31.5
    for m in (2, 3, 17, 64):
        assert abs(manifold.centred_index(m).sum()) < 1e-12


def test_geometry_constants():
    assert CFG.wavelength_m * 1e3 == pytest.approx(10.71, rel=1e-3)
    # quoted to three figures with c ~ 3e8; exact c lands within 0.3%
    assert CFG.aperture_m == pytest.approx(0.338, rel=3e-3)
    assert CFG.rayleigh_distance_m == pytest.approx(21.26, rel=3e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        ArrayConfig(n_elements=1)
    with pytest.raises(ValueError):
        ArrayConfig(carrier_hz=-1.0)
    with pytest.raises(ValueError):
        ArrayConfig(spacing_m=0.0)


@pytest.mark.parametrize("theta_deg,r", [(20, 1.1), (45, 3.0), (60, 21.0), (85, 0.5)])
def test_unit_modulus_all_constructors(theta_deg, r):
    theta = np.deg2rad(theta_deg)
    for vec in (
        manifold.steering_usw(CFG, theta, r),
        manifold.steering_fresnel(CFG, theta, r),
        manifold.steering_chirp(CFG, theta, 1.0 / r),
    ):
        assert np.allclose(np.abs(vec), 1.0, atol=1e-12)


def test_rejects_nonpositive_range():
    for fn in (manifold.steering_usw, manifold.steering_fresnel):
        with pytest.raises(ValueError):
            fn(CFG, 0.5, 0.0)
        with pytest.raises(ValueError):
            fn(CFG, 0.5, -1.0)
    with pytest.raises(ValueError):
        manifold.steering_chirp(CFG, 0.5, -0.1)


def test_broadside_far_field_is_flat():
    # cos(90deg) = 0 kills the linear term and curvature vanishes at large r
    vec = manifold.steering_usw(CFG, np.pi / 2, 1e7)
    assert np.max(np.abs(vec - vec[0])) < 1e-3


def test_far_field_consistency():
    for theta in np.deg2rad(np.linspace(5, 85, 50)):
        a0 = manifold.steering_chirp(CFG, theta, 0.0)
        a_far = manifold.steering_fresnel(CFG, theta, 1e9)
        assert np.max(np.abs(a0 - a_far)) < 1e-6


def test_chirp_matches_fresnel_at_inverse_range():
    for theta_deg, r in ((25, 1.5), (45, 1.85), (70, 10.0)):
        theta = np.deg2rad(theta_deg)
        assert np.array_equal(
            manifold.steering_chirp(CFG, theta, 1.0 / r),
            manifold.steering_fresnel(CFG, theta, r),
        )


def test_quadratic_phase_is_even_in_index():
    theta, r = np.deg2rad(40), 2.5
    a = manifold.steering_fresnel(CFG, theta, r)
    kappa = manifold.curvature(CFG, theta, r)
    vandermonde = a * np.exp(1j * kappa * CFG.centred_index_sq)
    assert np.allclose(vandermonde, np.conj(vandermonde[::-1]), atol=1e-10)


def test_ebrd_values():
    assert manifold.ebrd(CFG, np.deg2rad(30)) == pytest.approx(1.60, rel=0.01)
    # at 45 degrees the boundary coincides exactly with 0.05 * Rayleigh distance
    assert manifold.ebrd(CFG, np.deg2rad(45)) == pytest.approx(
        0.05 * CFG.rayleigh_distance_m, rel=1e-12
    )
    assert manifold.ebrd(CFG, np.deg2rad(90)) == pytest.approx(0.0, abs=1e-12)


def test_ebrd_ordering():
    thetas = np.deg2rad(np.linspace(0, 90, 91))
    vals = manifold.ebrd(CFG, thetas)
    assert np.all(vals <= CFG.rayleigh_distance_m / 10 + 1e-12)
    at_max = np.isclose(vals, CFG.rayleigh_distance_m / 10, rtol=1e-12)
    assert np.array_equal(np.flatnonzero(at_max), [0])


def test_curvature_times_range_is_chirp_constant():
    for theta_deg in (10, 37, 62):
        theta = np.deg2rad(theta_deg)
        c = manifold.chirp_constant(CFG, theta)
        for r in (0.3, 1.85, 21.0, 4e3):
            assert manifold.curvature(CFG, theta, r) * r == pytest.approx(c, rel=1e-12)


def test_fresnel_accuracy_monotone_in_range():
    r_rd = CFG.rayleigh_distance_m
    radii = np.linspace(0.05, 5.0, 20) * r_rd
    for theta_deg in (20, 40, 60):
        theta = np.deg2rad(theta_deg)
        corr = np.array(
            [
                abs(
                    np.vdot(
                        manifold.steering_usw(CFG, theta, r),
                        manifold.steering_fresnel(CFG, theta, r),
                    )
                )
                / CFG.n_elements
                for r in radii
            ]
        )
        assert np.all(np.diff(corr) >= -1e-12)
        at_rd = corr[np.argmin(np.abs(radii - r_rd))]
        assert at_rd > corr[0]


def test_fresnel_accuracy_at_strong_near_field_point():
    # direct evaluation at theta = 30 deg, r = 1.60 m (the beamfocused boundary)
    a = manifold.steering_usw(CFG, np.deg2rad(30), 1.60)
    b = manifold.steering_fresnel(CFG, np.deg2rad(30), 1.60)
    corr = abs(np.vdot(a, b)) / CFG.n_elements
    assert corr > 0.99


def test_curvature_coords():
    theta, r = np.deg2rad(45), 1.85
    cc = manifold.curvature_coords(CFG, theta, r)
    assert cc.kappa == pytest.approx(cc.chirp_const / r, rel=1e-12)
    assert cc.omega == pytest.approx(
        2 * np.pi * CFG.spacing_m / CFG.wavelength_m * np.cos(theta), rel=1e-12
    )
