import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import warped_disk as wd
from warped_disk.geometry import RadialGrid, export_profile_csv, read_profile_file, write_profile_file
from warped_disk.operators import sample_derivatives


def analytic_profile(phi, dphi, ddphi, r_max=50.0):
    return wd.MetricProfile(
        phi=lambda r: phi(np.asarray(r, dtype=float)),
        phi_prime=lambda r: dphi(np.asarray(r, dtype=float)),
        phi_second=lambda r: ddphi(np.asarray(r, dtype=float)),
        log_phi=lambda r: np.log(phi(np.asarray(r, dtype=float))),
        dlog_phi=lambda r: dphi(np.asarray(r, dtype=float)) / phi(np.asarray(r, dtype=float)),
        r_max=r_max,
    )


# ----------------------------------------------------------------------
# grids
# ----------------------------------------------------------------------

def test_grid_invariants():
    g = RadialGrid.uniform(0.0, 1.0, 11)
    assert len(g) == 11 and g.r_min == 0.0
    with pytest.raises(wd.DomainError):
        RadialGrid(np.array([0.0, 0.5, 0.4]))
    with pytest.raises(wd.DomainError):
        RadialGrid(np.array([0.0, 1.0]))
    with pytest.raises(wd.DomainError):
        RadialGrid.geometric(0.0, 1.0, 8)
    with pytest.raises(wd.DomainError):
        RadialGrid(np.array([0.1, 0.2, 0.3]), spacing="chebyshev")


def test_grid_nodes_immutable():
    g = RadialGrid.uniform(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        g.nodes[0] = 3.0


# ----------------------------------------------------------------------
# curvature_of / log_derivative
# ----------------------------------------------------------------------

def test_curvature_of_flat(euclidean):
    assert wd.curvature_of(euclidean.metric, 2.0) == 0.0


def test_curvature_of_hyperbolic(hyperbolic):
    assert_allclose(wd.curvature_of(hyperbolic.metric, 1.5), -1.0, rtol=1e-12)


def test_curvature_round_trip_quartic():
    prof = wd.profile_from_curvature(lambda r: -(r**4), r_max=2.0)
    assert_allclose(wd.curvature_of(prof, 1.2), -(1.2**4), rtol=1e-9)
    # independent check: difference phi' and compare with -K phi
    x = np.linspace(0.5, 1.5, 401)
    d1, _ = sample_derivatives(x, np.asarray(prof.phi_prime(x), dtype=float))
    assert_allclose(d1[5:-5], (x**4 * prof.phi(x))[5:-5], rtol=5e-4)


def test_curvature_domain_errors(euclidean):
    with pytest.raises(wd.DomainError):
        wd.curvature_of(euclidean.metric, 0.0)
    with pytest.raises(wd.DomainError):
        wd.curvature_of(euclidean.metric, euclidean.metric.r_max * 2)


def test_log_derivative_flat(euclidean):
    assert_allclose(wd.log_derivative(euclidean.metric, 4.0), 0.25, rtol=1e-14)


def test_log_derivative_hyperbolic(hyperbolic):
    assert_allclose(wd.log_derivative(hyperbolic.metric, 3.0), 1.0 / math.tanh(3.0), rtol=1e-12)
    assert_allclose(wd.log_derivative(hyperbolic.metric, 40.0), 1.0, rtol=1e-12)


def test_log_derivative_quadratic_growth(quadratic1):
    # comparison bound: phi'/phi grows about linearly on a -eta r^2 tail
    v10 = wd.log_derivative(quadratic1.metric, 10.0)
    v20 = wd.log_derivative(quadratic1.metric, 20.0)
    v40 = wd.log_derivative(quadratic1.metric, 40.0)
    assert 1.8 < v20 / v10 < 2.2
    assert 1.9 < v40 / v20 < 2.1


# ----------------------------------------------------------------------
# profile_from_curvature
# ----------------------------------------------------------------------

def test_ivp_flat():
    prof = wd.profile_from_curvature(lambda r: 0.0, r_max=6.0)
    for r in (0.5, 1.0, 5.0):
        assert_allclose(float(prof.phi(r)), r, rtol=1e-8)


def test_ivp_hyperbolic():
    prof = wd.profile_from_curvature(lambda r: -1.0, r_max=6.0)
    for r in (0.5, 1.0, 5.0):
        assert_allclose(float(prof.phi(r)), math.sinh(r), rtol=1e-8)
    assert_allclose(float(prof.phi_prime(5.0)), math.cosh(5.0), rtol=1e-8)
    assert_allclose(float(prof.phi_second(5.0)), math.sinh(5.0), rtol=1e-8)


def test_ivp_sphere_conjugate_point():
    with pytest.raises(wd.ConjugatePointError) as err:
        wd.profile_from_curvature(lambda r: 1.0, r_max=6.0)
    assert 3.1405 <= err.value.radius <= 3.1427


def test_ivp_rejects_bad_arguments():
    with pytest.raises(wd.DomainError):
        wd.profile_from_curvature(lambda r: 0.0, r_max=2.0, step_control=(0.0, 1e-12))
    with pytest.raises(wd.DomainError):
        wd.profile_from_curvature(lambda r: np.nan, r_max=2.0)
    with pytest.raises(wd.DomainError):
        wd.profile_from_curvature("not-a-curvature", r_max=2.0)


def test_ivp_positivity_on_grid():
    prof = wd.profile_from_curvature(lambda r: -float(np.sin(r) ** 2), r_max=8.0)
    r = np.linspace(1e-4, 8.0, 500)
    assert np.all(prof.phi(r) > 0.0)


# ----------------------------------------------------------------------
# built-ins
# ----------------------------------------------------------------------

def test_builtin_euclidean(euclidean):
    assert float(euclidean.metric.phi(1.0)) == 1.0
    assert float(euclidean.metric.phi_prime(1.0)) == 1.0


def test_builtin_hyperbolic(hyperbolic):
    assert_allclose(float(hyperbolic.metric.phi(1.0)), 1.1752011936438014, rtol=1e-12)


def test_builtin_power_curvature_values(power1):
    # tail at r=3, constant cap (= tail value at r0+1) inside
    assert_allclose(float(power1.curvature.k(3.0)), -27.0, rtol=1e-12)
    assert_allclose(float(power1.curvature.k(0.5)), -8.0, rtol=1e-12)


def test_builtin_log_threshold_tail(log_threshold):
    r = 10.0
    assert_allclose(
        float(log_threshold.curvature.k(r)), -1.5 / (r * r * math.log(r)), rtol=1e-12
    )


def test_builtin_rejections():
    with pytest.raises(wd.DomainError):
        wd.builtin_profile("moebius")
    with pytest.raises(wd.DomainError):
        wd.builtin_profile("power-curvature", eps=-1.0)
    with pytest.raises(wd.DomainError):
        wd.builtin_profile("quadratic-curvature")  # eta missing
    with pytest.raises(wd.DomainError):
        wd.builtin_profile("log-threshold", eps=0.5, r0=1.5)


def test_builtin_curvature_blend_is_smooth(power1):
    # C^2 blend: second difference of K stays bounded through [r0, r0+1]
    r = np.linspace(0.9, 2.1, 2001)
    k = np.asarray(power1.curvature.k(r), dtype=float)
    d2 = np.diff(k, 2) / (r[1] - r[0]) ** 2
    assert np.max(np.abs(np.diff(d2))) < 1.0  # no jump in K''


# ----------------------------------------------------------------------
# origin diagnostics
# ----------------------------------------------------------------------

def test_origin_smoothness_flat(euclidean):
    rep = wd.check_origin_smoothness(euclidean.metric)
    assert rep.smooth
    assert_allclose([rep.value, rep.slope, rep.second], [0.0, 1.0, 0.0], atol=1e-10)


def test_origin_smoothness_hyperbolic(hyperbolic):
    assert wd.check_origin_smoothness(hyperbolic.metric).smooth


def test_origin_smoothness_rejects_quadratic_term():
    prof = analytic_profile(
        lambda r: r + r**2, lambda r: 1.0 + 2.0 * r, lambda r: 2.0 * np.ones_like(r)
    )
    rep = wd.check_origin_smoothness(prof)
    assert not rep.second_ok
    assert rep.value_ok and rep.slope_ok
    assert_allclose(rep.second, 2.0, atol=1e-6)


def test_origin_smoothness_integrated_profiles(power1, quadratic1, log_threshold):
    for surface in (power1, quadratic1, log_threshold):
        assert wd.check_origin_smoothness(surface.metric).smooth


def test_origin_h_validation(euclidean):
    with pytest.raises(wd.DomainError):
        wd.check_origin_smoothness(euclidean.metric, h=-1.0)


# ----------------------------------------------------------------------
# invariants
# ----------------------------------------------------------------------

def test_round_trip_reproduces_builtin(hyperbolic):
    prof = wd.profile_from_curvature(hyperbolic.curvature, r_max=8.0)
    r = np.linspace(0.25, 7.5, 30)
    assert_allclose(prof.phi(r), np.sinh(r), rtol=1e-8)


def test_origin_normalization(all_builtins):
    for surface in all_builtins:
        k0 = abs(float(surface.curvature.k(0.0))) + 1.0
        for h in (1e-3, 1e-2):
            ratio = float(surface.metric.phi(h)) / h
            assert abs(ratio - 1.0) <= k0 * h * h

def test_declared_tails_hold(all_builtins):
    for surface in all_builtins:
        check = surface.curvature.verify_tail(min(surface.metric.r_max, 1000.0))
        assert check.ok, surface.name


def test_tail_descriptor_validation():
    with pytest.raises(wd.DomainError):
        wd.TailDescriptor("le_power", r0=2.0)  # eps missing
    with pytest.raises(wd.DomainError):
        wd.TailDescriptor("between", r0=2.0, eps=1.0)  # eta missing
    with pytest.raises(wd.DomainError):
        wd.TailDescriptor("ge_milnor", r0=0.5)  # needs r0 > 1
    with pytest.raises(wd.DomainError):
        wd.TailDescriptor("sideways", r0=2.0)


def test_verify_tail_detects_violation():
    curv = wd.CurvatureProfile(
        k=lambda r: -np.asarray(r, dtype=float) ** 2,
        tail=wd.TailDescriptor("ge_milnor", r0=2.0),
    )
    check = curv.verify_tail(100.0)
    assert not check.ok
    assert check.first_violation is not None


# ----------------------------------------------------------------------
# files
# ----------------------------------------------------------------------

def test_profile_csv_export(tmp_path, euclidean):
    path = tmp_path / "prof.csv"
    grid = RadialGrid.uniform(0.5, 2.0, 7)
    export_profile_csv(path, euclidean.metric, grid, euclidean.curvature)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "r,phi,phi_prime,K"
    assert len(lines) == 8
    first = lines[1].split(",")
    assert float(first[0]) == 0.5 and float(first[1]) == 0.5


def test_profile_file_round_trip(tmp_path):
    path = tmp_path / "surface.profile"
    write_profile_file(path, "power-curvature", eps=1.0, r0=1.0, r_max=5.0)
    surface = read_profile_file(path)
    assert_allclose(float(surface.curvature.k(3.0)), -27.0, rtol=1e-12)
    assert surface.metric.r_max == 5.0


def test_profile_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "surface.profile"
    path.write_text("[profile]\nname = euclidean\nwarp = 2\n")
    with pytest.raises(wd.DomainError):
        read_profile_file(path)
