import math

import numpy as np
import pytest

from gyrocycle.errors import DegenerateCurve, InconsistentDerivatives, NonSpdInput
from gyrocycle.functionals import (
    CovariancePath,
    Cycle,
    area_line_integral,
    area_quadrature,
    cycle_functionals,
    cycle_indicator,
    cycle_length,
    efficiency_bound,
    functionals_from_area_length,
    heat_decomposition_covariance,
    isoperimetric_bound_negative_curvature,
    isoperimetric_bound_rotsym,
    resample_constant_speed,
    riemannian_area_quadrature,
    speed_dispersion,
)
from gyrocycle.manifold import (
    FLAT,
    ThermoParams,
    bures_w2,
    gaussian_geodesic,
    sigma_from_polar_arrays,
)
from oracles import fourier_cycle, gauss_legendre_integral, random_spd


def rectangle_boundary(r0, r1, t0, t1, per_side=200):
    rs, ts = [], []
    u = np.linspace(0.0, 1.0, per_side, endpoint=False)
    rs.append(r0 + (r1 - r0) * u); ts.append(np.full(per_side, t0))
    rs.append(np.full(per_side, r1)); ts.append(t0 + (t1 - t0) * u)
    rs.append(r1 - (r1 - r0) * u); ts.append(np.full(per_side, t1))
    rs.append(np.full(per_side, r0)); ts.append(t1 - (t1 - t0) * u)
    return Cycle(np.concatenate(rs), np.concatenate(ts))


RECT_AREA = 2.0 * ((1.5 - math.tanh(1.5)) - (0.5 - math.tanh(0.5)))


# ---------------------------------------------------------------------------
# cycles and resampling
# ---------------------------------------------------------------------------

def test_cycle_validation():
    phi = 2 * math.pi * np.arange(32) / 32
    c = Cycle.from_arrays(1.0 + 0.3 * np.cos(phi), 1.0 + 0.3 * np.sin(phi))
    assert c.orientation == 1
    assert c.reversed().orientation == -1
    assert len(c.points) == 32
    with pytest.raises(ValueError):
        Cycle.from_arrays(np.ones(4), np.arange(4.0))
    with pytest.raises(ValueError):
        Cycle.from_arrays(np.full(32, 1e-5), phi)
    with pytest.raises(DegenerateCurve):
        Cycle.from_arrays(np.ones(32), np.ones(32))


def test_resample_idempotent_on_uniform_cycle():
    phi = 2 * math.pi * np.arange(128) / 128
    c = resample_constant_speed(Cycle(1.0 + 0.3 * np.cos(phi),
                                      1.5 + 0.3 * np.sin(phi)), 128)
    again = resample_constant_speed(c, 128)
    assert np.max(np.abs(again.r - c.r)) < 1e-8
    assert np.max(np.abs(again.theta - c.theta)) < 1e-8


def test_resample_preserves_length_and_equalizes():
    rng = np.random.default_rng(10)
    r, th = fourier_cycle(rng, n=1024)
    c = Cycle(r, th)
    before = cycle_length(c)
    for n in (1024, 2048):
        res = resample_constant_speed(c, n)
        assert speed_dispersion(res) < 1e-6
        assert cycle_length(res) == pytest.approx(before, rel=1e-4)


def test_resample_flat_square_from_skewed_sampling():
    # 3:1 clustered parametrization of a unit square, flat metric override
    u = np.concatenate([np.linspace(0, 1, 60, endpoint=False) ** 3,
                        1 + np.linspace(0, 1, 20, endpoint=False),
                        2 + np.linspace(0, 1, 60, endpoint=False) ** 3,
                        3 + np.linspace(0, 1, 20, endpoint=False)])
    side = np.clip(u % 4, 0, None)
    x = np.where(side < 1, side, np.where(side < 2, 1.0,
                 np.where(side < 3, 3.0 - side, 0.0)))
    y = np.where(side < 1, 0.0, np.where(side < 2, side - 1.0,
                 np.where(side < 3, 1.0, 4.0 - side)))
    square = Cycle(2.0 + x, 1.0 + y)
    res = resample_constant_speed(square, 64, metric=FLAT)
    lens = FLAT.segment_lengths(res.r, res.theta)
    assert np.max(np.abs(lens - lens.mean())) < 1e-6 * lens.mean()
    assert lens.sum() == pytest.approx(4.0, rel=1e-4)


def test_resample_rejects_zero_length():
    with pytest.raises(DegenerateCurve):
        resample_constant_speed(Cycle(np.ones(16), np.ones(16)), 16)


# ---------------------------------------------------------------------------
# length
# ---------------------------------------------------------------------------

def test_length_point_cycle_is_zero():
    assert cycle_length(Cycle(np.ones(16), np.ones(16))) == 0.0


def test_length_doubled_back_lobe():
    # theta-constant segment r: 0.5 -> 1.5 traversed out and back
    r_fwd = np.linspace(0.5, 1.5, 400, endpoint=False)
    r_back = np.linspace(1.5, 0.5, 400, endpoint=False)
    c = Cycle(np.concatenate([r_fwd, r_back]), np.full(800, 1.0))
    oracle = gauss_legendre_integral(lambda t: np.sqrt(np.cosh(t)), 0.5, 1.5)
    assert cycle_length(c) == pytest.approx(2.0 * oracle, rel=1e-3)


def test_length_matches_fine_reference():
    def sample(n):
        phi = 2 * math.pi * np.arange(n) / n
        return Cycle(1.0 + 0.1 * np.cos(phi), math.pi / 2 + 0.1 * np.sin(phi))

    ref = cycle_length(sample(1_000_000))
    assert cycle_length(sample(4096)) == pytest.approx(ref, rel=1e-6)


# ---------------------------------------------------------------------------
# areas and Stokes consistency
# ---------------------------------------------------------------------------

def test_area_point_cycle_zero():
    assert area_line_integral(Cycle(np.ones(16), np.ones(16))) == 0.0


def test_area_rectangle_analytic():
    c = rectangle_boundary(0.5, 1.5, 0.0, math.pi)
    assert area_line_integral(c) == pytest.approx(RECT_AREA, abs=1e-4)
    assert area_line_integral(c.reversed()) == pytest.approx(-RECT_AREA, abs=1e-4)
    assert RECT_AREA == pytest.approx(1.11394, abs=1e-5)


def test_area_quadrature_rectangle_and_band():
    assert area_quadrature((0.5, 1.5), (0.0, math.pi)) == pytest.approx(
        RECT_AREA, abs=1e-6)
    assert area_quadrature((0.5, 1.5), (math.pi, 2 * math.pi)) == pytest.approx(
        -RECT_AREA, abs=1e-6)
    empty = area_quadrature((0.5, 1.5), (0.0, math.pi),
                            indicator=lambda r, t: np.zeros_like(r, dtype=bool))
    assert empty == 0.0


def test_stokes_consistency_random_domains():
    rng = np.random.default_rng(11)
    for _ in range(5):
        r0 = rng.uniform(0.2, 1.2)
        r1 = r0 + rng.uniform(0.3, 1.2)
        t0 = rng.uniform(0.0, 3.0)
        t1 = t0 + rng.uniform(0.5, 2.5)
        line = area_line_integral(rectangle_boundary(r0, r1, t0, t1, 400))
        quad = area_quadrature((r0, r1), (t0, t1))
        assert line == pytest.approx(quad, abs=1e-4)
    for _ in range(5):
        rc = rng.uniform(0.8, 1.6)
        tc = rng.uniform(1.0, 2.2)
        a = rng.uniform(0.2, 0.55)
        b = rng.uniform(0.2, 0.9)
        phi = 2 * math.pi * np.arange(2048) / 2048
        ell = Cycle(rc + a * np.cos(phi), tc + b * np.sin(phi))
        line = area_line_integral(ell)
        quad = area_quadrature(
            (rc - a, rc + a), (tc - b, tc + b),
            indicator=lambda r, t, rc=rc, tc=tc, a=a, b=b:
                ((r - rc) / a) ** 2 + ((t - tc) / b) ** 2 <= 1.0)
        assert line == pytest.approx(quad, abs=1e-4)


def test_cycle_indicator_and_riemannian_area():
    phi = 2 * math.pi * np.arange(512) / 512
    rc, tc, rad = 1.0, 1.5, 0.4
    c = Cycle(rc + rad * np.cos(phi), tc + rad * np.sin(phi))
    ind = cycle_indicator(c)
    assert ind(np.array([rc]), np.array([tc]))[0]
    assert not ind(np.array([rc + 2 * rad]), np.array([tc]))[0]
    area = riemannian_area_quadrature((rc - rad, rc + rad), (tc - rad, tc + rad),
                                      indicator=ind, max_depth=6)
    # oracle: integrate sinh(r) over the disc in polar coordinates
    def slice_area(t):
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            half = rad * math.sqrt(max(0.0, 1 - ((ti - tc) / rad) ** 2))
            out[i] = np.cosh(rc + half) - np.cosh(rc - half)
        return out

    oracle = gauss_legendre_integral(slice_area, tc - rad, tc + rad, n=200)
    assert area == pytest.approx(oracle, rel=1e-3)


def test_cycle_satisfies_rotsym_isoperimetric_bound():
    rng = np.random.default_rng(12)
    for _ in range(3):
        r, th = fourier_cycle(rng, amp=0.25)
        c = resample_constant_speed(Cycle(r, th), 512)
        ell = cycle_length(c)
        pad = 0.05
        area = riemannian_area_quadrature(
            (c.r.min() - pad, c.r.max() + pad),
            (c.theta.min() - pad, c.theta.max() + pad),
            indicator=cycle_indicator(c), max_depth=5)
        assert ell**2 >= isoperimetric_bound_rotsym(area) - 1e-6


# ---------------------------------------------------------------------------
# cycle functionals
# ---------------------------------------------------------------------------

def test_functionals_synthetic_efficiency():
    params = ThermoParams.nondimensional(0.04)
    fn = functionals_from_area_length(1.0, math.sqrt(1.0 / (2 * 0.04)), params)
    assert fn.efficiency == pytest.approx(0.5, rel=1e-12)
    assert fn.w_out == pytest.approx(fn.q_qs - fn.q_diss, abs=1e-15)


def test_functionals_point_cycle_undefined_efficiency():
    params = ThermoParams.nondimensional(0.01)
    fn = cycle_functionals(Cycle(np.ones(16), np.ones(16)), params)
    assert fn.q_qs == fn.q_diss == fn.w_out == 0.0
    assert fn.efficiency is None


def test_functionals_physical_units():
    params = ThermoParams(gamma=2.0, Tx=7.0, Ty=3.0, kB=1.4, ell_r=0.8, tf=5.0)
    fn = functionals_from_area_length(1.3, 2.1, params)
    assert fn.q_qs == pytest.approx(1.4 * 2.0 * 1.3)
    assert fn.q_diss == pytest.approx(2.0 * 0.8**2 * 2.1**2 / 5.0)
    assert fn.efficiency == pytest.approx(1.0 - params.mu * 2.1**2 / 1.3)


# ---------------------------------------------------------------------------
# covariance paths
# ---------------------------------------------------------------------------

def make_polar_path(r, th, params, n_steps=2048):
    t = params.tf * np.arange(n_steps + 1) / n_steps
    phase = 2 * math.pi * np.arange(n_steps + 1) / n_steps
    rr = np.interp(phase, 2 * math.pi * np.arange(len(r) + 1) / len(r),
                   np.concatenate([r, r[:1]]))
    tt = np.interp(phase, 2 * math.pi * np.arange(len(th) + 1) / len(th),
                   np.concatenate([th, th[:1]]))
    sig = sigma_from_polar_arrays(rr, tt, params.ell_r)
    return CovariancePath(times=t, sigmas=sig)


def test_heat_static_path_is_zero():
    params = ThermoParams.nondimensional(0.1)
    sig = np.broadcast_to(np.diag([2.0, 2.0]), (64, 2, 2)).copy()
    path = CovariancePath(times=np.linspace(0, 1, 64), sigmas=sig)
    q_qs, q_diss = heat_decomposition_covariance(path, params)
    assert abs(q_qs) < 1e-14 and abs(q_diss) < 1e-14


def test_heat_polar_vs_covariance_consistency():
    rng = np.random.default_rng(13)
    params = ThermoParams.nondimensional(0.05)
    r, th = fourier_cycle(rng)
    cyc = resample_constant_speed(Cycle(r, th), 256)
    fn = cycle_functionals(cyc, params)
    path = make_polar_path(cyc.r, cyc.theta, params, 2048)
    q_qs, q_diss = heat_decomposition_covariance(path, params)
    assert q_qs == pytest.approx(fn.q_qs, rel=1e-3)
    assert q_diss == pytest.approx(fn.q_diss, rel=1e-3)


def test_heat_consistency_refines_with_steps():
    rng = np.random.default_rng(14)
    params = ThermoParams.nondimensional(0.05)
    r, th = fourier_cycle(rng)
    cyc = resample_constant_speed(Cycle(r, th), 256)
    fn = cycle_functionals(cyc, params)
    errs = []
    for n_steps in (512, 2048):
        q_qs, _ = heat_decomposition_covariance(
            make_polar_path(cyc.r, cyc.theta, params, n_steps), params)
        errs.append(abs(q_qs - fn.q_qs))
    assert errs[1] < errs[0]


def test_heat_mean_temperature_invariance():
    rng = np.random.default_rng(15)
    r, th = fourier_cycle(rng)
    cyc = resample_constant_speed(Cycle(r, th), 256)
    base = ThermoParams(Tx=3.0, Ty=1.0, tf=7.0)
    shifted = ThermoParams(Tx=8.0, Ty=6.0, tf=7.0)
    q1, _ = heat_decomposition_covariance(make_polar_path(cyc.r, cyc.theta, base),
                                          base)
    q2, _ = heat_decomposition_covariance(make_polar_path(cyc.r, cyc.theta, shifted),
                                          shifted)
    # equal T_r and constant-det cycle: the mean bath temperature drops out
    assert q2 == pytest.approx(q1, rel=1e-8)


def test_geodesic_transport_saturates_dissipation_bound():
    params = ThermoParams(tf=1.0)
    s = np.linspace(0.0, 1.0, 2048)
    sig = gaussian_geodesic(np.eye(2), 4 * np.eye(2), s)
    path = CovariancePath(times=s * params.tf, sigmas=sig)
    _, q_diss = heat_decomposition_covariance(path, params)
    assert q_diss == pytest.approx(params.gamma * 2.0, rel=1e-4)


def test_dissipation_bound_random_paths():
    rng = np.random.default_rng(16)
    params = ThermoParams(tf=2.0, gamma=1.3)
    s = np.linspace(0.0, 1.0, 1024)
    for _ in range(20):
        s0, s1 = random_spd(rng), random_spd(rng)
        w2 = bures_w2(s0, s1)
        geo = gaussian_geodesic(s0, s1, s)
        bump = random_spd(rng) * (0.3 * np.sin(math.pi * s)**2)[:, None, None]
        path = CovariancePath(times=s * params.tf, sigmas=geo + bump)
        _, q_diss = heat_decomposition_covariance(path, params)
        bound = params.gamma * w2**2 / params.tf
        assert q_diss >= bound - 1e-9
        _, q_geo = heat_decomposition_covariance(
            CovariancePath(times=s * params.tf, sigmas=geo), params)
        assert q_geo == pytest.approx(bound, rel=1e-4)
        assert q_diss > q_geo


def test_second_law_on_random_paths():
    rng = np.random.default_rng(17)
    params = ThermoParams(tf=1.0)
    t = np.linspace(0, 1, 256)
    for _ in range(10):
        base = random_spd(rng)
        wob = random_spd(rng)
        sig = base[None] + 0.4 * np.sin(2 * math.pi * t)[:, None, None] ** 2 * wob[None]
        _, q_diss = heat_decomposition_covariance(
            CovariancePath(times=t, sigmas=sig), params)
        assert q_diss >= 0.0


def test_covariance_path_errors():
    params = ThermoParams(tf=1.0)
    t = np.linspace(0, 1, 32)
    sig = np.broadcast_to(np.eye(2), (32, 2, 2)).copy()
    bad = sig.copy()
    bad[5] = np.diag([1.0, -0.1])
    with pytest.raises(NonSpdInput):
        heat_decomposition_covariance(CovariancePath(times=t, sigmas=bad), params)
    wrong_dots = np.broadcast_to(np.eye(2), (32, 2, 2)).copy()
    with pytest.raises(InconsistentDerivatives):
        heat_decomposition_covariance(
            CovariancePath(times=t, sigmas=sig, sigma_dots=wrong_dots), params)
    with pytest.raises(ValueError):
        CovariancePath(times=t[::-1], sigmas=sig)


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def test_efficiency_bound_values():
    assert efficiency_bound(1.0 / (8 * math.pi), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert efficiency_bound(0.01, 0.5) == pytest.approx(1 - 0.08 * math.pi, rel=1e-12)
    assert efficiency_bound(0.01, 0.5) == pytest.approx(0.74867, abs=1e-5)
    assert efficiency_bound(0.5 / (4 * math.pi) + 0.01, 0.5) < 0
    with pytest.raises(ValueError):
        efficiency_bound(-0.1)


def test_rotsym_bound_values():
    assert isoperimetric_bound_rotsym(0.0) == 0.0
    a = 1e-6
    assert isoperimetric_bound_rotsym(a) / a == pytest.approx(4 * math.pi, abs=1e-6)
    expect = 4 * math.pi**2 * (1 + math.log(2))
    assert isoperimetric_bound_rotsym(2 * math.pi) == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(66.84, abs=0.01)
    for a in np.linspace(0.0, 20.0, 50):
        assert isoperimetric_bound_rotsym(a) >= 2 * math.pi * a - 1e-12


def test_negative_curvature_bound():
    assert isoperimetric_bound_negative_curvature(2.0, 0.5) == pytest.approx(
        8 * math.pi + 2.0)
    with pytest.raises(ValueError):
        isoperimetric_bound_negative_curvature(-1.0, 0.1)
