import math

import numpy as np
import pytest

from gyrocycle.errors import ChartViolation, CollapsedCycle, NoCrossing
from gyrocycle.functionals import Cycle, area_line_integral, cycle_length
from gyrocycle.manifold import PolarPoint, work_density
from gyrocycle.optimizer import (
    F_MAX_POINT,
    MuSweepRecord,
    OptimizerConfig,
    foc_profile,
    foc_statistics,
    initial_cycle,
    objective_and_gradient,
    operating_point_for_efficiency,
    optimize_cycle,
    perturbed_initial_cycle,
    self_intersects,
    sweep_mu,
)
from oracles import fourier_cycle

#: converged objective at mu=0.01, n_points=256 (regression baseline)
BASELINE_OBJ_MU_001 = 1.46656


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def test_initial_cycle_positive_area():
    c = initial_cycle(PolarPoint(0.8814, math.pi / 2), 0.3, 256)
    assert area_line_integral(c) > 0
    rev = initial_cycle(PolarPoint(0.8814, math.pi / 2), 0.3, 256, orientation=-1)
    assert area_line_integral(rev) == pytest.approx(-area_line_integral(c), rel=1e-6)
    assert rev.orientation == -1


def test_initial_cycle_small_loop_asymptotics():
    center = PolarPoint(1.1, 1.3)
    radius = 1e-4
    c = initial_cycle(center, radius, 256)
    af = area_line_integral(c)
    expect = (work_density(center) * math.sinh(center.r) * math.pi * radius**2)
    assert af == pytest.approx(expect, rel=0.01)


def test_initial_cycle_chart_violation():
    with pytest.raises(ChartViolation):
        initial_cycle(PolarPoint(0.2, 1.0), 0.3, 64)


# ---------------------------------------------------------------------------
# objective and gradient (trapezoidal discretization)
# ---------------------------------------------------------------------------

def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(20)
    h = 1e-6
    for mu in (0.0, 0.01, 0.3):
        r, th = fourier_cycle(rng, n=48)
        cyc = Cycle(r, th)
        _, grad = objective_and_gradient(cyc, mu)
        worst = 0.0
        for i in range(0, 48, 5):
            for j in (0, 1):
                rp, tp = cyc.r.copy(), cyc.theta.copy()
                rm, tm = cyc.r.copy(), cyc.theta.copy()
                (rp if j == 0 else tp)[i] += h
                (rm if j == 0 else tm)[i] -= h
                vp, _ = objective_and_gradient(Cycle(rp, tp), mu)
                vm, _ = objective_and_gradient(Cycle(rm, tm), mu)
                fd = (vp - vm) / (2 * h)
                rel = abs(fd - grad[i, j]) / max(abs(grad[i, j]), 1e-8)
                worst = max(worst, rel)
        assert worst < 1e-5


def test_area_term_reparametrization_invariance():
    # the pure area gradient annihilates tangential (reparametrization)
    # directions, and the objective responds only at second order
    c = initial_cycle(F_MAX_POINT, 0.3, 128)
    v0, grad = objective_and_gradient(c, 0.0)
    tr = 0.5 * (np.roll(c.r, -1) - np.roll(c.r, 1))
    tt = 0.5 * (np.roll(c.theta, -1) - np.roll(c.theta, 1))
    directional = abs(np.sum(grad[:, 0] * tr + grad[:, 1] * tt))
    termwise = np.sum(np.abs(grad[:, 0] * tr) + np.abs(grad[:, 1] * tt))
    assert directional <= 1e-12 * termwise

    def slide(eps):
        v, _ = objective_and_gradient(Cycle(c.r + eps * tr, c.theta + eps * tt), 0.0)
        return abs(v - v0)

    assert slide(1e-2) / max(slide(1e-3), 1e-300) == pytest.approx(100.0, rel=0.5)


def test_length_penalty_dominates_at_large_mu():
    c = initial_cycle(F_MAX_POINT, 0.3, 128)
    shrunk = initial_cycle(F_MAX_POINT, 0.297, 128)
    v_big, _ = objective_and_gradient(c, 10.0)
    v_small, _ = objective_and_gradient(shrunk, 10.0)
    assert v_small > v_big


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

def test_collapse_at_large_mu():
    init = initial_cycle(F_MAX_POINT, 0.2, 64)
    with pytest.raises(CollapsedCycle):
        optimize_cycle(init, 0.30, OptimizerConfig(n_points=64))


def test_optimize_at_mu_002():
    cfg = OptimizerConfig(n_points=256)
    res = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 256), 0.02, cfg)
    assert res.converged
    assert res.grad_norm <= cfg.grad_tol
    assert res.foc_residual <= 0.02
    expect = 1.0 / (2.0 * res.functionals.length * 0.02)
    assert res.foc_mean == pytest.approx(expect, rel=0.02)
    assert res.objective > 0
    fn = res.functionals
    assert fn.efficiency is not None
    assert fn.efficiency <= 1.0 - 4.0 * math.pi * 0.02
    assert not self_intersects(res.cycle)


def test_optimize_regression_baseline_mu_001():
    cfg = OptimizerConfig(n_points=256)
    warm = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 256), 0.02, cfg).cycle
    res = optimize_cycle(warm, 0.01, cfg)
    assert res.converged
    assert res.objective == pytest.approx(BASELINE_OBJ_MU_001, rel=1e-3)


def test_restart_consistency():
    cfg = OptimizerConfig(n_points=256)
    a = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 256), 0.02, cfg)
    b = optimize_cycle(perturbed_initial_cycle(F_MAX_POINT, 0.32, 256, seed=5),
                       0.02, cfg)
    assert a.converged and b.converged
    assert a.objective == pytest.approx(b.objective, abs=1e-4)


def test_scale_consistency_doubling_points():
    res_256 = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 256), 0.02,
                             OptimizerConfig(n_points=256))
    res_512 = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 512), 0.02,
                             OptimizerConfig(n_points=512))
    assert res_512.objective == pytest.approx(res_256.objective, rel=1e-3)


def test_foc_profile_matches_statistics():
    res = optimize_cycle(initial_cycle(F_MAX_POINT, 0.25, 128), 0.02,
                         OptimizerConfig(n_points=128))
    kappa, f, ratio = foc_profile(res.cycle)
    assert kappa.shape == f.shape == ratio.shape == (128,)
    mean, _ = foc_statistics(res.cycle)
    assert np.nanmean(ratio) == pytest.approx(mean, rel=5e-3)


def test_self_intersection_detector():
    assert not self_intersects(initial_cycle(F_MAX_POINT, 0.3, 64))
    phi = 2 * math.pi * np.arange(64) / 64
    eight = Cycle(1.0 + 0.3 * np.sin(2 * phi), 1.5 + 0.3 * np.sin(phi))
    assert self_intersects(eight)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_sweep():
    mus = np.geomspace(8e-3, 6e-2, 7)
    return sweep_mu(mus, OptimizerConfig(n_points=128))


def test_sweep_monotone_envelope(small_sweep):
    good = [rec for rec in small_sweep if rec.converged]
    assert len(good) >= 4
    lengths = [rec.length for rec in good]
    areas = [rec.area_f for rec in good]
    # records sorted by mu ascending: smaller mu gives larger cycles
    assert all(l1 >= l2 - 1e-6 for l1, l2 in zip(lengths, lengths[1:]))
    assert all(a1 >= a2 - 1e-6 for a1, a2 in zip(areas, areas[1:]))
    ratios = [rec.area_f / rec.length**2 for rec in good]
    assert all(r1 <= r2 + 1e-6 for r1, r2 in zip(ratios, ratios[1:]))


def test_sweep_w_star_non_increasing(small_sweep):
    ws = [rec.w_star for rec in small_sweep]
    assert all(w1 >= w2 - 1e-6 for w1, w2 in zip(ws, ws[1:]))


def test_sweep_collapse_records(small_sweep):
    collapsed = [rec for rec in small_sweep if rec.collapsed]
    assert collapsed, "largest mu values should collapse"
    assert all(rec.w_star <= 0 for rec in collapsed)
    threshold = 1.0 / (8.0 * math.pi)
    assert all(rec.mu > 0.6 * threshold for rec in collapsed)


def test_sweep_envelope_cross_inequality(small_sweep):
    good = [rec for rec in small_sweep if rec.converged]
    for i, ri in enumerate(good):
        for rj in good[i + 1:]:
            # rj's cycle is optimal for mu_j, so ri's cycle cannot beat it
            assert (ri.area_f - rj.mu * ri.length**2
                    <= rj.area_f - rj.mu * rj.length**2 + 1e-6)


def test_sweep_rejects_bad_grids():
    with pytest.raises(ValueError):
        sweep_mu([])
    with pytest.raises(ValueError):
        sweep_mu([-0.1, 0.01])


# ---------------------------------------------------------------------------
# operating points
# ---------------------------------------------------------------------------

def test_operating_point_self_consistency(small_sweep):
    good = [rec for rec in small_sweep if rec.converged]
    rec = good[len(good) // 2]
    point = operating_point_for_efficiency(rec.efficiency, rec.mu, small_sweep)
    assert point.length == pytest.approx(rec.length, rel=0.02)
    assert point.w_star == pytest.approx(rec.efficiency * rec.area_f, rel=0.02)


def test_operating_point_crossing_equation(small_sweep):
    good = [rec for rec in small_sweep if rec.converged]
    mu = good[0].mu
    rhos = sorted(rec.area_f / rec.length**2 for rec in good)
    for q in (0.25, 0.75):
        target = rhos[0] + q * (rhos[-1] - rhos[0])
        eta = 1.0 - mu / target
        point = operating_point_for_efficiency(eta, mu, small_sweep)
        # crossing equation A_f*(L) * (1 - eta) = mu * L^2 and W = eta * A_f*
        assert point.area_f * (1 - eta) == pytest.approx(mu * point.length**2,
                                                         rel=1e-9)
        assert point.w_star == pytest.approx(eta * point.area_f, rel=1e-12)


def test_operating_point_no_crossing(small_sweep):
    with pytest.raises(NoCrossing):
        operating_point_for_efficiency(0.999, 0.012, small_sweep)
    with pytest.raises(NoCrossing):
        operating_point_for_efficiency(0.5, 0.012, small_sweep[:1])
    with pytest.raises(ValueError):
        operating_point_for_efficiency(1.5, 0.012, small_sweep)
