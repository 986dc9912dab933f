"""Isoperimetric work maximization over closed cycles.

Maximizes A_f - mu * L^2 over discretized closed curves by projected gradient
ascent: the gradient is projected onto the curve's metric normal directions
(tangential motion is pure reparametrization, a gauge freedom of the area
term), every accepted iterate is resampled back to constant metric speed and
clamped away from the chart origin, a backtracking Armijo line search keeps
the ascent monotone, and a fitted spectral preconditioner removes the k^2
stiffness of the length term so all wavelengths converge at a uniform rate.

At a maximizer the normal stationarity condition is pointwise

    f(r, theta) = 2 * mu * L * kappa(r, theta),

i.e. the ratio of geodesic curvature to work density is constant along the
cycle and equal to 1/(2 * L * mu); the optimizer reports the dispersion of
that ratio as its first-order-condition residual.

Internally the optimizer represents cycles in the locally Cartesian chart
(x, y) = r * (cos theta, sin theta).  The polar chart is singular at r = 0
and optimal cycles at small mu pass close to that point (the isotropic state,
an ordinary interior point of the manifold), where theta changes by O(1)
between constant-speed vertices and no practical number of polar samples
resolves the curve.  In (x, y) the same curves are smooth with O(1) feature
sizes.  All functional evaluations map a trigonometrically refined copy of
the (x, y) curve back to polar pointwise, where the closed-form integrands
apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChartViolation, CollapsedCycle, DegenerateCurve, NoCrossing
from .functionals import (
    Cycle,
    CycleFunctionals,
    functionals_from_area_length,
)
from .manifold import (
    R_MIN,
    WASSERSTEIN,
    DiagonalMetric,
    PolarPoint,
    ThermoParams,
    fft_derivative,
    fft_upsample,
    spectral_geodesic_curvatures,
    work_density_arrays,
)

#: Chart point where the work density attains its maximum value 1/2.
F_MAX_POINT = PolarPoint(r=math.asinh(1.0), theta=math.pi / 2.0)

#: Fine-grid floor for spectral evaluation of a represented curve.
_FINE_MIN = 8192


@dataclass(frozen=True)
class OptimizerConfig:
    n_points: int = 256
    max_iters: int = 4000
    step_init: float = 1.0
    step_shrink: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 2e-5
    r_min: float = R_MIN
    seed: int = 0
    step_min: float = 1e-13
    max_displacement: float = 0.1
    precond_every: int = 10
    collapse_length: float = 1e-3
    collapse_patience: int = 10
    f_floor: float = 1e-6
    initial_center: PolarPoint = F_MAX_POINT
    initial_radius: float = 0.25

    def __post_init__(self):
        if self.n_points < 32:
            raise ValueError("n_points must be >= 32")
        for name in ("step_init", "grad_tol", "armijo", "collapse_length"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must be in (0, 1)")


@dataclass(frozen=True)
class OptimizationResult:
    cycle: Cycle
    functionals: CycleFunctionals
    objective: float
    foc_residual: float
    foc_mean: float
    iterations: int
    converged: bool
    grad_norm: float


@dataclass(frozen=True)
class MuSweepRecord:
    mu: float
    length: float
    area_f: float
    w_star: float
    efficiency: float | None
    foc_residual: float = math.nan
    converged: bool = True
    collapsed: bool = False


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def initial_cycle(center: PolarPoint, radius: float, n: int,
                  orientation: int = 1,
                  metric: DiagonalMetric = WASSERSTEIN,
                  r_min: float = R_MIN) -> Cycle:
    """Coordinate circle around a chart point, constant-speed resampled."""
    if n < 32:
        raise ValueError("n must be >= 32")
    if center.r - radius < r_min:
        raise ChartViolation(
            f"circle of radius {radius} at r={center.r} crosses r_min={r_min}")
    phi = 2.0 * math.pi * np.arange(n) / n
    if orientation < 0:
        phi = -phi
    raw = Cycle(r=center.r + radius * np.cos(phi),
                theta=center.theta + radius * np.sin(phi),
                orientation=1 if orientation >= 0 else -1)
    x, y = _to_xy(raw)
    x, y = _resample_xy(x, y, n, metric)
    return _from_xy(x, y, raw.orientation)


def perturbed_initial_cycle(center: PolarPoint, radius: float, n: int,
                            seed: int, amplitude: float = 0.3,
                            n_modes: int = 4,
                            metric: DiagonalMetric = WASSERSTEIN,
                            r_min: float = R_MIN) -> Cycle:
    """Circle with a smooth random radial modulation, for restart tests."""
    rng = np.random.default_rng(seed)
    phi = 2.0 * math.pi * np.arange(n) / n
    rho = np.ones(n)
    for k in range(1, n_modes + 1):
        a, b = rng.normal(size=2) * amplitude / n_modes
        rho += a * np.cos(k * phi) + b * np.sin(k * phi)
    rho = radius * np.clip(rho, 0.2, 2.0)
    raw = Cycle(r=center.r + rho * np.cos(phi),
                theta=center.theta + rho * np.sin(phi), orientation=1)
    if np.min(raw.r) < r_min:
        raise ChartViolation("perturbed circle crosses r_min")
    x, y = _to_xy(raw)
    x, y = _resample_xy(x, y, n, metric)
    return _from_xy(x, y, 1)


# ---------------------------------------------------------------------------
# public trapezoidal objective
# ---------------------------------------------------------------------------

def objective_and_gradient(cycle: Cycle, mu: float,
                           metric: DiagonalMetric = WASSERSTEIN
                           ) -> tuple[float, np.ndarray]:
    """Value and analytic gradient of A_f - mu*L^2 at each polar vertex.

    Differentiates the trapezoidal one-form sum and the midpoint-metric
    segment lengths exactly; the gradient matches central finite differences
    of the discrete objective to rounding-limited accuracy.
    """
    r, th = cycle.r, cycle.theta
    rp, rm = np.roll(r, -1), np.roll(r, 1)
    tp, tm = np.roll(th, -1), np.roll(th, 1)

    # area term: one-form (P, Q) = (cos th, -tanh r sin th)
    P = np.cos(th)
    Q = -np.tanh(r) * np.sin(th)
    dr_f = rp - r
    dth_f = tp - th
    area = 0.5 * float(np.sum((P + np.roll(P, -1)) * dr_f
                              + (Q + np.roll(Q, -1)) * dth_f))
    dQ_dr = -np.sin(th) / np.cosh(r) ** 2
    dP_dth = -np.sin(th)
    dQ_dth = -np.tanh(r) * np.cos(th)
    grad_area_r = 0.5 * (np.roll(P, 1) - np.roll(P, -1)) + 0.5 * dQ_dr * (tp - tm)
    grad_area_t = (0.5 * (np.roll(Q, 1) - np.roll(Q, -1))
                   + 0.5 * dP_dth * (rp - rm) + 0.5 * dQ_dth * (tp - tm))

    # length term with midpoint metric
    rmid = 0.5 * (r + rp)
    E, G = metric.components(rmid)
    dE, dG = metric.d_e_rr(rmid), metric.d_e_tt(rmid)
    seg = np.sqrt(E * dr_f**2 + G * dth_f**2)
    length = float(seg.sum())
    mid_term = (0.5 * dE * dr_f**2 + 0.5 * dG * dth_f**2) / (2.0 * seg)
    ds_dri = mid_term - E * dr_f / seg
    ds_drip = mid_term + E * dr_f / seg
    ds_dti = -G * dth_f / seg
    ds_dtip = G * dth_f / seg
    grad_len_r = ds_dri + np.roll(ds_drip, 1)
    grad_len_t = ds_dti + np.roll(ds_dtip, 1)

    value = area - mu * length**2
    grad = np.stack([
        grad_area_r - 2.0 * mu * length * grad_len_r,
        grad_area_t - 2.0 * mu * length * grad_len_t,
    ], axis=1)
    return value, grad


# ---------------------------------------------------------------------------
# Cartesian chart kernel
# ---------------------------------------------------------------------------

class _OriginWrap(Exception):
    """Candidate curve winds around the chart origin."""


def _to_xy(cycle: Cycle) -> tuple[np.ndarray, np.ndarray]:
    return cycle.r * np.cos(cycle.theta), cycle.r * np.sin(cycle.theta)


def _from_xy(x: np.ndarray, y: np.ndarray, orientation: int) -> Cycle:
    r = np.hypot(x, y)
    theta = np.unwrap(np.arctan2(y, x))
    return Cycle(r=r, theta=theta, orientation=orientation)


def _cart_metric(x, y, metric: DiagonalMetric):
    """Full metric components (g_xx, g_xy, g_yy) in the Cartesian chart.

    With a = e_rr(r) and b = e_tt(r)/r^2 the metric is b*I + c*uu' where
    c = (a - b)/r^2; both b and c extend smoothly across r = 0 (b -> 1,
    c -> 2/3 for the transport metric).
    """
    r2 = x * x + y * y
    r = np.sqrt(r2)
    a, g_tt = metric.components(r)
    b = g_tt / r2
    c = (a - b) / r2
    return b + c * x * x, c * x * y, b + c * y * y


def _xy_segment_lengths(x, y, metric: DiagonalMetric) -> np.ndarray:
    """Metric lengths of closed-polygon segments, midpoint-evaluated."""
    vx = np.roll(x, -1) - x
    vy = np.roll(y, -1) - y
    mx = 0.5 * (x + np.roll(x, -1))
    my = 0.5 * (y + np.roll(y, -1))
    gxx, gxy, gyy = _cart_metric(mx, my, metric)
    return np.sqrt(gxx * vx**2 + 2 * gxy * vx * vy + gyy * vy**2)


def _resample_xy(x, y, n: int, metric: DiagonalMetric,
                 oversample: int = 16, tol: float = 1e-9,
                 max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Equal-metric-arc redistribution of n points along the smooth curve.

    The curve is the trigonometric interpolant of the periodic (x, y)
    samples; redistribution therefore perturbs functionals of the curve only
    at the interpolant's truncation level.
    """
    m = len(x)
    fine = oversample * max(m, n)
    xf = fft_upsample(x, fine)
    yf = fft_upsample(y, fine)
    edge = _xy_segment_lengths(xf, yf, metric)
    total = float(edge.sum())
    if total <= 1e-12:
        raise DegenerateCurve("cannot resample a zero-length cycle")
    cum = np.concatenate([[0.0], np.cumsum(edge)])
    xv = np.concatenate([xf, xf[:1]])
    yv = np.concatenate([yf, yf[:1]])

    def points_at(u):
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, fine - 1)
        frac = (u - cum[idx]) / edge[idx]
        return xv[idx] + frac * (xv[idx + 1] - xv[idx]), \
            yv[idx] + frac * (yv[idx + 1] - yv[idx])

    u = total * np.arange(n) / n
    xx, yy = points_at(u)
    for _ in range(max_iter):
        lens = _xy_segment_lengths(xx, yy, metric)
        length = lens.sum()
        mean = length / n
        if np.max(np.abs(lens - mean)) <= tol * mean:
            break
        targets = length * np.arange(n) / n
        c = np.concatenate([[0.0], np.cumsum(lens)])
        u = np.interp(targets, c, np.concatenate([u, [total]]))
        u[0] = 0.0
        xx, yy = points_at(u)
    return xx, yy


def _fine_polar(x, y, fine: int) -> tuple[np.ndarray, np.ndarray]:
    """Refined polar samples of the curve; rejects origin-winding curves."""
    xf = fft_upsample(x, fine)
    yf = fft_upsample(y, fine)
    rf = np.hypot(xf, yf)
    if np.min(rf) <= 0:
        raise _OriginWrap("curve touches the chart origin")
    thf = np.unwrap(np.arctan2(yf, xf))
    closing = math.remainder(thf[0] - thf[-1], 2.0 * math.pi)
    if round((thf[-1] + closing - thf[0]) / (2.0 * math.pi)) != 0:
        raise _OriginWrap("curve winds around the chart origin")
    return rf, thf


def _spectral_objective_polar(r, th, mu: float, metric: DiagonalMetric):
    """Spectral value and per-sample polar gradient of A_f - mu*L^2."""
    n = len(r)
    dtau = 1.0 / n
    rd = fft_derivative(r, 1.0)
    td = fft_derivative(th, 1.0)
    P = np.cos(th)
    Q = -np.tanh(r) * np.sin(th)
    area = float(np.sum(P * rd + Q * td)) * dtau
    E, G = metric.components(r)
    dE, dG = metric.d_e_rr(r), metric.d_e_tt(r)
    v = np.sqrt(E * rd**2 + G * td**2)
    length = float(np.sum(v)) * dtau

    dQ_dr = -np.sin(th) / np.cosh(r) ** 2
    dP_dth = -np.sin(th)
    dQ_dth = -np.tanh(r) * np.cos(th)
    # the spectral derivative matrix is antisymmetric: sum_i P_i (Dx)_i
    # contributes -(DP)_j to gradient component j
    gA_r = (-fft_derivative(P, 1.0) + dQ_dr * td) * dtau
    gA_t = (dP_dth * rd - fft_derivative(Q, 1.0) + dQ_dth * td) * dtau
    gL_r = ((dE * rd**2 + dG * td**2) / (2.0 * v)
            - fft_derivative(E * rd / v, 1.0)) * dtau
    gL_t = -fft_derivative(G * td / v, 1.0) * dtau

    value = area - mu * length**2
    grad_r = gA_r - 2.0 * mu * length * gL_r
    grad_t = gA_t - 2.0 * mu * length * gL_t
    return value, area, length, grad_r, grad_t


def _downsample_adjoint(g_fine: np.ndarray, n: int) -> np.ndarray:
    """Adjoint of trigonometric upsampling (n points to len(g_fine) points)."""
    spec = np.fft.rfft(g_fine)[:n // 2 + 1]
    return np.fft.irfft(spec, n=n)


def _fine_size(n: int) -> int:
    """Refinement size: a multiple of n, at least the spectral floor."""
    return n * max(8, -(-_FINE_MIN // n))


def _objective_xy(x, y, mu: float, metric: DiagonalMetric):
    """Objective of the interpolated curve and its gradient at the vertices.

    The (x, y) samples are trigonometrically refined, converted to polar
    pointwise (exact), evaluated with the spectral polar rules, and the
    gradient is pulled back: first through the chart map at each fine sample,
    then through the linear interpolation onto the coarse vertices.
    """
    n = len(x)
    rf, thf = _fine_polar(x, y, _fine_size(n))
    value, area, length, g_r, g_t = _spectral_objective_polar(rf, thf, mu, metric)
    xf = rf * np.cos(thf)
    yf = rf * np.sin(thf)
    gx = g_r * xf / rf - g_t * yf / rf**2
    gy = g_r * yf / rf + g_t * xf / rf**2
    grad = np.stack([_downsample_adjoint(gx, n),
                     _downsample_adjoint(gy, n)], axis=1)
    return value, area, length, grad


def _normal_projection_xy(x, y, grad, metric: DiagonalMetric):
    """Normal gradient components, unit normal field, and arc weights.

    The unit normal is the metric rotation of the spectral tangent (left of
    travel); phi = dJ(n) per vertex, and phihat = phi / local arc length is
    the continuum ascent field f - 2*mu*L*kappa.
    """
    xd = fft_derivative(x, 1.0)
    yd = fft_derivative(y, 1.0)
    gxx, gxy, gyy = _cart_metric(x, y, metric)
    # rotate the covector g*tau by 90 degrees, then normalize in the metric
    cx = gxx * xd + gxy * yd
    cy = gxy * xd + gyy * yd
    nx, ny = -cy, cx
    norm = np.sqrt(gxx * nx**2 + 2 * gxy * nx * ny + gyy * ny**2)
    nx /= norm
    ny /= norm
    phi = grad[:, 0] * nx + grad[:, 1] * ny
    seg = _xy_segment_lengths(x, y, metric)
    w = 0.5 * (seg + np.roll(seg, 1))
    return phi, phi / w, nx, ny


def _lowpass(field: np.ndarray, cutoff: int) -> np.ndarray:
    """Zero all Fourier modes above the cutoff."""
    spec = np.fft.rfft(field)
    spec[cutoff + 1:] = 0.0
    return np.fft.irfft(spec, n=len(field))


def _precondition_field(field: np.ndarray, h0: float, h2: float) -> np.ndarray:
    """Divide the field's Fourier modes by the model Hessian h0 + h2*k^2.

    The normal Hessian of the objective is nearly diagonal in Fourier modes
    with curvature growing like k^2 (the length term); dividing by the fitted
    model turns the ascent into an approximate Newton step with a uniform
    convergence rate across wavelengths.  The multiplier is positive, so
    fixed points are unchanged and the direction remains an ascent direction.
    """
    spec = np.fft.rfft(field)
    k = np.arange(len(spec))
    spec /= h0 + h2 * k**2
    return np.fft.irfft(spec, n=len(field))


def _estimate_mode_curvatures(x, y, mu: float, metric: DiagonalMetric,
                              nx, ny, k_lo: int = 2, k_hi: int = 24,
                              h: float = 1e-5) -> tuple[float, float]:
    """Fit the normal Hessian model h0 + h2*k^2 by probing two Fourier modes."""
    n = len(x)
    tau = np.arange(n) / n

    def curvature_along(k):
        e = np.cos(2.0 * math.pi * k * tau)

        def gdot(eps):
            try:
                _, _, _, gg = _objective_xy(x + eps * e * nx, y + eps * e * ny,
                                            mu, metric)
            except _OriginWrap:
                return 0.0
            return float(np.sum(gg[:, 0] * e * nx + gg[:, 1] * e * ny))

        return -(gdot(h) - gdot(-h)) / (2.0 * h)

    c_lo = curvature_along(k_lo)
    c_hi = curvature_along(k_hi)
    h2 = (c_hi - c_lo) / (k_hi**2 - k_lo**2)
    if h2 <= 0:
        h2 = max(abs(c_hi) / k_hi**2, 1e-6)
    h0 = max(c_lo - h2 * k_lo**2, 0.5 * h2)
    return h0, h2


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

def optimize_cycle(init: Cycle, mu: float,
                   cfg: OptimizerConfig = OptimizerConfig(),
                   metric: DiagonalMetric = WASSERSTEIN) -> OptimizationResult:
    """Projected gradient ascent on A_f - mu*L^2 from a given cycle.

    Accepted iterates are clamped to r >= r_min and resampled to constant
    metric speed.  Raises CollapsedCycle when the cycle's length stays below
    the collapse threshold (no positive-work cycle at this mu); returns the
    best iterate with converged=False when the line search stalls before the
    normal gradient field drops below grad_tol.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    x, y = _to_xy(init)
    x, y = _resample_xy(x, y, cfg.n_points, metric)
    value, area, length, grad = _objective_xy(x, y, mu, metric)
    step = cfg.step_init
    collapse_run = 0
    converged = False
    gnorm = math.inf
    iterations = 0
    h0 = h2 = None

    for iterations in range(1, cfg.max_iters + 1):
        phi, phihat, nx, ny = _normal_projection_xy(x, y, grad, metric)
        if h0 is None or iterations % cfg.precond_every == 1:
            h0, h2 = _estimate_mode_curvatures(x, y, mu, metric, nx, ny)
        direction = _precondition_field(phihat, h0, h2)
        gnorm = float(np.max(np.abs(phihat)))
        if length < cfg.collapse_length:
            collapse_run += 1
            if collapse_run >= cfg.collapse_patience:
                raise CollapsedCycle(
                    f"no positive-work cycle at mu={mu}: length {length:.3g}")
        else:
            collapse_run = 0
            if gnorm <= cfg.grad_tol:
                converged = True
                break

        accepted = False
        # fallback direction with the near-Nyquist band removed, in case the
        # finest represented modes of the field are corrupted by truncation
        for attempt, trial_dir in enumerate(
                (direction, _lowpass(direction, cfg.n_points // 6))):
            deriv = float(np.sum(phi * trial_dir))
            if deriv <= 0:
                continue
            step = min(cfg.step_init, 2.0 * step) if attempt == 0 else cfg.step_init
            dnorm = float(np.max(np.abs(trial_dir)))
            while step >= cfg.step_min:
                trial = min(step, cfg.max_displacement / dnorm)
                x_new = x + trial * trial_dir * nx
                y_new = y + trial * trial_dir * ny
                x_new, y_new = _clamp_radius(x_new, y_new, cfg.r_min)
                try:
                    x_new, y_new = _resample_xy(x_new, y_new, cfg.n_points, metric)
                    v_new, a_new, l_new, g_new = _objective_xy(
                        x_new, y_new, mu, metric)
                except (DegenerateCurve, _OriginWrap):
                    step *= cfg.step_shrink
                    continue
                if v_new >= value + cfg.armijo * trial * deriv:
                    accepted = True
                    break
                step *= cfg.step_shrink
            if accepted:
                break
        if not accepted:
            break
        x, y, value, area, length, grad = x_new, y_new, v_new, a_new, l_new, g_new

    cycle = _from_xy(x, y, init.orientation)
    foc_mean, foc_res = _foc_statistics_xy(x, y, f_floor=cfg.f_floor)
    params = ThermoParams.nondimensional(mu)
    return OptimizationResult(
        cycle=cycle,
        functionals=functionals_from_area_length(area, length, params),
        objective=value,
        foc_residual=foc_res,
        foc_mean=foc_mean,
        iterations=iterations,
        converged=converged,
        grad_norm=gnorm,
    )


def _clamp_radius(x, y, r_min: float):
    """Push points inside the chart floor radially out to r_min."""
    r = np.hypot(x, y)
    low = r < r_min
    if np.any(low):
        scale = np.where(low, r_min / np.maximum(r, 1e-300), 1.0)
        return x * scale, y * scale
    return x, y


def _foc_statistics_xy(x, y, f_floor: float = 1e-6) -> tuple[float, float]:
    try:
        rf, thf = _fine_polar(x, y, _fine_size(len(x)))
    except _OriginWrap:
        return math.nan, math.nan
    kappa = spectral_geodesic_curvatures(rf, thf)
    f = work_density_arrays(rf, thf)
    mask = np.abs(f) >= f_floor
    if not np.any(mask):
        return math.nan, math.nan
    ratio = kappa[mask] / f[mask]
    mean = float(ratio.mean())
    if mean == 0.0:
        return 0.0, math.inf
    return mean, float(ratio.std() / abs(mean))


def foc_profile(cycle: Cycle, f_floor: float = 1e-6
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-vertex geodesic curvature, work density, and their ratio.

    Curvature is evaluated on the trigonometrically refined curve and read
    back at the vertices; the ratio is NaN where |f| < f_floor.
    """
    x, y = _to_xy(cycle)
    n = cycle.n_points
    fine = _fine_size(n)
    rf, thf = _fine_polar(x, y, fine)
    kappa = spectral_geodesic_curvatures(rf, thf)[::fine // n]
    f = work_density_arrays(cycle.r, cycle.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(f) >= f_floor, kappa / f, math.nan)
    return kappa, f, ratio


def foc_statistics(cycle: Cycle, f_floor: float = 1e-6) -> tuple[float, float]:
    """Mean and relative dispersion of kappa/f along a smooth cycle.

    The cycle is refined through its trigonometric interpolant in the
    Cartesian chart (accurate even where the polar chart is stiff), kappa is
    the spectral geodesic curvature of the refined curve, and vertices with
    |f| < f_floor are excluded to avoid 0/0 near theta in {0, pi}.  At an
    optimal cycle the mean equals 1/(2*L*mu) and the dispersion vanishes.
    """
    x, y = _to_xy(cycle)
    return _foc_statistics_xy(x, y, f_floor=f_floor)


def self_intersects(cycle: Cycle) -> bool:
    """Segment-pair test for self-intersection of the chart polygon."""
    p = np.stack([cycle.r, cycle.theta], axis=1)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    d = q - p
    for i in range(n - 2):
        js = np.arange(i + 2, n if i > 0 else n - 1)
        rxs = d[i, 0] * d[js, 1] - d[i, 1] * d[js, 0]
        dp = p[js] - p[i]
        t = dp[:, 0] * d[js, 1] - dp[:, 1] * d[js, 0]
        u = dp[:, 0] * d[i, 1] - dp[:, 1] * d[i, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = t / rxs
            u = u / rxs
        hit = (rxs != 0) & (t > 0) & (t < 1) & (u > 0) & (u < 1)
        if np.any(hit):
            return True
    return False


# ---------------------------------------------------------------------------
# sweeps and operating points
# ---------------------------------------------------------------------------

def sweep_mu(mus, cfg: OptimizerConfig = OptimizerConfig(),
             metric: DiagonalMetric = WASSERSTEIN) -> list[MuSweepRecord]:
    """Optimal-cycle records over a grid of mu values.

    Processes mu from large to small with warm starts (each optimization is
    initialized from the previous optimum, so cycles grow as the length
    penalty weakens); collapsed values yield zero-work point records.
    Records are returned sorted by mu ascending.
    """
    mus = sorted(float(m) for m in mus)
    if not mus:
        raise ValueError("empty mu grid")
    if mus[0] <= 0:
        raise ValueError("mu values must be positive")
    records: list[MuSweepRecord] = []
    warm: Cycle | None = None
    for mu in reversed(mus):
        init = warm if warm is not None else initial_cycle(
            cfg.initial_center, cfg.initial_radius, cfg.n_points, metric=metric)
        try:
            res = optimize_cycle(init, mu, cfg, metric=metric)
        except CollapsedCycle:
            records.append(MuSweepRecord(
                mu=mu, length=0.0, area_f=0.0, w_star=0.0, efficiency=None,
                foc_residual=math.nan, converged=False, collapsed=True))
            warm = None
            continue
        fn = res.functionals
        records.append(MuSweepRecord(
            mu=mu, length=fn.length, area_f=fn.area_f,
            w_star=fn.area_f - mu * fn.length**2,
            efficiency=fn.efficiency, foc_residual=res.foc_residual,
            converged=res.converged, collapsed=False))
        warm = res.cycle
    records.reverse()
    return records


def operating_point_for_efficiency(eta: float, mu: float,
                                   sweep: list[MuSweepRecord]) -> MuSweepRecord:
    """Largest-work operating point achieving a prescribed efficiency.

    On the envelope A_f*(L), efficiency eta is realized where
    A_f*(L) * (1 - eta) = mu * L^2; the work there is eta * A_f* in units of
    kB*T_r.  The crossing is located by linear interpolation in L^2 between
    the sweep records.  Raises NoCrossing when eta is not achievable within
    the sweep.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1)")
    usable = sorted((rec for rec in sweep if rec.converged and rec.length > 0),
                    key=lambda rec: rec.length)
    if len(usable) < 2:
        raise NoCrossing("sweep has fewer than two usable records")
    x = np.array([rec.length**2 for rec in usable])
    a = np.array([rec.area_f for rec in usable])
    h = a * (1.0 - eta) - mu * x
    sign_change = np.nonzero(np.diff(np.sign(h)) != 0)[0]
    if len(sign_change) == 0:
        raise NoCrossing(
            f"efficiency {eta} at mu={mu} is outside the swept envelope")
    i = int(sign_change[0])
    t = h[i] / (h[i] - h[i + 1])
    x_star = x[i] + t * (x[i + 1] - x[i])
    a_star = a[i] + t * (a[i + 1] - a[i])
    return MuSweepRecord(mu=mu, length=math.sqrt(x_star), area_f=a_star,
                         w_star=eta * a_star, efficiency=eta,
                         foc_residual=math.nan, converged=True, collapsed=False)
