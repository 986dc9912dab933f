"""Thermodynamic path functionals on the state manifold.

Closed control protocols are discretized as polygons in the (r, theta) chart
(`Cycle`).  For a cycle traversed at constant metric speed over a period tf,

    Q_qs   = kB * T_r * A_f,          A_f = loop integral of
                                            cos(theta) dr - tanh(r) sin(theta) dtheta,
    Q_diss = gamma * l_r^2 * L^2 / tf, L  = metric length of the cycle,

and the work output is their difference.  By Stokes' theorem A_f equals the
integral of sin(theta)*tanh(r)^2 over the enclosed chart domain, which this
module also evaluates by direct quadrature as an independent cross-check.

General (not necessarily constant-determinant) covariance trajectories are
handled by `CovariancePath` and `heat_decomposition_covariance`, which
integrate the trace-form heat rates

    dQ_qs/dt   = 1/2 Tr[L_Sigma[T] dSigma/dt],
    dQ_diss/dt = gamma/2 Tr[L_Sigma[dSigma/dt] dSigma/dt],

where L_Sigma is the Lyapunov operator of the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)

from .errors import DegenerateCurve, InconsistentDerivatives, NonSpdInput
from .manifold import (
    R_MIN,
    WASSERSTEIN,
    DiagonalMetric,
    PolarPoint,
    ThermoParams,
    fft_derivative,
    fft_upsample,
    lyapunov_operator,
    temperature_matrix,
)

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------

@dataclass
class Cycle:
    """Closed discrete curve in the (r, theta) chart.

    The polygon is implicitly closed (the last vertex connects back to the
    first; the first vertex is not repeated).  orientation is +1 for
    counterclockwise traversal in the (r, theta) plane and -1 otherwise.
    Direct construction performs no validation so that tests can build
    degenerate inputs; use from_arrays for validated construction.
    """

    r: np.ndarray
    theta: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)

    @classmethod
    def from_arrays(cls, r, theta, orientation: int | None = None,
                    r_min: float = R_MIN) -> "Cycle":
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if r.shape != theta.shape or r.ndim != 1:
            raise ValueError("r and theta must be 1-D arrays of equal length")
        if len(r) < 8:
            raise ValueError("a cycle needs at least 8 points")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(theta))):
            raise ValueError("cycle coordinates must be finite")
        if np.min(r) < r_min:
            raise ValueError(f"cycle dips below r_min={r_min}")
        same = (r == np.roll(r, -1)) & (theta == np.roll(theta, -1))
        if np.any(same):
            raise DegenerateCurve("consecutive cycle points coincide")
        if orientation is None:
            orientation = 1 if cls(r, theta).signed_chart_area() >= 0 else -1
        return cls(r=r, theta=theta, orientation=int(orientation))

    @property
    def n_points(self) -> int:
        return len(self.r)

    @property
    def points(self) -> list[PolarPoint]:
        return [PolarPoint(float(a), float(b)) for a, b in zip(self.r, self.theta)]

    def signed_chart_area(self) -> float:
        """Shoelace area in chart coordinates (sign gives orientation)."""
        return 0.5 * float(np.sum(
            self.r * np.roll(self.theta, -1) - np.roll(self.r, -1) * self.theta))

    def reversed(self) -> "Cycle":
        return Cycle(r=self.r[::-1].copy(), theta=self.theta[::-1].copy(),
                     orientation=-self.orientation)


def cycle_length(cycle: Cycle, metric: DiagonalMetric = WASSERSTEIN) -> float:
    """Metric length of the closed polygon (midpoint-evaluated metric)."""
    return float(np.sum(metric.segment_lengths(cycle.r, cycle.theta)))


def resample_constant_speed(cycle: Cycle, n: int,
                            metric: DiagonalMetric = WASSERSTEIN,
                            tol: float = 1e-8, max_iter: int = 100) -> Cycle:
    """Redistribute n points along the cycle at equal metric arc length.

    Points move along the input polygon; the equalization iterates because a
    chord's metric length is evaluated at its own midpoint, which shifts as
    points move.  Converges to successive arc lengths equal within ~tol
    relative.  Total length is preserved when n is at or above the input
    resolution (coarser outputs cut polygon corners).  Raises DegenerateCurve
    for a zero-length input.
    """
    if n < 8:
        raise ValueError("n must be >= 8")
    r, th = cycle.r, cycle.theta
    m = len(r)
    edge = metric.segment_lengths(r, th)
    total = float(edge.sum())
    if total <= 1e-12:
        raise DegenerateCurve("cannot resample a zero-length cycle")
    cum = np.concatenate([[0.0], np.cumsum(edge)])
    rv = np.concatenate([r, r[:1]])
    tv = np.concatenate([th, th[:1]])

    def points_at(u):
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, m - 1)
        frac = (u - cum[idx]) / edge[idx]
        return rv[idx] + frac * (rv[idx + 1] - rv[idx]), \
            tv[idx] + frac * (tv[idx + 1] - tv[idx])

    u = total * np.arange(n) / n
    rr, tt = points_at(u)
    for _ in range(max_iter):
        lens = metric.segment_lengths(rr, tt)
        length = lens.sum()
        mean = length / n
        if np.max(np.abs(lens - mean)) <= tol * mean:
            break
        targets = length * np.arange(n) / n
        c = np.concatenate([[0.0], np.cumsum(lens)])
        u = np.interp(targets, c, np.concatenate([u, [total]]))
        u[0] = 0.0
        rr, tt = points_at(u)
    return Cycle(r=rr, theta=tt, orientation=cycle.orientation)


def speed_dispersion(cycle: Cycle, metric: DiagonalMetric = WASSERSTEIN) -> float:
    """Relative spread of segment arc lengths (0 for a constant-speed cycle)."""
    lens = metric.segment_lengths(cycle.r, cycle.theta)
    mean = lens.mean()
    return float(np.max(np.abs(lens - mean)) / mean)


def resample_constant_speed_smooth(cycle: Cycle, n: int,
                                   metric: DiagonalMetric = WASSERSTEIN,
                                   oversample: int = 16) -> Cycle:
    """Constant-speed resampling through a trigonometric interpolant.

    For smooth cycles this redistributes vertices without the O(spacing^2)
    objective perturbation of polygon resampling, because the new vertices
    sample the same smooth curve; the optimizer relies on this to keep its
    line search unpolluted.  Not suitable for cycles with corners.
    """
    fine = oversample * max(cycle.n_points, n)
    refined = Cycle(r=fft_upsample(cycle.r, fine),
                    theta=fft_upsample(cycle.theta, fine),
                    orientation=cycle.orientation)
    return resample_constant_speed(refined, n, metric=metric)


# ---------------------------------------------------------------------------
# quasi-static area
# ---------------------------------------------------------------------------

def _one_form(r, theta):
    """Components (P, Q) of the quasi-static heat one-form P dr + Q dtheta."""
    return np.cos(theta), -np.tanh(r) * np.sin(theta)


def area_line_integral(cycle: Cycle) -> float:
    """Weighted area A_f as the loop integral of the quasi-static one-form.

    Trapezoidal evaluation along the polygon.  The sign follows the traversal
    direction of the stored points; self-intersecting loops are integrated
    with signed multiplicity, as Stokes' theorem dictates.
    """
    P, Q = _one_form(cycle.r, cycle.theta)
    dr = np.roll(cycle.r, -1) - cycle.r
    dth = np.roll(cycle.theta, -1) - cycle.theta
    return 0.5 * float(np.sum((P + np.roll(P, -1)) * dr + (Q + np.roll(Q, -1)) * dth))


def work_density_area_form(r, theta):
    """Integrand of A_f over the chart: sin(theta) * tanh(r)^2."""
    return np.sin(theta) * np.tanh(r) ** 2


def riemannian_area_form(r, theta):
    """sqrt(det g) of the transport metric: sinh(r)."""
    return np.sinh(r) * np.ones_like(np.asarray(theta, dtype=float))


def area_quadrature(r_range, theta_range, indicator=None, gl_n: int = 32,
                    max_depth: int = 9) -> float:
    """Direct quadrature of A_f = integral of sin(theta)*tanh(r)^2 over D.

    D is the axis-aligned chart rectangle r_range x theta_range intersected
    with `indicator` (a vectorized boolean predicate of (r, theta) arrays;
    None means the whole rectangle).  Serves as the Stokes-theorem oracle for
    area_line_integral.
    """
    return domain_quadrature(work_density_area_form, r_range, theta_range,
                             indicator, gl_n=gl_n, max_depth=max_depth)


def riemannian_area_quadrature(r_range, theta_range, indicator=None,
                               gl_n: int = 32, max_depth: int = 9) -> float:
    """Riemannian area of a chart domain: quadrature of sinh(r)."""
    return domain_quadrature(riemannian_area_form, r_range, theta_range,
                             indicator, gl_n=gl_n, max_depth=max_depth)


def domain_quadrature(integrand, r_range, theta_range, indicator=None,
                      gl_n: int = 32, max_depth: int = 9,
                      micro: int = 16) -> float:
    """Adaptive tensor-product quadrature over an indicator-defined domain.

    Panels fully inside the domain get a gl_n x gl_n Gauss-Legendre rule;
    panels straddling the boundary are quadtree-refined to max_depth and the
    finest mixed panels fall back to an indicator-masked midpoint micro-grid.
    """
    r0, r1 = map(float, r_range)
    t0, t1 = map(float, theta_range)
    if r1 <= r0 or t1 <= t0:
        return 0.0

    if indicator is None:
        return _gl_panels(integrand, np.array([[r0, r1, t0, t1]]), gl_n)

    probe = 7
    total = 0.0
    panels = np.array([[r0, r1, t0, t1]])
    for depth in range(max_depth + 1):
        if len(panels) == 0:
            break
        lo_r, hi_r, lo_t, hi_t = panels.T
        u = np.linspace(0.0, 1.0, probe)
        rp = lo_r[:, None, None] + (hi_r - lo_r)[:, None, None] * u[None, :, None]
        tp = lo_t[:, None, None] + (hi_t - lo_t)[:, None, None] * u[None, None, :]
        inside = indicator(np.broadcast_to(rp, (len(panels), probe, probe)),
                           np.broadcast_to(tp, (len(panels), probe, probe)))
        inside = np.asarray(inside, dtype=bool).reshape(len(panels), -1)
        n_in = inside.sum(axis=1)
        full = n_in == probe * probe
        empty = n_in == 0
        mixed = ~full & ~empty
        if np.any(full):
            total += _gl_panels(integrand, panels[full], gl_n)
        if depth == max_depth:
            if np.any(mixed):
                total += _masked_midpoint(integrand, indicator, panels[mixed], micro)
            break
        mids_r = 0.5 * (lo_r[mixed] + hi_r[mixed])
        mids_t = 0.5 * (lo_t[mixed] + hi_t[mixed])
        lo_rm, hi_rm = lo_r[mixed], hi_r[mixed]
        lo_tm, hi_tm = lo_t[mixed], hi_t[mixed]
        panels = np.concatenate([
            np.stack([lo_rm, mids_r, lo_tm, mids_t], axis=1),
            np.stack([mids_r, hi_rm, lo_tm, mids_t], axis=1),
            np.stack([lo_rm, mids_r, mids_t, hi_tm], axis=1),
            np.stack([mids_r, hi_rm, mids_t, hi_tm], axis=1),
        ])
    return float(total)


def _gl_panels(integrand, panels, gl_n):
    """Sum of gl_n x gl_n Gauss-Legendre integrals over a stack of panels."""
    x, w = _gauss_legendre(gl_n)
    lo_r, hi_r, lo_t, hi_t = panels.T
    half_r = 0.5 * (hi_r - lo_r)
    half_t = 0.5 * (hi_t - lo_t)
    rn = lo_r[:, None] + half_r[:, None] * (x[None, :] + 1.0)
    tn = lo_t[:, None] + half_t[:, None] * (x[None, :] + 1.0)
    vals = integrand(rn[:, :, None], tn[:, None, :])
    acc = np.einsum("i,j,pij->p", w, w, vals)
    return float(np.sum(acc * half_r * half_t))


def _masked_midpoint(integrand, indicator, panels, micro):
    """Midpoint rule on a micro-grid, keeping only in-domain nodes."""
    lo_r, hi_r, lo_t, hi_t = panels.T
    u = (np.arange(micro) + 0.5) / micro
    rn = lo_r[:, None, None] + (hi_r - lo_r)[:, None, None] * u[None, :, None]
    tn = lo_t[:, None, None] + (hi_t - lo_t)[:, None, None] * u[None, None, :]
    rn = np.broadcast_to(rn, (len(panels), micro, micro))
    tn = np.broadcast_to(tn, (len(panels), micro, micro))
    mask = np.asarray(indicator(rn, tn), dtype=bool)
    cell = (hi_r - lo_r) * (hi_t - lo_t) / micro**2
    vals = np.where(mask, integrand(rn, tn), 0.0)
    return float(np.sum(vals.sum(axis=(1, 2)) * cell))


def cycle_indicator(cycle: Cycle, chunk: int = 8192):
    """Vectorized point-in-polygon predicate for the cycle's chart domain.

    Even-odd crossing rule on the closed polygon; returns a callable mapping
    (r, theta) arrays to a boolean mask of the same shape.
    """
    x1, y1 = cycle.r, cycle.theta
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)

    def indicator(rq, tq):
        rq = np.asarray(rq, dtype=float)
        tq = np.asarray(tq, dtype=float)
        shape = np.broadcast(rq, tq).shape
        rf = np.broadcast_to(rq, shape).reshape(-1)
        tf = np.broadcast_to(tq, shape).reshape(-1)
        out = np.empty(rf.shape, dtype=bool)
        for k in range(0, len(rf), chunk):
            rq_c = rf[k:k + chunk, None]
            tq_c = tf[k:k + chunk, None]
            crosses = (y1[None, :] > tq_c) != (y2[None, :] > tq_c)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = x1 + (tq_c - y1) * (x2 - x1) / (y2 - y1)
            hits = crosses & (rq_c < x_at)
            out[k:k + chunk] = (hits.sum(axis=1) % 2).astype(bool)
        return out.reshape(shape)

    return indicator


# ---------------------------------------------------------------------------
# cycle functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CycleFunctionals:
    """Evaluated functionals of one cycle at one period.

    efficiency is None when the quasi-static heat is not positive (the cycle
    does not act as an engine, so the ratio is undefined rather than negative
    infinity).
    """

    area_f: float
    length: float
    q_qs: float
    q_diss: float
    w_out: float
    efficiency: float | None


def functionals_from_area_length(area_f: float, length: float,
                                 params: ThermoParams) -> CycleFunctionals:
    """Assemble heats, work, and efficiency from (A_f, L) at period tf."""
    q_qs = params.kB * params.T_r * area_f
    q_diss = params.gamma * params.ell_r**2 * length**2 / params.tf
    w_out = q_qs - q_diss
    efficiency = None
    if area_f > 0:
        efficiency = 1.0 - params.mu * length**2 / area_f
    return CycleFunctionals(area_f=area_f, length=length, q_qs=q_qs,
                            q_diss=q_diss, w_out=w_out, efficiency=efficiency)


def cycle_functionals(cycle: Cycle, params: ThermoParams) -> CycleFunctionals:
    """Functionals of a constant-speed cycle.

    The closed forms assume the cycle is traversed at constant metric speed;
    resample_constant_speed beforehand if unsure.
    """
    return functionals_from_area_length(area_line_integral(cycle),
                                        cycle_length(cycle), params)


# ---------------------------------------------------------------------------
# covariance paths
# ---------------------------------------------------------------------------

@dataclass
class CovariancePath:
    """Covariance trajectory Sigma(t) on a strictly increasing time grid.

    sigma_dots may be supplied (e.g. from the propagated ODE right-hand side);
    otherwise central finite differences are used, with periodic wrap when the
    path is closed.  closed=None auto-detects closure from the endpoints.
    """

    times: np.ndarray
    sigmas: np.ndarray
    sigma_dots: np.ndarray | None = None
    closed: bool | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        if self.sigma_dots is not None:
            self.sigma_dots = np.asarray(self.sigma_dots, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.sigmas.shape != (len(self.times), 2, 2):
            raise ValueError("sigmas must have shape (len(times), 2, 2)")

    def is_closed(self) -> bool:
        if self.closed is not None:
            return self.closed
        scale = np.max(np.abs(self.sigmas[0])) + np.max(np.abs(self.sigmas[-1]))
        return bool(np.max(np.abs(self.sigmas[0] - self.sigmas[-1])) <= 1e-8 * scale)

    def finite_difference_derivatives(self) -> np.ndarray:
        """Second-order derivative samples on the (possibly nonuniform) grid."""
        t, s = self.times, self.sigmas
        if self.is_closed():
            # periodic extension: drop the duplicated endpoint, wrap indices
            tt = t[:-1]
            ss = s[:-1]
            period = t[-1] - t[0]
            tm = np.roll(tt, 1).copy()
            tm[0] -= period
            tp = np.roll(tt, -1).copy()
            tp[-1] += period
            d = _three_point_derivative(tm, tt, tp, np.roll(ss, 1, axis=0), ss,
                                        np.roll(ss, -1, axis=0))
            return np.concatenate([d, d[:1]], axis=0)
        d = np.empty_like(s)
        d[1:-1] = _three_point_derivative(t[:-2], t[1:-1], t[2:],
                                          s[:-2], s[1:-1], s[2:])
        d[0] = _one_sided_derivative(t[0], t[1], t[2], s[0], s[1], s[2])
        d[-1] = _one_sided_derivative(t[-1], t[-2], t[-3], s[-1], s[-2], s[-3])
        return d


def _three_point_derivative(t0, t1, t2, f0, f1, f2):
    h1 = (t1 - t0)[:, None, None]
    h2 = (t2 - t1)[:, None, None]
    return (-h2 / (h1 * (h1 + h2)) * f0
            + (h2 - h1) / (h1 * h2) * f1
            + h1 / (h2 * (h1 + h2)) * f2)


def _one_sided_derivative(t0, t1, t2, f0, f1, f2):
    h1, h2 = t1 - t0, t2 - t0
    return (f1 - f0) * h2 / (h1 * (h2 - h1)) - (f2 - f0) * h1 / (h2 * (h2 - h1))


def heat_decomposition_covariance(path: CovariancePath, params: ThermoParams,
                                  check_tol: float | None = 0.2
                                  ) -> tuple[float, float]:
    """Quasi-static heat and dissipation of a covariance trajectory.

    Trapezoidal integration of the trace-form rates on the time grid.  The
    dissipation integrand is a metric square norm, so q_diss >= 0 always.
    When derivative samples were supplied, they are cross-checked against
    finite differences of the path (relative to the path's own velocity
    scale); set check_tol=None to skip.
    """
    evmin = np.min(np.linalg.eigvalsh(path.sigmas))
    if evmin <= 0:
        raise NonSpdInput("covariance path leaves the SPD cone")
    if path.sigma_dots is None:
        dots = path.finite_difference_derivatives()
    else:
        dots = path.sigma_dots
        if check_tol is not None:
            fd = path.finite_difference_derivatives()
            interior = slice(1, -1)
            scale = np.max(np.abs(fd[interior]))
            if scale > 0:
                err = np.max(np.abs(dots[interior] - fd[interior])) / scale
                if err > check_tol:
                    raise InconsistentDerivatives(
                        f"supplied derivatives deviate {err:.3g} (tol {check_tol})")

    T = temperature_matrix(params)
    L_T = lyapunov_operator(path.sigmas, np.broadcast_to(T, path.sigmas.shape))
    L_dot = lyapunov_operator(path.sigmas, dots)
    qs_rate = 0.5 * np.einsum("tij,tji->t", L_T, dots)
    diss_rate = 0.5 * params.gamma * np.einsum("tij,tji->t", L_dot, dots)
    q_qs = float(_trapezoid(qs_rate, path.times))
    q_diss = float(_trapezoid(diss_rate, path.times))
    return q_qs, q_diss


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def efficiency_bound(mu: float, f_bar: float = 0.5) -> float:
    """Efficiency ceiling 1 - 4*pi*mu/f_bar from the L^2 >= 4*pi*A inequality.

    f_bar is the mean work density over the enclosed domain (conservative
    estimate: its global maximum, 1/2 for the gyrator, which yields
    1 - 8*pi*mu -- tighter than the proven gyrator bound 1 - 4*pi*mu that
    follows from the rotationally symmetric inequality L^2 >= 2*pi*A, and
    therefore to be treated as a conjecture there).  A nonpositive value
    means no cycle of this period can output work.
    """
    if mu <= 0 or f_bar <= 0:
        raise ValueError("mu and f_bar must be positive")
    return 1.0 - 4.0 * math.pi * mu / f_bar


def isoperimetric_bound_rotsym(area: float) -> float:
    """Lower bound on squared cycle length enclosing a given Riemannian area.

    For the rotationally symmetric gyrator metric (curvature 1/cosh^3 r),
    L^2 >= 4*pi*A - 4*pi^2*(A/(2*pi) - log(1 + A/(2*pi))), which itself is
    >= 2*pi*A for all A >= 0.
    """
    if area < 0:
        raise ValueError("area must be >= 0")
    bound = 2.0 * math.pi * area + 4.0 * math.pi**2 * math.log1p(area / (2.0 * math.pi))
    assert bound >= 2.0 * math.pi * area - 1e-12
    return bound


def isoperimetric_bound_negative_curvature(area: float, k: float) -> float:
    """Bound L^2 >= 4*pi*A + k*A^2 for manifolds with curvature <= -k < 0.

    Pure evaluator for completeness; the gyrator manifold has positive
    curvature and never exercises k > 0.
    """
    if area < 0:
        raise ValueError("area must be >= 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    return 4.0 * math.pi * area + k * area**2
