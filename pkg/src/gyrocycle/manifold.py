"""Geometry of the constant-determinant Gaussian state manifold.

A centered 2-D Gaussian state with fixed covariance determinant is described
by polar chart coordinates (r, theta):

    Sigma(r, theta) = R(-theta/2) diag(2 l_r^2 e^r, 2 l_r^2 e^-r) R(theta/2),

with l_r = (det Sigma / 4)^(1/4) the characteristic length.  Transporting
Gaussian states with minimal dissipation endows this chart with the diagonal
Riemannian metric

    ds^2 = cosh(r) dr^2 + (sinh(r)^2 / cosh(r)) dtheta^2,

whose Gaussian curvature is 1/cosh(r)^3.  This module provides the chart and
its inverse, the metric and curvatures, the Lyapunov algebra used to recover
the control gain from a covariance trajectory, and closed-form
Bures-Wasserstein transport between Gaussian states.

Everything here is pure and operates on plain numpy arrays; covariances and
gains are symmetric 2x2 ndarrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonSpdInput

#: Polar chart singular radius: the theta direction degenerates at r = 0
#: (e_tt -> 0, theta undefined), so curve operations stay above this floor.
R_MIN = 1e-3

_ISOTROPIC_TOL = 1e-12


@dataclass(frozen=True)
class PolarPoint:
    """Point (r, theta) on the constant-determinant manifold.

    theta is kept on the real line (no reduction mod 2*pi) so that winding
    numbers of closed curves are well defined.
    """

    r: float
    theta: float


@dataclass(frozen=True)
class ThermoParams:
    """Physical constants of the two-bath gyrator and the cycle period.

    Units are free as long as they are consistent; the nondimensional
    constructor fixes gamma = kB = ell_r = T_r = 1 so that the characteristic
    time t_c is 1 and mu = 1/tf.
    """

    gamma: float = 1.0
    Tx: float = 3.0
    Ty: float = 1.0
    kB: float = 1.0
    ell_r: float = 1.0
    tf: float = 1.0

    def __post_init__(self):
        if not (self.Tx > self.Ty > 0):
            raise ValueError(f"need Tx > Ty > 0, got Tx={self.Tx}, Ty={self.Ty}")
        for name in ("gamma", "kB", "ell_r", "tf"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def T_r(self) -> float:
        """Reference temperature (Tx - Ty)/2."""
        return 0.5 * (self.Tx - self.Ty)

    @property
    def t_c(self) -> float:
        """Characteristic diffusion time gamma * ell_r^2 / (kB * T_r)."""
        return self.gamma * self.ell_r**2 / (self.kB * self.T_r)

    @property
    def mu(self) -> float:
        """Dimensionless ratio t_c / tf penalizing cycle length."""
        return self.t_c / self.tf

    @classmethod
    def nondimensional(cls, mu: float) -> "ThermoParams":
        """Unit system with gamma = kB = ell_r = T_r = 1, so tf = 1/mu."""
        if mu <= 0:
            raise ValueError("mu must be positive")
        return cls(gamma=1.0, Tx=3.0, Ty=1.0, kB=1.0, ell_r=1.0, tf=1.0 / mu)


def temperature_matrix(params: ThermoParams) -> np.ndarray:
    """Source term of the covariance equation, 2*kB*diag(Tx, Ty).

    With noise amplitudes sqrt(2 kB T_i / gamma) per axis, the covariance of
    the controlled ensemble obeys gamma*dSigma/dt = -K Sigma - Sigma K + T
    with this T.
    """
    return 2.0 * params.kB * np.diag([params.Tx, params.Ty])


# ---------------------------------------------------------------------------
# polar chart
# ---------------------------------------------------------------------------

def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def sigma_from_polar(p: PolarPoint, ell_r: float = 1.0) -> np.ndarray:
    """Covariance at chart point p; det of the result is 4*ell_r^4."""
    if ell_r <= 0:
        raise ValueError("ell_r must be positive")
    s = sigma_from_polar_arrays(np.asarray(p.r), np.asarray(p.theta), ell_r)
    return s


def sigma_from_polar_arrays(r, theta, ell_r: float = 1.0) -> np.ndarray:
    """Vectorized chart map; r, theta broadcast to covariance stacks (...,2,2)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    # R(-t/2) diag(2l^2 e^r, 2l^2 e^-r) R(t/2) expanded in closed form
    m = 2.0 * ell_r**2 * np.cosh(r)
    h = 2.0 * ell_r**2 * np.sinh(r)
    out = np.empty(np.broadcast(r, theta).shape + (2, 2))
    out[..., 0, 0] = m + h * np.cos(theta)
    out[..., 1, 1] = m - h * np.cos(theta)
    out[..., 0, 1] = h * np.sin(theta)
    out[..., 1, 0] = out[..., 0, 1]
    return out


def polar_from_sigma(S: np.ndarray) -> tuple[PolarPoint, float]:
    """Invert the chart: covariance -> ((r, theta), ell_r).

    r >= 0 and theta is reported in [0, 2*pi).  For an isotropic S (a multiple
    of the identity) theta is undefined and returned as 0 by convention.

    Raises NonSpdInput if S has an eigenvalue <= 0.
    """
    S = np.asarray(S, dtype=float)
    require_spd(S)
    m = 0.5 * (S[0, 0] + S[1, 1])
    d = 0.5 * (S[0, 0] - S[1, 1])
    b = 0.5 * (S[0, 1] + S[1, 0])
    h = np.hypot(d, b)
    ell_r = (max(m * m - h * h, 0.0) / 4.0) ** 0.25
    if h <= _ISOTROPIC_TOL * m:
        return PolarPoint(r=0.0, theta=0.0), ell_r
    r = 0.5 * math.log((m + h) / (m - h))
    theta = math.atan2(b, d) % (2.0 * math.pi)
    return PolarPoint(r=r, theta=theta), ell_r


def work_density(p: PolarPoint) -> float:
    """Scalar density whose integral against the area form gives A_f."""
    return float(work_density_arrays(p.r, p.theta))


def work_density_arrays(r, theta):
    """Vectorized sin(theta)*sinh(r)/cosh(r)^2; maximum value 1/2."""
    r = np.asarray(r, dtype=float)
    return np.sin(theta) * np.sinh(r) / np.cosh(r) ** 2


# ---------------------------------------------------------------------------
# metric and curvature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricTensor:
    """Diagonal metric components at one radius."""

    e_rr: float
    e_tt: float

    @property
    def det(self) -> float:
        return self.e_rr * self.e_tt

    @property
    def sqrt_det(self) -> float:
        return math.sqrt(max(self.det, 0.0))


@dataclass(frozen=True)
class DiagonalMetric:
    """A diagonal chart metric ds^2 = E(r) dr^2 + G(r) dtheta^2.

    Components depend on r only (rotationally symmetric).  The transport
    metric of the gyrator manifold is the module-level WASSERSTEIN instance;
    a flat override (E = G = 1) is provided for unit-test harnesses.
    """

    e_rr: Callable = field(repr=False)
    e_tt: Callable = field(repr=False)
    d_e_rr: Callable = field(repr=False)
    d_e_tt: Callable = field(repr=False)
    name: str = "metric"

    def components(self, r):
        return self.e_rr(r), self.e_tt(r)

    def sqrt_det(self, r):
        e, g = self.components(r)
        return np.sqrt(np.maximum(e * g, 0.0))

    def segment_lengths(self, r, theta) -> np.ndarray:
        """Lengths of the closed polygon's segments i -> i+1 (periodic).

        The metric is evaluated at each segment's midpoint radius, which makes
        the summed length converge at second order in the spacing.
        """
        dr = np.roll(r, -1) - r
        dth = np.roll(theta, -1) - theta
        rmid = 0.5 * (r + np.roll(r, -1))
        e, g = self.components(rmid)
        return np.sqrt(e * dr**2 + g * dth**2)


def _gw_e_tt(r):
    return np.sinh(r) ** 2 / np.cosh(r)


def _gw_d_e_tt(r):
    # d/dr [sinh^2/cosh] = sinh*(cosh^2 + 1)/cosh^2
    return np.sinh(r) * (np.cosh(r) ** 2 + 1.0) / np.cosh(r) ** 2


WASSERSTEIN = DiagonalMetric(
    e_rr=np.cosh,
    e_tt=_gw_e_tt,
    d_e_rr=np.sinh,
    d_e_tt=_gw_d_e_tt,
    name="wasserstein",
)

#: Flat chart metric (E = G = 1) for test harnesses of curve operations.
FLAT = DiagonalMetric(
    e_rr=lambda r: np.ones_like(np.asarray(r, dtype=float)),
    e_tt=lambda r: np.ones_like(np.asarray(r, dtype=float)),
    d_e_rr=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    d_e_tt=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    name="flat",
)


def metric(r: float) -> MetricTensor:
    """Transport metric components at radius r: (cosh r, sinh^2 r / cosh r)."""
    if r < 0:
        raise ValueError("r must be >= 0")
    return MetricTensor(e_rr=float(np.cosh(r)), e_tt=float(_gw_e_tt(r)))


def fft_upsample(values: np.ndarray, m: int) -> np.ndarray:
    """Trigonometric interpolation of periodic samples onto m uniform points."""
    n = len(values)
    spec = np.fft.rfft(values)
    if n % 2 == 0 and m > n:
        spec = spec.copy()
        spec[-1] *= 0.5  # split the Nyquist bin symmetrically
    out = np.zeros(m // 2 + 1, dtype=complex)
    k = min(len(spec), len(out))
    out[:k] = spec[:k]
    return np.fft.irfft(out, n=m) * (m / n)


def fft_derivative(values: np.ndarray, period: float) -> np.ndarray:
    """Spectral derivative of uniformly sampled periodic values."""
    n = len(values)
    spec = np.fft.rfft(values)
    omega = 2j * math.pi * np.arange(len(spec)) / period
    if n % 2 == 0:
        omega[-1] = 0.0
    return np.fft.irfft(spec * omega, n=n)


def gaussian_curvature(r):
    """Analytic Gaussian curvature 1/cosh(r)^3 of the transport metric."""
    return 1.0 / np.cosh(r) ** 3


def numeric_gaussian_curvature(r, chart_metric: DiagonalMetric = WASSERSTEIN,
                               h: float = 5e-3):
    """Curvature from metric components alone, by finite differences.

    Uses the rotationally symmetric reduction of the Brioschi formula,
    K = -(2*sqrt(EG))^-1 * d/dr [ G'(r) / sqrt(EG) ], with fourth-order
    central stencils for both derivative levels.  The stencil width shrinks
    near the chart origin so probes stay at r > 0, where sqrt(EG) is smooth.
    Serves as the independent cross-check of gaussian_curvature.
    """
    r = np.asarray(r, dtype=float)
    h_eff = np.minimum(h, r / 8.0)

    def g_prime_over_area(x, hx):
        gp = _central4(chart_metric.e_tt, x, hx)
        e, g = chart_metric.components(x)
        return gp / np.sqrt(e * g)

    e, g = chart_metric.components(r)
    outer = (-g_prime_over_area(r + 2 * h_eff, h_eff)
             + 8 * g_prime_over_area(r + h_eff, h_eff)
             - 8 * g_prime_over_area(r - h_eff, h_eff)
             + g_prime_over_area(r - 2 * h_eff, h_eff)) / (12 * h_eff)
    return -outer / (2.0 * np.sqrt(e * g))


def _central4(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


# ---------------------------------------------------------------------------
# geodesic curvature and geodesic shooting
# ---------------------------------------------------------------------------

def geodesic_curvatures(r: np.ndarray, theta: np.ndarray,
                        chart_metric: DiagonalMetric = WASSERSTEIN) -> np.ndarray:
    """Signed geodesic curvature at every vertex of a closed discrete curve.

    Velocity and acceleration come from periodic central differences (the
    curve should be close to uniformly sampled), the covariant correction from
    the Christoffel symbols of the diagonal metric, and the sign from the
    Riemannian area form: positive when the curve bends toward the enclosed
    domain of a positively oriented cycle.
    """
    from .errors import DegenerateCurve

    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    rp, rm = np.roll(r, -1), np.roll(r, 1)
    tp, tm = np.roll(theta, -1), np.roll(theta, 1)
    if np.any((rp == r) & (tp == theta)):
        raise DegenerateCurve("consecutive points coincide")

    rd, td = 0.5 * (rp - rm), 0.5 * (tp - tm)
    rdd, tdd = rp - 2 * r + rm, tp - 2 * theta + tm

    e, g = chart_metric.components(r)
    de, dg = chart_metric.d_e_rr(r), chart_metric.d_e_tt(r)
    # Christoffel symbols of ds^2 = E(r) dr^2 + G(r) dth^2
    gam_r_rr = de / (2 * e)
    gam_r_tt = -dg / (2 * e)
    gam_t_rt = dg / (2 * g)

    acc_r = rdd + gam_r_rr * rd**2 + gam_r_tt * td**2
    acc_t = tdd + 2 * gam_t_rt * rd * td
    speed2 = e * rd**2 + g * td**2
    area_form = np.sqrt(e * g)
    return area_form * (rd * acc_t - td * acc_r) / speed2**1.5


def geodesic_curvature(cycle, index: int,
                       chart_metric: DiagonalMetric = WASSERSTEIN) -> float:
    """Signed geodesic curvature of a cycle at one vertex."""
    return float(geodesic_curvatures(cycle.r, cycle.theta, chart_metric)[index])


def spectral_geodesic_curvatures(r: np.ndarray, theta: np.ndarray,
                                 chart_metric: DiagonalMetric = WASSERSTEIN
                                 ) -> np.ndarray:
    """Geodesic curvature with spectral derivatives of the sampled curve.

    Same Christoffel combination as geodesic_curvatures, but velocity and
    acceleration come from FFT differentiation of the periodic coordinate
    samples, which is exact up to the trigonometric truncation.  Preferred
    for smooth, uniformly sampled cycles (e.g. optimizer iterates) where the
    local stencil loses accuracy, such as near the chart origin; not suitable
    for cycles with corners.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    rd = fft_derivative(r, 1.0)
    td = fft_derivative(theta, 1.0)
    rdd = fft_derivative(rd, 1.0)
    tdd = fft_derivative(td, 1.0)
    e, g = chart_metric.components(r)
    de, dg = chart_metric.d_e_rr(r), chart_metric.d_e_tt(r)
    acc_r = rdd + de / (2 * e) * rd**2 - dg / (2 * e) * td**2
    acc_t = tdd + dg / g * rd * td
    speed2 = e * rd**2 + g * td**2
    return np.sqrt(e * g) * (rd * acc_t - td * acc_r) / speed2**1.5


def geodesic_shoot(start: PolarPoint, direction: float, length: float,
                   chart_metric: DiagonalMetric = WASSERSTEIN,
                   n_steps: int = 200) -> np.ndarray:
    """Integrate the geodesic equation from start over a given arc length.

    direction is the angle of the initial unit velocity in the orthonormal
    frame (e_r/sqrt(E), e_theta/sqrt(G)).  Returns the (n_steps+1, 2) array of
    (r, theta) samples; the parameter is arc length, so the end point is the
    metric exponential of length * (unit vector).  RK4 integration.
    """
    e0, g0 = chart_metric.components(start.r)
    v = np.array([np.cos(direction) / np.sqrt(e0),
                  np.sin(direction) / np.sqrt(g0)])

    def rhs(state):
        r, th, vr, vt = state
        e, g = chart_metric.components(r)
        de, dg = chart_metric.d_e_rr(r), chart_metric.d_e_tt(r)
        ar = -(de / (2 * e)) * vr**2 + (dg / (2 * e)) * vt**2
        at = -(dg / g) * vr * vt
        return np.array([vr, vt, ar, at])

    state = np.array([start.r, start.theta, v[0], v[1]])
    out = np.empty((n_steps + 1, 2))
    out[0] = state[:2]
    dt = length / n_steps
    for i in range(n_steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = state[:2]
    return out


# ---------------------------------------------------------------------------
# symmetric 2x2 algebra
# ---------------------------------------------------------------------------

def is_spd(S: np.ndarray, tol: float = 0.0) -> bool:
    S = np.asarray(S)
    return bool(np.all(np.linalg.eigvalsh(S) > tol))


def require_spd(S: np.ndarray, what: str = "matrix") -> None:
    S = np.asarray(S)
    if S.shape[-2:] != (2, 2):
        raise NonSpdInput(f"{what} must be 2x2, got shape {S.shape}")
    if not np.allclose(S, np.swapaxes(S, -1, -2), rtol=0.0, atol=1e-10 * (1 + np.max(np.abs(S)))):
        raise NonSpdInput(f"{what} is not symmetric")
    if np.min(np.linalg.eigvalsh(S)) <= 0:
        raise NonSpdInput(f"{what} has an eigenvalue <= 0")


def spd_sqrt(S: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix (stacks allowed)."""
    w, v = np.linalg.eigh(np.asarray(S, dtype=float))
    if np.min(w) < 0:
        raise NonSpdInput("matrix square root of a non-PSD matrix")
    return (v * np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def lyapunov_operator(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Unique symmetric L with A L + L A = X, for SPD A (stacks allowed).

    This is the closed-form 2x2 linear solve (three unknowns); the integral
    representation int_0^inf exp(-tau A) X exp(-tau A) dtau of the same
    operator is only used as a low-accuracy oracle in tests.
    """
    A = np.asarray(A, dtype=float)
    X = np.asarray(X, dtype=float)
    require_spd(A, "lyapunov operator base")
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
    z = np.zeros_like(a)
    M = np.stack([
        np.stack([2 * a, 2 * b, z], axis=-1),
        np.stack([b, a + c, b], axis=-1),
        np.stack([z, 2 * b, 2 * c], axis=-1),
    ], axis=-2)
    rhs = np.stack([X[..., 0, 0], X[..., 0, 1], X[..., 1, 1]], axis=-1)
    p, q, s = np.moveaxis(np.linalg.solve(M, rhs[..., None])[..., 0], -1, 0)
    out = np.empty(np.broadcast(a, X[..., 0, 0]).shape + (2, 2))
    out[..., 0, 0] = p
    out[..., 0, 1] = q
    out[..., 1, 0] = q
    out[..., 1, 1] = s
    return out


def control_gain(Sigma: np.ndarray, SigmaDot: np.ndarray,
                 params: ThermoParams) -> np.ndarray:
    """Stiffness matrix K realizing a prescribed covariance velocity.

    K solves gamma*SigmaDot = -K Sigma - Sigma K + T, i.e. K is the Lyapunov
    operator of Sigma applied to T - gamma*SigmaDot.  K is symmetric but need
    not be positive definite.
    """
    T = temperature_matrix(params)
    return lyapunov_operator(Sigma, T - params.gamma * np.asarray(SigmaDot, dtype=float))


# ---------------------------------------------------------------------------
# Bures-Wasserstein transport
# ---------------------------------------------------------------------------

def bures_w2(S0: np.ndarray, S1: np.ndarray) -> float:
    """Transport distance between centered Gaussians with covariances S0, S1.

    W2^2 = tr S0 + tr S1 - 2 tr (S0^1/2 S1 S0^1/2)^1/2.  The cross term is
    evaluated through the eigendecomposition square root; tiny negative
    round-off in W2^2 is clipped so that the distance is exactly 0 at S0 = S1.
    """
    S0 = np.asarray(S0, dtype=float)
    S1 = np.asarray(S1, dtype=float)
    require_spd(S0)
    require_spd(S1)
    s0h = spd_sqrt(S0)
    cross = np.trace(spd_sqrt(s0h @ S1 @ s0h))
    w2sq = np.trace(S0) + np.trace(S1) - 2.0 * cross
    return math.sqrt(max(float(w2sq), 0.0))


def gaussian_geodesic(S0: np.ndarray, S1: np.ndarray, s) -> np.ndarray:
    """Constant-speed displacement interpolation between Gaussian covariances.

    Sigma_s = ((1-s) I + s S) S0 ((1-s) I + s S) with the optimal map
    S = S0^-1/2 (S0^1/2 S1 S0^1/2)^1/2 S0^-1/2.  s may be a scalar or an
    array; an array yields a stack of covariances.
    """
    S0 = np.asarray(S0, dtype=float)
    S1 = np.asarray(S1, dtype=float)
    require_spd(S0)
    require_spd(S1)
    w, v = np.linalg.eigh(S0)
    s0h = (v * np.sqrt(w)) @ v.T
    s0ih = (v / np.sqrt(w)) @ v.T
    omap = s0ih @ spd_sqrt(s0h @ S1 @ s0h) @ s0ih
    s_arr = np.asarray(s, dtype=float)
    eye = np.eye(2)
    A = (1.0 - s_arr)[..., None, None] * eye + s_arr[..., None, None] * omap
    out = A @ S0 @ A
    return out if s_arr.ndim else out.reshape(2, 2)
