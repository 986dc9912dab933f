"""Independent physical verification of cycles by Langevin Monte Carlo.

A polar cycle is first turned into an executable control schedule: the
covariance trajectory Sigma(t) along the constant-speed parametrization is
sampled on a fine uniform grid (trigonometric interpolation of the periodic
chart coordinates), and the stiffness K(t) realizing it is recovered through
the Lyapunov operator.  The schedule can then be

  * integrated exactly at the covariance level (propagate_lyapunov, RK4), and
  * simulated at the particle level (simulate_ensemble, Euler-Maruyama with
    two independent baths), with per-trajectory work and per-bath heats
    estimated by stochastic energetics.

Work uses the potential-change convention sum 1/2 xi' (K_next - K_prev) xi at
the control switches (the gain is held piecewise constant between schedule
grid points); heat uses Stratonovich midpoint increments
1/2 (grad U(xi_k) + grad U(xi_k+1)) . dxi per axis.  With a quadratic
potential these conventions satisfy the first law per trajectory to rounding
error.

Noise streams are counter-based (Philox keyed by (seed, step)), with a fixed
(particle, axis) layout inside each step, so results are bit-reproducible for
a given (seed, n, dt) no matter how the particle loop is executed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)

from .errors import ChartViolation, LostPositivity, UnstableIntegration
from .functionals import CovariancePath, Cycle
from .manifold import (
    R_MIN,
    ThermoParams,
    fft_derivative,
    fft_upsample,
    lyapunov_operator,
    require_spd,
    sigma_from_polar_arrays,
    temperature_matrix,
)


@dataclass
class ControlSchedule:
    """Piecewise control protocol on a uniform time grid over [0, tf].

    gains[k] is held on [times[k], times[k+1]); the grid includes both
    endpoints and the protocol is periodic: gains[-1] == gains[0].
    """

    times: np.ndarray
    gains: np.ndarray
    sigmas_ref: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.gains = np.asarray(self.gains, dtype=float)
        self.sigmas_ref = np.asarray(self.sigmas_ref, dtype=float)

    @property
    def n_intervals(self) -> int:
        return len(self.times) - 1

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class EnsembleState:
    """Particle positions plus the RNG bookkeeping that generated them."""

    positions: np.ndarray
    seed: int
    step: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class EnergeticsEstimate:
    """Ensemble means and standard errors of work and per-bath heats.

    work_in is the work done on the system (negative when the cycle extracts
    work); delta_e is the per-trajectory total energy change, which equals
    work_in + heat_x + heat_y to rounding error.
    """

    work_in_mean: float
    work_in_se: float
    heat_x_mean: float
    heat_x_se: float
    heat_y_mean: float
    heat_y_se: float
    delta_e_mean: float
    delta_e_se: float
    n_particles: int


# ---------------------------------------------------------------------------
# schedule construction
# ---------------------------------------------------------------------------

def schedule_from_cycle(cycle: Cycle, params: ThermoParams,
                        n_steps: int | None = None) -> ControlSchedule:
    """Control gains realizing the cycle traversed at constant speed over tf.

    Covariances at the cycle vertices (uniformly spaced in time for a
    constant-speed cycle) are trigonometrically interpolated entrywise onto
    n_steps uniform times, time derivatives follow from spectral
    differentiation, and the gain at every grid point from the Lyapunov solve
    of the covariance equation.  Interpolating the matrix entries rather than
    the chart coordinates stays accurate for cycles passing near the chart
    origin, where the polar angle is not a smooth function of time.
    """
    if n_steps is None:
        n_steps = 16 * cycle.n_points
    if n_steps < 16 * cycle.n_points:
        raise ValueError("n_steps must be at least 16 * n_points")
    if np.min(cycle.r) < R_MIN:
        raise ChartViolation("cycle dips below the chart floor r_min")

    sig_v = sigma_from_polar_arrays(cycle.r, cycle.theta, params.ell_r)
    sig = np.empty((n_steps, 2, 2))
    dsig = np.empty_like(sig)
    for i, j in ((0, 0), (0, 1), (1, 1)):
        sig[:, i, j] = fft_upsample(sig_v[:, i, j], n_steps)
        dsig[:, i, j] = fft_derivative(sig[:, i, j], params.tf)
    sig[:, 1, 0] = sig[:, 0, 1]
    dsig[:, 1, 0] = dsig[:, 0, 1]

    T = temperature_matrix(params)
    gains = lyapunov_operator(sig, T - params.gamma * dsig)

    times = params.tf * np.arange(n_steps + 1) / n_steps
    sigmas = np.concatenate([sig, sig[:1]], axis=0)
    gains = np.concatenate([gains, gains[:1]], axis=0)
    return ControlSchedule(times=times, gains=gains, sigmas_ref=sigmas)


def static_schedule(sigma: np.ndarray, params: ThermoParams,
                    n_steps: int = 64) -> ControlSchedule:
    """Constant-gain schedule whose stationary covariance is sigma.

    The gain is the Lyapunov operator of sigma applied to the temperature
    matrix, so sigma is a fixed point of the covariance equation; with
    unequal bath temperatures the resulting state is a heat-conducting
    nonequilibrium steady state.
    """
    sigma = np.asarray(sigma, dtype=float)
    require_spd(sigma)
    K = lyapunov_operator(sigma, temperature_matrix(params))
    times = params.tf * np.arange(n_steps + 1) / n_steps
    gains = np.broadcast_to(K, (n_steps + 1, 2, 2)).copy()
    sigmas = np.broadcast_to(sigma, (n_steps + 1, 2, 2)).copy()
    return ControlSchedule(times=times, gains=gains, sigmas_ref=sigmas)


def lyapunov_residuals(schedule: ControlSchedule, params: ThermoParams) -> np.ndarray:
    """Per-grid-point residual of gamma*dSigma/dt + K Sigma + Sigma K - T.

    dSigma/dt is reconstructed spectrally from sigmas_ref; the residual is
    the max-norm per grid point.
    """
    sig = schedule.sigmas_ref[:-1]
    dsig = np.empty_like(sig)
    period = schedule.times[-1] - schedule.times[0]
    for i, j in ((0, 0), (0, 1), (1, 1)):
        dsig[:, i, j] = fft_derivative(sig[:, i, j], period)
    dsig[:, 1, 0] = dsig[:, 0, 1]
    K = schedule.gains[:-1]
    T = temperature_matrix(params)
    res = params.gamma * dsig + K @ sig + sig @ K - T
    res = np.max(np.abs(res), axis=(1, 2))
    return np.concatenate([res, res[:1]])


# ---------------------------------------------------------------------------
# covariance-level propagation
# ---------------------------------------------------------------------------

def propagate_lyapunov(schedule: ControlSchedule, sigma0: np.ndarray,
                       params: ThermoParams) -> CovariancePath:
    """RK4 integration of the covariance equation under the schedule's gains.

    The main chain advances two grid intervals per RK4 step so that all stage
    gains are exact grid values (n_intervals must be even); odd grid points
    are filled by auxiliary single steps for output only.  Raises
    LostPositivity if the integrated covariance leaves the SPD cone.
    """
    sigma0 = np.asarray(sigma0, dtype=float)
    require_spd(sigma0)
    m = schedule.n_intervals
    if m % 2 != 0:
        raise ValueError("schedule must have an even number of intervals")
    gamma = params.gamma
    T = temperature_matrix(params)

    def rhs(sig, K):
        return (-(K @ sig) - (sig @ K) + T) / gamma

    h = schedule.spacing
    sigmas = np.empty((m + 1, 2, 2))
    dots = np.empty((m + 1, 2, 2))
    sigmas[0] = sigma0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(0, m, 2):
            s = sigmas[k]
            k1 = rhs(s, schedule.gains[k])
            k2 = rhs(s + h * k1, schedule.gains[k + 1])
            k3 = rhs(s + h * k2, schedule.gains[k + 1])
            k4 = rhs(s + 2 * h * k3, schedule.gains[k + 2])
            sigmas[k + 2] = s + (h / 3.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            # dense fill of the intermediate grid point (output only)
            km = 0.5 * (schedule.gains[k] + schedule.gains[k + 1])
            j1 = k1
            j2 = rhs(s + 0.5 * h * j1, km)
            j3 = rhs(s + 0.5 * h * j2, km)
            j4 = rhs(s + h * j3, schedule.gains[k + 1])
            sigmas[k + 1] = s + (h / 6.0) * (j1 + 2 * j2 + 2 * j3 + j4)
            for idx in (k + 1, k + 2):
                sig = sigmas[idx]
                det = sig[0, 0] * sig[1, 1] - sig[0, 1] * sig[1, 0]
                if not (np.isfinite(sig).all() and sig[0, 0] + sig[1, 1] > 0
                        and det > 0):
                    raise LostPositivity(
                        f"covariance lost positivity at t={schedule.times[idx]:.6g};"
                        " reduce the schedule spacing")
    for idx in range(m + 1):
        dots[idx] = rhs(sigmas[idx], schedule.gains[idx])
    return CovariancePath(times=schedule.times.copy(), sigmas=sigmas,
                          sigma_dots=dots)


# ---------------------------------------------------------------------------
# particle-level simulation
# ---------------------------------------------------------------------------

def _step_generator(seed: int, step: int) -> np.random.Generator:
    """Counter-based stream: a fresh Philox keyed by (seed, step)."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + step))


def initial_ensemble(sigma0: np.ndarray, n: int, seed: int) -> EnsembleState:
    """Exact Gaussian ensemble N(0, sigma0) via Cholesky of sigma0."""
    sigma0 = np.asarray(sigma0, dtype=float)
    require_spd(sigma0)
    chol = np.linalg.cholesky(sigma0)
    z = _step_generator(seed, 2**64 - 1).standard_normal((n, 2))
    return EnsembleState(positions=z @ chol.T, seed=seed, step=0)


def simulate_ensemble(schedule: ControlSchedule, params: ThermoParams,
                      n: int, dt: float, seed: int,
                      return_state: bool = False):
    """Euler-Maruyama ensemble simulation of the two-bath Langevin dynamics.

    dt must divide the schedule grid spacing; the gain is held constant
    within each schedule interval (zero-order hold).  Positions start from
    N(0, sigmas_ref[0]).  Raises UnstableIntegration if any |coordinate|
    exceeds 1e6 * ell_r.  Returns the EnergeticsEstimate, or a tuple
    (estimate, EnsembleState) with the final positions if return_state is
    set.
    """
    if n < 1000:
        raise ValueError("n must be >= 1000 for meaningful standard errors")
    if dt <= 0:
        raise ValueError("dt must be positive")
    spacing = schedule.spacing
    substeps = int(round(spacing / dt))
    if substeps < 1 or abs(substeps * dt - spacing) > 1e-9 * spacing:
        raise ValueError("dt must divide the schedule grid spacing")

    gamma = params.gamma
    amp = np.sqrt(2.0 * params.kB * np.array([params.Tx, params.Ty]) * dt / gamma)
    bound = 1e6 * params.ell_r

    state = initial_ensemble(schedule.sigmas_ref[0], n, seed)
    pos = state.positions
    work = np.zeros(n)
    heat = np.zeros((n, 2))
    energy0 = 0.5 * np.einsum("ni,ij,nj->n", pos, schedule.gains[0], pos)

    m = schedule.n_intervals
    for k in range(m):
        K = schedule.gains[k]
        force = pos @ K
        for sub in range(substeps):
            rng = _step_generator(seed, k * substeps + sub)
            noise = rng.standard_normal((n, 2))
            new_pos = pos - (dt / gamma) * force + noise * amp
            new_force = new_pos @ K
            heat += 0.5 * (force + new_force) * (new_pos - pos)
            pos, force = new_pos, new_force
        if np.max(np.abs(pos)) > bound:
            raise UnstableIntegration(
                f"positions exceeded {bound:.3g} during interval {k}")
        dK = schedule.gains[k + 1] - K
        if np.any(dK):
            work += 0.5 * np.einsum("ni,ij,nj->n", pos, dK, pos)

    energy1 = 0.5 * np.einsum("ni,ij,nj->n", pos, schedule.gains[-1], pos)
    delta_e = energy1 - energy0
    sqrt_n = math.sqrt(n)

    def stat(x):
        return float(x.mean()), float(x.std(ddof=1) / sqrt_n)

    w_mean, w_se = stat(work)
    qx_mean, qx_se = stat(heat[:, 0])
    qy_mean, qy_se = stat(heat[:, 1])
    de_mean, de_se = stat(delta_e)
    estimate = EnergeticsEstimate(
        work_in_mean=w_mean, work_in_se=w_se,
        heat_x_mean=qx_mean, heat_x_se=qx_se,
        heat_y_mean=qy_mean, heat_y_se=qy_se,
        delta_e_mean=de_mean, delta_e_se=de_se,
        n_particles=n)
    if return_state:
        return estimate, EnsembleState(positions=pos, seed=seed,
                                       step=m * substeps)
    return estimate


# ---------------------------------------------------------------------------
# analytic per-bath heats and the comparison report
# ---------------------------------------------------------------------------

def bath_heats_analytic(schedule: ControlSchedule, params: ThermoParams
                        ) -> tuple[float, float]:
    """Per-bath heat uptakes over the schedule, from the covariance ODE.

    Rate into the system from bath i: (kB T_i K_ii - (K Sigma K)_ii) / gamma,
    integrated by the trapezoid rule on the schedule grid with the reference
    covariances.
    """
    K = schedule.gains
    S = schedule.sigmas_ref
    ksk = K @ S @ K
    kbt = params.kB * np.array([params.Tx, params.Ty])
    rates = (kbt[None, :] * np.stack([K[:, 0, 0], K[:, 1, 1]], axis=1)
             - np.stack([ksk[:, 0, 0], ksk[:, 1, 1]], axis=1)) / params.gamma
    qx = float(_trapezoid(rates[:, 0], schedule.times))
    qy = float(_trapezoid(rates[:, 1], schedule.times))
    return qx, qy


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    analytic: float
    mc_mean: float
    mc_se: float
    z: float


@dataclass(frozen=True)
class ComparisonReport:
    """Analytic vs Monte Carlo table with z-scores; flags any |z| > 3."""

    rows: tuple[ComparisonRow, ...]
    analytic_q_qs: float
    analytic_q_diss: float
    analytic_w_out: float
    analytic_efficiency: float | None
    n_particles: int

    @property
    def max_abs_z(self) -> float:
        return max(abs(row.z) for row in self.rows)

    @property
    def flagged(self) -> list[str]:
        return [row.name for row in self.rows if abs(row.z) > 3.0]

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_dict(self) -> dict:
        return {
            "analytic": {
                "q_qs": self.analytic_q_qs,
                "q_diss": self.analytic_q_diss,
                "w_out": self.analytic_w_out,
                "efficiency": self.analytic_efficiency,
            },
            "rows": [
                {"name": row.name, "analytic": row.analytic,
                 "mc_mean": row.mc_mean, "mc_se": row.mc_se, "z": row.z}
                for row in self.rows
            ],
            "n_particles": self.n_particles,
            "max_abs_z": self.max_abs_z,
            "flagged": self.flagged,
            "passed": self.passed,
        }


def _zscore(diff: float, se: float, scale: float) -> float:
    floor = 1e-14 * max(scale, 1.0)
    return diff / max(se, floor)


def compare_report(cycle: Cycle, params: ThermoParams, mc: EnergeticsEstimate,
                   schedule: ControlSchedule | None = None) -> ComparisonReport:
    """Tabulate analytic cycle functionals against a Monte Carlo estimate."""
    from .functionals import cycle_functionals

    if mc.n_particles < 1:
        raise ValueError("Monte Carlo estimate has no particles")
    fn = cycle_functionals(cycle, params)
    if schedule is None:
        schedule = schedule_from_cycle(cycle, params)
    qx_ref, qy_ref = bath_heats_analytic(schedule, params)
    scale = abs(fn.q_qs) + abs(fn.q_diss) + 1e-30

    rows = (
        ComparisonRow("work_extracted", fn.w_out, -mc.work_in_mean,
                      mc.work_in_se,
                      _zscore(-mc.work_in_mean - fn.w_out, mc.work_in_se, scale)),
        ComparisonRow("heat_x", qx_ref, mc.heat_x_mean, mc.heat_x_se,
                      _zscore(mc.heat_x_mean - qx_ref, mc.heat_x_se, scale)),
        ComparisonRow("heat_y", qy_ref, mc.heat_y_mean, mc.heat_y_se,
                      _zscore(mc.heat_y_mean - qy_ref, mc.heat_y_se, scale)),
        ComparisonRow("total_heat", fn.w_out,
                      mc.heat_x_mean + mc.heat_y_mean,
                      math.hypot(mc.heat_x_se, mc.heat_y_se),
                      _zscore(mc.heat_x_mean + mc.heat_y_mean - fn.w_out,
                              math.hypot(mc.heat_x_se, mc.heat_y_se), scale)),
    )
    return ComparisonReport(
        rows=rows,
        analytic_q_qs=fn.q_qs,
        analytic_q_diss=fn.q_diss,
        analytic_w_out=fn.w_out,
        analytic_efficiency=fn.efficiency,
        n_particles=mc.n_particles,
    )
