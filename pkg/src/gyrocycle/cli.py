"""Command-line interface.

Subcommands:

  optimize        solve the work-maximization problem at one mu (or one
                  physical parameter set) and emit cycle.json / cycle.csv
  sweep           trace the optimal-cycle envelope over a mu grid, emit
                  sweep.csv (and an operating-point row when --eta is given)
  simulate        verify a stored cycle against Langevin Monte Carlo, emit
                  verify.json
  geometry-check  tabulate metric, work density, and curvature cross-checks

Exit codes: 0 success, 2 usage/config error (including NotConverged),
3 no positive-work cycle at this mu, 4 Monte Carlo verification failure.

All outputs are deterministic for a fixed seed (headers carry the
configuration and tool version, never timestamps), so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ChartViolation, CollapsedCycle, GyratorError, NoCrossing
from .functionals import Cycle, cycle_functionals, efficiency_bound
from .manifold import (
    R_MIN,
    PolarPoint,
    ThermoParams,
    gaussian_curvature,
    metric,
    numeric_gaussian_curvature,
    work_density_arrays,
)
from .optimizer import (
    OptimizerConfig,
    foc_profile,
    initial_cycle,
    operating_point_for_efficiency,
    optimize_cycle,
    sweep_mu,
)
from .simulator import compare_report, schedule_from_cycle, simulate_ensemble


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

_PHYSICAL_DEFAULTS = {"gamma": 1.0, "Tx": 3.0, "Ty": 1.0, "kB": 1.0, "ell_r": 1.0}


def _merged(args: argparse.Namespace, key: str, default=None):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    return args.config_data.get(key, default)


def _load_config(args: argparse.Namespace) -> None:
    args.config_data = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            args.config_data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(args.config_data, dict):
            raise ConfigError("config file must contain a JSON object")


def _resolve_params(args: argparse.Namespace) -> tuple[ThermoParams, str]:
    """Build ThermoParams from exactly one of {mu, tf} plus physical flags."""
    mu = _merged(args, "mu")
    tf = _merged(args, "tf")
    if (mu is None) == (tf is None):
        raise ConfigError("exactly one of --mu and --tf must be given")
    if mu is not None:
        if mu <= 0:
            raise ConfigError("mu must be positive")
        return ThermoParams.nondimensional(mu), "nondimensional"
    phys = {k: _merged(args, k, v) for k, v in _PHYSICAL_DEFAULTS.items()}
    try:
        params = ThermoParams(tf=tf, **phys)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return params, "physical"


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(_merged(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(command: str, config: dict) -> dict:
    return {"tool": "gyrocycle", "version": __version__, "command": command,
            "config": config}


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: dict, columns: list[str], rows) -> None:
    lines = [f"# {k} = {v}" for k, v in sorted(_flatten(header).items())]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_optimize(args: argparse.Namespace) -> int:
    params, mode = _resolve_params(args)
    mu = params.mu
    n_points = int(_merged(args, "n_points", 256))
    seed = int(_merged(args, "seed", 0))
    cfg = OptimizerConfig(n_points=n_points, seed=seed)
    init = initial_cycle(cfg.initial_center, cfg.initial_radius, n_points)
    result = optimize_cycle(init, mu, cfg)

    out = _out_dir(args)
    config = {"mode": mode, "mu": mu, "n_points": n_points, "seed": seed,
              "params": vars(params) | {"T_r": params.T_r, "t_c": params.t_c}}
    # stored functionals use the polygon rules so that re-evaluating a loaded
    # cycle reproduces them bit for bit
    fn = cycle_functionals(result.cycle, params)
    payload = {
        "header": _header("optimize", config),
        "mu": mu,
        "cycle": {
            "r": result.cycle.r.tolist(),
            "theta": result.cycle.theta.tolist(),
            "orientation": result.cycle.orientation,
        },
        "functionals": {
            "area_f": fn.area_f, "length": fn.length, "q_qs": fn.q_qs,
            "q_diss": fn.q_diss, "w_out": fn.w_out,
            "efficiency": fn.efficiency,
        },
        "objective": result.objective,
        "foc_residual": result.foc_residual,
        "foc_mean": result.foc_mean,
        "iterations": result.iterations,
        "converged": result.converged,
        "eta_bound_4pi": 1.0 - 4.0 * math.pi * mu,
        "eta_bound_8pi_conjecture": efficiency_bound(mu, 0.5),
    }
    if mode == "physical":
        payload["physical"] = {
            "w_out": fn.w_out, "q_qs": fn.q_qs, "q_diss": fn.q_diss,
            "kB_Tr": params.kB * params.T_r,
        }
    _write_json(out / "cycle.json", payload)

    kappa, f, ratio = foc_profile(result.cycle)
    _write_csv(out / "cycle.csv", _header("optimize", config),
               ["r", "theta", "kappa", "f", "kappa_over_f"],
               zip(result.cycle.r, result.cycle.theta, kappa, f, ratio))

    if not result.converged:
        print(f"optimize: not converged after {result.iterations} iterations "
              f"(grad_norm={result.grad_norm:.3g})", file=sys.stderr)
        return 2
    return 0


def _parse_mu_list(args: argparse.Namespace) -> list[float]:
    mus: list[float] = []
    raw = _merged(args, "mu")
    if raw is not None:
        if isinstance(raw, (int, float)):
            mus = [float(raw)]
        elif isinstance(raw, str):
            mus = [float(tok) for tok in raw.split(",") if tok.strip()]
        else:
            mus = [float(v) for v in raw]
    rng = _merged(args, "mu_range")
    if rng:
        try:
            lo, hi, num = rng.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
        except ValueError as exc:
            raise ConfigError("--mu-range must be MIN:MAX:COUNT") from exc
        if not (0 < lo < hi and num >= 2):
            raise ConfigError("--mu-range needs 0 < MIN < MAX and COUNT >= 2")
        mus.extend(np.geomspace(lo, hi, num).tolist())
    return sorted(set(mus))


def cmd_sweep(args: argparse.Namespace) -> int:
    mus = _parse_mu_list(args)
    if not mus:
        raise ConfigError("sweep needs a mu grid: --mu LIST or --mu-range MIN:MAX:COUNT")
    n_points = int(_merged(args, "n_points", 256))
    seed = int(_merged(args, "seed", 0))
    cfg = OptimizerConfig(n_points=n_points, seed=seed)
    records = sweep_mu(mus, cfg)

    eta = _merged(args, "eta")
    extra = []
    if eta is not None:
        eta_mu = _merged(args, "eta_mu")
        if eta_mu is None:
            eta_mu = math.sqrt(mus[0] * mus[-1])
        point = operating_point_for_efficiency(float(eta), float(eta_mu), records)
        extra.append(point)

    out = _out_dir(args)
    config = {"mu_grid": mus, "n_points": n_points, "seed": seed,
              "eta": eta}
    columns = ["mu", "ell", "area_f", "w_star", "eta", "eta_bound_4pi",
               "eta_bound_8pi_conjecture", "foc_residual", "converged",
               "row_kind"]

    def record_row(rec, kind):
        return [rec.mu, rec.length, rec.area_f, rec.w_star, rec.efficiency,
                1.0 - 4.0 * math.pi * rec.mu, efficiency_bound(rec.mu, 0.5),
                rec.foc_residual, rec.converged, kind]

    rows = [record_row(rec, "optimum") for rec in records]
    rows += [record_row(rec, "operating_point") for rec in extra]
    _write_csv(out / "sweep.csv", _header("sweep", config), columns, rows)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cycle_path = Path(_merged(args, "cycle", "cycle.json"))
    if not cycle_path.exists():
        raise ConfigError(f"cycle file not found: {cycle_path}")
    try:
        stored = json.loads(cycle_path.read_text())
        raw_params = stored["header"]["config"]["params"]
        params = ThermoParams(
            gamma=raw_params["gamma"], Tx=raw_params["Tx"], Ty=raw_params["Ty"],
            kB=raw_params["kB"], ell_r=raw_params["ell_r"], tf=raw_params["tf"])
        cycle = Cycle.from_arrays(np.array(stored["cycle"]["r"]),
                                  np.array(stored["cycle"]["theta"]),
                                  orientation=stored["cycle"]["orientation"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse cycle file {cycle_path}: {exc}") from exc

    n = int(_merged(args, "particles", 20000))
    dt = _merged(args, "dt")
    dt = params.t_c * 1e-3 if dt is None else float(dt)
    seed = int(_merged(args, "seed", 0))

    n_steps = _schedule_steps(params.tf, dt, cycle.n_points)
    dt_exact = params.tf / (n_steps * round(params.tf / (n_steps * dt)))
    schedule = schedule_from_cycle(cycle, params, n_steps)
    mc = simulate_ensemble(schedule, params, n, dt_exact, seed)
    report = compare_report(cycle, params, mc, schedule)

    out = _out_dir(args)
    config = {"cycle_file": str(cycle_path), "particles": n, "dt": dt_exact,
              "seed": seed, "n_steps": n_steps,
              "params": vars(params) | {"T_r": params.T_r, "t_c": params.t_c}}
    payload = {
        "header": _header("simulate", config),
        "monte_carlo": {
            "work_in": [mc.work_in_mean, mc.work_in_se],
            "heat_x": [mc.heat_x_mean, mc.heat_x_se],
            "heat_y": [mc.heat_y_mean, mc.heat_y_se],
            "delta_e": [mc.delta_e_mean, mc.delta_e_se],
            "n_particles": mc.n_particles,
        },
        "comparison": report.to_dict(),
    }
    _write_json(out / "verify.json", payload)
    if not report.passed:
        print(f"simulate: verification failed, |z| > 3 for {report.flagged}",
              file=sys.stderr)
        return 4
    return 0


def _schedule_steps(tf: float, dt: float, n_points: int) -> int:
    """Largest schedule grid compatible with dt and the 16x oversampling rule."""
    total = int(round(tf / dt))
    if total < 1 or abs(total * dt - tf) > 1e-6 * tf:
        raise ConfigError("dt must divide the cycle period tf")
    floor_steps = 16 * n_points
    if total <= floor_steps:
        return total
    for substeps in range(total // floor_steps, 0, -1):
        if total % substeps == 0:
            return total // substeps
    return total


def cmd_geometry_check(args: argparse.Namespace) -> int:
    r_lo = float(_merged(args, "r_lo", R_MIN))
    r_hi = float(_merged(args, "r_hi", 3.0))
    n_r = int(_merged(args, "n_r", 120))
    if r_lo < R_MIN:
        print(f"geometry-check: r grid clamped to r_min={R_MIN}", file=sys.stderr)
        r_lo = R_MIN
    if r_hi <= r_lo:
        raise ConfigError("need r_hi > r_lo")

    out = _out_dir(args)
    config = {"r_lo": r_lo, "r_hi": r_hi, "n_r": n_r}
    r = np.linspace(r_lo, r_hi, n_r)
    rows = []
    max_dev = 0.0
    for ri in r:
        m = metric(ri)
        ka = float(gaussian_curvature(ri))
        kn = float(numeric_gaussian_curvature(ri))
        max_dev = max(max_dev, abs(ka - kn))
        rows.append([ri, m.e_rr, m.e_tt, m.sqrt_det,
                     float(work_density_arrays(ri, math.pi / 2)), ka, kn,
                     abs(ka - kn)])
    _write_csv(out / "geometry.csv", _header("geometry-check", config),
               ["r", "e_rr", "e_tt", "sqrt_det", "f_at_theta_pi2",
                "curvature_analytic", "curvature_numeric", "deviation"],
               rows)

    theta = np.linspace(0.0, 2.0 * math.pi, 97)
    frows = []
    for ri in r:
        for ti in theta:
            frows.append([ri, ti, float(work_density_arrays(ri, ti))])
    _write_csv(out / "fsurface.csv", _header("geometry-check", config),
               ["r", "theta", "f"], frows)

    print(f"geometry-check: max curvature deviation {max_dev:.3e} over "
          f"r in [{r_lo}, {r_hi}]")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gyrocycle",
        description="Optimal finite-time cycles of a Brownian gyrator heat "
                    "engine: optimization, sweeps, and Monte Carlo verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default: .)")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")

    def physical(p):
        p.add_argument("--mu", help="dimensionless t_c/tf (nondimensional mode)")
        p.add_argument("--tf", type=float, help="cycle period (physical mode)")
        p.add_argument("--gamma", type=float, help="viscosity")
        p.add_argument("--Tx", type=float, help="hot bath temperature")
        p.add_argument("--Ty", type=float, help="cold bath temperature")
        p.add_argument("--kB", type=float, help="Boltzmann constant")
        p.add_argument("--ell-r", dest="ell_r", type=float,
                       help="characteristic length")

    p_opt = sub.add_parser("optimize", help="maximize work output at one mu")
    physical(p_opt)
    p_opt.add_argument("--n-points", dest="n_points", type=int)
    common(p_opt)
    p_opt.set_defaults(func=cmd_optimize, mu_is_scalar=True)

    p_sweep = sub.add_parser("sweep", help="trace the optimal envelope over mu")
    p_sweep.add_argument("--mu", help="comma-separated mu values")
    p_sweep.add_argument("--mu-range", dest="mu_range",
                         help="log-spaced grid MIN:MAX:COUNT")
    p_sweep.add_argument("--n-points", dest="n_points", type=int)
    p_sweep.add_argument("--eta", type=float,
                         help="also emit the operating point for this efficiency")
    p_sweep.add_argument("--eta-mu", dest="eta_mu", type=float,
                         help="mu at which the operating point is computed "
                              "(default: geometric mean of the grid)")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="Monte Carlo verification of a cycle")
    p_sim.add_argument("--cycle", help="path to cycle.json (default ./cycle.json)")
    p_sim.add_argument("--particles", type=int, help="ensemble size (default 20000)")
    p_sim.add_argument("--dt", type=float,
                       help="integration step (default t_c/1000)")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_geo = sub.add_parser("geometry-check",
                           help="metric, density, and curvature tables")
    p_geo.add_argument("--r-lo", dest="r_lo", type=float)
    p_geo.add_argument("--r-hi", dest="r_hi", type=float)
    p_geo.add_argument("--n-r", dest="n_r", type=int)
    common(p_geo)
    p_geo.set_defaults(func=cmd_geometry_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _load_config(args)
        if getattr(args, "mu_is_scalar", False) and getattr(args, "mu", None) is not None:
            args.mu = float(args.mu)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CollapsedCycle as exc:
        print(f"no positive-work cycle: {exc}", file=sys.stderr)
        return 3
    except (ChartViolation, NoCrossing, GyratorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
