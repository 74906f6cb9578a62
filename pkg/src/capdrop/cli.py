"""Command-line interface: config parsing, dispatch, and result files.

Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure (with an
error.json diagnostic when an output directory is available).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import equilibrium as eq
from .energy import PhysicalParams, energy, volume_functional
from .errors import CapdropError, ConfigError
from .geometry import SurfaceProfile, profile_to_csv, to_cartesian
from .moving_frame import recentre
from .relax import run as relax_run
from .spectral import (
    build_xi56,
    constrained_eigen,
    kernel_ode_residual,
    second_variation,
    shift_function,
    sigma_form,
)
from .verify import run_verification

SCHEMA_VERSION = 1

COMMANDS = ("equilibrate", "sweep-eps", "spectrum", "kernel", "recentre", "relax", "verify")

_PARAM_KEYS = {
    "g": (float, None),
    "sigma": (float, None),
    "gamma_jump": (float, None),
    "volume": (float, None),
    "theta1": (float, 0.0),
    "theta2": (float, 0.0),
    "kappa": (float, 1.0),
}

_GRID_KEYS = {"n": (int, 400)}

_RUN_KEYS = {
    "eps": (float, 1e-6),
    "eps_schedule": (str, "1e-2,1e-3,1e-4,1e-5,1e-6"),
    "perturbation": (str, ""),
    "seed": (int, 0),
    "t_end": (float, 6.0),
    "dt0": (float, 1e-5),
    "delta": (float, 0.05),
    "subspace": (str, "doubly-constrained"),
    "n_eigen": (int, 8),
    "write_eigenvectors": (bool, False),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration: physical parameters, grid resolution,
    and per-command options."""

    params: PhysicalParams
    grid_n: int
    options: dict = field(default_factory=dict)


def _parse_scalar(kind, raw, key):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"key '{key}': cannot parse {raw!r}", key=key) from exc


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` sections [params], [grid], [run]; `#` comments.

    Unknown sections or keys are errors (fail-closed), as are physically
    inadmissible parameters.
    """
    sections = {"params": {}, "grid": {}, "run": {}}
    current = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in sections:
                raise ConfigError(f"line {lineno}: unknown section [{name}]", key=name)
            current = name
            continue
        if "=" not in line or current is None:
            raise ConfigError(f"line {lineno}: expected key = value inside a section")
        key, raw = (part.strip() for part in line.split("=", 1))
        allowed = {"params": _PARAM_KEYS, "grid": _GRID_KEYS, "run": _RUN_KEYS}[current]
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{current}]", key=key)
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'", key=key)
        sections[current][key] = _parse_scalar(allowed[key][0], raw, key)

    for key, (_, default) in _PARAM_KEYS.items():
        if key not in sections["params"]:
            if default is None:
                raise ConfigError(f"missing required key '{key}' in [params]", key=key)
            sections["params"][key] = default
    try:
        params = PhysicalParams(**sections["params"])
    except ValueError as exc:
        raise ConfigError(f"invalid [params]: {exc}", key=str(exc).split()[0]) from exc

    grid_n = sections["grid"].get("n", _GRID_KEYS["n"][1])
    if grid_n < 4:
        raise ConfigError("key 'n': grid must have at least 4 cells", key="n")

    options = {key: sections["run"].get(key, default) for key, (_, default) in _RUN_KEYS.items()}
    if options["subspace"] not in ("unconstrained", "mass-constrained", "doubly-constrained"):
        raise ConfigError(f"key 'subspace': unknown value {options['subspace']!r}", key="subspace")
    schedule = _parse_schedule(options["eps_schedule"])
    if any(e <= 0 for e in schedule) or any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError("key 'eps_schedule': must be positive and strictly decreasing",
                          key="eps_schedule")
    _parse_perturbation(options["perturbation"])  # validate the grammar early
    return RunConfig(params=params, grid_n=grid_n, options=options)


def _parse_schedule(raw: str):
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"key 'eps_schedule': cannot parse {raw!r}", key="eps_schedule") from exc


def _parse_perturbation(raw: str):
    """`amp:mode[,amp:mode...]` cosine sum, or `random:amp` (seeded)."""
    raw = raw.strip()
    if not raw:
        return []
    terms = []
    for tok in raw.split(","):
        tok = tok.strip()
        try:
            left, right = tok.split(":")
            if left.strip() == "random":
                terms.append(("random", float(right)))
            else:
                terms.append((float(left), int(right)))
        except (ValueError, AttributeError) as exc:
            raise ConfigError(
                f"key 'perturbation': cannot parse term {tok!r}", key="perturbation"
            ) from exc
    return terms


def _perturbed_profile(config: RunConfig, seed: int) -> SurfaceProfile:
    params = config.params
    base = eq.flat_cap(params, config.grid_n)
    terms = _parse_perturbation(config.options["perturbation"])
    if not terms:
        return base
    th = base.grid.nodes
    bump = np.zeros_like(th)
    rng = np.random.default_rng(seed)
    for term in terms:
        if term[0] == "random":
            amps = rng.normal(0.0, term[1], size=6)
            bump += sum(a * np.cos(k * th) for k, a in enumerate(amps, start=1))
        else:
            bump += term[0] * np.cos(term[1] * th)
    return eq.rescale_to_volume(SurfaceProfile(base.grid, base.rho + bump), params.volume)


def _sanitize(value):
    """Strict-JSON payloads: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _json_text(payload) -> str:
    return json.dumps(_sanitize(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\r\n".join(lines) + "\r\n"


def _solution_payload(sol, params) -> dict:
    y_lo, y_hi = sol.young_angles
    return {
        "schema_version": SCHEMA_VERSION,
        "multiplier": sol.multiplier,
        "eps_used": sol.eps_used,
        "el_residual": sol.el_residual,
        "pde_residual": sol.pde_residual,
        "bc_residuals": list(sol.bc_residuals),
        "contact_angles": list(sol.contact_angles),
        "young_angles": [y_lo, y_hi],
        "young_target": params.young_angle,
        "volume": volume_functional(sol.profile),
        "geometric_area": 0.5 * volume_functional(sol.profile),
        "energy": energy(sol.profile, params),
        "iterations": sol.iterations,
    }


def _equilibrate(config: RunConfig, out: Path, plots: bool):
    params = config.params
    schedule = _parse_schedule(config.options["eps_schedule"])
    sol, _ = eq.continuation(params, schedule, eq.flat_cap(params, config.grid_n))
    (out / "profile.csv").write_text(profile_to_csv(sol.profile))
    (out / "solution.json").write_text(_json_text(_solution_payload(sol, params)))
    if plots:
        from .plots import save_profile_plot

        save_profile_plot(out / "profile.svg", sol.profile)
    return 0


def _sweep_eps(config: RunConfig, out: Path, plots: bool):
    params = config.params
    schedule = _parse_schedule(config.options["eps_schedule"])
    sol, report = eq.continuation(params, schedule, eq.flat_cap(params, config.grid_n))
    payload = {
        "schema_version": SCHEMA_VERSION,
        "eps_schedule": report.eps_schedule,
        "sup_rho_prime": report.sup_rho_prime,
        "bv_norms": report.bv_norms,
        "multipliers": report.multipliers,
        "energies": report.energies,
        "energies_nonincreasing": bool(np.all(np.diff(report.energies) <= 1e-12)),
        "multipliers_positive": bool(np.all(np.array(report.multipliers) > 0.0)),
    }
    (out / "continuation.json").write_text(_json_text(payload))
    if plots:
        from .plots import save_profile_plot

        save_profile_plot(out / "profile.svg", sol.profile)
    return 0


def _equilibrium_profile(config: RunConfig):
    params = config.params
    if params.g == 0.0 and params.gamma_jump == 0.0:
        return eq.flat_cap(params, config.grid_n)
    if params.theta1 == 0.0 and params.theta2 == 0.0 and config.grid_n % 2 == 0:
        return eq.shoot_symmetric(params, config.grid_n).profile
    schedule = _parse_schedule(config.options["eps_schedule"])
    sol, _ = eq.continuation(params, schedule, eq.flat_cap(params, config.grid_n))
    return sol.profile


def _spectrum(config: RunConfig, out: Path, plots: bool):
    params = config.params
    rho0 = _equilibrium_profile(config)
    form = sigma_form(rho0, params)
    dec = constrained_eigen(form, config.options["subspace"])
    k = min(config.options["n_eigen"], len(dec.eigenvalues))
    xis = shift_function(rho0)
    w = rho0.grid.weights
    mode = dec.eigenvectors[:, 0]
    align = float(
        abs(np.dot(w * mode, xis))
        / np.sqrt(np.dot(w * mode, mode) * np.dot(w * xis, xis))
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "subspace": dec.subspace,
        "eigenvalues": [float(v) for v in dec.eigenvalues[:k]],
        "gap": float(dec.eigenvalues[0]),
        "xis_alignment": align,
        "eigen_residual": dec.max_residual,
    }
    (out / "spectrum.json").write_text(_json_text(payload))
    if config.options["write_eigenvectors"]:
        rows = np.column_stack([rho0.grid.nodes] + [dec.eigenvectors[:, i] for i in range(k)])
        header = ["theta"] + [f"mode_{i}" for i in range(k)]
        (out / "eigenvectors.csv").write_text(_csv_text(header, rows))
    if plots:
        from .plots import save_spectrum_plot

        save_spectrum_plot(out / "spectrum.svg", dec.eigenvalues[:k], gap=payload["gap"])
    return 0


def _kernel(config: RunConfig, out: Path, plots: bool):
    params = config.params
    rho0 = _equilibrium_profile(config)
    kc = build_xi56(rho0)
    xis = shift_function(rho0)
    resid = kernel_ode_residual(rho0, params, xis, 0.0)
    inner = np.abs(rho0.grid.nodes - np.pi / 2) > 0.1
    inner[:3] = inner[-3:] = False
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kernel_ode_residual_sup": float(np.max(np.abs(resid[inner]))),
        "second_variation_xis": float(second_variation(rho0, params, xis)),
        "xi5_sup": float(np.nanmax(np.abs(kc.xi5))),
        "xi6_jump": float(abs(kc.xi6[kc.masked_index - 1] - kc.xi6[kc.masked_index + 1])),
        "masked_index": kc.masked_index,
    }
    rows = np.column_stack(
        (rho0.grid.nodes, kc.Q_values, kc.xi5, kc.xi6, xis)
    )
    (out / "kernel.csv").write_text(_csv_text(["theta", "Q", "xi5", "xi6", "xi_s"], rows))
    (out / "kernel.json").write_text(_json_text(payload))
    if plots:
        from .plots import save_kernel_plot

        save_kernel_plot(out / "kernel.svg", rho0.grid.nodes, kc.xi5, kc.xi6)
    return 0


def _recentre(config: RunConfig, out: Path, plots: bool):
    rho0 = _equilibrium_profile(config)
    curve = to_cartesian(_perturbed_profile(config, config.options["seed"])).translated(
        config.options["delta"]
    )
    state = recentre(curve, rho0)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "pole_x": state.pole_x,
        "lambda": state.lam,
        "ortho_residual": state.ortho_residual,
        "l2_perturbation": state.l2_perturbation,
        "scan_minima": list(state.scan_minima),
    }
    (out / "frame.json").write_text(_json_text(payload))
    if plots:
        from .plots import save_profile_plot

        save_profile_plot(out / "frame.svg", state.profile_in_frame, reference=rho0)
    return 0


def _relax(config: RunConfig, out: Path, plots: bool):
    params = config.params
    rho0 = _equilibrium_profile(config)
    start = _perturbed_profile(config, config.options["seed"])
    trace = relax_run(
        start,
        params,
        t_end=config.options["t_end"],
        dt0=config.options["dt0"],
        equilibrium=rho0,
    )
    rows = np.column_stack(
        (
            trace.times,
            trace.energies,
            trace.volumes,
            trace.pole_positions,
            trace.contact_rhos[:, 0],
            trace.contact_rhos[:, 1],
            trace.l2_distance_to_equilibrium,
        )
    )
    (out / "trace.csv").write_text(
        _csv_text(["t", "E", "V", "pole_x", "rho_lo", "rho_hi", "dist"], rows)
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "decay_rate": trace.decay_rate,
        "fit_r2": trace.fit_r2,
        "final_pole": trace.final_pole,
        "final_err": trace.final_distance,
        "energy_monotone": bool(np.all(np.diff(trace.energies) <= 0.0)),
        "volume_drift": float(np.max(np.abs(trace.volumes - params.volume)) / params.volume),
    }
    (out / "trace.json").write_text(_json_text(payload))
    if plots:
        from .plots import save_trace_plot

        save_trace_plot(out / "energy.svg", trace)
    return 0


def _verify(config: RunConfig, out: Path, plots: bool):
    report = run_verification(config.params, config.grid_n, seed=config.options["seed"])
    (out / "verify.json").write_text(_json_text(report))
    for check in report["checks"]:
        mark = "PASS" if check["passed"] else ("info" if not check["gating"] else "FAIL")
        tol = check["tolerance"]
        tol_text = f"tol={tol:.3e}" if tol is not None else "informational"
        print(f"[{mark}] {check['name']}: value={check['value']:.3e} {tol_text}")
    return 0 if report["all_passed"] else 3


_HANDLERS = {
    "equilibrate": _equilibrate,
    "sweep-eps": _sweep_eps,
    "spectrum": _spectrum,
    "kernel": _kernel,
    "recentre": _recentre,
    "relax": _relax,
    "verify": _verify,
}


def dispatch(command: str, config: RunConfig, out_dir, plots: bool = False, seed=None) -> int:
    """Run one command against a parsed config, writing artifacts to out_dir."""
    if command not in _HANDLERS:
        return 1
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if seed is not None:
        config = RunConfig(config.params, config.grid_n, {**config.options, "seed": int(seed)})
    try:
        return _HANDLERS[command](config, out, plots)
    except CapdropError as exc:
        diag = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "error": type(exc).__name__,
            "message": str(exc),
        }
        (out / "error.json").write_text(_json_text(diag))
        print(f"error: {exc}", file=sys.stderr)
        return 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    parser = _Parser(prog="capdrop", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to a key=value config file")
    parser.add_argument("--out", default=".", help="output directory (default: cwd)")
    parser.add_argument("--plots", action="store_true", help="also render SVG figures")
    parser.add_argument("--seed", type=int, default=None, help="override the [run] seed")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return dispatch(args.command, config, args.out, plots=args.plots, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
