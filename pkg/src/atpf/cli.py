"""Batch front-end: flat-text configs, run orchestration, bit-specified artifacts.

Config files are flat ``key = value`` text ('#' starts a comment).  Keys:

    scenario      e.g. crack(0.1), const(3), affine(0,1,0)   [required]
    eps_list      comma-separated, strictly decreasing        [required]
    mesh_ratio    h = eps / mesh_ratio, default 4
    eta_rule      'eps^4' (default), 'eps^3', 'eps^2', or a fixed float value
    tol_energy    relative energy stagnation tolerance, default 1e-8
    tol_residual  residual tolerance, default 1e-7
    max_sweeps    default 500
    diagnostics   'all' (default), 'none', or a comma list of
                  inner_variation,flow,varifold,anzellotti,boundary,mu,theta
    out_dir       output directory, default 'out'
    threads       recorded in metadata; results are thread-count independent

Unknown keys are rejected by name.  Exit codes: 0 success, 1 usage/config
error, 2 solver not converged (artifacts still written).

State dumps are one JSON header line followed by the raw little-endian
float64 node values of u and then v, row-major; the header records grid,
parameters, scenario and the total energy so a dump is self-describing and
round-trips bit-exactly.  The energy CSV has the fixed column order
eps,eta,h,sweeps,E_elastic,E_pf_grad,E_pf_pot,E_total,discrepancy_L1,w_mass,
r_u,r_v with floats printed to 17 significant digits, so identical runs
produce byte-identical files.  Fields are also exported as legacy ASCII VTK
STRUCTURED_POINTS (u, v nodal; |grad w| per cell).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .assembly import ATParams, ATState
from .energetics import EnergyReport, energy_report, w_field
from .grid import Grid, GridSpec, cell_gradient, make_grid
from .scenarios import Scenario, parse_scenario
from .solver import ContinuationSchedule, StageResult, continuation_run
from .variations import ALL_DIAGNOSTICS, diagnostics_report

CSV_HEADER = ("eps,eta,h,sweeps,E_elastic,E_pf_grad,E_pf_pot,E_total,"
              "discrepancy_L1,w_mass,r_u,r_v")

KNOWN_KEYS = ("scenario", "eps_list", "mesh_ratio", "eta_rule", "tol_energy",
              "tol_residual", "max_sweeps", "diagnostics", "out_dir", "threads")

SCENARIO_DOMAINS = {"crack": (-1.0, 1.0, -1.0, 1.0)}
DEFAULT_DOMAIN = (0.0, 1.0, 0.0, 1.0)


class ConfigError(ValueError):
    pass


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class RunConfig:
    scenario: Scenario
    eps_list: tuple[float, ...]
    mesh_ratio: float = 4.0
    eta_rule: str | float = "eps^4"
    tol_energy: float = 1e-8
    tol_residual: float = 1e-7
    max_sweeps: int = 500
    diagnostics: set[str] = field(default_factory=lambda: set(ALL_DIAGNOSTICS))
    out_dir: str = "out"
    threads: int = 1

    @property
    def domain(self) -> tuple[float, float, float, float]:
        return SCENARIO_DOMAINS.get(self.scenario.name, DEFAULT_DOMAIN)

    def schedule(self) -> ContinuationSchedule:
        return ContinuationSchedule(
            eps_list=self.eps_list,
            mesh_ratio=self.mesh_ratio,
            eta_rule=self.eta_rule,
            rel_energy_tol=self.tol_energy,
            residual_tol=self.tol_residual,
            max_sweeps=self.max_sweeps,
        )

    def echo(self) -> dict:
        return {
            "scenario": self.scenario.ident,
            "eps_list": list(self.eps_list),
            "mesh_ratio": self.mesh_ratio,
            "eta_rule": self.eta_rule if isinstance(self.eta_rule, str) else float(self.eta_rule),
            "tol_energy": self.tol_energy,
            "tol_residual": self.tol_residual,
            "max_sweeps": self.max_sweeps,
            "diagnostics": sorted(self.diagnostics),
            "out_dir": self.out_dir,
            "threads": self.threads,
        }


def _parse_diagnostics(value: str) -> set[str]:
    v = value.strip().lower()
    if v == "all":
        return set(ALL_DIAGNOSTICS)
    if v == "none":
        return set()
    toggles = {t.strip() for t in v.split(",") if t.strip()}
    unknown = toggles - set(ALL_DIAGNOSTICS)
    if unknown:
        raise ConfigError(f"unknown diagnostics toggles {sorted(unknown)} "
                          f"(known: {', '.join(ALL_DIAGNOSTICS)})")
    return toggles


def parse_config(text: str) -> RunConfig:
    """Parse flat key = value config text; unknown keys are named in the error."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{stripped}'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        raw[key] = value

    for required in ("scenario", "eps_list"):
        if required not in raw:
            raise ConfigError(f"missing required config key '{required}'")

    try:
        scenario = parse_scenario(raw["scenario"])
    except ValueError as exc:
        raise ConfigError(f"config key 'scenario': {exc}") from exc

    def get_float(key: str, default: float) -> float:
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError as exc:
            raise ConfigError(f"config key '{key}': not a number ('{raw[key]}')") from exc

    try:
        eps_list = tuple(float(t) for t in raw["eps_list"].split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"config key 'eps_list': bad value '{raw['eps_list']}'") from exc
    if not eps_list:
        raise ConfigError("config key 'eps_list': empty schedule")

    eta_rule: str | float = raw["eta_rule"].strip() if "eta_rule" in raw else "eps^4"
    if isinstance(eta_rule, str) and eta_rule not in ("eps^2", "eps2", "eps*eps", "eps^3", "eps3", "eps^4", "eps4"):
        try:
            eta_rule = float(eta_rule)
        except ValueError as exc:
            raise ConfigError(f"config key 'eta_rule': expected 'eps^2' or a number, "
                              f"got '{eta_rule}'") from exc

    max_sweeps = int(get_float("max_sweeps", 500))
    threads = int(get_float("threads", 1))
    if threads < 1:
        raise ConfigError("config key 'threads': must be >= 1")
    tol_energy = get_float("tol_energy", 1e-8)
    tol_residual = get_float("tol_residual", 1e-7)
    if tol_energy <= 0 or tol_residual <= 0:
        raise ConfigError("tolerances must be positive")

    diagnostics = _parse_diagnostics(raw.get("diagnostics", "all"))

    return RunConfig(
        scenario=scenario,
        eps_list=eps_list,
        mesh_ratio=get_float("mesh_ratio", 4.0),
        eta_rule=eta_rule,
        tol_energy=tol_energy,
        tol_residual=tol_residual,
        max_sweeps=max_sweeps,
        diagnostics=diagnostics,
        out_dir=raw.get("out_dir", "out"),
        threads=threads,
    )


# ---------------------------------------------------------------------------
# state dumps

def dump_state(path: str, state: ATState, e_total: float) -> None:
    """Write the one-line JSON header plus raw little-endian u and v arrays."""
    grid = state.grid
    header = {
        "nx": grid.nx,
        "ny": grid.ny,
        "domain": [grid.x0, grid.x1, grid.y0, grid.y1],
        "eps": state.params.eps,
        "eta": state.params.eta,
        "scenario": state.scenario.ident if state.scenario is not None else None,
        "e_total": e_total,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        fh.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())


class DumpError(ValueError):
    pass


def load_state(path: str) -> tuple[ATState, dict]:
    """Read a state dump back; validates sizes and header consistency."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DumpError(f"corrupt dump header in {path}: {exc}") from exc
    for key in ("nx", "ny", "domain", "eps", "eta"):
        if key not in header:
            raise DumpError(f"dump header missing key '{key}'")
    nx, ny = int(header["nx"]), int(header["ny"])
    expected = 2 * nx * ny * 8
    if len(payload) != expected:
        raise DumpError(f"dump payload of {path}: expected {expected} bytes "
                        f"(2 x {nx} x {ny} float64), got {len(payload)}")
    x0, x1, y0, y1 = (float(t) for t in header["domain"])
    grid = make_grid(GridSpec(nx, ny, x0, x1, y0, y1))
    n = nx * ny
    u = np.frombuffer(payload[: n * 8], dtype="<f8").reshape(ny, nx).astype(float)
    v = np.frombuffer(payload[n * 8:], dtype="<f8").reshape(ny, nx).astype(float)
    params = ATParams(eps=float(header["eps"]), eta=float(header["eta"]))
    scenario = parse_scenario(header["scenario"]) if header.get("scenario") else None
    return ATState(grid, params, u, v, scenario), header


# ---------------------------------------------------------------------------
# field export

def write_vtk(path: str, grid: Grid, name: str, values: np.ndarray,
              origin: tuple[float, float] | None = None) -> None:
    """Legacy ASCII VTK STRUCTURED_POINTS export of one scalar field."""
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    ox, oy = origin if origin is not None else (grid.x0, grid.y0)
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {fmt17(ox)} {fmt17(oy)} 0",
        f"SPACING {fmt17(grid.h)} {fmt17(grid.h)} 1",
        f"POINT_DATA {nx * ny}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(fmt17(x) for x in values.ravel())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def export_fields(out_dir: str, tag: str, state: ATState) -> None:
    grid = state.grid
    write_vtk(os.path.join(out_dir, f"u{tag}.vtk"), grid, "u", state.u)
    write_vtk(os.path.join(out_dir, f"v{tag}.vtk"), grid, "v", state.v)
    gw = cell_gradient(grid, w_field(state.v))
    mag = np.hypot(gw[:, :, 0], gw[:, :, 1])
    write_vtk(os.path.join(out_dir, f"gradw{tag}.vtk"), grid, "gradw_magnitude", mag,
              origin=(grid.x0 + 0.5 * grid.h, grid.y0 + 0.5 * grid.h))


def csv_row(report: EnergyReport) -> str:
    vals = [report.eps, report.eta, report.h]
    parts = [fmt17(v) for v in vals] + [str(report.sweeps)]
    parts += [fmt17(v) for v in (report.e_elastic, report.e_pf_grad, report.e_pf_pot,
                                 report.e_total, report.discrepancy_l1, report.w_mass,
                                 report.r_u, report.r_v)]
    return ",".join(parts)


def write_energy_csv(path: str, reports: list[EnergyReport]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for rep in reports:
            fh.write(csv_row(rep) + "\n")


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# runs

def _prepare_out_dir(out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise ConfigError(f"output directory '{out_dir}' is not writable: {exc}") from exc


def _stage_outputs(config: RunConfig, tag: str, result: StageResult) -> None:
    out = config.out_dir
    dump_state(os.path.join(out, f"state{tag}.bin"), result.state, result.report.e_total)
    export_fields(out, tag, result.state)
    if config.diagnostics:
        rep = diagnostics_report(result.state, toggles=config.diagnostics)
        payload = {
            "energy": result.report.as_dict(),
            "converged": result.log.converged,
            "diagnostics": rep.as_dict(),
        }
        _write_json(os.path.join(out, f"diagnostics{tag}.json"), payload)


def run_solve(config: RunConfig) -> int:
    """Single-stage solve; writes state dump, energy CSV row, diagnostics JSON."""
    if len(config.eps_list) != 1:
        raise ConfigError(f"solve expects a single eps, got eps_list of length {len(config.eps_list)}")
    _prepare_out_dir(config.out_dir)
    results = continuation_run(config.schedule(), config.scenario, domain=config.domain)
    result = results[0]
    _stage_outputs(config, "", result)
    write_energy_csv(os.path.join(config.out_dir, "energy.csv"), [result.report])
    _write_json(os.path.join(config.out_dir, "run.json"), {
        "config": config.echo(),
        "converged": result.log.converged,
        "sweeps": result.log.sweeps,
    })
    return 0 if result.log.converged else 2


def run_continuation(config: RunConfig) -> int:
    """Full schedule with warm starts; emits per-stage artifacts and trend summary."""
    _prepare_out_dir(config.out_dir)
    results = continuation_run(config.schedule(), config.scenario, domain=config.domain)
    reports = [r.report for r in results]
    write_energy_csv(os.path.join(config.out_dir, "energy.csv"), reports)
    for k, result in enumerate(results):
        _stage_outputs(config, f"_{k:03d}", result)

    ref_len = config.scenario.reference.jump_length
    pf = [r.e_pf_grad + r.e_pf_pot for r in reports]
    disc_ratio = [
        (r.discrepancy_l1 / (r.e_pf_grad + r.e_pf_pot)) if (r.e_pf_grad + r.e_pf_pot) > 0 else 0.0
        for r in reports
    ]
    summary = {
        "config": config.echo(),
        "stages": [
            {
                "eps": r.eps,
                "converged": res.log.converged,
                "pf_energy": pf[k],
                "pf_vs_reference": (abs(pf[k] - ref_len) / ref_len) if ref_len > 0 else None,
                "discrepancy_ratio": disc_ratio[k],
                "e_elastic": r.e_elastic,
                "e_total": r.e_total,
            }
            for k, (r, res) in enumerate(zip(reports, results))
        ],
        "energy_bound_sup": max(r.e_total for r in reports),
        "elastic_decreasing": all(reports[k + 1].e_elastic <= reports[k].e_elastic
                                  for k in range(len(reports) - 1)),
        "discrepancy_ratio_trend_ok": all(
            disc_ratio[k + 1] <= 1.1 * disc_ratio[k] for k in range(len(disc_ratio) - 1)
        ),
    }
    _write_json(os.path.join(config.out_dir, "summary.json"), summary)
    return 0 if all(r.log.converged for r in results) else 2


def run_diagnose(state_path: str, toggles: set[str], out_dir: str | None) -> int:
    """Recompute the energy report and requested diagnostics from a dump alone."""
    state, header = load_state(state_path)
    report = energy_report(state, sweeps=0)
    recorded = header.get("e_total")
    roundtrip_gap = None if recorded is None else abs(report.e_total - float(recorded))
    if roundtrip_gap is not None and roundtrip_gap > 1e-12 * max(1.0, abs(float(recorded))):
        raise DumpError(f"recomputed energy {report.e_total!r} does not match the "
                        f"recorded value {recorded!r}")
    rep = diagnostics_report(state, toggles=toggles)
    payload = {
        "source": os.path.basename(state_path),
        "energy": report.as_dict(),
        "e_total_recorded": recorded,
        "e_total_roundtrip_gap": roundtrip_gap,
        "diagnostics": rep.as_dict(),
    }
    if out_dir is not None:
        _prepare_out_dir(out_dir)
        _write_json(os.path.join(out_dir, "diagnostics.json"), payload)
    else:
        json.dump(payload, sys.stdout, sort_keys=True, indent=1)
        sys.stdout.write("\n")
    return 0


# ---------------------------------------------------------------------------
# entry point

def _load_config(path: str, out_override: str | None, threads_override: int | None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    config = parse_config(text)
    if out_override is not None:
        config.out_dir = out_override
    if threads_override is not None:
        config.threads = threads_override
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="atpf",
        description="Phase-field critical-point solver and diagnostics suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single-stage solve from a config")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--threads", type=int, default=None)

    p_cont = sub.add_parser("continuation", help="run the full eps schedule")
    p_cont.add_argument("--config", required=True)
    p_cont.add_argument("--out", default=None)
    p_cont.add_argument("--threads", type=int, default=None)

    p_diag = sub.add_parser("diagnose", help="recompute diagnostics from a state dump")
    p_diag.add_argument("--state", required=True)
    p_diag.add_argument("--out", default=None)
    p_diag.add_argument("--diagnostics", default="all")
    p_diag.add_argument("--threads", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return run_solve(_load_config(args.config, args.out, args.threads))
        if args.command == "continuation":
            return run_continuation(_load_config(args.config, args.out, args.threads))
        if args.command == "diagnose":
            toggles = _parse_diagnostics(args.diagnostics)
            return run_diagnose(args.state, toggles, args.out)
    except (ConfigError, DumpError, OSError, ValueError) as exc:
        print(f"atpf: error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
