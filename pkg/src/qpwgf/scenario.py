"""Scenario configuration, resolution and the experiment drivers behind the CLI.

A scenario is a flat set of named parameters. Text files hold one
``key = value`` pair per line; ``#`` starts a comment and ``none`` stands for
an unset optional value. Lengths are given in the scenario's own unit and
divided by ``length_unit`` when resolved, so the crystal can be written in
nanometres while the solver sees a unit cell of width 1.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, get_type_hints

import numpy as np

from .assembly import CORRECTED, NAIVE, BlockSystem, Discretization, WindowConfig, assemble_naive_system
from .correction import assemble_corrected
from .geometry import (UnitCell, bump_wall, check_wall_clearance, circle_curve, circle_lattice,
                       graded_wall, kite_curve, vertical_wall)
from .modes import EVANESCENT, GRAZING, PROPAGATING, ProblemConfig, build_mode_table
from .postprocess import (Solution, field_grid, qp_mismatch, radiation_errors, rayleigh_coefficients)
from .solver import DIRECT, GMRES, SolverError, solve_direct, solve_gmres

OBSTACLES = ("kite", "circle", "circle_lattice")
WALLS = ("vertical", "bump")
FORMULATIONS = (NAIVE, CORRECTED)
SOLVERS = (DIRECT, GMRES)
NM_PER_CM = 1e7


class ConfigError(ValueError):
    """Invalid scenario parameter; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Scenario:
    """All parameters of one experiment.

    Geometry lengths (``period``, ``radius``, ``lattice_a2``, ``wall_x``, the
    bump and grading parameters, ``h`` and absolute ``A``) are in the scenario
    unit; ``bump_frequency`` is per scenario unit.

    Attributes:
        frequency: Optional inverse vacuum wavelength in cm^-1 with lengths in nm;
            it replaces ``k1`` (k1 = 2 pi frequency).
        index: Optional ratio k1/k2; replaces ``k2``.
        polarization: ``TE`` (eta = 1) or ``TM`` (eta = index^2); replaces ``eta``.
        A_units: ``wavelengths`` (A counts exterior wavelengths) or ``absolute``.
        h: Measurement height; 0.9 c A when unset.
        h_policy: ``fixed`` rejects an h outside the plateau, ``clip`` moves it to
            the midpoint between the obstacle and cA instead.
        delta: Nearly grazing threshold as a fraction of k1.
    """

    name: str = "custom"
    obstacle: str = "kite"
    radius: float = 1.0
    lattice_a2: float = 1.0
    lattice_rows: int = 1
    wall: str = "vertical"
    wall_x: float = -1.0
    bump_amplitude: float = 0.0
    bump_support: float = 1.0
    bump_plateau: Optional[float] = None
    bump_frequency: float = 1.0
    bump_phase: float = 0.0
    bump_offset: float = 0.0
    grading_zone: float = 0.0
    near_spacing: Optional[float] = None
    period: float = 2.0
    length_unit: float = 1.0
    k1: float = 10.68
    frequency: Optional[float] = None
    k2: float = 20.0
    index: Optional[float] = None
    eta: float = 1.0
    polarization: Optional[str] = None
    theta: float = math.pi / 4
    A: float = 20.0
    A_units: str = "wavelengths"
    c: float = 0.5
    h: Optional[float] = None
    h_policy: str = "fixed"
    delta: float = 0.75
    formulation: str = CORRECTED
    solver: str = DIRECT
    tol: float = 1e-6
    max_iter: int = 1000
    ppw: float = 8.0
    min_component_nodes: int = 16
    n_quad: Optional[int] = None

    def __post_init__(self):
        _choice(self, "obstacle", OBSTACLES)
        _choice(self, "wall", WALLS)
        _choice(self, "A_units", ("wavelengths", "absolute"))
        _choice(self, "h_policy", ("fixed", "clip"))
        _choice(self, "formulation", FORMULATIONS)
        _choice(self, "solver", SOLVERS)
        if self.polarization is not None:
            _choice(self, "polarization", ("TE", "TM"))
            if self.index is None:
                raise ConfigError("polarization", "needs index to fix eta")
        if not 0.0 < self.c < 1.0:
            raise ConfigError("c", f"must lie in (0, 1), got {self.c!r}")
        if not (math.isfinite(self.delta) and self.delta >= 0.0):
            raise ConfigError("delta", f"must be a finite non-negative fraction, got {self.delta!r}")
        for name in ("radius", "lattice_a2", "period", "length_unit", "k1", "k2", "eta", "A",
                     "tol", "ppw", "bump_support"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(name, f"must be positive and finite, got {value!r}")
        for name in ("frequency", "index", "near_spacing", "n_quad"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(name, f"must be positive, got {value!r}")
        if self.lattice_rows < 1:
            raise ConfigError("lattice_rows", "must be at least 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter", "must be at least 1")
        if self.min_component_nodes < 4:
            raise ConfigError("min_component_nodes", "must be at least 4")
        if not -math.pi / 2 < self.theta < math.pi / 2:
            raise ConfigError("theta", "must lie in (-pi/2, pi/2)")

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _choice(sc: Scenario, name: str, options) -> None:
    if getattr(sc, name) not in options:
        raise ConfigError(name, f"must be one of {', '.join(options)}, got {getattr(sc, name)!r}")


# ---------------------------------------------------------------------------
# built-in scenarios

KITE = Scenario(name="kite", obstacle="kite", wall="vertical", wall_x=-1.0, period=2.0,
                k1=10.68, k2=20.0, eta=1.0, theta=math.pi / 4, A=20.0, c=0.5, h=1.0,
                solver=DIRECT)

# Lengths in nm. The wall weaves between the pore columns with a sine of
# half-period a2/2, settling onto the straight line x = -a1/2 + 55 above the
# top pore; near the slab its nodes are graded down to ~19 nm.
CRYSTAL = Scenario(
    name="crystal", obstacle="circle_lattice", radius=155.0, lattice_a2=488.0, lattice_rows=11,
    wall="bump", wall_x=-346.5 + 55.0, bump_amplitude=55.0, bump_support=2500.0,
    bump_plateau=2320.0, bump_frequency=math.pi / 244.0, bump_phase=math.pi / 2, bump_offset=1.0,
    grading_zone=2750.0, near_spacing=19.0, period=693.0, length_unit=693.0,
    frequency=20000.0, index=2.6, polarization="TE", theta=0.0, A=20.0, c=0.5,
    h=2750.0, h_policy="clip", solver=GMRES, tol=1e-6, max_iter=2000, min_component_nodes=52)

BUILTIN = {"kite": KITE, "crystal": CRYSTAL}


# ---------------------------------------------------------------------------
# text format


def _types() -> dict:
    hints = get_type_hints(Scenario)
    out = {}
    for f in dataclasses.fields(Scenario):
        tp = hints[f.name]
        optional = getattr(tp, "__args__", None) is not None and type(None) in tp.__args__
        base = next(a for a in tp.__args__ if a is not type(None)) if optional else tp
        out[f.name] = (base, optional)
    return out


def parse_value(name: str, text: str):
    """Convert the text of one parameter to its typed value.

    Raises:
        ConfigError: For unknown keys or malformed values.
    """
    types = _types()
    if name not in types:
        raise ConfigError(name, "unknown parameter")
    base, optional = types[name]
    text = text.strip()
    if text.lower() == "none":
        if optional:
            return None
        raise ConfigError(name, "is required")
    try:
        if base is int:
            return int(text)
        if base is float:
            return float(text)
    except ValueError:
        raise ConfigError(name, f"cannot parse {text!r} as {base.__name__}") from None
    return text


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def apply_overrides(base: Scenario, pairs) -> Scenario:
    """Scenario with ``key=value`` strings applied in order."""
    changes = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(pair, "override must read key=value")
        key, text = pair.split("=", 1)
        key = key.strip()
        changes[key] = parse_value(key, text)
    return base.replace(**changes)


def parse_text(text: str, base: Scenario | None = None) -> Scenario:
    """Parse a scenario file. A ``scenario = kite`` line picks a built-in base."""
    pairs = []
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {number}", f"expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "scenario":
            if value not in BUILTIN:
                raise ConfigError("scenario", f"unknown built-in {value!r}")
            base = BUILTIN[value]
            continue
        pairs.append(f"{key}={value}")
    return apply_overrides(base or Scenario(), pairs)


def serialize(sc: Scenario) -> str:
    """Every parameter as ``key = value``, one per line."""
    return "".join(f"{f.name} = {format_value(getattr(sc, f.name))}\n"
                   for f in dataclasses.fields(Scenario))


def load(path) -> Scenario:
    return parse_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# resolution


@dataclass(frozen=True)
class Resolved:
    """Solver-ready objects of a scenario, in nondimensional units."""

    scenario: Scenario
    cfg: ProblemConfig
    cell: UnitCell
    window: WindowConfig
    discretization: Discretization
    delta: float

    @property
    def wavelength(self) -> float:
        return self.cfg.wavelength


def wavenumber(sc: Scenario) -> float:
    """k1 in nondimensional units."""
    if sc.frequency is not None:
        return 2 * math.pi * sc.frequency / NM_PER_CM * sc.length_unit
    return sc.k1 * sc.length_unit


def _geometry(sc: Scenario, far_spacing: float):
    u = sc.length_unit
    period = sc.period / u
    if sc.obstacle == "kite":
        obstacle = kite_curve()
    elif sc.obstacle == "circle":
        obstacle = circle_curve((0.0, 0.0), sc.radius / u)
    else:
        obstacle = circle_lattice(period, sc.lattice_a2 / u, sc.radius / u, sc.lattice_rows)
    if sc.wall == "vertical":
        wall = vertical_wall(sc.wall_x / u)
        check_wall_clearance(wall, obstacle, period)
    else:
        plateau = None if sc.bump_plateau is None else sc.bump_plateau / u
        wall = bump_wall(sc.wall_x / u, sc.bump_amplitude / u, sc.bump_support / u,
                         frequency=sc.bump_frequency * u, phase=sc.bump_phase, plateau=plateau,
                         offset=sc.bump_offset, obstacle=obstacle, period=period)
    if sc.grading_zone > 0 and sc.near_spacing is not None:
        ratio = min(1.0, sc.near_spacing / u / far_spacing)
        wall = graded_wall(wall, sc.grading_zone / u, ratio, 4 * far_spacing)
    return UnitCell(obstacle, wall, period)


def resolve(sc: Scenario) -> Resolved:
    """Build configuration, geometry and window for a scenario.

    Raises:
        ConfigError: If the window does not clear the obstacle or h is invalid.
        GeometryError: If the wall or its period translate meets the obstacle.
    """
    u = sc.length_unit
    k1 = wavenumber(sc)
    k2 = k1 / sc.index if sc.index is not None else sc.k2 * u
    eta = sc.eta
    if sc.polarization == "TE":
        eta = 1.0
    elif sc.polarization == "TM":
        eta = sc.index**2
    cfg = ProblemConfig(k1, k2, eta, sc.period / u, sc.theta)
    lam = cfg.wavelength
    far = lam / sc.ppw
    cell = _geometry(sc, far)
    A = sc.A * lam if sc.A_units == "wavelengths" else sc.A / u
    clear = cell.clearance_height
    plateau = sc.c * A
    if not plateau > clear:
        raise ConfigError("A", f"plateau cA = {plateau:.6g} does not clear the obstacle "
                               f"(height {clear:.6g})")
    h = 0.9 * plateau if sc.h is None else sc.h / u
    if not clear < h < plateau:
        if sc.h_policy == "clip":
            h = 0.5 * (clear + plateau)
        else:
            raise ConfigError("h", f"{h:.6g} must lie strictly between {clear:.6g} and cA = "
                                   f"{plateau:.6g}")
    window = WindowConfig(A, sc.c, h)
    wall_spacing = far if sc.near_spacing is not None else None
    disc = Discretization(sc.ppw, sc.min_component_nodes, wall_spacing)
    return Resolved(sc, cfg, cell, window, disc, sc.delta * k1)


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class RunResult:
    """Outcome of one solve with its post-processing."""

    resolved: Resolved
    system: BlockSystem
    solution: Solution
    spectrum: object
    seconds: float

    def report(self) -> dict:
        sc, cfg, sol = self.resolved.scenario, self.resolved.cfg, self.solution
        sp = self.spectrum
        wood = [n for n, c in zip(self.system.table.n, self.system.table.classes) if c == GRAZING]
        return {
            "scenario": sc.name,
            "formulation": self.system.formulation,
            "k1": cfg.k1,
            "frequency": "" if sc.frequency is None else sc.frequency,
            "A": self.resolved.window.A,
            "h": self.resolved.window.h,
            "n1": self.system.n1,
            "n2": self.system.n2,
            "unknowns": self.system.size,
            "corrected_modes": " ".join(str(t.n) for t in self.system.corrections),
            "grazing_modes": " ".join(str(int(n)) for n in wood),
            "solver": sol.report.method,
            "iterations": sol.report.iterations,
            "residual": sol.report.residual,
            "error_eb": sp.energy_balance_error,
            "R": sp.R,
            "T": sp.T,
        }


def assemble(resolved: Resolved, formulation: str | None = None) -> BlockSystem:
    formulation = formulation or resolved.scenario.formulation
    if formulation not in FORMULATIONS:
        raise ConfigError("formulation", f"must be naive or corrected, got {formulation!r}")
    table = build_mode_table(resolved.cfg, resolved.delta)
    grids = resolved.discretization.grids(resolved.cell, resolved.cfg, resolved.window)
    system = assemble_naive_system(resolved.cfg, table, resolved.cell, resolved.window, grids)
    if formulation == CORRECTED:
        system = assemble_corrected(system)
    return system


def solve(system: BlockSystem, sc: Scenario):
    if sc.solver == DIRECT:
        return solve_direct(system)
    return solve_gmres(system, tol=sc.tol, max_iter=sc.max_iter)


def run(sc: Scenario, formulation: str | None = None) -> RunResult:
    """Assemble, solve and extract the Rayleigh spectrum."""
    start = time.perf_counter()
    resolved = resolve(sc)
    system = assemble(resolved, formulation)
    solution = Solution(system, solve(system, sc))
    spectrum = rayleigh_coefficients(solution, n_quad=sc.n_quad)
    return RunResult(resolved, system, solution, spectrum, time.perf_counter() - start)


SWEEP_AXES = ("k1", "frequency", "A")


def sweep(sc: Scenario, axis: str, values, formulations=None) -> list[dict]:
    """One row per (value, formulation); failures are recorded in-row.

    ``A`` follows the scenario's ``A_units``.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError("axis", f"must be one of {', '.join(SWEEP_AXES)}")
    formulations = formulations or (sc.formulation,)
    rows = []
    for value in values:
        point = sc.replace(**{axis: float(value)})
        for form in formulations:
            row = {"axis": axis, "value": float(value), "formulation": form}
            try:
                result = run(point, form)
            except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
                row.update(status="failed", message=str(exc).replace("\n", " "))
            else:
                rep = result.report()
                row.update(status="ok", message="", error_eb=rep["error_eb"], R=rep["R"],
                           T=rep["T"], iterations=rep["iterations"], residual=rep["residual"],
                           unknowns=rep["unknowns"], corrected_modes=rep["corrected_modes"],
                           grazing_modes=rep["grazing_modes"])
            rows.append(row)
    return rows


def diagnostics(result: RunResult) -> tuple[dict, list[dict]]:
    """Quasi-periodicity mismatch and per-mode radiation errors."""
    sol = result.solution
    left, right = qp_mismatch(sol)
    rad = radiation_errors(sol, n_quad=result.resolved.scenario.n_quad)
    table = result.system.table
    rows = [{"n": n, "class": CLASS_NAMES[table.class_of(n)], "beta_re": table.beta_of(n).real,
             "beta_im": table.beta_of(n).imag, "error_plus": ep, "error_minus": em}
            for n, (ep, em) in sorted(rad.items())]
    summary = {"qp_left": left, "qp_right": right,
               "max_radiation_error": max((max(v) for v in rad.values()), default=0.0)}
    return summary, rows


# ---------------------------------------------------------------------------
# output bundle

SCHEMA = {
    "report.csv": {
        "scenario": "scenario name",
        "formulation": "naive or corrected",
        "k1": "exterior wavenumber (nondimensional units)",
        "frequency": "inverse wavelength in cm^-1 (crystal-type scenarios)",
        "A": "window half-size (nondimensional units)",
        "h": "height of the measurement lines",
        "n1": "obstacle nodes",
        "n2": "wall nodes",
        "unknowns": "system size 2 n1 + 2 n2",
        "corrected_modes": "orders receiving a correction term",
        "grazing_modes": "orders with beta_n = 0",
        "solver": "direct or gmres",
        "iterations": "GMRES iterations (0 for direct)",
        "residual": "relative residual of the unscaled system",
        "error_eb": "energy-balance error",
        "R": "reflectance",
        "T": "transmittance",
        "qp_left": "left quasi-periodicity mismatch (diagnose only)",
        "qp_right": "right quasi-periodicity mismatch (diagnose only)",
        "max_radiation_error": "largest radiation error over C_delta (diagnose only)",
    },
    "spectrum.csv": {
        "n": "Rayleigh order",
        "class": "propagating, evanescent or grazing",
        "alpha": "alpha_n",
        "beta_re": "real part of beta_n",
        "beta_im": "imaginary part of beta_n",
        "B_plus_re": "real part of the upward coefficient",
        "B_plus_im": "imaginary part of the upward coefficient",
        "B_minus_re": "real part of the downward coefficient",
        "B_minus_im": "imaginary part of the downward coefficient",
    },
    "sweep.csv": {
        "axis": "swept parameter",
        "value": "parameter value (scenario units)",
        "formulation": "naive or corrected",
        "status": "ok or failed",
        "message": "error message of a failed point",
        "error_eb": "energy-balance error",
        "R": "reflectance",
        "T": "transmittance",
        "iterations": "GMRES iterations",
        "residual": "relative residual",
        "unknowns": "system size",
        "corrected_modes": "orders receiving a correction term",
        "grazing_modes": "orders with beta_n = 0",
    },
    "field.csv": {
        "x": "abscissa",
        "y": "ordinate",
        "region": "exterior, interior or excluded (too close to a curve)",
        "re": "real part of the total field",
        "im": "imaginary part of the total field",
    },
    "radiation.csv": {
        "n": "order in C_delta",
        "class": "mode class",
        "beta_re": "real part of beta_n",
        "beta_im": "imaginary part of beta_n",
        "error_plus": "radiation error on the upper line",
        "error_minus": "radiation error on the lower line",
    },
}


CLASS_NAMES = {PROPAGATING: "propagating", EVANESCENT: "evanescent", GRAZING: "grazing"}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def write_schema(out: Path, files) -> None:
    lines = []
    for name in files:
        lines.append(f"[{name}]")
        lines += [f"{col}: {desc}" for col, desc in SCHEMA[name].items()]
        lines.append("")
    (out / "schema.txt").write_text("\n".join(lines))


def spectrum_rows(result: RunResult) -> list[dict]:
    sp, table = result.spectrum, result.system.table
    return [{"n": int(n), "class": CLASS_NAMES[c], "alpha": a, "beta_re": b.real, "beta_im": b.imag,
             "B_plus_re": bp.real, "B_plus_im": bp.imag, "B_minus_re": bm.real,
             "B_minus_im": bm.imag}
            for n, c, a, b, bp, bm in zip(sp.n, sp.classes, table.alpha, table.beta,
                                          sp.B_plus, sp.B_minus)]


def write_run(out: Path, sc: Scenario, result: RunResult, extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize(sc))
    report = result.report()
    report.update(extra or {})
    cols = [c for c in SCHEMA["report.csv"] if c in report]
    write_csv(out / "report.csv", cols, [report])
    write_csv(out / "spectrum.csv", list(SCHEMA["spectrum.csv"]), spectrum_rows(result))


def field_rows(result: RunResult, nx: int, ny: int) -> list[dict]:
    grid = field_grid(result.solution, nx, ny)
    return [{"x": x, "y": y, "region": r, "re": v.real, "im": v.imag}
            for x, y, r, v in zip(grid.x, grid.y, grid.region, grid.total)]


__all__ = [
    "BUILTIN", "CRYSTAL", "ConfigError", "KITE", "Resolved", "RunResult", "SCHEMA", "Scenario",
    "apply_overrides", "assemble", "diagnostics", "field_rows", "load", "parse_text",
    "parse_value", "resolve", "run", "serialize", "spectrum_rows", "sweep", "wavenumber",
    "write_csv", "write_run", "write_schema",
]
