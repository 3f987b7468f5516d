"""Experiment presets, configuration files and epsilon sweeps.

A preset bundles a moving domain, model parameters, an initial profile and
the output schedule of one numerical experiment. ``run_preset`` executes the
phase-field runs for every epsilon (and mobility) in the preset, the
companion sharp-interface model when one exists, and writes CSV files.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from eschlab import csvio, esfem, sharp
from eschlab.errors import ConvergenceError, MeshTanglingError
from eschlab.geometry import DeformingSphere, IntervalKind, MovingInterval, UnitSphereTangential
from eschlab.model import MobilityKind, ModelParams, PotentialKind, solve_profile, surface_tension_constant

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_SINGULAR = 3


class Comparison(str, enum.Enum):
    NONE = "none"
    SHARP_INTERVAL = "sharp_interval"
    SHARP_CAPS = "sharp_caps"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


# --- initial profiles -------------------------------------------------------
# Each maps current coordinates to u, written for wells -1, 1 and then
# shifted to (u_a, u_b) by u = c1 + c2 * shape.

def _shape(name: str, x, eps: float):
    if name == "stretch":
        return 0.9 * np.tanh(10 * x - 5)
    if name == "compress":
        return 0.9 * np.tanh(10 * x - 15)
    if name == "stretch-positive":
        return np.tanh((x - 0.5) / eps)
    if name == "uniform":
        return np.zeros_like(x)
    if name == "bulk":
        return np.tanh((x - 0.25) / eps)
    w = eps * math.sqrt(2)
    if name == "caps":
        return np.where(x < 1.45, np.tanh((0.8 - x) / w), np.tanh((x - 2.1) / w))
    if name == "pinched-caps":
        return np.where(x < 1.55, np.tanh((1 - x) / w), np.tanh((x - 2.1) / w))
    raise ValueError(f"unknown initial profile {name!r}")


INITIAL_PROFILES = ("stretch", "compress", "stretch-positive", "uniform", "bulk", "caps", "pinched-caps")


def initial_profile(name: str):
    """Callable ``(coords, params) -> u`` for a named initial profile."""
    if name not in INITIAL_PROFILES:
        raise ValueError(f"unknown initial profile {name!r}")

    def profile(x, params: ModelParams):
        c1, c2 = 0.5 * (params.u_a + params.u_b), 0.5 * (params.u_b - params.u_a)
        return c1 + c2 * _shape(name, np.asarray(x, dtype=float), params.epsilon)

    return profile


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    domain: str
    params: ModelParams
    initial: str
    t_end: float
    output_times: tuple[float, ...]
    epsilon_list: tuple[float, ...]
    comparison: Comparison = Comparison.NONE
    vbar: float = 0.0
    mbar_list: tuple[float, ...] = ()
    dt: float | None = None
    n_cells: int | None = None
    out_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "comparison", Comparison(self.comparison))
        if self.name not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.name!r}")

    @property
    def mobilities(self) -> tuple[float, ...]:
        return self.mbar_list or (self.params.mbar,)

    def build_domain(self):
        if self.domain == "sphere":
            return UnitSphereTangential(self.vbar)
        if self.domain == "deforming_sphere":
            return DeformingSphere()
        return MovingInterval(IntervalKind(self.domain))


PRESET_NAMES = (
    "stretch", "compress", "stretch-positive", "genesis", "bulk-motion", "sphere-coarsen",
    "sphere-reverse", "sphere-energy", "mobility-scaling", "sharp-caps", "sharp-interval",
)

_ONE_D = (0.4, 0.1, 0.025)
_PM1 = ModelParams()
_POS = ModelParams(u_a=0.2, u_b=0.8)
_SPHERE_TIMES = (0.0, 0.05, 0.1, 0.15)


def _builtin():
    P = ExperimentPreset
    out = [
        P("stretch", "stretch_then_stop", _PM1.with_(epsilon=0.4), "stretch", 10.0, (0.25, 1.0, 2.0, 10.0),
          _ONE_D, Comparison.SHARP_INTERVAL),
        P("compress", "compress_then_stop", _PM1.with_(epsilon=0.4), "compress", 10.0, (0.25, 1.0, 2.0, 10.0),
          _ONE_D, Comparison.SHARP_INTERVAL),
        P("stretch-positive", "stretch_then_stop", _POS.with_(epsilon=0.4), "stretch-positive", 2.0,
          (0.25, 0.5, 1.0, 2.0), _ONE_D),
        P("genesis", "fixed_unit", _POS.with_(epsilon=0.033), "uniform", 0.2, (0.0, 0.066, 0.099, 0.198),
          (0.033,)),
        P("bulk-motion", "cotangent_growth", _PM1.with_(epsilon=0.01), "bulk", 2.0, (0.1, 1.0, 1.8),
          (0.01,), Comparison.SHARP_INTERVAL),
        P("sphere-coarsen", "sphere", _PM1.with_(mbar=5.0), "caps", 0.15, _SPHERE_TIMES, (0.1,),
          Comparison.SHARP_CAPS, vbar=0.0),
        P("sphere-reverse", "sphere", _PM1.with_(mbar=5.0), "caps", 0.15, _SPHERE_TIMES, (0.1,),
          Comparison.SHARP_CAPS, vbar=10.0),
        P("sphere-energy", "sphere", _PM1.with_(mbar=5.0, epsilon=0.2), "caps", 0.15, _SPHERE_TIMES,
          (0.2, 0.1, 0.05), Comparison.SHARP_CAPS, vbar=10.0),
        P("mobility-scaling", "deforming_sphere", _PM1.with_(mbar=5.0), "pinched-caps", 0.2,
          (0.0, 0.05, 0.1, 0.2), (0.1,), mbar_list=(5.0, 50.0)),
        P("sharp-caps", "sphere", _PM1.with_(mbar=5.0), "caps", 0.15, _SPHERE_TIMES, (),
          Comparison.SHARP_CAPS, vbar=10.0),
        P("sharp-interval", "stretch_then_stop", _PM1, "stretch", 10.0, (0.25, 1.0, 2.0, 10.0), (),
          Comparison.SHARP_INTERVAL),
    ]
    return {p.name: p for p in out}


PRESETS = _builtin()


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None


# --- configuration files ----------------------------------------------------

CONFIG_KEYS = ("preset", "epsilon", "mbar", "vbar", "u_a", "u_b", "potential", "mobility", "t_end", "dt",
               "n_cells", "out_dir", "output_times")


def _floats(text: str, line: int, key: str, positive=False) -> tuple[float, ...]:
    if not text.strip():
        return ()
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"malformed value for {key}: {text!r}", line) from None
    if any(not math.isfinite(v) for v in vals) or (positive and any(v <= 0 for v in vals)):
        raise ConfigError(f"{key} needs {'positive ' if positive else ''}finite numbers, got {text!r}", line)
    return vals


def _one_float(text, line, key, positive=False):
    vals = _floats(text, line, key, positive)
    if len(vals) != 1:
        raise ConfigError(f"{key} takes exactly one number, got {text!r}", line)
    return vals[0]


def parse_config(text: str) -> ExperimentPreset:
    """Build a preset from ``key=value`` lines; unset keys keep the preset defaults.

    Blank lines and lines starting with ``#`` are ignored. ``epsilon``,
    ``mbar`` and ``output_times`` accept comma-separated lists.
    """
    entries: dict[str, tuple[str, int]] = {}
    n_lines = 0
    for n_lines, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", n_lines)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", n_lines)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r}", n_lines)
        entries[key] = (value, n_lines)
    if "preset" not in entries:
        raise ConfigError("missing required key 'preset'", n_lines + 1)
    name, line = entries["preset"]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}", line)
    base = PRESETS[name]
    changes: dict = {}
    pchanges: dict = {}

    def get(key):
        return entries.get(key, (None, None))

    value, line = get("epsilon")
    if value is not None:
        eps = _floats(value, line, "epsilon", positive=True)
        changes["epsilon_list"] = eps
        if eps:
            pchanges["epsilon"] = eps[0]
    value, line = get("mbar")
    if value is not None:
        mb = _floats(value, line, "mbar", positive=True)
        if not mb:
            raise ConfigError("mbar needs at least one value", line)
        pchanges["mbar"] = mb[0]
        changes["mbar_list"] = mb if (len(mb) > 1 or base.mbar_list) else ()
    value, line = get("vbar")
    if value is not None:
        vbar = _one_float(value, line, "vbar")
        if vbar < 0:
            raise ConfigError("vbar must be non-negative", line)
        changes["vbar"] = vbar
    for key in ("t_end", "dt"):
        value, line = get(key)
        if value is not None:
            changes[key] = _one_float(value, line, key, positive=True)
    value, line = get("n_cells")
    if value is not None:
        try:
            n = int(value)
        except ValueError:
            raise ConfigError(f"malformed value for n_cells: {value!r}", line) from None
        if n < 8:
            raise ConfigError("n_cells must be at least 8", line)
        changes["n_cells"] = n
    value, line = get("out_dir")
    if value is not None:
        if not value:
            raise ConfigError("out_dir must not be empty", line)
        changes["out_dir"] = value
    value, line = get("output_times")
    if value is not None:
        times = _floats(value, line, "output_times")
        if any(t < 0 for t in times):
            raise ConfigError("output times must be non-negative", line)
        changes["output_times"] = tuple(sorted(times))
    value, line = get("mobility")
    if value is not None:
        try:
            pchanges["mobility_kind"] = MobilityKind(value)
        except ValueError:
            raise ConfigError(f"mobility must be 'constant' or 'degenerate', got {value!r}", line) from None

    potential = base.params.potential_kind
    value, pline = get("potential")
    if value is not None:
        try:
            potential = PotentialKind(value)
        except ValueError:
            raise ConfigError(f"potential must be 'quartic' or 'log', got {value!r}", pline) from None
    for key in ("u_a", "u_b"):
        value, line = get(key)
        if value is not None:
            if potential is PotentialKind.LOGARITHMIC:
                raise ConfigError(f"{key} is fixed by the logarithmic potential and cannot be set", line)
            pchanges[key] = _one_float(value, line, key)
    try:
        if potential is PotentialKind.LOGARITHMIC:
            params = ModelParams.logarithmic(
                epsilon=pchanges.get("epsilon", base.params.epsilon),
                mbar=pchanges.get("mbar", base.params.mbar),
                mobility_kind=pchanges.get("mobility_kind", MobilityKind.DEGENERATE),
            )
        else:
            params = replace(base.params, potential_kind=PotentialKind.QUARTIC, **pchanges)
    except ValueError as exc:
        raise ConfigError(str(exc), pline) from None
    preset = replace(base, params=params, **changes)
    if preset.output_times and preset.output_times[-1] > preset.t_end:
        raise ConfigError("output_times extend beyond t_end", get("output_times")[1] or get("t_end")[1])
    return preset


def render(preset: ExperimentPreset) -> str:
    """Configuration text that parses back to ``preset``."""
    p = preset.params
    fmt = csvio.fmt
    lines = [
        f"preset={preset.name}",
        f"epsilon={','.join(fmt(e) for e in preset.epsilon_list)}",
        f"mbar={','.join(fmt(m) for m in preset.mobilities)}",
        f"vbar={fmt(preset.vbar)}",
        f"potential={p.potential_kind.value}",
        f"mobility={p.mobility_kind.value}",
    ]
    if p.potential_kind is PotentialKind.QUARTIC:
        lines += [f"u_a={fmt(p.u_a)}", f"u_b={fmt(p.u_b)}"]
    lines.append(f"t_end={fmt(preset.t_end)}")
    if preset.dt is not None:
        lines.append(f"dt={fmt(preset.dt)}")
    if preset.n_cells is not None:
        lines.append(f"n_cells={preset.n_cells}")
    lines.append(f"out_dir={preset.out_dir}")
    lines.append(f"output_times={','.join(fmt(t) for t in preset.output_times)}")
    if not preset.epsilon_list and p.epsilon != PRESETS[preset.name].params.epsilon:
        raise ValueError("epsilon differs from the preset default but no epsilon list is set")
    return "\n".join(lines) + "\n"


# --- running ------------------------------------------------------------------

@dataclass
class RunOutcome:
    epsilon: float
    mbar: float
    params: ModelParams
    n_cells: int
    dt: float
    result: esfem.RunResult | None = None
    error: str | None = None
    directory: Path | None = None


@dataclass
class SharpOutcome:
    trajectory: object
    s_const: float
    energy_offset: float = 0.0

    @property
    def event(self):
        return self.trajectory.event


@dataclass
class PresetReport:
    exit_code: int
    runs: list[RunOutcome] = field(default_factory=list)
    sharp: SharpOutcome | None = None
    rows: list[dict] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)


def resolution(preset: ExperimentPreset, epsilon: float, domain=None, mbar: float | None = None) -> tuple[int, float]:
    """``(n_cells, dt)``: preset overrides, else the default resolution rules."""
    domain = preset.build_domain() if domain is None else domain
    mbar = preset.params.mbar if mbar is None else mbar
    length = math.pi if preset.domain in ("sphere", "deforming_sphere") else domain.length(0.0)
    n = preset.n_cells if preset.n_cells is not None else esfem.default_n_cells(length, epsilon)
    dt = preset.dt if preset.dt is not None else esfem.default_dt(epsilon, mbar)
    return n, dt


def run_phase_field(preset: ExperimentPreset, epsilon: float, mbar: float | None = None,
                    progress=None) -> RunOutcome:
    """One phase-field run of ``preset`` (no files written)."""
    mbar = preset.params.mbar if mbar is None else mbar
    params = preset.params.with_(epsilon=epsilon, mbar=mbar)
    domain = preset.build_domain()
    n_cells, dt = resolution(preset, epsilon, domain, mbar)
    outcome = RunOutcome(epsilon=epsilon, mbar=mbar, params=params, n_cells=n_cells, dt=dt)
    config = esfem.SolverConfig(dt=dt, output_times=preset.output_times, t_end=preset.t_end)
    state = esfem.initialize(domain, params, initial_profile(preset.initial), n_cells)
    try:
        outcome.result = esfem.run(domain, params, config, state, progress=progress)
    except (ConvergenceError, MeshTanglingError) as exc:
        outcome.error = f"{type(exc).__name__}: {exc}"
    return outcome


def _initial_interface(preset: ExperimentPreset, params: ModelParams, domain) -> tuple[float, sharp.Orientation]:
    profile = initial_profile(preset.initial)
    c1 = 0.5 * (params.u_a + params.u_b)
    x = np.linspace(0.0, domain.length(0.0), 20001)
    s = profile(x, params) - c1
    # a crossing may sit exactly on a grid node, so compare signs of the nonzero samples
    keep = np.nonzero(s)[0]
    idx = np.nonzero(np.signbit(s[keep[:-1]]) != np.signbit(s[keep[1:]]))[0]
    if idx.size != 1:
        raise ValueError(f"initial profile of {preset.name!r} has {idx.size} interfaces; the interval model needs one")
    lo, hi = x[keep[idx[0]]], x[keep[idx[0] + 1]]
    lam = brentq(lambda y: float(profile(np.array([y]), params)[0]) - c1, lo, hi, xtol=1e-14)
    orientation = sharp.Orientation.MINUS_PLUS if s[keep[0]] < 0 else sharp.Orientation.PLUS_MINUS
    return lam, orientation


def run_sharp(preset: ExperimentPreset, dt: float = 1e-4) -> SharpOutcome | None:
    """Companion sharp-interface trajectory (``None`` when the preset has none)."""
    params = preset.params
    if preset.comparison is Comparison.NONE:
        return None
    if params.potential_kind is PotentialKind.QUARTIC:
        s_const = math.sqrt(2) / 3 * (0.5 * (params.u_b - params.u_a)) ** 2
    else:
        s_const = surface_tension_constant(solve_profile(params), params)
    if preset.comparison is Comparison.SHARP_CAPS:
        sp = sharp.SphereModelParams(vbar=preset.vbar, mbar=params.mbar, s_const=s_const, u_a=params.u_a,
                                     u_b=params.u_b)
        if preset.initial != "caps":
            raise ValueError("the cap model needs the two-cap initial profile")
        traj = sharp.integrate_caps(sharp.SharpCapState(0.8, 2.1), sp, preset.t_end, dt)
        return SharpOutcome(trajectory=traj, s_const=s_const)
    domain = preset.build_domain()
    lam, orientation = _initial_interface(preset, params, domain)
    traj = sharp.integrate_interval(sharp.SharpIntervalState(lam, 0.0, orientation), domain, preset.t_end, dt,
                                    params.u_a, params.u_b, params.mbar)
    # a point interface carries energy S (u_b - u_a)
    return SharpOutcome(trajectory=traj, s_const=s_const, energy_offset=s_const * (params.u_b - params.u_a))


def sharp_energy_at(outcome: SharpOutcome, preset: ExperimentPreset, t: float) -> float | None:
    traj = outcome.trajectory
    if t > traj.times[-1] + 1e-12:
        return None
    if preset.comparison is Comparison.SHARP_CAPS:
        return float(np.interp(t, traj.times, traj.energy))
    return outcome.energy_offset


def sharp_interfaces_at(outcome: SharpOutcome, preset: ExperimentPreset, t: float) -> list[float] | None:
    traj = outcome.trajectory
    if t > traj.times[-1] + 1e-12:
        return None
    if preset.comparison is Comparison.SHARP_CAPS:
        return list(traj.at(t))
    return [traj.at(t)]


def _interface_error(found: list[float], target: list[float] | None) -> float | None:
    if target is None:
        return None
    if not found:
        return math.inf
    return max(min(abs(f - g) for f in found) for g in target)


def summarize(run: RunOutcome, preset: ExperimentPreset, sharp_outcome: SharpOutcome | None) -> dict:
    """Summary row of one phase-field run."""
    row = {"epsilon": run.epsilon, "mbar": run.mbar, "n_cells": run.n_cells, "dt": run.dt}
    if run.result is None:
        row["status"] = run.error or "failed"
        return row
    res = run.result
    faces = esfem.locate_interfaces(res.final, run.params)
    row.update(status="ok", steps=res.steps, final_time=res.final.t,
               final_interfaces=";".join(csvio.fmt(f) for f in faces),
               final_energy=res.trace.energy[-1], mass_drift=res.trace.mass_drift())
    if sharp_outcome is not None:
        target = sharp_interfaces_at(sharp_outcome, preset, res.final.t)
        row["interface_error"] = _interface_error(faces, target)
        gaps = []
        for t, e in zip(res.trace.times, res.trace.energy):
            e0 = sharp_energy_at(sharp_outcome, preset, t)
            if e0 is not None:
                gaps.append(abs(e - e0))
        row["energy_gap_max"] = max(gaps) if gaps else None
        for t in preset.output_times:
            e0 = sharp_energy_at(sharp_outcome, preset, t)
            snap = res.snapshots.get(t)
            key = f"energy_gap_t{t:.4f}"
            row[key] = abs(esfem.energy(snap, run.params) - e0) if (snap is not None and e0 is not None) else None
    return row


@dataclass
class SweepReport:
    rows: list[dict]
    interface_error_decreasing: bool | None
    energy_gap_decreasing: dict[str, bool]


def _strictly_decreasing(vals):
    if any(v is None or not math.isfinite(v) for v in vals):
        return False
    return all(b < a for a, b in zip(vals, vals[1:]))


def sweep_report(rows: list[dict]) -> SweepReport:
    """Order rows by decreasing epsilon and flag strict decrease of the errors."""
    eps = {r["epsilon"] for r in rows}
    if len(eps) < 2:
        raise ValueError("a sweep report needs at least two epsilon values")
    ordered = sorted(rows, key=lambda r: -r["epsilon"])
    iface = None
    if all("interface_error" in r for r in ordered):
        iface = _strictly_decreasing([r["interface_error"] for r in ordered])
    gap_keys = sorted({k for r in ordered for k in r if k.startswith("energy_gap")})
    gaps = {k: _strictly_decreasing([r.get(k) for r in ordered]) for k in gap_keys}
    return SweepReport(rows=ordered, interface_error_decreasing=iface, energy_gap_decreasing=gaps)


_GNUPLOT = """set datafile separator ','
set key outside
set xlabel '{xlabel}'
set ylabel 'u'
plot {plots}
pause -1
"""


def _write_gnuplot(directory: Path, preset: ExperimentPreset, times):
    xlabel = "theta" if preset.domain in ("sphere", "deforming_sphere") else "x"
    plots = ", ".join(f"'{csvio.snapshot_name(preset.name, t)}' using 1:2 with lines title 't={t:g}'"
                      for t in times)
    (directory / "plot.gp").write_text(_GNUPLOT.format(xlabel=xlabel, plots=plots), encoding="utf-8")


def run_preset(preset: ExperimentPreset, out_dir: str | Path | None = None, gnuplot: bool = False,
               log=None) -> PresetReport:
    """Run every phase-field case of ``preset`` plus its sharp companion and write CSV files.

    Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 the
    sharp model hit a singular event before ``t_end`` (phase-field runs
    still complete).
    """
    log = log or (lambda msg: None)
    root = Path(out_dir if out_dir is not None else preset.out_dir) / preset.name
    report = PresetReport(exit_code=EXIT_OK)
    try:
        root.mkdir(parents=True, exist_ok=True)
        report.sharp = run_sharp(preset)
    except (OSError, ValueError) as exc:
        report.exit_code = EXIT_CONFIG
        report.messages.append(str(exc))
        return report
    if report.sharp is not None:
        traj = report.sharp.trajectory
        if preset.comparison is Comparison.SHARP_CAPS:
            csvio.write_cap_trajectory(root / "sharp.csv", traj)
        else:
            csvio.write_interval_trajectory(root / "sharp.csv", traj)
        if traj.event is not None:
            msg = f"sharp model singular at t={traj.event.time:.6f} ({traj.event.kind})"
            report.messages.append(msg)
            log(msg)

    multi_mbar = len(preset.mobilities) > 1
    for eps in preset.epsilon_list:
        for mbar in preset.mobilities:
            tag = f"eps_{eps:g}" + (f"_mbar_{mbar:g}" if multi_mbar else "")
            log(f"{preset.name}: running {tag}")
            run = run_phase_field(preset, eps, mbar)
            run.directory = root / tag
            report.runs.append(run)
            if run.result is None:
                report.messages.append(f"{tag}: {run.error}")
                log(f"{tag}: {run.error}")
                continue
            for t, snap in sorted(run.result.snapshots.items()):
                csvio.write_snapshot(run.directory / csvio.snapshot_name(preset.name, t), snap)
            csvio.write_trace(run.directory / "trace.csv", run.result.trace)
            if gnuplot:
                _write_gnuplot(run.directory, preset, sorted(run.result.snapshots))

    report.rows = [summarize(r, preset, report.sharp) for r in report.runs]
    if report.rows:
        header = []
        for row in report.rows:
            header += [k for k in row if k not in header]
        csvio.write_rows(root / "summary.csv", header, [[row.get(k) for k in header] for row in report.rows])
    if any(r.result is None for r in report.runs):
        report.exit_code = EXIT_SOLVER
    elif report.sharp is not None and report.sharp.event is not None and report.sharp.event.time < preset.t_end:
        report.exit_code = EXIT_SINGULAR
    return report
