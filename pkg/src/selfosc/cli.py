"""Command-line interface: config parsing, CSV/SVG emission, and the
figure-reproduction recipes.

Exit codes: 0 success, 2 config/input error, 3 numeric divergence,
4 fit non-convergence.  All outputs are deterministic: the same config
and seed produce byte-identical CSV files.
"""

import argparse
import configparser
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsp, experiments, fitting, optics, slowflow
from .integrate import DivergenceError, SweepSchedule, TimeTrace, run_sweep
from .model import ModelError, OscillatorParams
from .optics import OpticsError

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing

def _fmt(value):
    """Stable, round-trippable float formatting for CSV/config output."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def load_config(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parser


def _get(parser, section, key, convert, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] missing required key '{key}'")
        return default
    raw = parser.get(section, key)
    try:
        return convert(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _parse_bool(raw):
    val = raw.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_breakpoints(raw):
    """'t:p, t:p, ...' -> tuple of (time, p) pairs."""
    pairs = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            t_str, p_str = item.split(":")
            pairs.append((float(t_str), float(p_str)))
        except ValueError as exc:
            raise ValueError(f"bad breakpoint {item!r} (want time:p)") from exc
    if len(pairs) < 2:
        raise ValueError("need at least two breakpoints")
    return tuple(pairs)


def parse_grid(raw):
    """Comma-separated floats and lo:hi:step segments -> sorted grid."""
    values = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ValueError(f"bad grid segment {item!r} (want lo:hi:step)")
            lo, hi, step = (float(s) for s in parts)
            if step <= 0 or hi < lo:
                raise ValueError(f"bad grid segment {item!r}")
            n = int(round((hi - lo) / step))
            values.extend(lo + k * step for k in range(n + 1))
        else:
            values.append(float(item))
    values = sorted(values)
    grid = []
    for v in values:
        if not grid or v - grid[-1] > 1e-9:
            grid.append(v)
    return grid


@dataclass(frozen=True)
class RunConfig:
    """Validated per-command configuration assembled from an INI file."""

    model: OscillatorParams
    mode: str
    schedule: object
    dt: float
    seed: int
    record_every: int
    sections: dict  # resolved key/value view for the effective-config echo


def load_run_config(path, seed_override=None):
    parser = load_config(path)
    model_kwargs = {}
    for key in ("omega0", "q0", "omega_m", "gamma3", "gamma5",
                "alpha3", "alpha5", "f_m", "phi0"):
        val = _get(parser, "model", key, float)
        if val is not None:
            model_kwargs[key] = val
    mode = _get(parser, "model", "mode", str, default="quintic").strip()
    try:
        params = OscillatorParams(**model_kwargs)
    except ModelError as exc:
        raise ConfigError(f"[model] {exc}") from exc

    schedule = None
    if parser.has_section("schedule"):
        bps = _get(parser, "schedule", "breakpoints", parse_breakpoints,
                   required=True)
        try:
            schedule = SweepSchedule(breakpoints=bps)
        except ValueError as exc:
            raise ConfigError(f"[schedule] {exc}") from exc

    spp = _get(parser, "integration", "steps_per_period", int, default=100)
    if spp < 50:
        raise ConfigError("[integration] steps_per_period must be >= 50")
    dt = _get(parser, "integration", "dt", float,
              default=TWO_PI / (spp * params.omega0))
    seed = _get(parser, "integration", "seed", int, default=0)
    if seed_override is not None:
        seed = seed_override
    record_every = _get(parser, "integration", "record_every", int, default=1)
    if record_every < 1:
        raise ConfigError("[integration] record_every must be >= 1")

    sections = {name: dict(parser.items(name)) for name in parser.sections()}
    sections.setdefault("model", {})["mode"] = mode
    for key, val in model_kwargs.items():
        sections["model"][key] = _fmt(val)
    sections.setdefault("integration", {})
    sections["integration"]["dt"] = _fmt(dt)
    sections["integration"]["seed"] = str(seed)
    sections["integration"]["record_every"] = str(record_every)
    return RunConfig(model=params, mode=mode, schedule=schedule, dt=dt,
                     seed=seed, record_every=record_every, sections=sections,
                     ), parser


def write_effective_config(out_path, sections):
    lines = []
    for name in sections:
        lines.append(f"[{name}]")
        for key, val in sections[name].items():
            lines.append(f"{key} = {val}")
        lines.append("")
    out_path.write_text("\n".join(lines))


# ---------------------------------------------------------------------------
# CSV / SVG emission

def write_csv(path, header, rows, comment=None):
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_timetrace_csv(path, trace):
    ts = trace.times()
    write_csv(path, ("t", "x"), zip(ts.tolist(), trace.samples.tolist()),
              comment=f"t0={trace.t0!r} dt={trace.dt!r} source={trace.metadata}")


def read_timetrace_csv(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"trace file not found: {path}")
    ts, xs = [], []
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("t,"):
            continue
        t_str, x_str = line.split(",")[:2]
        ts.append(float(t_str))
        xs.append(float(x_str))
    if len(ts) < 2:
        raise ConfigError(f"{path}: need at least 2 samples")
    dts = np.diff(ts)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * abs(dts[0]):
        raise ConfigError(f"{path}: trace is not uniformly sampled")
    return TimeTrace(t0=ts[0], dt=float(dts[0]), samples=np.array(xs),
                     metadata=str(path))


def write_spectrum_csv(path, spectrum):
    freqs = spectrum.frequencies()
    rows = ((f, a, spectrum.unit)
            for f, a in zip(freqs.tolist(), spectrum.amplitudes.tolist()))
    write_csv(path, ("f_hz", "amplitude", "unit"), rows)


def read_spectrum_csv(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"spectrum file not found: {path}")
    freqs, amps, unit = [], [], "arb"
    for line in p.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("f_hz"):
            continue
        parts = line.split(",")
        freqs.append(float(parts[0]))
        amps.append(float(parts[1]))
        if len(parts) > 2:
            unit = parts[2].strip()
    if len(freqs) < 2:
        raise ConfigError(f"{path}: need at least 2 bins")
    df = freqs[1] - freqs[0]
    return dsp.Spectrum(f0_bin=freqs[0], df=df, amplitudes=np.array(amps),
                        unit=unit)


def write_svg(path, series, width=900, height=320, margin=45):
    """Minimal polyline SVG: a frame plus one polyline per series."""
    xs_all = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0
    inner_w, inner_h = width - 2 * margin, height - 2 * margin

    def sx(x):
        return margin + (x - x_lo) / x_span * inner_w

    def sy(y):
        return height - margin - (y - y_lo) / y_span * inner_h

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect x="{margin}" y="{margin}" width="{inner_w}" '
             f'height="{inner_h}" fill="none" stroke="black"/>']
    for xs, ys, color in series:
        pts = " ".join(f"{sx(float(x)):.2f},{sy(float(y)):.2f}"
                       for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# commands

def _out_dir(args):
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_sweep(args):
    cfg, _ = load_run_config(args.config, seed_override=args.seed)
    if cfg.schedule is None:
        raise ConfigError("[schedule] section with breakpoints is required")
    record = run_sweep(cfg.model, cfg.schedule, seed=cfg.seed, dt=cfg.dt,
                       mode=cfg.mode, record_every=cfg.record_every)
    out = _out_dir(args)
    ts = record.trace.times()
    rows = zip(ts.tolist(), record.trace.samples.tolist(),
               record.p_of_t.samples.tolist(),
               record.envelope.samples.tolist())
    write_csv(out / "sweep.csv", ("t", "x", "p", "envelope"), rows,
              comment=f"t0={record.trace.t0!r} dt={record.trace.dt!r} "
                      f"seed={cfg.seed}")
    write_effective_config(out / "sweep_effective.cfg", cfg.sections)
    if args.format in ("svg", "both"):
        write_svg(out / "sweep.svg",
                  [(ts, record.envelope.samples, "steelblue"),
                   (ts, record.p_of_t.samples, "crimson")])
    if args.verbose:
        print(f"final envelope: {_fmt(record.envelope.samples[-1])}")
    return 0


def cmd_slowflow(args):
    out = _out_dir(args)
    if args.p_max >= args.p_min:
        ps = np.arange(args.p_min, args.p_max + 0.5 * args.p_step, args.p_step)
    else:
        ps = np.array([])
    rows = [(b.p, b.amplitude, int(b.stable))
            for b in slowflow.branch_diagram(args.gamma3, args.gamma5, ps)]
    write_csv(out / "slowflow_branches.csv", ("p", "amplitude", "stable"), rows)
    if args.verbose:
        print(f"{len(rows)} branch points")
    return 0


def cmd_fit(args):
    spectrum = read_spectrum_csv(args.spectrum)
    fit = fitting.fit_resonance(spectrum, procedure=args.procedure,
                                time_domain_amax=args.amax)
    out = _out_dir(args)
    row = (fit.a_max, _opt(fit.sd_a_max), fit.f0, _opt(fit.sd_f0),
           fit.q_eff, _opt(fit.sd_q_eff), fit.a_floor, _opt(fit.sd_a_floor),
           fit.procedure, fit.residual_norm)
    write_csv(out / "fit_report.csv",
              ("a_max", "sd_a_max", "f0_hz", "sd_f0", "q_eff", "sd_q_eff",
               "a_floor", "sd_a_floor", "procedure", "residual_norm"),
              [row])
    print(f"a_max={fit.a_max!r} f0={fit.f0!r} q_eff={fit.q_eff!r} "
          f"a_floor={fit.a_floor!r}")
    return 0


def _opt(v):
    return "" if v is None else repr(v)


def cmd_spectrum(args):
    trace = read_timetrace_csv(args.input)
    if args.ref_freq or args.cutoff:
        if not args.cutoff:
            raise ConfigError("--cutoff is required when mixing")
        trace = dsp.mix_and_lowpass(trace, args.ref_freq, args.cutoff)
    spectrum = dsp.amplitude_spectrum(trace, unit=args.unit, window=args.window)
    if args.calibrate:
        cal = dsp.CalibrationConstants(amplification=args.amplification)
        veff = dsp.Spectrum(f0_bin=spectrum.f0_bin, df=spectrum.df,
                            amplitudes=spectrum.amplitudes / math.sqrt(2.0),
                            unit="V")
        spectrum = dsp.calibrate_to_displacement(veff, cal)
    out = _out_dir(args)
    write_spectrum_csv(out / "spectrum.csv", spectrum)
    if args.verbose:
        print(f"peak at {spectrum.peak_frequency()!r} Hz")
    return 0


def cmd_noise(args):
    params = optics.NoiseParams(amplitude=args.amplitude,
                                bandwidth=args.bandwidth,
                                temperature=args.temperature,
                                f0=args.f0, q=args.q, c_l=args.c_l)
    value = optics.thermal_frequency_noise(params)
    out = _out_dir(args)
    write_csv(out / "noise.csv",
              ("amplitude_m", "bandwidth_hz", "temperature_k", "f0_hz", "q",
               "c_l", "df_rms_hz"),
              [(args.amplitude, args.bandwidth, args.temperature, args.f0,
                args.q, args.c_l, value)])
    print(f"df_rms = {value!r} Hz")
    return 0


def cmd_lissajous(args):
    fringe = optics.InterferometerParams(wavelength=args.wavelength)
    pts = optics.lissajous_curve(args.phase, args.depth, fringe,
                                 inverse_q_mean=args.inverse_q_mean,
                                 n_points=args.n_points)
    out = _out_dir(args)
    write_csv(out / "lissajous.csv", ("slope", "inverse_q_eff"),
              ((float(a), float(b)) for a, b in pts))
    if args.format in ("svg", "both"):
        write_svg(out / "lissajous.svg", [(pts[:, 0], pts[:, 1], "steelblue")])
    if args.verbose:
        print(f"{pts.shape[0]} points, kind={optics.lissajous_kind(args.phase)}")
    return 0


def cmd_hysteresis(args):
    cfg, parser = load_run_config(args.config, seed_override=args.seed)
    if not parser.has_section("hysteresis"):
        raise ConfigError("[hysteresis] section is required")
    p_grid = _get(parser, "hysteresis", "p_grid", parse_grid, required=True)
    dwell = _get(parser, "hysteresis", "dwell_time", float, required=True)
    measure_q = _get(parser, "hysteresis", "measure_q", _parse_bool,
                     default=True)
    curve = experiments.hysteresis_experiment(
        cfg.model, p_grid, dwell, seed=cfg.seed, dt=cfg.dt, mode=cfg.mode,
        measure_q=measure_q)
    out = _out_dir(args)
    rows = []
    for direction, branch in (("up", curve.up_branch),
                              ("down", curve.down_branch)):
        for s in branch:
            rows.append((direction, s.control, s.amplitude, s.q_eff,
                         int(s.settled)))
    write_csv(out / "hysteresis.csv",
              ("direction", "control", "amplitude", "q_eff", "settled_flag"),
              rows)
    write_csv(out / "hysteresis_jumps.csv", ("jump_up", "jump_down"),
              [(_opt(curve.jump_up), _opt(curve.jump_down))])
    write_effective_config(out / "hysteresis_effective.cfg", cfg.sections)
    if args.format in ("svg", "both"):
        up = curve.up_branch
        dn = curve.down_branch
        write_svg(out / "hysteresis.svg",
                  [([s.control for s in up], [s.amplitude for s in up],
                    "steelblue"),
                   ([s.control for s in dn], [s.amplitude for s in dn],
                    "crimson")])
    print(f"jump_up={curve.jump_up} jump_down={curve.jump_down}")
    return 0


def cmd_validate_q(args):
    parser = load_config(args.config)
    if not parser.has_section("physical"):
        raise ConfigError("[physical] section is required")
    f0 = _get(parser, "physical", "f0", float, required=True)
    omega0 = TWO_PI * f0
    omega_m = omega0 * _get(parser, "physical", "omega_m_factor", float,
                            default=1.0)
    try:
        pt = optics.PhotothermalParams(
            q0=_get(parser, "physical", "q0", float, required=True),
            c_z=_get(parser, "physical", "c_z", float, required=True),
            kappa=_get(parser, "physical", "kappa", float, required=True),
            tau=_get(parser, "physical", "tau", float, required=True),
            omega0=omega0, omega_m=omega_m)
        fringe = optics.InterferometerParams(
            wavelength=_get(parser, "physical", "wavelength", float,
                            required=True))
    except OpticsError as exc:
        raise ConfigError(f"[physical] {exc}") from exc
    fractions = _get(parser, "physical", "power_fractions",
                     lambda raw: [float(s) for s in raw.split(",")],
                     default=[0.2, 0.4, 0.6, 0.8])
    cycles = _get(parser, "physical", "ringdown_cycles", int, default=1500)
    spc = _get(parser, "physical", "steps_per_cycle", int, default=100)

    p_crit = optics.critical_power(pt)
    powers = [f * p_crit for f in fractions]
    formula = experiments.qeff_linearity_scan(pt, powers, source="formula")
    ringdown = experiments.qeff_linearity_scan(pt, powers, source="ringdown",
                                               fringe=fringe, n_cycles=cycles,
                                               steps_per_cycle=spc)
    out = _out_dir(args)
    rows = [(p, fq, rq) for p, fq, rq in
            zip(powers, formula.inverse_q, ringdown.inverse_q)]
    write_csv(out / "validate_q.csv",
              ("power_w", "inv_q_formula", "inv_q_ringdown"), rows,
              comment=f"p_crit={p_crit!r}")
    write_csv(out / "validate_q_summary.csv",
              ("p_crit_w", "zero_crossing_formula_w", "zero_crossing_ringdown_w"),
              [(p_crit, formula.zero_crossing, ringdown.zero_crossing)])
    print(f"P_crit={p_crit!r} W, ring-down zero crossing="
          f"{ringdown.zero_crossing!r} W "
          f"({100 * (ringdown.zero_crossing / p_crit - 1):+.2f}%)")
    return 0


# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--out-dir", default=".", help="output directory")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    sub.add_argument("--format", choices=("csv", "svg", "both"),
                     default="csv")
    sub.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="selfosc",
        description="Optomechanical cantilever self-excitation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="integrate a p(t) schedule")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("slowflow", help="limit-cycle branch diagram")
    p.add_argument("gamma3", type=float)
    p.add_argument("gamma5", type=float)
    p.add_argument("p_min", type=float)
    p.add_argument("p_max", type=float)
    p.add_argument("--p-step", type=float, default=0.01)
    _add_common(p)
    p.set_defaults(func=cmd_slowflow)

    p = sub.add_parser("fit", help="fit a resonance spectrum")
    p.add_argument("--spectrum", required=True, help="spectrum CSV path")
    p.add_argument("--procedure", choices=fitting.PROCEDURES,
                   default="four_param")
    p.add_argument("--amax", type=float, default=None,
                   help="time-domain peak amplitude for fixed-amax procedures")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("spectrum", help="amplitude spectrum of a time trace")
    p.add_argument("--input", required=True, help="time-trace CSV path")
    p.add_argument("--ref-freq", type=float, default=0.0,
                   help="mixer reference frequency (Hz)")
    p.add_argument("--cutoff", type=float, default=0.0,
                   help="low-pass cutoff (Hz); 0 = no filtering")
    p.add_argument("--window", choices=("rect", "hann"), default="rect")
    p.add_argument("--unit", default="V")
    p.add_argument("--calibrate", action="store_true",
                   help="convert a voltage spectrum to displacement (nm)")
    p.add_argument("--amplification", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("noise", help="thermal frequency noise")
    p.add_argument("--amplitude", type=float, default=1e-9,
                   help="oscillation amplitude (m)")
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--temperature", type=float, default=10.0)
    p.add_argument("--f0", type=float, default=74083.0)
    p.add_argument("--q", type=float, default=31000.0)
    p.add_argument("--c-l", type=float, default=2.8)
    _add_common(p)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("lissajous", help="1/Q_eff vs fringe slope curve")
    p.add_argument("--phase", type=float, default=math.pi / 2.0)
    p.add_argument("--depth", type=float, default=1e-5)
    p.add_argument("--inverse-q-mean", type=float, default=1.0 / 31000.0)
    p.add_argument("--wavelength", type=float, default=830e-9)
    p.add_argument("--n-points", type=int, default=256)
    _add_common(p)
    p.set_defaults(func=cmd_lissajous)

    p = sub.add_parser("hysteresis", help="stepped up/down hysteresis run")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_hysteresis)

    p = sub.add_parser("validate-q", help="ring-down Q against the closed form")
    p.add_argument("--config", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_validate_q)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, OpticsError, dsp.SignalChainError, dsp.UnitError,
            ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except fitting.FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
