"""Command-line front end: evolve, strobe, steady, sweep and device modes.

Configuration comes from an INI file with flat key-value sections
([protocol], [device], [sweep], [output]) or from a built-in preset.
Every numeric key carries its unit in its name; frequency-like quantities
use the rate convention value_mhz = rate / 1e6 with angular frequencies in
rad/s (so g at 2*pi*10 MHz is g_mhz = 62.83185...).  Output files are
byte-stable: fixed column order, 17-significant-digit floats, LF endings.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import hbar

from .corrections import QubitEnvironment, corrected_steady_state
from .device import DeviceParams, derive_protocol, duty_cycle_schedule
from .dynamics import (
    build_generator,
    evolve,
    evolve_stroboscopic,
    steady_state_analytic,
    steady_state_numeric,
)
from .errors import (
    ConvergenceError,
    DegenerateKernelError,
    DiagonalClosureError,
    NonNormalizableError,
)
from .model import ProtocolParams, build_kick_map, default_n_max, thermal_distribution
from . import corrections

MODES = ("evolve", "strobe", "steady", "sweep", "device")
FORMATS = ("csv", "json")
MHZ = 1e6  # rates and angular frequencies are quoted in units of 1e6 / s


class ConfigError(Exception):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class SweepSpec:
    n_th_grid: tuple[float, ...]
    ra_over_kappa: tuple[float, ...]
    p_values: tuple[float, ...]
    with_fidelity: bool = False


@dataclass
class RunConfig:
    mode: str
    output: str
    fmt: str = "csv"
    protocol: ProtocolParams | None = None
    env: QubitEnvironment | None = None
    device: DeviceParams | None = None
    device_tau: float | None = None
    device_ra: float | None = None
    sweep: SweepSpec | None = None
    n_max: int | None = None
    jobs: int = 1
    t_end_ra: float = 120.0
    samples: int = 481
    n_kicks: int = 400

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")


# --- built-in presets --------------------------------------------------------

_G_STRONG = 2.0 * math.pi * 1e7          # coupling, rad/s
_KAPPA_HIGH_Q = math.pi * 1e3            # decay of a 2*pi*100 MHz mode at Q = 2e5
_OMEGA0 = 2.0 * math.pi * 1e8
_EJ_PARKED = 4.0 * math.pi * 1e10 * hbar  # parked splitting, J


def _preset_fig2() -> dict:
    """Transient cooling run: n_th = 1.7, r_a/kappa = 133, pulse area pi/8."""
    params = ProtocolParams(
        g=_G_STRONG,
        tau=(math.pi / 8.0) / _G_STRONG,
        r_a=133.0 * _KAPPA_HIGH_Q,
        kappa=_KAPPA_HIGH_Q,
        n_th=1.7,
        p_e=0.0,
    )
    return {"protocol": params}


def _preset_fig3() -> dict:
    """Cooling-performance sweep: full-swap kicks over a thermal-occupation grid."""
    params = ProtocolParams(
        g=_G_STRONG,
        tau=(math.pi / 2.0) / _G_STRONG,
        r_a=100.0 * _KAPPA_HIGH_Q,
        kappa=_KAPPA_HIGH_Q,
        n_th=1.0,
        p_e=0.0,
    )
    env = QubitEnvironment(
        alpha_g=1e-4, temperature=0.01, e_j=_EJ_PARKED, omega0=_OMEGA0
    )
    sweep = SweepSpec(
        n_th_grid=tuple(np.logspace(-2.0, 3.0, 61)),
        ra_over_kappa=(1e2, 1e3),
        p_values=(0.0, 1e-4, 1e-5),
        with_fidelity=False,
    )
    return {"protocol": params, "env": env, "sweep": sweep}


def _preset_device_paper() -> dict:
    """Reference charge-qubit device: 2*pi*100 MHz mode at Q = 2e5, 10 mK."""
    dev = DeviceParams(
        e_j=_EJ_PARKED,
        c_x=20e-18,
        c_g=20e-18,
        c_j=210e-18,
        v_x=0.25,
        resistance=50.0,
        temperature=0.01,
        omega0=_OMEGA0,
        q_factor=2e5,
        g_override=_G_STRONG,
    )
    return {"device": dev, "device_tau": 25e-9, "device_ra": 3e6}


PRESETS = {
    "fig2": _preset_fig2,
    "fig3": _preset_fig3,
    "device-paper": _preset_device_paper,
}


# --- configuration file ------------------------------------------------------


def _get_float(section: configparser.SectionProxy, key: str) -> float:
    try:
        return float(section[key])
    except KeyError:
        raise ConfigError(f"missing key {key!r} in [{section.name}]") from None
    except ValueError:
        raise ConfigError(f"key {key!r} in [{section.name}] is not a number") from None


def _get_float_opt(
    section: configparser.SectionProxy, key: str, default: float | None = None
) -> float | None:
    if key not in section:
        return default
    return _get_float(section, key)


def _float_list(section: configparser.SectionProxy, key: str) -> tuple[float, ...]:
    raw = section.get(key, "")
    items = [part.strip() for part in raw.split(",") if part.strip()]
    try:
        return tuple(float(item) for item in items)
    except ValueError:
        raise ConfigError(f"key {key!r} in [{section.name}] is not a number list") from None


def _protocol_from_section(section: configparser.SectionProxy) -> ProtocolParams:
    g = _get_float(section, "g_mhz") * MHZ
    pulse_area = _get_float_opt(section, "pulse_area_rad")
    if pulse_area is not None:
        tau = pulse_area / g
    else:
        tau = _get_float(section, "tau_ns") * 1e-9
    try:
        return ProtocolParams(
            g=g,
            tau=tau,
            r_a=_get_float(section, "ra_mhz") * MHZ,
            kappa=_get_float(section, "kappa_mhz") * MHZ,
            n_th=_get_float(section, "n_th"),
            p_e=_get_float_opt(section, "p_e", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [protocol]: {exc}") from exc


def _device_from_section(section: configparser.SectionProxy) -> DeviceParams:
    uev = 1e-6 * 1.602176634e-19
    e_c = _get_float_opt(section, "e_c_uev")
    v_g = _get_float_opt(section, "v_g_v")
    mass = _get_float_opt(section, "mass_kg")
    distance_nm = _get_float_opt(section, "distance_nm")
    g_override = _get_float_opt(section, "g_mhz")
    try:
        return DeviceParams(
            e_j=_get_float(section, "e_j_uev") * uev,
            c_x=_get_float(section, "c_x_af") * 1e-18,
            c_g=_get_float(section, "c_g_af") * 1e-18,
            c_j=_get_float(section, "c_j_af") * 1e-18,
            v_x=_get_float(section, "v_x_v"),
            resistance=_get_float(section, "r_ohm"),
            temperature=_get_float(section, "temperature_mk") * 1e-3,
            omega0=_get_float(section, "omega0_mhz") * MHZ,
            q_factor=_get_float(section, "q_factor"),
            e_c=e_c * uev if e_c is not None else None,
            v_g=v_g,
            mass=mass,
            distance=distance_nm * 1e-9 if distance_nm is not None else None,
            g_override=g_override * MHZ if g_override is not None else None,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [device]: {exc}") from exc


def _sweep_from_section(section: configparser.SectionProxy) -> SweepSpec:
    n_min = _get_float(section, "n_th_min")
    n_max_val = _get_float(section, "n_th_max")
    count = int(_get_float(section, "n_th_count"))
    if count < 1 or n_min <= 0 or n_max_val < n_min:
        raise ConfigError("sweep grid must be non-empty with 0 < n_th_min <= n_th_max")
    if count == 1:
        grid: tuple[float, ...] = (n_min,)
    else:
        grid = tuple(np.logspace(math.log10(n_min), math.log10(n_max_val), count))
    ra_list = _float_list(section, "ra_over_kappa")
    p_list = _float_list(section, "p_excited") or (0.0,)
    if not ra_list:
        raise ConfigError("sweep needs at least one ra_over_kappa value")
    return SweepSpec(
        n_th_grid=grid,
        ra_over_kappa=ra_list,
        p_values=p_list,
        with_fidelity=section.getboolean("with_fidelity", fallback=False),
    )


def load_config_file(path: str) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read configuration file {path!r}")
    pieces: dict = {}
    if parser.has_section("protocol"):
        pieces["protocol"] = _protocol_from_section(parser["protocol"])
    if parser.has_section("device"):
        dev_section = parser["device"]
        pieces["device"] = _device_from_section(dev_section)
        pieces["device_tau"] = _get_float_opt(dev_section, "tau_ns")
        if pieces["device_tau"] is not None:
            pieces["device_tau"] *= 1e-9
        pieces["device_ra"] = _get_float_opt(dev_section, "ra_mhz")
        if pieces["device_ra"] is not None:
            pieces["device_ra"] *= MHZ
    if parser.has_section("sweep"):
        pieces["sweep"] = _sweep_from_section(parser["sweep"])
    if parser.has_section("output"):
        out = parser["output"]
        pieces["output"] = out.get("path", "")
        pieces["fmt"] = out.get("format", "csv")
    if "protocol" not in pieces and "device" not in pieces:
        raise ConfigError("configuration needs a [protocol] or [device] section")
    return pieces


def _resolve_protocol(config: RunConfig) -> tuple[ProtocolParams, QubitEnvironment | None]:
    if config.protocol is not None:
        return config.protocol, config.env
    if config.device is not None:
        if config.device_tau is None or config.device_ra is None:
            raise ConfigError("device-based runs need tau_ns and ra_mhz")
        params, env = derive_protocol(
            config.device, tau=config.device_tau, r_a=config.device_ra
        )
        return params, env
    raise ConfigError("no protocol or device parameters supplied")


# --- output ------------------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_csv(path: str, columns: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def _write_json(path: str, metadata: dict, columns: list[str], rows: list[tuple]) -> None:
    data = {col: [row[i] for row in rows] for i, col in enumerate(columns)}
    payload = {"metadata": metadata, "data": data}
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _emit(config: RunConfig, metadata: dict, columns: list[str], rows: list[tuple]) -> None:
    if config.fmt == "csv":
        _write_csv(config.output, columns, rows)
    else:
        _write_json(config.output, metadata, columns, rows)


def _params_metadata(params: ProtocolParams, n_max: int) -> dict:
    return {
        "g_rad_per_s": params.g,
        "tau_s": params.tau,
        "ra_per_s": params.r_a,
        "kappa_per_s": params.kappa,
        "n_th": params.n_th,
        "p_e": params.p_e,
        "pulse_area_rad": params.theta,
        "n_max": n_max,
    }


# --- mode runners -------------------------------------------------------------


def _run_evolve(config: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    params, _ = _resolve_protocol(config)
    if params.r_a <= 0:
        raise ConfigError("evolve mode needs r_a > 0 to fix the time unit")
    n_max = config.n_max or default_n_max(params.n_th)
    kick = build_kick_map(params.g, params.tau, params.p_e, n_max)
    gen = build_generator(params, kick, n_max)
    initial = thermal_distribution(params.n_th, n_max)
    t_end = config.t_end_ra / params.r_a
    times = np.linspace(0.0, t_end, config.samples)
    trace = evolve(initial, gen, t_end, sample_times=times)
    rows = [
        (float(t * params.r_a), float(m), float(p))
        for t, m, p in zip(trace.times, trace.mean_n, trace.p0)
    ]
    return _params_metadata(params, n_max), ["t_ra", "mean_n", "p0"], rows


def _run_strobe(config: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    params, _ = _resolve_protocol(config)
    if params.r_a <= 0:
        raise ConfigError("strobe mode needs r_a > 0")
    n_max = config.n_max or default_n_max(params.n_th)
    kick = build_kick_map(params.g, params.tau, params.p_e, n_max)
    initial = thermal_distribution(params.n_th, n_max)
    trace = evolve_stroboscopic(initial, params, kick, config.n_kicks)
    rows = [
        (float(t * params.r_a), float(m), float(p))
        for t, m, p in zip(trace.times, trace.mean_n, trace.p0)
    ]
    meta = _params_metadata(params, n_max)
    meta["n_kicks"] = config.n_kicks
    return meta, ["t_ra", "mean_n", "p0"], rows


def _run_steady(config: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    params, _ = _resolve_protocol(config)
    n_max = config.n_max or default_n_max(params.n_th)
    kick = build_kick_map(params.g, params.tau, params.p_e, n_max)
    analytic = steady_state_analytic(params, kick, n_max)
    numeric = steady_state_numeric(build_generator(params, kick, n_max))
    rows = [
        (n, float(pa), float(pn))
        for n, (pa, pn) in enumerate(
            zip(analytic.populations.populations, numeric.populations.populations)
        )
    ]
    meta = _params_metadata(params, n_max)
    meta.update(
        {
            "mean_n_s_analytic": analytic.mean_n_s,
            "mean_n_s_numeric": numeric.mean_n_s,
            "delta_n": analytic.delta_n,
            "p0_s": analytic.p0_s,
        }
    )
    return meta, ["n", "p_analytic", "p_numeric"], rows


def _sweep_point(
    params: ProtocolParams,
    env: QubitEnvironment | None,
    sweep_spec: SweepSpec,
    n_th: float,
    ra_over_kappa: float,
    p_e: float,
    n_max_override: int | None,
) -> tuple:
    n_max = n_max_override or default_n_max(n_th)
    point = replace(
        params, n_th=n_th, r_a=ra_over_kappa * params.kappa, p_e=p_e
    )
    if sweep_spec.with_fidelity:
        if env is None:
            raise ConfigError("with_fidelity sweeps need a qubit environment")
        result = corrected_steady_state(
            point, env, n_max, p_override=p_e, include_fidelity=True
        )
    else:
        kick = build_kick_map(point.g, point.tau, p_e, n_max)
        result = steady_state_analytic(point, kick, n_max)
    return (n_th, ra_over_kappa, p_e, result.mean_n_s, result.delta_n, result.p0_s)


def _run_sweep(config: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    params, env = _resolve_protocol(config)
    sweep_spec = config.sweep
    if sweep_spec is None:
        raise ConfigError("sweep mode needs a [sweep] section or preset")
    if not sweep_spec.n_th_grid or not sweep_spec.ra_over_kappa:
        raise ConfigError("sweep grid is empty")
    points = [
        (n_th, ra, p)
        for n_th in sweep_spec.n_th_grid
        for ra in sweep_spec.ra_over_kappa
        for p in sweep_spec.p_values
    ]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(
                pool.map(
                    lambda pt: _sweep_point(params, env, sweep_spec, *pt, config.n_max),
                    points,
                )
            )
    else:
        rows = [
            _sweep_point(params, env, sweep_spec, *pt, config.n_max) for pt in points
        ]
    rows.sort(key=lambda row: (row[0], row[1], row[2]))
    meta = {
        "g_rad_per_s": params.g,
        "tau_s": params.tau,
        "kappa_per_s": params.kappa,
        "pulse_area_rad": params.theta,
        "with_fidelity": sweep_spec.with_fidelity,
        "n_points": len(points),
    }
    columns = ["n_th", "ra_over_kappa", "p", "mean_n_s", "delta_n", "p0_s"]
    return meta, columns, rows


def _run_device(config: RunConfig) -> tuple[dict, list[str], list[tuple]]:
    if config.device is None:
        raise ConfigError("device mode needs a [device] section or preset")
    if config.device_tau is None or config.device_ra is None:
        raise ConfigError("device mode needs tau_ns and ra_mhz")
    dev = config.device
    params, env = derive_protocol(dev, tau=config.device_tau, r_a=config.device_ra)
    gamma_ej = corrections.relaxation_rate(env, env.e_j / hbar)
    gamma0 = corrections.relaxation_rate(env, env.omega0)
    schedule = duty_cycle_schedule(
        params.g,
        gamma_ej,
        params.r_a,
        params.tau,
        gamma0=gamma0,
        kappa=params.kappa,
    )
    fidelity_0 = corrections.kick_fidelity(gamma0, params.g, params.tau, level=1)
    floor = corrections.cooling_floor(params, env)
    rows: list[tuple] = [
        ("g_rad_per_s", params.g),
        ("tau_s", params.tau),
        ("ra_per_s", params.r_a),
        ("kappa_per_s", params.kappa),
        ("n_th", params.n_th),
        ("n_x", dev.n_x),
        ("e_c_j", dev.charging_energy),
        ("alpha_g", env.alpha_g),
        ("p_thermal_excitation", params.p_e),
        ("gamma_ej_per_s", gamma_ej),
        ("gamma_omega0_per_s", gamma0),
        ("kick_fidelity_level1", fidelity_0),
        ("heating_scale_per_nth", gamma0 * params.tau / 2.0),
        ("cooling_floor", floor),
        ("cycle_budget_s", schedule.cycle_budget),
        ("kick_period_s", schedule.period),
        ("budget_closes", float(schedule.closes)),
        ("max_kick_rate_per_s", schedule.max_kick_rate),
    ]
    meta = {"flags": list(schedule.flags)}
    return meta, ["quantity", "value"], rows


_RUNNERS = {
    "evolve": _run_evolve,
    "strobe": _run_strobe,
    "steady": _run_steady,
    "sweep": _run_sweep,
    "device": _run_device,
}


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit code."""
    try:
        metadata, columns, rows = _RUNNERS[config.mode](config)
        _emit(config, metadata, columns, rows)
    except ConfigError as exc:
        print(f"kickcool: configuration error: {exc}", file=sys.stderr)
        return 2
    except (
        NonNormalizableError,
        DegenerateKernelError,
        ConvergenceError,
        DiagonalClosureError,
        ValueError,
        FloatingPointError,
    ) as exc:
        print(f"kickcool: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"kickcool: cannot write output: {exc}", file=sys.stderr)
        return 2
    print(f"kickcool {config.mode}: wrote {len(rows)} rows to {config.output}")
    return 0


# --- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kickcool",
        description="Simulate cooling of a damped bosonic mode by periodic qubit kicks",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in parameter set")
        p.add_argument("--output", help="output file path")
        p.add_argument("--format", choices=FORMATS, default=None)
        p.add_argument("--n-max", type=int, default=None, help="truncation override")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
        p.add_argument(
            "--with-fidelity",
            action="store_true",
            help="apply the kick-decay fidelity correction in sweeps",
        )
        if mode == "evolve":
            p.add_argument("--t-end-ra", type=float, default=120.0)
            p.add_argument("--samples", type=int, default=481)
        if mode == "strobe":
            p.add_argument("--kicks", type=int, default=400)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        pieces = load_config_file(args.config)
    elif args.preset:
        pieces = PRESETS[args.preset]()
    else:
        raise ConfigError("a --config file or --preset is required")

    fmt = args.format or pieces.get("fmt") or "csv"
    output = args.output or pieces.get("output") or f"kickcool_{args.mode}.{fmt}"
    sweep = pieces.get("sweep")
    if sweep is not None and args.with_fidelity:
        sweep = replace(sweep, with_fidelity=True)
    config = RunConfig(
        mode=args.mode,
        output=output,
        fmt=fmt,
        protocol=pieces.get("protocol"),
        env=pieces.get("env"),
        device=pieces.get("device"),
        device_tau=pieces.get("device_tau"),
        device_ra=pieces.get("device_ra"),
        sweep=sweep,
        n_max=args.n_max,
        jobs=args.jobs,
        t_end_ra=getattr(args, "t_end_ra", 120.0),
        samples=getattr(args, "samples", 481),
        n_kicks=getattr(args, "kicks", 400),
    )
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        print(f"kickcool: configuration error: {exc}", file=sys.stderr)
        return 2
    return run(config)


def cli_entry() -> None:
    sys.exit(main())
