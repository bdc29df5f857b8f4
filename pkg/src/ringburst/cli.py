"""Config-driven command line interface.

Subcommands: rates, simulate, spectrogram, pcirc, sweep.  One JSON config
file describes one scenario; --set key=value overrides individual (dotted)
keys.  Outputs are CSV files with fixed 17-significant-digit formatting so
identical inputs produce byte-identical files, plus a manifest recording the
fully resolved config, its hash, and package versions.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constants import HBAR, K_B
from .dynamics import simulate
from .errors import ConfigError, RingburstError
from .excitation import KickEvent, PulseSequence, WaveformEvent, cpp_waveform, hcp_waveform
from .polarimetry import (
    DetectorSpec,
    band_integrate,
    circular_polarization_degree,
    s_norm,
    stokes_perpendicular,
)
from .relaxation import (
    CHANNELS,
    array_decay_rate,
    build_rate_table,
    coherent_phonon_rate,
    effective_dipole_phonon_rate,
    la_rate_unit,
    radiative_decay_rate,
    spread_time,
)
from .ring import MATERIALS, RingConfig, derive_scales, fermi_index, make_config

_GATE_SUPPORT = 5.0

_RING_DEFAULTS = {
    "material": "GaAs",
    "m_cut": 0,  # 0 -> automatic window
    "m_eff_me": None,
    "kappa": None,
    "deform_ev": None,
    "rho_s_kg_m3": None,
    "c_la_m_s": None,
    "debye_mev": None,
}
_RING_REQUIRED = ("r0_m", "d_m", "n_carriers", "temperature_k")

_EVENT_DEFAULTS = {
    "kick": {"axis": None, "alpha": None, "tau_d_s": 0.0, "t_on_s": 0.0, "t_on_tauf": 0.0},
    "hcp_wave": {"axis": None, "alpha": None, "tau_d_s": None, "t_on_s": 0.0, "t_on_tauf": 0.0},
    "cpp": {
        "alpha": None,
        "n_cycles": 3,
        "omega_c_wf": 1.0,
        "sense": 1,
        "carrier_phase": 0.0,
        "t_on_s": 0.0,
        "t_on_tauf": 0.0,
    },
}

_PULSES_DEFAULTS = {"repeat_period_s": 0.0, "repeat_period_tauf": 0.0, "repeat_count": 1}
_GRID_DEFAULTS = {"samples_per_tauf": 256, "span_s": 0.0, "span_tauf": 0.0}
_RATES_DEFAULTS = {name: True for name in CHANNELS}
_DETECTOR_DEFAULTS = {
    "delta_t_s": 100e-12,
    "t_d_s": 0.0,
    "omega_max_wf": 4.0,
    "n_omega": 512,
    "time_step_s": 0.0,  # 0 -> DeltaT/4
    "t_start_s": 0.0,
    "t_stop_s": 0.0,  # 0 -> latest fully covered time
    "band_wf": [0.5, 1.5],
}
_ARRAY_DEFAULTS = {"n_rings": 1, "delta_r0_m": 0.0}
_OUTPUT_DEFAULTS = {"dir": "out", "normalize_snorm": False}


def _reject_unknown(block: dict, allowed, path: str):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}.{key}")


def _merge(defaults: dict, given: dict, path: str) -> dict:
    _reject_unknown(given, defaults, path)
    out = dict(defaults)
    out.update(given)
    return out


def _require(block: dict, keys, path: str):
    for key in keys:
        if key not in block or block[key] is None:
            raise ConfigError(f"missing required field {path}.{key}")


def _load_materials_env() -> dict:
    path = os.environ.get("RINGBURST_MATERIALS")
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            table = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read materials table {path}: {exc}") from exc
    if not isinstance(table, dict):
        raise ConfigError(f"materials table {path} must be a JSON object")
    return table


def _ring_config(ring: dict) -> RingConfig:
    overrides = {
        key: ring[key]
        for key in ("m_eff_me", "kappa", "deform_ev", "rho_s_kg_m3", "c_la_m_s", "debye_mev")
        if ring[key] is not None
    }
    return make_config(
        r0=float(ring["r0_m"]),
        d=float(ring["d_m"]),
        n_carriers=int(ring["n_carriers"]),
        temperature=float(ring["temperature_k"]),
        material=ring["material"],
        m_cut=int(ring["m_cut"]) or None,
        materials=_load_materials_env(),
        **overrides,
    )


def resolve_config(raw: dict) -> dict:
    """Validate a raw config dict and fill in every default.

    The result is idempotent under re-resolution and fully determines a run;
    it is what the manifest echoes.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    if "config" in raw:  # manifest round-trip
        raw = raw["config"]
    allowed = {"ring", "pulses", "grid", "rates", "detector", "array", "output"}
    _reject_unknown(raw, allowed, "<root>")
    if "ring" not in raw:
        raise ConfigError("missing required block 'ring'")
    if "pulses" not in raw:
        raise ConfigError("missing required block 'pulses'")

    ring = _merge({**_RING_DEFAULTS, **{k: None for k in _RING_REQUIRED}}, raw["ring"], "ring")
    _require(ring, _RING_REQUIRED, "ring")
    cfg = _ring_config(ring)
    scales = derive_scales(cfg)
    tau_f = scales.tau_f

    # resolve material numbers so the manifest is self-contained
    preset = {**MATERIALS, **_load_materials_env()}[ring["material"]]
    for key in ("m_eff_me", "kappa", "deform_ev", "rho_s_kg_m3", "c_la_m_s", "debye_mev"):
        if ring[key] is None:
            ring[key] = preset[key]
    ring["m_cut"] = scales.m_cut
    ring["r0_m"] = float(ring["r0_m"])
    ring["d_m"] = float(ring["d_m"])
    ring["n_carriers"] = int(ring["n_carriers"])
    ring["temperature_k"] = float(ring["temperature_k"])

    pulses_raw = dict(raw["pulses"])
    events_raw = pulses_raw.pop("events", None)
    pulses = _merge(_PULSES_DEFAULTS, pulses_raw, "pulses")
    if not events_raw:
        raise ConfigError("pulses.events must be a non-empty list")
    events = []
    for i, ev in enumerate(events_raw):
        path = f"pulses.events[{i}]"
        if "type" not in ev:
            raise ConfigError(f"missing required field {path}.type")
        kind = ev["type"]
        if kind not in _EVENT_DEFAULTS:
            raise ConfigError(f"{path}.type must be one of {sorted(_EVENT_DEFAULTS)}")
        merged = _merge({**_EVENT_DEFAULTS[kind], "type": kind}, ev, path)
        if kind in ("kick", "hcp_wave"):
            _require(merged, ("axis", "alpha"), path)
            if kind == "hcp_wave":
                _require(merged, ("tau_d_s",), path)
        else:
            _require(merged, ("alpha",), path)
        merged["t_on_s"] = float(merged["t_on_s"]) + float(merged["t_on_tauf"]) * tau_f
        merged["t_on_tauf"] = 0.0
        events.append(merged)
    pulses["repeat_period_s"] = (
        float(pulses["repeat_period_s"]) + float(pulses["repeat_period_tauf"]) * tau_f
    )
    pulses["repeat_period_tauf"] = 0.0
    pulses["repeat_count"] = int(pulses["repeat_count"])
    pulses["events"] = events

    grid = _merge(_GRID_DEFAULTS, raw.get("grid", {}), "grid")
    span = float(grid["span_s"]) + float(grid["span_tauf"]) * tau_f
    if span == 0.0:
        span = 40.0 * tau_f  # single-shot default
    grid["span_s"] = span
    grid["span_tauf"] = 0.0
    grid["samples_per_tauf"] = int(grid["samples_per_tauf"])

    rates = _merge(_RATES_DEFAULTS, raw.get("rates", {}), "rates")
    for key, val in rates.items():
        if not isinstance(val, bool):
            raise ConfigError(f"rates.{key} must be true or false")

    det = _merge(_DETECTOR_DEFAULTS, raw.get("detector", {}), "detector")
    det["delta_t_s"] = float(det["delta_t_s"])
    if det["delta_t_s"] <= 0:
        raise ConfigError("detector.delta_t_s must be positive")
    if det["time_step_s"] == 0.0:
        det["time_step_s"] = det["delta_t_s"] / 4.0
    if det["t_stop_s"] == 0.0:
        det["t_stop_s"] = max(
            det["t_start_s"], span - _GATE_SUPPORT * det["delta_t_s"] - det["t_d_s"]
        )
    band = det["band_wf"]
    if (
        not isinstance(band, (list, tuple))
        or len(band) != 2
        or not 0 <= float(band[0]) < float(band[1])
    ):
        raise ConfigError("detector.band_wf must be [lo, hi] with 0 <= lo < hi")
    det["band_wf"] = [float(band[0]), float(band[1])]
    det["n_omega"] = int(det["n_omega"])
    if det["n_omega"] < 8:
        raise ConfigError("detector.n_omega must be at least 8")
    if float(det["omega_max_wf"]) < det["band_wf"][1]:
        raise ConfigError("detector.omega_max_wf must cover the band")

    array = _merge(_ARRAY_DEFAULTS, raw.get("array", {}), "array")
    output = _merge(_OUTPUT_DEFAULTS, raw.get("output", {}), "output")

    return {
        "ring": ring,
        "pulses": pulses,
        "grid": grid,
        "rates": rates,
        "detector": det,
        "array": array,
        "output": output,
    }


def parse_config(path) -> dict:
    """Load, validate, and fully resolve a scenario config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return resolve_config(raw)


def apply_overrides(raw: dict, sets: list[str]) -> dict:
    """Apply --set dotted-path overrides to a raw config dict."""
    out = copy.deepcopy(raw)
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object")
        leaf = parts[-1]
        if leaf.isdigit() and isinstance(node, list):
            node[int(leaf)] = value
        else:
            node[leaf] = value
    return out


def build_sequence(resolved: dict, scales) -> PulseSequence:
    cfg_ring = resolved["ring"]
    events = []
    for ev in resolved["pulses"]["events"]:
        if ev["type"] == "kick":
            events.append(
                KickEvent(ev["t_on_s"], ev["axis"], float(ev["alpha"]), float(ev["tau_d_s"]))
            )
        elif ev["type"] == "hcp_wave":
            wf = hcp_waveform(
                float(ev["tau_d_s"]), float(ev["alpha"]), ev["axis"], cfg_ring["r0_m"]
            )
            events.append(WaveformEvent(ev["t_on_s"], wf.dt, wf.ex, wf.ey, wf.kind))
        else:
            wf = cpp_waveform(
                float(ev["alpha"]),
                int(ev["n_cycles"]),
                float(ev["omega_c_wf"]) * scales.omega_f,
                int(ev["sense"]),
                cfg_ring["r0_m"],
                carrier_phase=float(ev["carrier_phase"]),
            )
            events.append(WaveformEvent(ev["t_on_s"], wf.dt, wf.ex, wf.ey, wf.kind))
    return PulseSequence(
        events=tuple(events),
        repeat_period=resolved["pulses"]["repeat_period_s"],
        repeat_count=resolved["pulses"]["repeat_count"],
    )


def _enabled_channels(resolved: dict) -> tuple:
    return tuple(name for name in CHANNELS if resolved["rates"][name])


def config_hash(resolved: dict) -> str:
    canon = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


class _Run:
    """Tracks output files of one subcommand run; removes them on failure."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        p = self.out_dir / name
        self.files.append(p)
        return p

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _write_manifest(run: _Run, resolved: dict, command: str) -> None:
    manifest = {
        "command": command,
        "config": resolved,
        "config_sha256": config_hash(resolved),
        "outputs": sorted(p.name for p in run.files),
        "versions": {
            "numpy": np.__version__,
            "ringburst": __version__,
            "scipy": __import__("scipy").__version__,
        },
    }
    with open(run.path("manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _prepare(resolved: dict):
    cfg = _ring_config(resolved["ring"])
    scales = derive_scales(cfg)
    return cfg, scales


def cmd_rates(resolved: dict, run: _Run) -> None:
    cfg, scales = _prepare(resolved)
    table = build_rate_table(cfg, scales, channels=CHANNELS)
    eff = effective_dipole_phonon_rate(cfg, scales)
    scalars = [
        ("gamma_rad_per_s", table.gamma_rad),
        ("gamma_coherent_phonon_per_s", coherent_phonon_rate(cfg, scales)),
        ("gamma_incoherent_dipole_per_s", eff),
        ("la_rate_unit_per_s", la_rate_unit(cfg)),
        ("m_f", float(scales.m_f)),
        ("omega_f_rad_per_s", scales.omega_f),
        ("tau_f_s", scales.tau_f),
        ("kt_over_hbar_omega_f", K_B * cfg.temperature / (HBAR * scales.omega_f)),
    ]
    if resolved["array"]["n_rings"] > 1 or resolved["array"]["delta_r0_m"] > 0:
        n_r = int(resolved["array"]["n_rings"])
        scalars.append(("gamma_array_per_s", array_decay_rate(cfg, scales, n_r)))
        if resolved["array"]["delta_r0_m"] > 0:
            scalars.append(
                ("tau_spread_s", spread_time(cfg, scales, resolved["array"]["delta_r0_m"]))
            )
    _write_csv(run.path("rates.csv"), ["name", "value"], scalars)
    for name, matrix in (
        ("gamma_sp", table.gamma_sp),
        ("gamma_ssp", table.gamma_ssp),
        ("gamma_total", table.gamma_total),
    ):
        m_vals = scales.m_values
        rows = (
            (int(m_vals[i]), int(m_vals[j]), float(matrix[i, j]))
            for i in range(len(m_vals))
            for j in range(len(m_vals))
        )
        _write_csv(run.path(f"{name}.csv"), ["m", "m_prime", "rate_per_s"], rows)
    for name, value in scalars:
        print(f"{name} = {_fmt(value)}")
    print("note: array rate applies at short times only, before radius spread dephasing")


def _run_simulation(resolved: dict):
    cfg, scales = _prepare(resolved)
    channels = _enabled_channels(resolved)
    rates = build_rate_table(cfg, scales, channels=channels) if channels else None
    sequence = build_sequence(resolved, scales)
    series = simulate(
        cfg,
        scales,
        sequence,
        span=resolved["grid"]["span_s"],
        samples_per_tauf=resolved["grid"]["samples_per_tauf"],
        rates=rates,
    )
    return cfg, scales, series


def cmd_simulate(resolved: dict, run: _Run) -> None:
    _, _, series = _run_simulation(resolved)
    t = series.times
    rows = zip(
        map(float, t),
        map(float, series.mu_x),
        map(float, series.mu_y),
        map(float, series.acc_x),
        map(float, series.acc_y),
    )
    _write_csv(
        run.path("dipole.csv"),
        ["t_s", "mu_x_cm", "mu_y_cm", "ddmu_x", "ddmu_y"],
        rows,
    )


def _detector_from(resolved: dict, scales) -> DetectorSpec:
    det = resolved["detector"]
    omegas = np.linspace(
        0.0, float(det["omega_max_wf"]) * scales.omega_f, int(det["n_omega"])
    )
    n_t = int(np.floor((det["t_stop_s"] - det["t_start_s"]) / det["time_step_s"])) + 1
    times = det["t_start_s"] + det["time_step_s"] * np.arange(max(n_t, 1))
    return DetectorSpec(
        delta_t=det["delta_t_s"], omegas=omegas, times=times, t_d=det["t_d_s"]
    )


def cmd_spectrogram(resolved: dict, run: _Run, normalize: bool = False) -> None:
    cfg, scales, series = _run_simulation(resolved)
    det = _detector_from(resolved, scales)
    spec = stokes_perpendicular(series, det, cfg.kappa)
    scale = 1.0 / s_norm(cfg, scales) if normalize else 1.0
    rows = (
        (
            float(spec.times[k]),
            float(spec.omegas[i]),
            float(spec.s0[i, k] * scale),
            float(spec.s1[i, k] * scale),
            float(spec.s2[i, k] * scale),
            float(spec.s3[i, k] * scale),
        )
        for k in range(len(spec.times))
        for i in range(len(spec.omegas))
    )
    _write_csv(
        run.path("spectrogram.csv"),
        ["t_s", "omega_rad_per_s", "s0", "s1", "s2", "s3"],
        rows,
    )


def cmd_pcirc(resolved: dict, run: _Run, normalize: bool = False) -> None:
    cfg, scales, series = _run_simulation(resolved)
    det = _detector_from(resolved, scales)
    spec = stokes_perpendicular(series, det, cfg.kappa)
    lo, hi = resolved["detector"]["band_wf"]
    band = (lo * scales.omega_f, hi * scales.omega_f)
    sbar0 = band_integrate(spec.omegas, spec.s0, band)
    sbar3 = band_integrate(spec.omegas, spec.s3, band)
    p, defined = circular_polarization_degree(sbar0, sbar3, spec.covered)
    scale = 1.0 / s_norm(cfg, scales) if normalize else 1.0
    rows = (
        (
            float(spec.times[k]),
            float(sbar0[k] * scale),
            float(sbar3[k] * scale),
            float(p[k]),
            int(defined[k]),
        )
        for k in range(len(spec.times))
    )
    _write_csv(
        run.path("pcirc.csv"),
        ["t_s", "sbar0", "sbar3", "p_circ", "defined"],
        rows,
    )


_COMMANDS = {
    "rates": cmd_rates,
    "simulate": cmd_simulate,
    "spectrogram": cmd_spectrogram,
    "pcirc": cmd_pcirc,
}


def run_scenario(
    subcommand: str, config_path: str, out_dir: str, sets=(), normalize: bool = False
) -> int:
    """Run one subcommand for one config; returns a process-style exit code."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot load config {config_path}: {exc}", file=sys.stderr)
        return 2
    run = _Run(Path(out_dir))
    try:
        raw = apply_overrides(raw, list(sets))
        resolved = resolve_config(raw)
        if subcommand in ("spectrogram", "pcirc"):
            _COMMANDS[subcommand](resolved, run, normalize=normalize)
        else:
            _COMMANDS[subcommand](resolved, run)
        _write_manifest(run, resolved, subcommand)
    except RingburstError as exc:
        run.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        run.cleanup()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def _sweep_worker(args) -> tuple[str, int]:
    subcommand, cfg_path, out_dir, sets, normalize = args
    code = run_scenario(subcommand, cfg_path, out_dir, sets, normalize)
    return cfg_path, code


def cmd_sweep(subcommand: str, configs, out_root: str, jobs: int, sets, normalize) -> int:
    """Run one subcommand over several scenario configs, optionally in parallel."""
    tasks = []
    for cfg_path in configs:
        stem = Path(cfg_path).stem
        tasks.append((subcommand, cfg_path, str(Path(out_root) / stem), list(sets), normalize))
    if jobs <= 1:
        results = [_sweep_worker(task) for task in tasks]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    worst = 0
    for cfg_path, code in results:
        status = "ok" if code == 0 else f"failed ({code})"
        print(f"{cfg_path}: {status}")
        worst = max(worst, code)
    return worst


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringburst",
        description="Quantum-ring pulse excitation and emission polarimetry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario JSON file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (dotted path); repeatable",
        )
        p.add_argument("--out", default="out", help="output directory")

    for name in ("rates", "simulate"):
        common(sub.add_parser(name))
    for name in ("spectrogram", "pcirc"):
        p = sub.add_parser(name)
        common(p)
        p.add_argument(
            "--normalize-snorm",
            action="store_true",
            help="divide spectral columns by the ring normalization constant",
        )
    p = sub.add_parser("sweep", help="run one subcommand over several configs")
    p.add_argument("subcommand", choices=sorted(_COMMANDS))
    p.add_argument("--config", action="append", required=True, help="repeatable")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--normalize-snorm", action="store_true")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.command == "sweep":
        return cmd_sweep(
            args.subcommand,
            args.config,
            args.out,
            args.jobs,
            args.set,
            getattr(args, "normalize_snorm", False),
        )
    return run_scenario(
        args.command,
        args.config,
        args.out,
        args.set,
        getattr(args, "normalize_snorm", False),
    )


if __name__ == "__main__":
    sys.exit(main())
