"""Declarative run configuration with explicit unit suffixes.

Runs are described by a TOML file.  Every physical input carries its unit
in the key name so that nothing is ambiguous at the file boundary:

- ``*_khz_2pi``: angular frequency, value in kHz, multiplied by 2 pi;
- ``*_us_1e``: a 1/e decay time in microseconds (converted to a rate);
- ``*_per_s``: a plain rate in 1/s;
- ``*_ms`` / ``*_us``: durations.

The repump block is specified by the total 1/e emptying time of |a> plus
integer branching weights [to |up>, to |down>, elastic]; the elastic share
broadens the line without transferring population.  Scattering tables come
either relative to the sideband coupling (``gamma_table_rel_omega_s``) or
absolute (``gamma_table_per_s``), keyed ``<from>_<to>`` with level names
from :mod:`singletpump.hilbert`.

Unknown keys anywhere are rejected — silent typos in physics input are the
dominant failure mode this module exists to prevent.  Bundled presets
(``continuous_fig2``, ``stepwise_fig3``) encode the two reference
operating points end to end.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

try:  # stdlib from 3.11 on
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from singletpump import __version__
from singletpump.hilbert import AUX, DOWN, LEAK, UP, HilbertLayout
from singletpump.model import CHANNEL_NAMES, ChannelConfig, ParameterError, SchemeParams
from singletpump.protocol import (
    ContinuousSchedule,
    EnsembleSpec,
    PopulationRecord,
    StepwiseSchedule,
    default_layout,
)
from singletpump.ratemodel import RateSeries

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "loads_config",
    "resolve_preset",
    "available_presets",
    "apply_overrides",
    "CSV_COLUMNS",
    "write_population_csv",
    "write_manifest",
    "write_table_csv",
    "manifest_entries",
    "rate_series_records",
]

TWO_PI = 2.0 * np.pi

LEVELS_BY_NAME = {"down": DOWN, "up": UP, "aux": AUX, "leak": LEAK}

CSV_COLUMNS = (
    "time_or_step",
    "P_S",
    "P_T",
    "P_uu",
    "P_dd",
    "P_a",
    "P_leak",
    "nbar_mode3",
)


class ConfigError(ValueError):
    """Raised for malformed, unknown, or inconsistent configuration input."""


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

_PARAM_KEYS = {
    "omega_s_khz_2pi",
    "omega_c_khz_2pi",
    "repump_us_1e",
    "repump_branching",
    "cooling_us_1e",
    "nbar",
    "r",
    "phi",
    "eta3",
    "eta4",
    "delta_khz_2pi",
    "kappa4_per_s",
    "gamma_table_rel_omega_s",
    "gamma_table_per_s",
}

_SCHEMA = {
    "run": {"protocol", "seed"},
    "parameters": _PARAM_KEYS,
    "layout": {"ion_levels", "mode3_dim", "mode4_dim"},
    "schedule": {
        "duration_ms",
        "sample_interval_us",
        "n_steps",
        "t_cool_us",
        "t_coherent_us",
        "t_repump_us",
        "cooling_mode",
    },
    "ensemble": {"r_mean", "r_rms", "quadrature_nodes"},
    "integrator": {"tol"},
    "output": {"steady_window_ms", "steady_steps"},
    "channels": set(CHANNEL_NAMES),
}

_CONTINUOUS_ONLY = {"duration_ms", "sample_interval_us"}
_STEPWISE_ONLY = {"n_steps", "t_cool_us", "t_coherent_us", "t_repump_us",
                  "cooling_mode"}


def _check_keys(data: Mapping, allowed: Iterable[str], where: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} in [{where}]; "
            f"allowed: {sorted(allowed)}"
        )


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return data[key]


def _positive(value, key: str):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"{key} must be a positive number (got {value!r})")
    return float(value)


def _nonnegative(value, key: str):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
        raise ConfigError(f"{key} must be a nonnegative number (got {value!r})")
    return float(value)


# ---------------------------------------------------------------------------
# Section parsers
# ---------------------------------------------------------------------------

def _parse_gamma_table(
    section: Mapping, scale: float, where: str
) -> dict[tuple[int, int], float]:
    table = {}
    for key, value in section.items():
        parts = key.split("_")
        if len(parts) != 2 or parts[0] not in LEVELS_BY_NAME \
                or parts[1] not in LEVELS_BY_NAME:
            raise ConfigError(
                f"bad scattering key {key!r} in [{where}]; expected "
                f"'<from>_<to>' with levels {sorted(LEVELS_BY_NAME)}"
            )
        rate = _nonnegative(value, f"{where}.{key}") * scale
        table[(LEVELS_BY_NAME[parts[0]], LEVELS_BY_NAME[parts[1]])] = rate
    return table


def _parse_params(section: Mapping) -> SchemeParams:
    _check_keys(section, _PARAM_KEYS, "parameters")
    omega_s = TWO_PI * 1e3 * _positive(
        _require(section, "omega_s_khz_2pi", "parameters"), "omega_s_khz_2pi"
    )
    omega_c = TWO_PI * 1e3 * _nonnegative(
        _require(section, "omega_c_khz_2pi", "parameters"), "omega_c_khz_2pi"
    )
    gamma_ra = 1e6 / _positive(
        _require(section, "repump_us_1e", "parameters"), "repump_us_1e"
    )
    branching = section.get("repump_branching", [5, 4, 3])
    if (
        not isinstance(branching, (list, tuple))
        or len(branching) != 3
        or any(b < 0 for b in branching)
        or branching[0] + branching[1] <= 0
    ):
        raise ConfigError(
            "repump_branching must be three nonnegative weights "
            "[to_up, to_down, elastic] with to_up+to_down > 0"
        )
    b_up, b_down, b_el = (float(b) for b in branching)
    transfer = b_up + b_down
    kappa = 1e6 / _positive(
        _require(section, "cooling_us_1e", "parameters"), "cooling_us_1e"
    )

    if "gamma_table_rel_omega_s" in section and "gamma_table_per_s" in section:
        raise ConfigError(
            "give either gamma_table_rel_omega_s or gamma_table_per_s, not both"
        )
    table: dict[tuple[int, int], float] = {}
    if "gamma_table_rel_omega_s" in section:
        table = _parse_gamma_table(
            section["gamma_table_rel_omega_s"], omega_s, "gamma_table_rel_omega_s"
        )
    elif "gamma_table_per_s" in section:
        table = _parse_gamma_table(
            section["gamma_table_per_s"], 1.0, "gamma_table_per_s"
        )

    params = SchemeParams(
        omega_s=omega_s,
        omega_c=omega_c,
        kappa=kappa,
        gamma_up_a=gamma_ra * b_up / transfer,
        gamma_down_a=gamma_ra * b_down / transfer,
        gamma_aa=gamma_ra * b_el / transfer,
        eta3=float(section.get("eta3", 0.18)),
        eta4=float(section.get("eta4", 0.0)),
        r=float(section.get("r", 0.0)),
        phi=float(section.get("phi", 0.0)),
        nbar=_nonnegative(section.get("nbar", 0.0), "nbar"),
        delta=TWO_PI * 1e3 * _nonnegative(
            section.get("delta_khz_2pi", 0.0), "delta_khz_2pi"
        ),
        kappa4=_nonnegative(section.get("kappa4_per_s", 0.0), "kappa4_per_s"),
        gamma_table=table,
    )
    try:
        params.validate()
    except ParameterError as exc:
        raise ConfigError(f"invalid [parameters]: {exc}") from exc
    return params


def _parse_channels(section: Mapping) -> ChannelConfig:
    _check_keys(section, CHANNEL_NAMES, "channels")
    for key, val in section.items():
        if not isinstance(val, bool):
            raise ConfigError(f"channels.{key} must be a boolean")
    return ChannelConfig(**{name: section.get(name, True) for name in CHANNEL_NAMES})


def _parse_schedule(section: Mapping, protocol: str, channels: ChannelConfig):
    _check_keys(section, _SCHEMA["schedule"], "schedule")
    if protocol == "continuous":
        bad = set(section) & _STEPWISE_ONLY
        if bad:
            raise ConfigError(
                f"key(s) {sorted(bad)} in [schedule] do not apply to the "
                "continuous protocol"
            )
        duration = 1e-3 * _positive(
            _require(section, "duration_ms", "schedule"), "duration_ms"
        )
        interval = 1e-6 * _positive(
            section.get("sample_interval_us", 50.0), "sample_interval_us"
        )
        return ContinuousSchedule(
            duration=duration, sample_interval=interval, channels=channels
        )
    bad = set(section) & _CONTINUOUS_ONLY
    if bad:
        raise ConfigError(
            f"key(s) {sorted(bad)} in [schedule] do not apply to the "
            "stepwise protocol"
        )
    n_steps = _require(section, "n_steps", "schedule")
    if not isinstance(n_steps, int) or isinstance(n_steps, bool) or n_steps < 0:
        raise ConfigError(f"n_steps must be a nonnegative integer (got {n_steps!r})")
    t_coh = section.get("t_coherent_us")
    try:
        return StepwiseSchedule(
            n_steps=n_steps,
            t_cool=1e-6 * _nonnegative(section.get("t_cool_us", 100.0), "t_cool_us"),
            t_coh=None if t_coh in (None, 0, 0.0) else 1e-6 * _positive(
                t_coh, "t_coherent_us"
            ),
            t_repump=1e-6 * _nonnegative(
                section.get("t_repump_us", 6.0), "t_repump_us"
            ),
            cooling_mode=section.get("cooling_mode", "thermal-reset"),
            channels=channels,
        )
    except ParameterError as exc:
        raise ConfigError(f"invalid [schedule]: {exc}") from exc


def _parse_window(section: Mapping, protocol: str, schedule) -> tuple[float, float]:
    _check_keys(section, _SCHEMA["output"], "output")
    if protocol == "continuous":
        if "steady_steps" in section:
            raise ConfigError("steady_steps applies only to the stepwise protocol")
        win = section.get("steady_window_ms")
        if win is None:
            return (0.5 * schedule.duration, schedule.duration)
        if not isinstance(win, (list, tuple)) or len(win) != 2:
            raise ConfigError("steady_window_ms must be a two-element list")
        lo, hi = 1e-3 * float(win[0]), 1e-3 * float(win[1])
    else:
        if "steady_window_ms" in section:
            raise ConfigError(
                "steady_window_ms applies only to the continuous protocol"
            )
        win = section.get("steady_steps")
        if win is None:
            return (np.ceil(schedule.n_steps / 2), float(schedule.n_steps))
        if not isinstance(win, (list, tuple)) or len(win) != 2:
            raise ConfigError("steady_steps must be a two-element list")
        lo, hi = float(win[0]), float(win[1])
    if not lo <= hi:
        raise ConfigError(f"steady window [{lo}, {hi}] is reversed")
    return (lo, hi)


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description (physical units throughout)."""

    protocol: str
    params: SchemeParams
    schedule: ContinuousSchedule | StepwiseSchedule
    ensemble: EnsembleSpec | None
    window: tuple[float, float]
    tol: float
    seed: int
    ion_levels: int | None
    mode3_dim: int
    mode4_dim: int

    @property
    def channels(self) -> ChannelConfig:
        return self.schedule.channels

    def layout(self, channels: ChannelConfig | None = None) -> HilbertLayout:
        return default_layout(
            self.params,
            self.schedule.channels if channels is None else channels,
            mode3_dim=self.mode3_dim,
            mode4_dim=self.mode4_dim,
            ion_levels=self.ion_levels,
        )


def loads_config(text: str) -> RunConfig:
    """Parse and validate a TOML config document from a string."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return _build_config(data)


def load_config(path: str | Path) -> RunConfig:
    """Load, validate, and resolve a TOML config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return loads_config(path.read_text(encoding="utf-8"))


def _build_config(data: Mapping) -> RunConfig:
    _check_keys(data, _SCHEMA, "top level")
    run = data.get("run", {})
    _check_keys(run, _SCHEMA["run"], "run")
    protocol = run.get("protocol", "continuous")
    if protocol not in ("continuous", "stepwise"):
        raise ConfigError(
            f"run.protocol must be 'continuous' or 'stepwise' (got {protocol!r})"
        )
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("run.seed must be an integer")

    params = _parse_params(data.get("parameters", {}))
    channels = _parse_channels(data.get("channels", {}))
    schedule = _parse_schedule(data.get("schedule", {}), protocol, channels)
    window = _parse_window(data.get("output", {}), protocol, schedule)

    layout_sec = data.get("layout", {})
    _check_keys(layout_sec, _SCHEMA["layout"], "layout")
    ion_levels = layout_sec.get("ion_levels")
    if ion_levels is not None and ion_levels not in (3, 4):
        raise ConfigError(f"layout.ion_levels must be 3 or 4 (got {ion_levels!r})")
    mode3_dim = layout_sec.get("mode3_dim", 5)
    mode4_dim = layout_sec.get("mode4_dim", 3)
    for name, val in (("mode3_dim", mode3_dim), ("mode4_dim", mode4_dim)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 0:
            raise ConfigError(f"layout.{name} must be a nonnegative integer")
    if mode3_dim < 2:
        raise ConfigError("layout.mode3_dim must be at least 2")

    ens_sec = data.get("ensemble")
    ensemble = None
    if ens_sec is not None:
        _check_keys(ens_sec, _SCHEMA["ensemble"], "ensemble")
        try:
            ensemble = EnsembleSpec(
                r_mean=float(ens_sec.get("r_mean", 0.0)),
                r_rms=float(ens_sec.get("r_rms", 0.014)),
                quadrature=int(ens_sec.get("quadrature_nodes", 7)),
            )
        except ParameterError as exc:
            raise ConfigError(f"invalid [ensemble]: {exc}") from exc

    integ = data.get("integrator", {})
    _check_keys(integ, _SCHEMA["integrator"], "integrator")
    tol = float(integ.get("tol", 1e-8))
    if not 1e-12 <= tol <= 1e-4:
        raise ConfigError(f"integrator.tol must lie in [1e-12, 1e-4] (got {tol:g})")

    # schedule validation may itself raise ParameterError -> surface as config
    try:
        if isinstance(schedule, ContinuousSchedule):
            lo, hi = window
            if hi > schedule.duration * (1 + 1e-12):
                raise ConfigError(
                    "steady_window_ms extends past the schedule duration"
                )
        else:
            if window[1] > schedule.n_steps:
                raise ConfigError("steady_steps extends past n_steps")
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        protocol=protocol,
        params=params,
        schedule=schedule,
        ensemble=ensemble,
        window=window,
        tol=tol,
        seed=seed,
        ion_levels=ion_levels,
        mode3_dim=mode3_dim,
        mode4_dim=mode4_dim,
    )


# ---------------------------------------------------------------------------
# Presets and overrides
# ---------------------------------------------------------------------------

def available_presets() -> list[str]:
    pkg = resources.files("singletpump") / "presets"
    return sorted(p.name[: -len(".toml")] for p in pkg.iterdir()
                  if p.name.endswith(".toml"))


def resolve_preset(name: str) -> str:
    """TOML text of a bundled preset."""
    pkg = resources.files("singletpump") / "presets" / f"{name}.toml"
    if not pkg.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {available_presets()}"
        )
    return pkg.read_text(encoding="utf-8")


def _parse_override_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text  # bare string


def apply_overrides(text: str, overrides: Sequence[str]) -> RunConfig:
    """Parse config text, apply dotted-path ``key=value`` overrides, build."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(
                f"override {item!r} is not of the form section.key=value"
            )
        path, _, raw_value = item.partition("=")
        keys = path.strip().split(".")
        if len(keys) < 2:
            raise ConfigError(
                f"override path {path.strip()!r} must be dotted (section.key)"
            )
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a non-table")
        node[keys[-1]] = _parse_override_value(raw_value.strip())
    return _build_config(data)


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_population_csv(path: str | Path, records: Sequence[PopulationRecord]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.time, r.P_S, r.P_T, r.P_uu, r.P_dd, r.P_a, r.P_leak,
                    r.nbar_mode3,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table_csv(
    path: str | Path, header: Sequence[str], rows: Sequence[Sequence]
) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(path: str | Path, entries: Mapping[str, object]) -> None:
    lines = [f"{key} = {_fmt(entries[key])}" for key in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_LEVEL_NAMES_BY_INDEX = {v: k for k, v in LEVELS_BY_NAME.items()}


def manifest_entries(cfg: RunConfig, **extra) -> dict[str, object]:
    """Every resolved parameter, flat, sufficient to reproduce the run."""
    p = cfg.params
    entries: dict[str, object] = {
        "version": __version__,
        "run.protocol": cfg.protocol,
        "run.seed": cfg.seed,
        "integrator.tol": cfg.tol,
        "output.window_lo": cfg.window[0],
        "output.window_hi": cfg.window[1],
        "params.omega_s_rad_per_s": p.omega_s,
        "params.omega_c_rad_per_s": p.omega_c,
        "params.kappa_per_s": p.kappa,
        "params.kappa_heating_per_s": p.kappa_heating,
        "params.gamma_up_a_per_s": p.gamma_up_a,
        "params.gamma_down_a_per_s": p.gamma_down_a,
        "params.gamma_aa_per_s": p.gamma_aa,
        "params.nbar": p.nbar,
        "params.r": p.r,
        "params.phi": p.phi,
        "params.eta3": p.eta3,
        "params.eta4": p.eta4,
        "params.delta_rad_per_s": p.delta,
        "params.kappa4_per_s": p.kappa4,
        "params.omega4_rad_per_s": p.omega4,
    }
    for (frm, to, rate) in p.gamma_table:
        key = f"{_LEVEL_NAMES_BY_INDEX[frm]}_{_LEVEL_NAMES_BY_INDEX[to]}"
        entries[f"params.gamma_table.{key}_per_s"] = rate
    layout = cfg.layout()
    entries["layout.ion_levels"] = layout.ion_levels
    for i, d in enumerate(layout.mode_dims):
        entries[f"layout.mode{i + 3}_dim"] = d
    s = cfg.schedule
    if isinstance(s, ContinuousSchedule):
        entries["schedule.duration_s"] = s.duration
        entries["schedule.sample_interval_s"] = s.sample_interval
    else:
        entries["schedule.n_steps"] = s.n_steps
        entries["schedule.t_cool_s"] = s.t_cool
        entries["schedule.t_coherent_s"] = -1.0 if s.t_coh is None else s.t_coh
        entries["schedule.t_repump_s"] = s.t_repump
        entries["schedule.cooling_mode"] = s.cooling_mode
    for name in CHANNEL_NAMES:
        entries[f"channels.{name}"] = getattr(s.channels, name)
    if cfg.ensemble is None:
        entries["ensemble.enabled"] = False
    else:
        entries["ensemble.enabled"] = True
        entries["ensemble.r_mean"] = cfg.ensemble.r_mean
        entries["ensemble.r_rms"] = cfg.ensemble.r_rms
        entries["ensemble.quadrature_nodes"] = cfg.ensemble.quadrature
    entries.update(extra)
    return entries


def rate_series_records(series: RateSeries) -> list[PopulationRecord]:
    """Adapt rate-model output to the population CSV row type.

    The rate model tracks no |a>-manifold population or phonon number;
    those columns are zero by construction.
    """
    return [
        PopulationRecord(
            time=float(t),
            P_S=pop.P_S,
            P_T=pop.P_T,
            P_uu=pop.P_uu,
            P_dd=pop.P_dd,
            P_a=0.0,
            P_leak=pop.P_leak,
            nbar_mode3=0.0,
        )
        for t, pop in zip(series.times, series.populations)
    ]
