"""Command-line entry points.

Six subcommands cover the supported workflows:

- ``run-continuous`` / ``run-stepwise``: full master-equation runs from a
  TOML config or bundled preset, writing ``populations.csv`` (one row per
  sample time or pumping step) and a flat ``manifest.txt`` that records
  every resolved parameter;
- ``rate-model``: the classical population-transfer model for the same
  operating point, with the closed-form steady state;
- ``error-budget``: steady singlet population with individual imperfections
  switched off, one CSV row per ablation;
- ``validate``: fast self-checks of the physics invariants (no artifacts);
- ``convergence``: truncation and tolerance refinement study.

Exit codes: 0 success, 2 for configuration or validation problems, 3 for
numerical failures during integration.
"""

from __future__ import annotations

import dataclasses
import functools
import sys
from pathlib import Path

import click
import numpy as np

from singletpump import __version__
from singletpump.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    available_presets,
    manifest_entries,
    rate_series_records,
    resolve_preset,
    write_manifest,
    write_population_csv,
    write_table_csv,
)
from singletpump.dynamics import NumericalError
from singletpump.hilbert import LayoutError
from singletpump.model import CHANNEL_NAMES, ParameterError
from singletpump.protocol import standard_ablations, steady_singlet
from singletpump.ratemodel import (
    RATE_VARIANTS,
    compute_effective_rates,
    integrate_rate_equations,
    steady_state_closed_form,
)

__all__ = ["main"]


def _guarded(fn):
    """Map library exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (ConfigError, ParameterError, LayoutError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _run_options(fn):
    opts = [
        click.option(
            "--config", "config_path", type=click.Path(), default=None,
            help="TOML run configuration file.",
        ),
        click.option(
            "--preset", default=None,
            help=f"Bundled configuration ({', '.join(available_presets())}).",
        ),
        click.option(
            "--out", "out_dir", type=click.Path(file_okay=False), default=".",
            show_default=True, help="Directory for CSV and manifest output.",
        ),
        click.option(
            "--override", "overrides", multiple=True,
            metavar="SECTION.KEY=VALUE",
            help="Config override, TOML-literal value; repeatable.",
        ),
        click.option(
            "--channels", "channels_arg", default=None, metavar="LIST",
            help="Comma-separated channel names to enable; all others are "
                 f"disabled.  Known: {', '.join(CHANNEL_NAMES)}.",
        ),
        click.option(
            "--quadrature", type=int, default=None,
            help="Override the ensemble quadrature node count.",
        ),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _resolve_config(
    config_path, preset, overrides, channels_arg, quadrature
) -> RunConfig:
    if config_path is None and preset is None:
        raise ConfigError("provide --config PATH or --preset NAME")
    if config_path is not None and preset is not None:
        raise ConfigError("give only one of --config and --preset")
    if preset is not None:
        text = resolve_preset(preset)
    else:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
    extra = list(overrides)
    if channels_arg is not None:
        wanted = {c.strip() for c in channels_arg.split(",") if c.strip()}
        unknown = wanted - set(CHANNEL_NAMES)
        if unknown:
            raise ConfigError(
                f"unknown channel name(s) {sorted(unknown)}; "
                f"known: {list(CHANNEL_NAMES)}"
            )
        for name in CHANNEL_NAMES:
            extra.append(f"channels.{name}={str(name in wanted).lower()}")
    if quadrature is not None:
        extra.append(f"ensemble.quadrature_nodes={quadrature}")
    return apply_overrides(text, extra)


def _out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
@click.version_option(__version__)
def main():
    """Dissipative singlet pumping for two trapped-ion qubits."""


def _run_protocol(cfg: RunConfig, expected: str, out_dir: str) -> None:
    if cfg.protocol != expected:
        raise ConfigError(
            f"this command runs the {expected} protocol but the config "
            f"declares run.protocol = {cfg.protocol!r}"
        )
    out = _out_dir(out_dir)
    p_steady, traj = steady_singlet(
        cfg.params,
        cfg.schedule,
        cfg.window,
        ensemble=cfg.ensemble,
        layout=cfg.layout(),
        tol=cfg.tol,
    )
    csv_path = out / "populations.csv"
    write_population_csv(csv_path, traj.records)
    manifest_path = out / "manifest.txt"
    write_manifest(
        manifest_path,
        manifest_entries(
            cfg,
            **{
                "result.P_S_steady": p_steady,
                "result.engine": traj.engine,
                "result.n_rhs_evals": traj.n_rhs_evals,
                "result.max_trace_drift": traj.max_trace_drift,
                "result.max_hermiticity_defect": traj.max_hermiticity_defect,
            },
        ),
    )
    unit = "s" if expected == "continuous" else "steps"
    click.echo(
        f"steady window [{cfg.window[0]:g}, {cfg.window[1]:g}] {unit}: "
        f"P_S = {p_steady:.6f}"
    )
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {manifest_path}")


@main.command("run-continuous")
@_run_options
@_guarded
def run_continuous_cmd(
    config_path, preset, out_dir, overrides, channels_arg, quadrature
):
    """Continuous pumping: all channels on simultaneously."""
    cfg = _resolve_config(config_path, preset, overrides, channels_arg, quadrature)
    _run_protocol(cfg, "continuous", out_dir)


@main.command("run-stepwise")
@_run_options
@_guarded
def run_stepwise_cmd(
    config_path, preset, out_dir, overrides, channels_arg, quadrature
):
    """Stepwise pumping: cool / drive / repump cycles."""
    cfg = _resolve_config(config_path, preset, overrides, channels_arg, quadrature)
    _run_protocol(cfg, "stepwise", out_dir)


@main.command("rate-model")
@_run_options
@click.option(
    "--variant", type=click.Choice(RATE_VARIANTS), default="thermal",
    show_default=True, help="Pumping-rate formula for the carrier step.",
)
@_guarded
def rate_model_cmd(
    config_path, preset, out_dir, overrides, channels_arg, quadrature, variant
):
    """Classical rate model of the continuous scheme."""
    cfg = _resolve_config(config_path, preset, overrides, channels_arg, quadrature)
    if cfg.protocol != "continuous":
        raise ConfigError(
            "the rate model describes the continuous protocol; got "
            f"run.protocol = {cfg.protocol!r}"
        )
    out = _out_dir(out_dir)
    rates = compute_effective_rates(cfg.params, variant=variant)
    series = integrate_rate_equations(
        rates,
        t_span=(0.0, cfg.schedule.duration),
        sample_times=cfg.schedule.resolved_sample_times(),
    )
    fidelity, error_sum = steady_state_closed_form(rates)
    csv_path = out / "populations.csv"
    write_population_csv(csv_path, rate_series_records(series))
    extra = {
        f"rates.{field.name}": getattr(rates, field.name)
        for field in dataclasses.fields(rates)
    }
    extra["result.steady_fidelity"] = fidelity
    extra["result.error_sum"] = error_sum
    extra["result.P_S_final"] = series.final.P_S
    manifest_path = out / "manifest.txt"
    write_manifest(manifest_path, manifest_entries(cfg, **extra))
    click.echo(f"variant = {variant}")
    click.echo(f"steady fidelity F = {fidelity:.6f} (error sum E = {error_sum:.6f})")
    click.echo(f"final P_S = {series.final.P_S:.6f}")
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {manifest_path}")


@main.command("error-budget")
@_run_options
@_guarded
def error_budget_cmd(
    config_path, preset, out_dir, overrides, channels_arg, quadrature
):
    """Steady P_S with individual imperfections removed."""
    from singletpump.protocol import error_budget

    cfg = _resolve_config(config_path, preset, overrides, channels_arg, quadrature)
    out = _out_dir(out_dir)
    rows = error_budget(
        cfg.params,
        cfg.schedule,
        cfg.window,
        standard_ablations(cfg.protocol),
        ensemble=cfg.ensemble,
        tol=cfg.tol,
    )
    csv_path = out / "ablations.csv"
    write_table_csv(
        csv_path,
        ("label", "channels", "P_S", "delta_P_S"),
        [(r.label, "+".join(r.channels), r.P_S, r.delta) for r in rows],
    )
    manifest_path = out / "manifest.txt"
    write_manifest(
        manifest_path,
        manifest_entries(
            cfg, **{f"result.P_S.{r.label}": r.P_S for r in rows}
        ),
    )
    width = max(len(r.label) for r in rows)
    for r in rows:
        click.echo(f"{r.label:<{width}}  P_S = {r.P_S:.6f}  delta = {r.delta:+.6f}")
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {manifest_path}")


@main.command("convergence")
@_run_options
@_guarded
def convergence_cmd(
    config_path, preset, out_dir, overrides, channels_arg, quadrature
):
    """Truncation / tolerance refinement study (single imbalance value)."""
    from singletpump.protocol import default_layout

    cfg = _resolve_config(config_path, preset, overrides, channels_arg, quadrature)
    out = _out_dir(out_dir)

    def run(mode3_dim, mode4_dim, tol):
        layout = default_layout(
            cfg.params,
            cfg.schedule.channels,
            mode3_dim=mode3_dim,
            mode4_dim=mode4_dim,
            ion_levels=cfg.ion_levels,
        )
        value, _ = steady_singlet(
            cfg.params, cfg.schedule, cfg.window,
            ensemble=None, layout=layout, tol=tol,
        )
        return value

    base_layout = cfg.layout()
    has_mode4 = base_layout.n_modes > 1
    rows = [("baseline", cfg.mode3_dim, cfg.mode4_dim, cfg.tol)]
    rows.append(("mode3 x2", 2 * cfg.mode3_dim, cfg.mode4_dim, cfg.tol))
    if has_mode4:
        rows.append(("mode4 x2", cfg.mode3_dim, 2 * cfg.mode4_dim, cfg.tol))
    if cfg.protocol == "continuous":
        rows.append(("tol / 2", cfg.mode3_dim, cfg.mode4_dim, cfg.tol / 2.0))

    results = []
    base_value = None
    for label, m3, m4, tol in rows:
        value = run(m3, m4, tol)
        if base_value is None:
            base_value = value
        results.append((label, m3, m4, tol, value, abs(value - base_value)))
        click.echo(
            f"{label:<10}  mode3_dim={m3:<3d} mode4_dim={m4:<3d} "
            f"tol={tol:.1e}  P_S={value:.8f}  |delta|={abs(value - base_value):.2e}"
        )
    csv_path = out / "convergence.csv"
    write_table_csv(
        csv_path,
        ("label", "mode3_dim", "mode4_dim", "tol", "P_S", "abs_delta"),
        results,
    )
    manifest_path = out / "manifest.txt"
    write_manifest(
        manifest_path,
        manifest_entries(
            cfg,
            **{
                f"result.P_S.{label.replace(' ', '_')}": value
                for label, _, _, _, value, _ in results
            },
        ),
    )
    click.echo(f"wrote {csv_path}")
    click.echo(f"wrote {manifest_path}")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _validation_checks():
    """(name, callable) pairs; each callable raises on failure."""
    from singletpump.dynamics import (
        evolve,
        expm_apply,
        liouvillian_nullspace,
    )
    from singletpump.hilbert import (
        AUX,
        DOWN,
        LEAK,
        UP,
        build_layout,
        imbalanced_singlet_ket,
        ket_to_density,
        mode_number_expectation,
        product_ket,
        singlet_ket,
    )
    from singletpump.measurement import (
        reconstruct_populations,
        simulate_detection,
        simulate_detection_at_phase,
        spin_populations,
    )
    from singletpump.model import (
        ChannelConfig,
        SchemeParams,
        build_coherent_hamiltonian,
        build_generator,
        build_sideband_hamiltonian,
    )
    from singletpump.protocol import ContinuousSchedule, run_continuous

    params = SchemeParams(
        omega_s=2 * np.pi * 7.8e3,
        omega_c=2 * np.pi * 0.543e3,
        kappa=1e6 / 203.0,
        gamma_up_a=(1e6 / 88.0) * 5.0 / 9.0,
        gamma_down_a=(1e6 / 88.0) * 4.0 / 9.0,
        gamma_aa=(1e6 / 88.0) * 3.0 / 9.0,
        nbar=0.11,
    )

    def check_parameter_guards():
        for bad in (
            dict(omega_s=0.0),
            dict(kappa=-1.0),
            dict(eta3=1.5),
            dict(r=1.0),
            dict(eta4=0.1, delta=0.0),
        ):
            try:
                params.replace(**bad).validate()
            except ParameterError:
                continue
            raise AssertionError(f"bad parameters accepted: {bad}")

    def check_hermitian_builders():
        layout = build_layout(ion_levels=3, mode_dims=(5,))
        h = build_coherent_hamiltonian(
            params.replace(r=0.013, phi=0.4), layout
        )
        defect = h.hermiticity_defect()
        assert defect < 1e-12, f"coherent drive hermiticity defect {defect:.2e}"

    def check_dark_states():
        layout = build_layout(ion_levels=3, mode_dims=(5,))
        h0 = build_sideband_hamiltonian(params, layout).to_dense()
        for n in range(layout.mode_dims[0]):
            resid = np.linalg.norm(h0 @ singlet_ket(layout, fock=(n,)))
            assert resid < 1e-9 * params.omega_s, (
                f"singlet at n={n} not dark: residual {resid:.2e}"
            )
        p_imb = params.replace(r=0.04, phi=0.3)
        h_imb = build_sideband_hamiltonian(p_imb, layout).to_dense()
        ket = imbalanced_singlet_ket(layout, 0.04, 0.3, fock=(0,))
        resid = np.linalg.norm(h_imb @ ket)
        assert resid < 1e-9 * params.omega_s, (
            f"imbalanced dark state residual {resid:.2e}"
        )

    def check_dressed_splitting():
        layout = build_layout(ion_levels=3, mode_dims=(5,))
        h = build_sideband_hamiltonian(params, layout).to_dense()
        s_a = (
            product_ket(layout, (AUX, DOWN), fock=(0,))
            - product_ket(layout, (DOWN, AUX), fock=(0,))
        ) / np.sqrt(2.0)
        a_1 = (
            product_ket(layout, (AUX, UP), fock=(1,))
            - product_ket(layout, (UP, AUX), fock=(1,))
        ) / np.sqrt(2.0)
        basis = np.column_stack([s_a, a_1])
        block = basis.conj().T @ h @ basis
        closure = np.linalg.norm(h @ basis - basis @ block)
        assert closure < 1e-9 * params.omega_s, f"block not closed: {closure:.2e}"
        eigs = np.sort(np.linalg.eigvalsh(block))
        target = np.array([-params.omega_s, params.omega_s])
        assert np.allclose(eigs, target, rtol=1e-12), f"eigenvalues {eigs}"

    def check_short_evolution():
        schedule = ContinuousSchedule(
            duration=2e-4, sample_interval=2e-5, channels=ChannelConfig()
        )
        p = params.replace(
            gamma_table={(UP, DOWN): 1e-4 * params.omega_s}
        )
        traj = run_continuous(p, schedule, positivity_interval=1)
        assert traj.max_trace_drift < 1e-9, (
            f"trace drift {traj.max_trace_drift:.2e}"
        )
        assert traj.max_hermiticity_defect < 1e-8, (
            f"hermiticity defect {traj.max_hermiticity_defect:.2e}"
        )
        assert traj.min_eigenvalue > -1e-8, (
            f"negative eigenvalue {traj.min_eigenvalue:.2e}"
        )
        for rec in traj.records:
            assert abs(rec.population_sum() - 1.0) < 1e-9, (
                f"population sum {rec.population_sum()!r} at t={rec.time}"
            )

    def check_reconstruction():
        layout = build_layout(ion_levels=4, mode_dims=(3,))
        rng = np.random.default_rng(7)
        for _ in range(50):
            amp = np.zeros(layout.total_dim, dtype=np.complex128)
            for l1 in (0, 1):
                for l2 in (0, 1):
                    for n in range(3):
                        amp[layout.index((l1, l2), (n,))] = (
                            rng.normal() + 1j * rng.normal()
                        )
            amp /= np.linalg.norm(amp)
            rho = ket_to_density(amp)
            direct = spin_populations(rho, layout)
            rec = reconstruct_populations(
                simulate_detection(rho, "none", layout),
                simulate_detection(rho, "pi", layout),
                simulate_detection(rho, "pi_half_phase_averaged", layout),
            )
            for field in ("P_S", "P_T", "P_uu", "P_dd"):
                err = abs(getattr(rec, field) - getattr(direct, field))
                assert err < 1e-9, f"{field} reconstruction error {err:.2e}"
            assert not rec.out_of_range

    def check_phase_average():
        layout = build_layout(ion_levels=3, mode_dims=(3,))
        rng = np.random.default_rng(11)
        for _ in range(5):
            amp = rng.normal(size=layout.total_dim) \
                + 1j * rng.normal(size=layout.total_dim)
            amp /= np.linalg.norm(amp)
            rho = ket_to_density(amp)
            fast = simulate_detection(rho, "pi_half_phase_averaged", layout)
            slow = np.zeros(3)
            m = 64
            for j in range(m):
                slow += np.array(
                    simulate_detection_at_phase(
                        rho, np.pi / 2, 2 * np.pi * j / m, layout
                    )
                )
            slow /= m
            err = max(
                abs(fast.p2 - slow[0]), abs(fast.p1 - slow[1]),
                abs(fast.p0 - slow[2]),
            )
            assert err < 1e-10, f"phase-average mismatch {err:.2e}"

    def check_rate_model():
        p = params.replace(
            eta4=0.155, delta=2 * np.pi * 250e3, kappa4=800.0,
            gamma_table={
                (DOWN, UP): 1e-4 * params.omega_s,
                (DOWN, AUX): 1e-4 * params.omega_s,
                (UP, DOWN): 1e-4 * params.omega_s,
                (UP, AUX): 1e-4 * params.omega_s,
                (UP, LEAK): 1e-4 * params.omega_s,
            },
        )
        rates = compute_effective_rates(p, variant="thermal")
        fidelity, error_sum = steady_state_closed_form(rates)
        series = integrate_rate_equations(
            rates, t_span=(0.0, 2.0), include_leak=False,
            sample_times=[0.0, 2.0],
        )
        gap = abs(series.final.P_S - fidelity)
        assert gap < 1e-6, f"ODE vs closed form differ by {gap:.2e}"
        f2, e2 = steady_state_closed_form(rates.scaled(3.7))
        assert f2 == fidelity and e2 == error_sum, "rescaling moved (F, E)"
        leaky = integrate_rate_equations(
            rates, t_span=(0.0, 0.05), include_leak=False,
            sample_times=[0.05],
        )
        drift = abs(leaky.final.total() - 1.0)
        assert drift < 1e-12, f"leak-off populations not conserved: {drift:.2e}"

    def check_detailed_balance():
        layout = build_layout(ion_levels=3, mode_dims=(5,))
        gen = build_generator(
            params, layout, ChannelConfig.from_names(("cooling", "heating"))
        )
        rho0 = ket_to_density(product_ket(layout, (DOWN, DOWN), fock=(2,)))
        rho = expm_apply(rho0, gen, 6e-3)
        n_mean = mode_number_expectation(rho, layout)
        assert abs(n_mean - 0.10995221157834013) < 1e-6, (
            f"thermal occupation {n_mean:.10f}"
        )

    def check_nullspace():
        layout = build_layout(ion_levels=3, mode_dims=(5,))
        gen = build_generator(
            params, layout,
            ChannelConfig.from_names(("carrier", "repump", "cooling", "heating")),
        )
        steady = liouvillian_nullspace(gen)
        pops = spin_populations(steady)
        assert abs(pops.P_dd - 1.0) < 1e-8, f"steady P_dd = {pops.P_dd}"
        n_mean = mode_number_expectation(steady.data, layout)
        assert abs(n_mean - 0.10995221157834013) < 1e-8, (
            f"steady occupation {n_mean:.10f}"
        )

    return [
        ("parameter guards", check_parameter_guards),
        ("drive builders hermitian", check_hermitian_builders),
        ("sideband dark states", check_dark_states),
        ("dressed-state splitting", check_dressed_splitting),
        ("short evolution sanity", check_short_evolution),
        ("detection reconstruction", check_reconstruction),
        ("discrete phase average", check_phase_average),
        ("rate-model identities", check_rate_model),
        ("thermal detailed balance", check_detailed_balance),
        ("steady-state nullspace", check_nullspace),
    ]


@main.command("validate")
@_guarded
def validate_cmd():
    """Run fast physics self-checks; exit 2 on any failure."""
    failures = 0
    for name, fn in _validation_checks():
        try:
            fn()
        except Exception as exc:  # report every failure, not just the first
            failures += 1
            click.echo(f"FAIL {name}: {exc}")
        else:
            click.echo(f"ok   {name}")
    if failures:
        click.echo(f"{failures} check(s) failed", err=True)
        sys.exit(2)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
