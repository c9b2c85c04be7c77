"""Experimental sequences built on the model and integrator layers.

Two protocols pump the ion pair into the singlet:

- *continuous*: every channel runs simultaneously from t = 0 and the state
  relaxes to a steady regime, reported as time-stamped populations;
- *stepwise*: repeated cycles of (sympathetic cooling, coherent pulse of
  duration t_2pi = 2 pi / sqrt(Omega_s^2 + Omega_c^2), repump), with
  populations recorded after the repump segment of each step.

Both return a :class:`~singletpump.dynamics.Trajectory` whose records are
:class:`PopulationRecord` rows, directly serializable to the CSV contract.
On top of the single runs sit deterministic Gauss-Hermite averaging over
the sideband-imbalance parameter r and an ablation driver that reruns a
schedule with channels disabled or parameters idealized to attribute the
steady-state error to individual imperfections.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from singletpump.hilbert import (
    DOWN,
    LEAK,
    DensityState,
    HilbertLayout,
    assemble_density,
    mode_number_expectation,
    partial_trace_modes,
    product_ket,
    thermal_mode_density,
)
from singletpump.model import (
    ChannelConfig,
    LindbladGenerator,
    ParameterError,
    SchemeParams,
    build_generator,
)
from singletpump.dynamics import (
    NumericalError,
    Trajectory,
    average_records,
    evolve,
    expm_apply,
    rotating_frame_static,
    steady_by_window,
)
from singletpump.measurement import spin_populations

__all__ = [
    "PopulationRecord",
    "ContinuousSchedule",
    "StepwiseSchedule",
    "EnsembleSpec",
    "Ablation",
    "AblationRow",
    "compute_t2pi",
    "default_layout",
    "initial_density",
    "population_record",
    "run_continuous",
    "run_stepwise",
    "gaussian_average",
    "steady_singlet",
    "error_budget",
    "standard_ablations",
    "states_in_window",
]


@dataclass(frozen=True)
class PopulationRecord:
    """One output row: populations and pumping-mode occupation at one time.

    ``time`` carries seconds for continuous runs and the step index for
    stepwise runs.  ``P_a`` is the probability of at least one ion in |a>
    (with none leaked); ``P_leak`` of at least one ion outside {down,up,a}.
    The six probability fields sum to 1.
    """

    time: float
    P_S: float
    P_T: float
    P_uu: float
    P_dd: float
    P_a: float
    P_leak: float
    nbar_mode3: float

    def population_sum(self) -> float:
        return self.P_S + self.P_T + self.P_uu + self.P_dd + self.P_a + self.P_leak


def population_record(t: float, rho, layout: HilbertLayout) -> PopulationRecord:
    pops = spin_populations(rho, layout)
    return PopulationRecord(
        time=float(t),
        P_S=pops.P_S,
        P_T=pops.P_T,
        P_uu=pops.P_uu,
        P_dd=pops.P_dd,
        P_a=pops.P_a_manifold,
        P_leak=pops.P_leak,
        nbar_mode3=float(mode_number_expectation(rho, layout, 0)),
    )


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuousSchedule:
    """All-channels-on run of a given duration with a sampling grid.

    ``sample_times`` overrides the uniform grid built from
    ``sample_interval`` (both endpoints included).
    """

    duration: float
    sample_interval: float = 50e-6
    sample_times: tuple[float, ...] | None = None
    channels: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        if self.duration <= 0:
            raise ParameterError(f"duration must be > 0 (got {self.duration})")
        if self.sample_times is not None:
            ts = np.asarray(self.sample_times, dtype=float)
            if ts.size == 0 or np.any(np.diff(ts) <= 0):
                raise ParameterError("sample_times must be strictly increasing")
            if ts[0] < 0 or ts[-1] > self.duration * (1 + 1e-12):
                raise ParameterError("sample_times must lie in [0, duration]")
            object.__setattr__(self, "sample_times", tuple(float(t) for t in ts))
        elif self.sample_interval <= 0:
            raise ParameterError("sample_interval must be > 0")

    def resolved_sample_times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        n = max(1, int(round(self.duration / self.sample_interval)))
        return np.linspace(0.0, self.duration, n + 1)


COOLING_MODES = ("thermal-reset", "lindblad")


@dataclass(frozen=True)
class StepwiseSchedule:
    """Cool / coherent-pulse / repump cycle, repeated ``n_steps`` times.

    ``t_coh=None`` resolves to the full return period t_2pi of the coherent
    dynamics at run time.  ``cooling_mode='thermal-reset'`` replaces the
    cooling segment by an instantaneous reset of every bosonic mode to a
    thermal state at the params' nbar (vacuum if the heating channel is
    disabled); ``'lindblad'`` evolves cooling+heating jumps for ``t_cool``.
    ``n_steps=0`` is allowed and reports only the initial populations.
    """

    n_steps: int
    t_cool: float = 100e-6
    t_coh: float | None = None
    t_repump: float = 6e-6
    cooling_mode: str = "thermal-reset"
    channels: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        if self.n_steps < 0:
            raise ParameterError(f"n_steps must be >= 0 (got {self.n_steps})")
        for name in ("t_cool", "t_repump"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.t_coh is not None and self.t_coh < 0:
            raise ParameterError("t_coh must be >= 0")
        if self.cooling_mode not in COOLING_MODES:
            raise ParameterError(
                f"unknown cooling_mode {self.cooling_mode!r}; valid: {COOLING_MODES}"
            )


@dataclass(frozen=True)
class EnsembleSpec:
    """Gaussian ensemble over the sideband imbalance r, integrated by
    Gauss-Hermite quadrature (odd node counts keep the nominal r on a node)."""

    r_mean: float = 0.0
    r_rms: float = 0.014
    quadrature: int = 7

    def __post_init__(self):
        if self.r_rms < 0:
            raise ParameterError("r_rms must be >= 0")
        if self.quadrature < 1 or self.quadrature % 2 == 0:
            raise ParameterError("quadrature node count must be odd and >= 1")


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def compute_t2pi(params: SchemeParams) -> float:
    """Return period of the coherent dynamics, 2 pi / sqrt(Os^2 + Oc^2)."""
    s = params.omega_s ** 2 + params.omega_c ** 2
    if s <= 0.0:
        raise ParameterError("coherent period undefined: omega_s = omega_c = 0")
    return 2.0 * np.pi / np.sqrt(s)


def default_layout(
    params: SchemeParams,
    channels: ChannelConfig = ChannelConfig(),
    *,
    mode3_dim: int = 5,
    mode4_dim: int = 3,
    ion_levels: int | None = None,
) -> HilbertLayout:
    """Smallest layout that represents every enabled channel.

    The leak level is included only when an enabled scattering entry can
    populate it, and mode 4 only when its coupling is active; dropping an
    uncoupled tensor factor is exact, not an approximation.  Pass
    ``ion_levels`` to pin the per-ion level count instead.
    """
    if ion_levels is None:
        uses_leak = channels.spontaneous and any(
            rate > 0 and LEAK in (frm, to) for (frm, to, rate) in params.gamma_table
        )
        ion_levels = 4 if uses_leak else 3
    use_mode4 = channels.mode4 and params.eta4 > 0 and mode4_dim > 0
    mode_dims = (mode3_dim, mode4_dim) if use_mode4 else (mode3_dim,)
    return HilbertLayout(ion_levels=ion_levels, mode_dims=mode_dims)


def initial_density(
    layout: HilbertLayout, spin_levels: tuple[int, int] = (DOWN, DOWN)
) -> np.ndarray:
    """|spin> (x) |0...0> as a density matrix."""
    ket = product_ket(layout, spin_levels)
    return np.outer(ket, ket.conj())


@dataclass
class _RunDiagnostics:
    trace0: float
    max_drift: float = 0.0
    max_herm: float = 0.0
    min_eig: float | None = None

    def check(self, rho: np.ndarray, label: str, trace_tol: float = 1e-9) -> None:
        drift = abs(float(np.real(np.trace(rho))) - self.trace0)
        self.max_drift = max(self.max_drift, drift)
        if drift > trace_tol:
            raise NumericalError(f"trace drift {drift:.2e} at {label}")
        self.max_herm = max(
            self.max_herm, float(np.max(np.abs(rho - rho.conj().T)))
        )

    def eig_check(self, rho: np.ndarray) -> None:
        w = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        self.min_eig = w if self.min_eig is None else min(self.min_eig, w)


# ---------------------------------------------------------------------------
# Continuous protocol
# ---------------------------------------------------------------------------

def run_continuous(
    params: SchemeParams,
    schedule: ContinuousSchedule,
    *,
    layout: HilbertLayout | None = None,
    tol: float = 1e-8,
    engine: str = "auto",
    checkpoint_interval: int = 100,
    positivity_interval: int = 0,
    initial_spin: tuple[int, int] = (DOWN, DOWN),
) -> Trajectory:
    """Evolve |down,down>|0> with all enabled channels on simultaneously.

    Time-independent generators (mode-4 coupling off) are propagated by the
    exact segment exponential; otherwise the adaptive integrator resolves
    the rotating term directly.
    """
    params.validate()
    if layout is None:
        layout = default_layout(params, schedule.channels)
    generator = build_generator(params, layout, schedule.channels)
    rho0 = initial_density(layout, initial_spin)
    ts = schedule.resolved_sample_times()
    sampler = lambda t, rho: population_record(t, rho, layout)  # noqa: E731

    if not generator.is_static:
        return evolve(
            rho0,
            generator,
            (0.0, float(schedule.duration)),
            tol=tol,
            sample_times=ts,
            sample_fn=sampler,
            checkpoint_interval=checkpoint_interval,
            positivity_interval=positivity_interval,
            engine=engine,
        )

    diag = _RunDiagnostics(trace0=float(np.real(np.trace(rho0))))
    rho = rho0
    records = []
    states: list[DensityState] = []
    n_samples = ts.size
    for k, tk in enumerate(ts):
        if k:
            rho = expm_apply(rho, generator, float(tk - ts[k - 1]), engine=engine)
        diag.check(rho, f"t={tk:g} s")
        records.append(sampler(tk, rho))
        if checkpoint_interval > 0 and (
            k % checkpoint_interval == 0 or k == n_samples - 1
        ):
            states.append(DensityState(rho.copy(), layout, time=float(tk)))
        if positivity_interval > 0 and k % positivity_interval == 0:
            diag.eig_check(rho)
    return Trajectory(
        times=ts.copy(),
        records=records,
        states=states,
        final_state=DensityState(rho.copy(), layout, time=float(ts[-1])),
        max_trace_drift=diag.max_drift,
        max_hermiticity_defect=diag.max_herm,
        min_eigenvalue=diag.min_eig,
        n_rhs_evals=0,
        engine="expm",
    )


# ---------------------------------------------------------------------------
# Stepwise protocol
# ---------------------------------------------------------------------------

def _pulse_propagator(
    params: SchemeParams, layout: HilbertLayout, channels: ChannelConfig
):
    """Propagation closure for one coherent pulse (lasers on, dissipation
    limited to laser-induced scattering)."""
    pulse_channels = dataclasses.replace(
        channels, repump=False, cooling=False, heating=False
    )
    gen = build_generator(params, layout, pulse_channels)
    if gen.is_static:
        return lambda rho, t, engine: expm_apply(rho, gen, t, engine=engine)
    static, unwind = rotating_frame_static(gen)

    def advance(rho, t, engine):
        # The frame transform is the identity at the pulse's local t=0, so
        # no forward transform is needed; only the unwind at pulse end.
        return unwind(t, expm_apply(rho, static, t, engine=engine))

    return advance


def run_stepwise(
    params: SchemeParams,
    schedule: StepwiseSchedule,
    *,
    layout: HilbertLayout | None = None,
    engine: str = "auto",
    checkpoint_interval: int = 100,
    positivity_interval: int = 0,
    initial_spin: tuple[int, int] = (DOWN, DOWN),
) -> Trajectory:
    """Run the cool / pulse / repump cycle; record after each repump.

    The trajectory's time axis is the step index (0 = initial state).  All
    segments are propagated by exact exponentials of their static
    generators; the mode-4 rotating term is removed by the co-rotating
    frame (each pulse restarts the drive phase, a free choice since only
    the detuning, not the absolute phase, is physical).
    """
    params.validate()
    if layout is None:
        layout = default_layout(params, schedule.channels)
    channels = schedule.channels
    t_coh = compute_t2pi(params) if schedule.t_coh is None else schedule.t_coh

    pulse = _pulse_propagator(params, layout, channels)
    # The scattering table models emission induced by the sideband beams,
    # which are off outside the coherent pulse, so the repump segment (like
    # the cooling segment) carries no spontaneous-scattering jumps.
    repump_channels = ChannelConfig(
        sideband=False,
        carrier=False,
        repump=channels.repump,
        cooling=False,
        heating=False,
        spontaneous=False,
        mode4=False,
    )
    repump_gen = build_generator(params, layout, repump_channels)
    cool_gen: LindbladGenerator | None = None
    if schedule.cooling_mode == "lindblad" and channels.cooling:
        cool_channels = ChannelConfig(
            sideband=False,
            carrier=False,
            repump=False,
            cooling=True,
            heating=channels.heating,
            spontaneous=False,
            mode4=channels.mode4,
        )
        cool_gen = build_generator(params, layout, cool_channels)
    reset_nbar = params.nbar if channels.heating else 0.0
    thermal_modes = [thermal_mode_density(d, reset_nbar) for d in layout.mode_dims]

    rho = initial_density(layout, initial_spin)
    diag = _RunDiagnostics(trace0=float(np.real(np.trace(rho))))
    records = [population_record(0.0, rho, layout)]
    states = [DensityState(rho.copy(), layout, time=0.0)]

    for step in range(1, schedule.n_steps + 1):
        if channels.cooling:
            if schedule.cooling_mode == "thermal-reset":
                rho = assemble_density(
                    layout, partial_trace_modes(rho, layout), thermal_modes
                )
            elif cool_gen is not None and schedule.t_cool > 0:
                rho = expm_apply(rho, cool_gen, schedule.t_cool, engine=engine)
        if t_coh > 0:
            rho = pulse(rho, t_coh, engine)
        if schedule.t_repump > 0 and repump_gen.jumps:
            rho = expm_apply(rho, repump_gen, schedule.t_repump, engine=engine)
        diag.check(rho, f"step {step}")
        records.append(population_record(float(step), rho, layout))
        if checkpoint_interval > 0 and (
            step % checkpoint_interval == 0 or step == schedule.n_steps
        ):
            states.append(DensityState(rho.copy(), layout, time=float(step)))
        if positivity_interval > 0 and step % positivity_interval == 0:
            diag.eig_check(rho)

    return Trajectory(
        times=np.arange(schedule.n_steps + 1, dtype=float),
        records=records,
        states=states,
        final_state=DensityState(
            rho.copy(), layout, time=float(schedule.n_steps)
        ),
        max_trace_drift=diag.max_drift,
        max_hermiticity_defect=diag.max_herm,
        min_eigenvalue=diag.min_eig,
        n_rhs_evals=0,
        engine="expm",
    )


# ---------------------------------------------------------------------------
# Ensemble averaging over the imbalance r
# ---------------------------------------------------------------------------

def gaussian_average(
    runner: Callable[[float], Trajectory],
    ensemble: EnsembleSpec,
    *,
    symmetric: bool = False,
) -> Trajectory:
    """Gauss-Hermite average of trajectories over r ~ N(r_mean, r_rms^2).

    ``runner(r)`` must be deterministic and produce trajectories on a common
    time grid.  With ``symmetric=True`` the caller asserts runner(r) and
    runner(-r) give identical records (true for the pumping scheme at
    phi = 0), halving the number of master-equation solves.
    """
    nodes, weights = np.polynomial.hermite.hermgauss(ensemble.quadrature)
    rs = ensemble.r_mean + np.sqrt(2.0) * ensemble.r_rms * nodes
    ws = weights / np.sqrt(np.pi)

    results: dict[int, Trajectory] = {}
    for j, r in enumerate(rs):
        reuse = None
        for jj in results:
            if rs[jj] == r or (symmetric and rs[jj] == -r):
                reuse = jj
                break
        results[j] = results[reuse] if reuse is not None else runner(float(r))

    trajs = [results[j] for j in range(len(rs))]
    base = trajs[0]
    for t in trajs[1:]:
        if t.times.shape != base.times.shape or not np.allclose(t.times, base.times):
            raise ValueError("ensemble members sampled on different time grids")

    records = None
    if base.records is not None:
        records = [
            average_records([t.records[i] for t in trajs], ws)
            for i in range(len(base.records))
        ]
    states = []
    for i in range(len(base.states)):
        if all(len(t.states) == len(base.states) for t in trajs):
            mixed = sum(
                w * t.states[i].data for w, t in zip(ws, trajs)
            )
            states.append(
                DensityState(mixed, base.states[i].layout, base.states[i].time)
            )
    final = DensityState(
        sum(w * t.final_state.data for w, t in zip(ws, trajs)),
        base.final_state.layout,
        base.final_state.time,
    )
    min_eigs = [t.min_eigenvalue for t in trajs if t.min_eigenvalue is not None]
    return Trajectory(
        times=base.times.copy(),
        records=records,
        states=states,
        final_state=final,
        max_trace_drift=max(t.max_trace_drift for t in trajs),
        max_hermiticity_defect=max(t.max_hermiticity_defect for t in trajs),
        min_eigenvalue=min(min_eigs) if min_eigs else None,
        n_rhs_evals=sum(t.n_rhs_evals for t in trajs),
        engine=base.engine,
    )


def states_in_window(trajectory: Trajectory, window: Sequence[float]):
    """Checkpoint states whose timestamps fall inside [t_a, t_b]."""
    t_a, t_b = float(window[0]), float(window[1])
    return [s for s in trajectory.states if t_a <= s.time <= t_b]


# ---------------------------------------------------------------------------
# Error budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ablation:
    """One row of an error budget: what to switch off or idealize."""

    label: str
    disable_channels: tuple[str, ...] = ()
    param_overrides: tuple[tuple[str, float], ...] = ()
    disable_ensemble: bool = False

    @classmethod
    def make(
        cls,
        label: str,
        disable_channels: Sequence[str] = (),
        param_overrides: Mapping[str, float] | None = None,
        disable_ensemble: bool = False,
    ) -> "Ablation":
        return cls(
            label=label,
            disable_channels=tuple(disable_channels),
            param_overrides=tuple((param_overrides or {}).items()),
            disable_ensemble=disable_ensemble,
        )


@dataclass(frozen=True)
class AblationRow:
    """Steady singlet population with one imperfection removed."""

    label: str
    channels: tuple[str, ...]
    P_S: float
    delta: float


def standard_ablations(protocol: str) -> list[Ablation]:
    """The ablation set quantifying each modeled imperfection."""
    rows = [
        Ablation.make("spontaneous off", disable_channels=("spontaneous",)),
        Ablation.make(
            "balanced drive (r=0)",
            param_overrides={"r": 0.0},
            disable_ensemble=True,
        ),
        Ablation.make("mode 4 off", disable_channels=("mode4",)),
    ]
    if protocol == "stepwise":
        rows.append(
            Ablation.make(
                "ground-state cooling",
                disable_channels=("heating",),
                param_overrides={"nbar": 0.0},
            )
        )
    return rows


def steady_singlet(
    params: SchemeParams,
    schedule,
    window: Sequence[float],
    *,
    ensemble: EnsembleSpec | None = None,
    layout: HilbertLayout | None = None,
    tol: float = 1e-8,
    engine: str = "auto",
    checkpoint_interval: int = 100,
) -> tuple[float, Trajectory]:
    """Steady-window singlet population for one (params, schedule, ensemble).

    Dispatches on the schedule type and wraps the run in Gauss-Hermite
    averaging when an ensemble is supplied.
    """

    def runner(r: float) -> Trajectory:
        p = params.replace(r=r)
        if isinstance(schedule, StepwiseSchedule):
            return run_stepwise(
                p, schedule, layout=layout, engine=engine,
                checkpoint_interval=checkpoint_interval,
            )
        return run_continuous(
            p, schedule, layout=layout, tol=tol, engine=engine,
            checkpoint_interval=checkpoint_interval,
        )

    if ensemble is None or ensemble.r_rms == 0.0:
        traj = runner(params.r)
    else:
        symmetric = params.phi == 0.0 and ensemble.r_mean == 0.0
        traj = gaussian_average(runner, ensemble, symmetric=symmetric)
    return steady_by_window(traj, window).P_S, traj


def error_budget(
    params: SchemeParams,
    schedule,
    window: Sequence[float],
    ablations: Sequence[Ablation],
    *,
    ensemble: EnsembleSpec | None = None,
    tol: float = 1e-8,
    engine: str = "auto",
) -> list[AblationRow]:
    """Baseline steady P_S plus one row per ablation with its gain.

    Each row rebuilds its own layout, so switching off a channel also drops
    the tensor factors it alone required (exact, and much faster).
    """
    base_p, _ = steady_singlet(
        params, schedule, window, ensemble=ensemble, tol=tol, engine=engine
    )
    rows = [
        AblationRow(
            label="baseline",
            channels=schedule.channels.names(),
            P_S=base_p,
            delta=0.0,
        )
    ]
    for abl in ablations:
        chan = schedule.channels.without(*abl.disable_channels)
        sched = dataclasses.replace(schedule, channels=chan)
        p = params.replace(**dict(abl.param_overrides))
        ens = None if abl.disable_ensemble else ensemble
        val, _ = steady_singlet(
            p, sched, window, ensemble=ens, tol=tol, engine=engine
        )
        rows.append(
            AblationRow(
                label=abl.label,
                channels=chan.names(),
                P_S=val,
                delta=val - base_p,
            )
        )
    return rows
