"""Effective rate model of the pumping cycle on the two-qubit ground manifold.

The full master-equation dynamics is coarse-grained to classical populations
of {|S>, |up,up>, |T>, |down,down>}: the carrier+repump cycle pumps |up,up>
into |S> and |T> at ``gamma_plus`` each, sideband+cooling reshuffle
|down,down> -> |T> -> |up,up> at ``kappa_res``, and a set of slow loss rates
``gamma_minus_*`` drain the singlet back into the bright states.  An
optional absorbing leak population models scattering out of the qubit
manifold at ``Gamma_up_leak`` per up-spin.

The closed-form steady state of this linear system,

    F = 1 / (1 + E),
    E = gamma_minus / gamma_plus
        + (gamma_minus_uu + 2 gamma_minus_T + 3 gamma_minus_dd) / kappa_res,

is an independent oracle for the master-equation pipeline: both routes must
land on the same steady singlet population within stated tolerances.

Three approximations of increasing physical fidelity for the preparation
rate are exposed as variants: "weak" (lowest-order carrier excitation),
"broadened" (carrier
saturation included), and "thermal" (saturation and thermal phonon
occupation).  The "thermal" variant is the default; it is the one whose
closed-form error matches the master equation at the continuous-protocol
operating point.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from singletpump.hilbert import AUX, DOWN, LEAK, UP
from singletpump.model import ParameterError, SchemeParams

__all__ = [
    "EffectiveRates",
    "RatePopulations",
    "RateSeries",
    "RATE_VARIANTS",
    "compute_effective_rates",
    "integrate_rate_equations",
    "steady_state_closed_form",
]

RATE_VARIANTS = ("weak", "broadened", "thermal")


def _ratio(num: float, den: float, what: str) -> float:
    """num/den with a zero-denominator guard; 0/0 is taken as 0."""
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ParameterError(f"{what} is singular: zero denominator")
    return num / den


@dataclass(frozen=True)
class EffectiveRates:
    """Derived rates of the coarse-grained pumping cycle, all in 1/s.

    ``gamma_minus_uu/T/dd`` are composite singlet-loss rates toward the
    named destination; each is the sum of its inherent-depumping share, the
    spontaneous-scattering contribution, and (for the |up,up> destination)
    the imbalance and spectator-mode channels.  The decomposition fields are
    retained so error budgets can be read off directly.
    """

    gamma_plus: float
    kappa_res: float
    gamma_inh: float
    Gamma_uu: float
    Gamma_T: float
    Gamma_dd: float
    kappa_r: float
    kappa_4: float
    Gamma_up_leak: float
    gamma_minus_uu: float
    gamma_minus_T: float
    gamma_minus_dd: float
    variant: str = "thermal"

    @property
    def gamma_minus(self) -> float:
        """Total loss rate out of the singlet."""
        return self.gamma_minus_uu + self.gamma_minus_T + self.gamma_minus_dd

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            if f.name == "variant":
                continue
            if getattr(self, f.name) < 0:
                raise ParameterError(f"effective rate {f.name} is negative")

    def scaled(self, factor: float) -> "EffectiveRates":
        """Uniformly rescale every rate (steady-state fidelity is invariant)."""
        updates = {
            f.name: getattr(self, f.name) * factor
            for f in dataclasses.fields(self)
            if f.name != "variant"
        }
        return dataclasses.replace(self, **updates)


@dataclass(frozen=True)
class RatePopulations:
    """Classical populations of the coarse-grained manifold."""

    P_S: float
    P_uu: float
    P_T: float
    P_dd: float
    P_leak: float = 0.0

    def total(self) -> float:
        return self.P_S + self.P_uu + self.P_T + self.P_dd + self.P_leak

    def as_vector(self, include_leak: bool) -> np.ndarray:
        v = [self.P_S, self.P_uu, self.P_T, self.P_dd]
        if include_leak:
            v.append(self.P_leak)
        return np.asarray(v, dtype=float)

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "RatePopulations":
        leak = float(v[4]) if v.size > 4 else 0.0
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]), leak)


@dataclass(frozen=True)
class RateSeries:
    """Time-stamped rate-model populations."""

    times: np.ndarray
    populations: tuple[RatePopulations, ...]

    def array(self, field_name: str) -> np.ndarray:
        return np.array(
            [getattr(p, field_name) for p in self.populations], dtype=float
        )

    @property
    def final(self) -> RatePopulations:
        return self.populations[-1]


def compute_effective_rates(
    params: SchemeParams, variant: str = "thermal"
) -> EffectiveRates:
    """Evaluate every coarse-grained rate from the physical parameters.

    ``variant`` selects the preparation-rate formula (see module docstring).
    Raises ParameterError for parameter regimes where a rate formula is
    singular, e.g. kappa = 0 with both r and nbar nonzero, or a vanishing
    repump rate combined with nonzero scattering out of |a>.
    """
    params.validate()
    if variant not in RATE_VARIANTS:
        raise ParameterError(
            f"unknown rate variant {variant!r}; valid: {RATE_VARIANTS}"
        )

    gamma_ra = params.gamma_repump           # population-transferring part
    gamma = params.gamma_aux_linewidth        # includes the elastic channel
    omega_c2 = params.omega_c ** 2
    kappa_half = params.kappa / 2.0

    if variant == "weak":
        gamma_plus = 4.0 * _ratio(
            params.gamma_down_a * omega_c2, gamma ** 2, "gamma_plus (weak)"
        )
    elif variant == "broadened":
        gamma_plus = 4.0 * _ratio(
            params.gamma_down_a * omega_c2,
            gamma ** 2 + 16.0 * omega_c2,
            "gamma_plus (broadened)",
        )
    else:
        gamma_plus = _ratio(
            params.gamma_down_a * omega_c2,
            (gamma ** 2 + 4.0 * omega_c2) * (1.0 + params.nbar),
            "gamma_plus (thermal)",
        )

    kappa_res = kappa_half

    gamma_inh = _ratio(
        (gamma + params.kappa) * omega_c2,
        4.0 * params.omega_s ** 2,
        "inherent depumping",
    )

    kappa_r = _ratio(
        16.0 * (params.r * params.omega_s) ** 2 * params.nbar,
        5.0 * params.kappa,
        "imbalance depumping (needs kappa > 0 when r and nbar are nonzero)",
    )

    kappa_4 = (
        2.0
        * params.kappa4
        * _ratio(params.omega4 ** 2, params.delta ** 2, "spectator-mode depumping")
        if params.eta4 > 0 or params.kappa4 > 0
        else 0.0
    )

    table = params.gamma_dict()
    t_du = table.get((DOWN, UP), 0.0)
    t_da = table.get((DOWN, AUX), 0.0)
    t_ud = table.get((UP, DOWN), 0.0)
    t_ua = table.get((UP, AUX), 0.0)
    t_ux = table.get((UP, LEAK), 0.0)

    # Scattering into |a> is resolved by where the repumper returns it and by
    # whether the accompanying phonon is removed before the sideband acts.
    frac_up = _ratio(params.gamma_up_a, gamma_ra, "repump branching")
    frac_down = _ratio(params.gamma_down_a, gamma_ra, "repump branching")
    cool_frac = _ratio(kappa_half, gamma_ra + kappa_half, "repump/cooling split") \
        if (gamma_ra + kappa_half) > 0 else 0.0

    if (t_da > 0 or t_ua > 0) and gamma_ra == 0:
        raise ParameterError(
            "scattering into |a> requires a nonzero repump rate"
        )

    Gamma_uu = (
        t_du
        + frac_up * t_da
        + 0.5 * frac_up * t_ua * (1.0 + cool_frac)
    )
    Gamma_T = (
        0.5 * frac_down * t_da
        + 0.25 * _ratio(gamma_ra * t_ua, gamma_ra + kappa_half, "aux-scatter split")
        + 0.5 * frac_down * t_ua * cool_frac
    )
    Gamma_dd = t_ud + 0.5 * _ratio(
        params.gamma_down_a * t_ua, gamma_ra + kappa_half, "aux-scatter split"
    )

    gamma_minus_uu = gamma_inh * frac_up + Gamma_uu + kappa_r + kappa_4
    gamma_minus_T = 0.5 * gamma_inh * frac_down + Gamma_T
    gamma_minus_dd = Gamma_dd

    rates = EffectiveRates(
        gamma_plus=gamma_plus,
        kappa_res=kappa_res,
        gamma_inh=gamma_inh,
        Gamma_uu=Gamma_uu,
        Gamma_T=Gamma_T,
        Gamma_dd=Gamma_dd,
        kappa_r=kappa_r,
        kappa_4=kappa_4,
        Gamma_up_leak=t_ux,
        gamma_minus_uu=gamma_minus_uu,
        gamma_minus_T=gamma_minus_T,
        gamma_minus_dd=gamma_minus_dd,
        variant=variant,
    )
    rates.validate()
    return rates


def rate_matrix(rates: EffectiveRates, include_leak: bool = True) -> np.ndarray:
    """Generator matrix M of the linear system dp/dt = M p.

    Population order (S, uu, T, dd[, leak]).  Without the leak channel every
    column sums to zero, so total population is conserved exactly; with it
    the leak row absorbs 2*Gamma_up_leak per |up,up> and Gamma_up_leak per
    one-up state.
    """
    gp = rates.gamma_plus
    kr = rates.kappa_res
    lu, lt, ld = rates.gamma_minus_uu, rates.gamma_minus_T, rates.gamma_minus_dd
    gm = lu + lt + ld
    m = np.array(
        [
            [-gm, gp, 0.0, 0.0],
            [lu, -2.0 * gp, kr, 0.0],
            [lt, gp, -kr, kr],
            [ld, 0.0, 0.0, -kr],
        ]
    )
    if not include_leak:
        return m
    gl = rates.Gamma_up_leak
    full = np.zeros((5, 5))
    full[:4, :4] = m
    full[0, 0] -= gl          # one up-spin in |S>
    full[1, 1] -= 2.0 * gl    # two up-spins in |up,up>
    full[2, 2] -= gl          # one up-spin in |T>
    full[4, 0] = gl
    full[4, 1] = 2.0 * gl
    full[4, 2] = gl
    return full


def integrate_rate_equations(
    rates: EffectiveRates,
    p0: RatePopulations | None = None,
    t_span: tuple[float, float] = (0.0, 0.012),
    *,
    include_leak: bool = True,
    sample_times: Sequence[float] | None = None,
) -> RateSeries:
    """Exact solution of the linear rate equations at the sample times.

    The system is tiny (4 or 5 populations), so each sample is evaluated by
    a dense matrix exponential; there is no integration error to speak of.
    Default initial condition is everything in |down,down>.
    """
    if p0 is None:
        p0 = RatePopulations(P_S=0.0, P_uu=0.0, P_T=0.0, P_dd=1.0)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    if sample_times is None:
        sample_times = np.linspace(t0, t1, 241)
    times = np.asarray(sample_times, dtype=float)

    m = rate_matrix(rates, include_leak=include_leak)
    v0 = p0.as_vector(include_leak=include_leak)
    pops = []
    for t in times:
        v = expm(m * (t - t0)) @ v0
        if not include_leak:
            v = np.append(v, p0.P_leak)
        pops.append(RatePopulations.from_vector(v))
    return RateSeries(times=times, populations=tuple(pops))


def steady_state_closed_form(rates: EffectiveRates) -> tuple[float, float]:
    """Steady-state fidelity and error of the leak-free rate equations.

    Returns (F, E) with F = 1/(1+E).  E is exactly the stationary solution
    of the 4-population system, as can be checked by eliminating P_uu, P_T,
    P_dd from the stationarity conditions.
    """
    if rates.gamma_plus == 0.0:
        raise ParameterError("no pumping: gamma_plus = 0")
    if rates.kappa_res == 0.0:
        raise ParameterError("no reshuffling: kappa_res = 0")
    error = rates.gamma_minus / rates.gamma_plus + (
        rates.gamma_minus_uu + 2.0 * rates.gamma_minus_T + 3.0 * rates.gamma_minus_dd
    ) / rates.kappa_res
    return 1.0 / (1.0 + error), error
