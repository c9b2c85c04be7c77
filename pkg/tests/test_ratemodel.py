"""Tests for the coarse-grained rate model of the pumping cycle."""

import dataclasses

import numpy as np
import pytest
from scipy.linalg import null_space

from common import FROZEN, continuous_params, scattering_table
from singletpump.model import ParameterError
from singletpump.ratemodel import (
    RATE_VARIANTS,
    EffectiveRates,
    RatePopulations,
    RateSeries,
    compute_effective_rates,
    integrate_rate_equations,
    rate_matrix,
    steady_state_closed_form,
)


def random_rates(rng) -> EffectiveRates:
    """All-positive effective rates with no structure beyond positivity."""
    v = rng.uniform(0.1, 3.0, size=6)
    lu, lt, ld = v[2], v[3], v[4]
    return EffectiveRates(
        gamma_plus=float(v[0] * 100),
        kappa_res=float(v[1] * 1000),
        gamma_inh=0.0,
        Gamma_uu=0.0,
        Gamma_T=0.0,
        Gamma_dd=0.0,
        kappa_r=0.0,
        kappa_4=0.0,
        Gamma_up_leak=float(v[5]),
        gamma_minus_uu=float(lu),
        gamma_minus_T=float(lt),
        gamma_minus_dd=float(ld),
    )


class TestEffectiveRates:
    def test_thermal_variant_frozen_values(self):
        rates = compute_effective_rates(continuous_params())
        assert rates.variant == "thermal"
        assert rates.gamma_plus == pytest.approx(
            FROZEN["gamma_plus_thermal"], rel=1e-12
        )
        assert rates.kappa_res == pytest.approx(FROZEN["kappa_res"], rel=1e-12)
        assert rates.gamma_inh == pytest.approx(FROZEN["gamma_inh"], rel=1e-12)
        assert rates.Gamma_uu == pytest.approx(FROZEN["Gamma_uu"], rel=1e-12)
        assert rates.Gamma_T == pytest.approx(FROZEN["Gamma_T"], rel=1e-12)
        assert rates.Gamma_dd == pytest.approx(FROZEN["Gamma_dd"], rel=1e-12)
        assert rates.kappa_r == 0.0
        assert rates.kappa_4 == pytest.approx(FROZEN["kappa_4_eff"], rel=1e-12)
        assert rates.Gamma_up_leak == pytest.approx(
            FROZEN["table_rate_cont"], rel=1e-12
        )
        assert rates.gamma_minus == pytest.approx(
            FROZEN["gamma_minus"], rel=1e-12
        )

    def test_loss_components_decompose(self):
        # frac_up = 5/9 and frac_down = 4/9 are set by the repump branching;
        # the three composite losses must be exactly their stated sums.
        rates = compute_effective_rates(continuous_params())
        assert rates.gamma_minus_uu == pytest.approx(
            FROZEN["gamma_inh"] * 5.0 / 9.0
            + FROZEN["Gamma_uu"]
            + FROZEN["kappa_4_eff"],
            rel=1e-12,
        )
        assert rates.gamma_minus_T == pytest.approx(
            0.5 * FROZEN["gamma_inh"] * 4.0 / 9.0 + FROZEN["Gamma_T"],
            rel=1e-12,
        )
        assert rates.gamma_minus_dd == pytest.approx(
            FROZEN["Gamma_dd"], rel=1e-12
        )

    @pytest.mark.parametrize(
        "variant, key",
        [
            ("weak", "gamma_plus_weak"),
            ("broadened", "gamma_plus_broadened"),
            ("thermal", "gamma_plus_thermal"),
        ],
    )
    def test_preparation_rate_variants(self, variant, key):
        rates = compute_effective_rates(continuous_params(), variant=variant)
        assert rates.gamma_plus == pytest.approx(FROZEN[key], rel=1e-12)
        assert rates.variant == variant

    def test_variant_ordering(self):
        # Saturation and thermal occupation can only slow the preparation.
        values = [
            compute_effective_rates(continuous_params(), variant=v).gamma_plus
            for v in RATE_VARIANTS
        ]
        assert values[0] > values[1] > values[2]

    def test_unknown_variant_rejected(self):
        with pytest.raises(ParameterError, match="unknown rate variant"):
            compute_effective_rates(continuous_params(), variant="exact")

    def test_imbalance_needs_cooling(self):
        params = continuous_params(kappa=0.0, r=0.05)
        with pytest.raises(ParameterError, match="kappa"):
            compute_effective_rates(params)
        # with nbar = 0 the imbalance channel is inactive and kappa=0 is fine
        ok = continuous_params(kappa=0.0, r=0.05, nbar=0.0)
        assert compute_effective_rates(ok).kappa_r == 0.0

    def test_aux_scattering_needs_repump(self):
        params = continuous_params(gamma_up_a=0.0, gamma_down_a=0.0)
        with pytest.raises(ParameterError, match="repump"):
            compute_effective_rates(params)

    def test_no_aux_scattering_allows_zero_repump(self):
        omega_s = continuous_params().omega_s
        table = {k: v for k, v in scattering_table(omega_s).items()
                 if k[1] != 2}
        params = continuous_params(
            gamma_up_a=0.0, gamma_down_a=0.0, gamma_aa=0.0, gamma_table=table
        )
        rates = compute_effective_rates(params)
        assert rates.gamma_plus == 0.0
        assert rates.Gamma_T == 0.0

    def test_spectator_mode_gated_by_eta4(self):
        rates = compute_effective_rates(continuous_params(eta4=0.0, kappa4=0.0))
        assert rates.kappa_4 == 0.0

    def test_validate_rejects_negative(self):
        rates = compute_effective_rates(continuous_params())
        bad = dataclasses.replace(rates, gamma_plus=-1.0)
        with pytest.raises(ParameterError, match="negative"):
            bad.validate()

    def test_scaled_multiplies_every_rate(self):
        rates = compute_effective_rates(continuous_params())
        scaled = rates.scaled(3.7)
        for f in dataclasses.fields(rates):
            if f.name == "variant":
                continue
            assert getattr(scaled, f.name) == getattr(rates, f.name) * 3.7


class TestClosedFormSteadyState:
    def test_frozen_values_all_variants(self):
        for variant, key in [("weak", "E_weak"),
                             ("broadened", "E_broadened"),
                             ("thermal", "E_thermal")]:
            rates = compute_effective_rates(continuous_params(), variant)
            fidelity, error = steady_state_closed_form(rates)
            assert error == pytest.approx(FROZEN[key], rel=1e-12)
            assert fidelity == pytest.approx(1.0 / (1.0 + error), rel=1e-15)
        assert fidelity == pytest.approx(FROZEN["F_thermal"], rel=1e-12)

    def test_matches_nullspace_of_transfer_matrix(self, rng):
        # Independent oracle: the steady state is the kernel of the leak-free
        # generator; its normalized singlet entry must equal the closed form.
        for _ in range(25):
            rates = random_rates(rng)
            m = rate_matrix(rates, include_leak=False)
            kernel = null_space(m)
            assert kernel.shape[1] == 1
            p = kernel[:, 0] / kernel[:, 0].sum()
            fidelity, error = steady_state_closed_form(rates)
            assert p[0] == pytest.approx(fidelity, abs=1e-12)
            assert (1.0 - p[0]) / p[0] == pytest.approx(error, abs=1e-12)

    def test_error_formula_from_components(self):
        rates = compute_effective_rates(continuous_params())
        _, error = steady_state_closed_form(rates)
        expected = rates.gamma_minus / rates.gamma_plus + (
            rates.gamma_minus_uu
            + 2.0 * rates.gamma_minus_T
            + 3.0 * rates.gamma_minus_dd
        ) / rates.kappa_res
        assert error == expected

    def test_invariant_under_uniform_rescaling(self):
        rates = compute_effective_rates(continuous_params())
        assert steady_state_closed_form(rates.scaled(3.7)) == (
            steady_state_closed_form(rates)
        )

    def test_error_decreases_with_sideband_strength(self):
        # Stronger sideband drive suppresses inherent depumping while the
        # scattering table stays fixed, so the error must fall monotonically.
        # Scoped to r = 0 and no spectator mode, where no off-setting channel
        # scales up with omega_s.
        base = continuous_params(eta4=0.0, kappa4=0.0)
        errors = []
        for scale in (0.5, 1.0, 2.0, 4.0):
            params = base.replace(omega_s=base.omega_s * scale)
            _, error = steady_state_closed_form(compute_effective_rates(params))
            errors.append(error)
        assert all(a > b for a, b in zip(errors, errors[1:]))

    def test_no_pumping_is_singular(self):
        rates = compute_effective_rates(continuous_params())
        with pytest.raises(ParameterError, match="gamma_plus"):
            steady_state_closed_form(dataclasses.replace(rates, gamma_plus=0.0))
        with pytest.raises(ParameterError, match="kappa_res"):
            steady_state_closed_form(dataclasses.replace(rates, kappa_res=0.0))


class TestRateMatrix:
    def test_leak_free_columns_sum_to_zero(self, rng):
        m = rate_matrix(random_rates(rng), include_leak=False)
        assert m.shape == (4, 4)
        assert np.allclose(m.sum(axis=0), 0.0, atol=1e-15)

    def test_leak_columns_sum_to_zero(self, rng):
        # The absorbing state keeps the 5-population total conserved.
        m = rate_matrix(random_rates(rng), include_leak=True)
        assert m.shape == (5, 5)
        assert np.allclose(m.sum(axis=0), 0.0, atol=1e-15)
        assert np.all(m[4, :4] >= 0.0)
        assert m[4, 3] == 0.0      # |down,down> has no up-spin to scatter
        assert m[4, 1] == pytest.approx(2.0 * m[4, 0])

    def test_leak_rates_proportional_to_up_spins(self, rng):
        rates = random_rates(rng)
        m4 = rate_matrix(rates, include_leak=False)
        m5 = rate_matrix(rates, include_leak=True)
        gl = rates.Gamma_up_leak
        diff = np.diag(m4) - np.diag(m5[:4, :4])
        assert np.allclose(diff, gl * np.array([1.0, 2.0, 1.0, 0.0]))


class TestIntegration:
    def test_defaults(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(rates)
        assert len(series.times) == 241
        assert series.times[0] == 0.0 and series.times[-1] == 0.012
        first = series.populations[0]
        assert first.P_dd == 1.0 and first.total() == 1.0
        assert series.final is series.populations[-1]

    def test_population_conserved_without_leak(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(rates, include_leak=False)
        for pops in series.populations:
            assert pops.total() == pytest.approx(1.0, abs=1e-12)
            assert pops.P_leak == 0.0

    def test_population_conserved_with_leak(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(rates, t_span=(0.0, 0.1))
        assert series.final.P_leak > 1e-3
        for pops in series.populations:
            assert pops.total() == pytest.approx(1.0, abs=1e-12)

    def test_long_time_limit_is_closed_form(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(
            rates, t_span=(0.0, 2.0), include_leak=False,
            sample_times=[0.0, 2.0],
        )
        fidelity, _ = steady_state_closed_form(rates)
        assert series.final.P_S == pytest.approx(fidelity, abs=1e-6)

    def test_custom_samples_and_span_check(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(
            rates, sample_times=[0.0, 1e-3, 5e-3]
        )
        assert list(series.times) == [0.0, 1e-3, 5e-3]
        with pytest.raises(ValueError, match="increasing"):
            integrate_rate_equations(rates, t_span=(1.0, 0.0))

    def test_initial_condition_respected(self):
        rates = compute_effective_rates(continuous_params())
        p0 = RatePopulations(P_S=1.0, P_uu=0.0, P_T=0.0, P_dd=0.0)
        series = integrate_rate_equations(rates, p0, sample_times=[0.0])
        assert series.populations[0] == p0

    def test_series_array_accessor(self):
        rates = compute_effective_rates(continuous_params())
        series = integrate_rate_equations(rates, sample_times=[0.0, 1e-3])
        p_s = series.array("P_S")
        assert p_s.shape == (2,)
        assert p_s[0] == 0.0
        assert p_s[1] == series.populations[1].P_S


class TestRatePopulations:
    def test_vector_round_trip(self):
        pops = RatePopulations(0.1, 0.2, 0.3, 0.35, 0.05)
        assert pops.total() == pytest.approx(1.0)
        v5 = pops.as_vector(include_leak=True)
        assert v5.shape == (5,)
        assert RatePopulations.from_vector(v5) == pops
        v4 = pops.as_vector(include_leak=False)
        assert v4.shape == (4,)
        assert RatePopulations.from_vector(v4).P_leak == 0.0

    def test_series_final_is_property(self):
        series = RateSeries(
            times=np.array([0.0]),
            populations=(RatePopulations(0.0, 0.0, 0.0, 1.0),),
        )
        assert series.final.P_dd == 1.0
