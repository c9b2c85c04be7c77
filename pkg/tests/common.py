"""Shared parameter builders and frozen reference values for the tests.

The two operating points mirror the bundled presets; building them here in
plain code keeps unit tests independent of the config layer.  The FROZEN
mapping holds independently derived reference numbers: simple closed-form
quantities were evaluated by hand (2*pi conversions, branching splits,
geometric-series sums) and dynamical ones by brute-force linear algebra on
dense matrices; tests that use them also recompute the slow ones from
scratch where feasible.
"""

from __future__ import annotations

import numpy as np

from singletpump.hilbert import AUX, DOWN, LEAK, UP
from singletpump.model import SchemeParams

TWO_PI = 2.0 * np.pi


def continuous_params(**overrides) -> SchemeParams:
    """Continuous-protocol operating point (same numbers as the preset)."""
    omega_s = TWO_PI * 7.8e3
    gamma_ra = 1e6 / 88.0
    base = dict(
        omega_s=omega_s,
        omega_c=TWO_PI * 0.543e3,
        kappa=1e6 / 203.0,
        gamma_up_a=gamma_ra * 5.0 / 9.0,
        gamma_down_a=gamma_ra * 4.0 / 9.0,
        gamma_aa=gamma_ra * 3.0 / 9.0,
        nbar=0.11,
        eta3=0.18,
        eta4=0.155,
        delta=TWO_PI * 250e3,
        kappa4=800.0,
        gamma_table=scattering_table(omega_s),
    )
    base.update(overrides)
    return SchemeParams(**base)


def stepwise_params(**overrides) -> SchemeParams:
    """Stepwise-protocol operating point (same numbers as the preset)."""
    omega_s = TWO_PI * 8.4e3
    gamma_ra = 1e6 / 3.0
    base = dict(
        omega_s=omega_s,
        omega_c=TWO_PI * 1.24e3,
        kappa=1e6 / 203.0,
        gamma_up_a=gamma_ra * 5.0 / 9.0,
        gamma_down_a=gamma_ra * 4.0 / 9.0,
        gamma_aa=gamma_ra * 3.0 / 9.0,
        nbar=0.08,
        eta3=0.18,
        eta4=0.155,
        delta=TWO_PI * 250e3,
        kappa4=800.0,
        gamma_table=scattering_table(omega_s),
    )
    base.update(overrides)
    return SchemeParams(**base)


def scattering_table(omega_s: float, rel: float = 1e-4, with_leak: bool = True):
    """Laser-scattering table at a uniform rate relative to the sideband."""
    table = {
        (DOWN, UP): rel * omega_s,
        (DOWN, AUX): rel * omega_s,
        (UP, DOWN): rel * omega_s,
        (UP, AUX): rel * omega_s,
    }
    if with_leak:
        table[(UP, LEAK)] = rel * omega_s
    return table


FROZEN = {
    # direct unit conversions (hand-checked)
    "omega_s_cont": 49008.845396000776,       # 2 pi * 7.8 kHz
    "omega_c_cont": 3411.7696217985153,       # 2 pi * 0.543 kHz
    "omega_s_step": 52778.75658030852,        # 2 pi * 8.4 kHz
    "omega_c_step": 7791.149780902687,        # 2 pi * 1.24 kHz
    "kappa": 4926.108374384236,               # 1e6 / 203
    "kappa_heating_cont": 488.1729019660053,  # kappa * 0.11 / 1.11
    "gamma_up_a_cont": 6313.131313131314,     # (1e6/88) * 5/9
    "gamma_down_a_cont": 5050.50505050505,    # (1e6/88) * 4/9
    "gamma_aa_cont": 3787.8787878787875,      # (1e6/88) * 3/9
    "gamma_up_a_step": 185185.18518518517,    # (1e6/3) * 5/9
    "gamma_down_a_step": 148148.14814814815,  # (1e6/3) * 4/9
    "gamma_aa_step": 111111.11111111111,      # (1e6/3) * 3/9
    "omega4_cont": 42202.06131322289,         # omega_s * 0.155 / 0.18
    "table_rate_cont": 4.900884539600078,     # 1e-4 * omega_s_cont
    # 2 pi / sqrt(omega_s^2 + omega_c^2)
    "t2pi_cont": 0.0001278955924593775,
    "t2pi_step": 0.00011777133443715585,
    # renormalized geometric distribution on 5 levels
    "thermal_n_dim5_011": 0.10995221157834013,
    "thermal_n_dim5_008": 0.07998884930003222,
    # effective rates at the continuous point (brute-force cross-checked
    # against the nullspace of the transfer matrix in test_ratemodel)
    "gamma_plus_weak": 1024.335131795992,
    "gamma_plus_broadened": 565.5331315564633,
    "gamma_plus_thermal": 191.804614217681,
    "kappa_res": 2463.054187192118,
    "gamma_inh": 24.3255556335795,
    "Gamma_uu": 9.227463895859707,
    "Gamma_T": 2.290055697485192,
    "Gamma_dd": 5.795962867570223,
    "kappa_4_eff": 1.1549084444444446,
    "gamma_minus": 37.38826750925473,
    "E_weak": 0.05951046111894068,
    "E_broadened": 0.08912196898627042,
    "E_thermal": 0.21793935305862652,
    "F_thermal": 0.8210589447567216,
}
