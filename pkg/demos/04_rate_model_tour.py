"""
The effective rate model, rate by rate
======================================

Everything the coarse-grained description needs is derived from the same
SchemeParams the master equation uses: one preparation rate into the
singlet, a reshuffling rate between the non-singlet ground states, and a
handful of loss rates out of the singlet.  The steady-state infidelity is
then a closed-form ratio of rates -- cheap enough to scan analytically.
"""

from singletpump.config import loads_config, resolve_preset
from singletpump.ratemodel import (
    compute_effective_rates,
    integrate_rate_equations,
    rate_matrix,
    steady_state_closed_form,
)

params = loads_config(resolve_preset("continuous_fig2")).params
rates = compute_effective_rates(params)

print("preparation and reshuffling:")
print(f"  gamma_plus   = {rates.gamma_plus:10.3f} 1/s")
print(f"  kappa_res    = {rates.kappa_res:10.3f} 1/s")
print("losses out of the singlet:")
print(f"  gamma_inh    = {rates.gamma_inh:10.4f} 1/s  (carrier-induced)")
print(f"  Gamma_uu/T/dd= {rates.Gamma_uu:.4f} / {rates.Gamma_T:.4f} / "
      f"{rates.Gamma_dd:.4f} 1/s  (spontaneous)")
print(f"  kappa_r      = {rates.kappa_r:10.4f} 1/s  (imbalance, r = {params.r})")
print(f"  kappa_4      = {rates.kappa_4:10.4f} 1/s  (bystander mode)")
print(f"  Gamma_up_leak= {rates.Gamma_up_leak:10.4f} 1/s")
print("composite loss rates:")
print(f"  gamma-_uu / T / dd = {rates.gamma_minus_uu:.4f} / "
      f"{rates.gamma_minus_T:.4f} / {rates.gamma_minus_dd:.4f} 1/s")

# The preparation rate has three defensible derivations that differ in how
# the repump broadening and the thermal phonon occupation enter; all three
# are implemented.  Only the thermally corrected one lands on the steady
# error the full simulation gives (see the acceptance suite), so it is the
# default.
print("\nvariant comparison:")
for variant in ("weak", "broadened", "thermal"):
    r = compute_effective_rates(params, variant=variant)
    fidelity, error_sum = steady_state_closed_form(r)
    print(f"  {variant:9s}: gamma_plus = {r.gamma_plus:9.2f} 1/s   "
          f"F = {fidelity:.4f}   E = {error_sum:.4f}")

# E is literally a sum of loss/preparation ratios; F = 1/(1+E).
fidelity, error_sum = steady_state_closed_form(rates)
by_hand = (
    (rates.gamma_minus_uu + rates.gamma_minus_T + rates.gamma_minus_dd)
    / rates.gamma_plus
    + (rates.gamma_minus_uu + 2 * rates.gamma_minus_T + 3 * rates.gamma_minus_dd)
    / rates.kappa_res
)
print(f"\nE recomputed by hand: {by_hand:.6f} (closed form {error_sum:.6f})")

# The same rates integrate to a full population trajectory.  Columns of the
# generator sum to zero, so probability only moves around (or parks in the
# absorbing leak state when it is included).
m = rate_matrix(rates)
print("\nrate-matrix column sums:", [f"{c:.1e}" for c in m.sum(axis=0)])

series = integrate_rate_equations(rates, t_span=(0.0, 0.012))
print(f"P_S after 12 ms (leak on) : {series.final.P_S:.4f}   "
      f"leaked: {series.final.P_leak:.4f}")
series = integrate_rate_equations(rates, t_span=(0.0, 2.0), include_leak=False)
print(f"P_S after 2 s   (no leak) : {series.final.P_S:.6f}   "
      f"closed form: {fidelity:.6f}")
