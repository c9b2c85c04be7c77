"""
Building blocks: layouts, drive operators, and the dark singlet
===============================================================

Walks through the low-level objects the simulator is made of: the
tensor-product layout for two ions and their motional modes, the
sideband/carrier drive Hamiltonians, and the property the whole pumping
scheme rests on -- the two-ion spin singlet is a *dark state* of the
sideband drive, while every other spin state keeps getting excited.
"""

import numpy as np

from singletpump.hilbert import (
    AUX,
    DOWN,
    UP,
    build_layout,
    imbalanced_singlet_ket,
    ket_to_density,
    product_ket,
    singlet_ket,
    triplet_ket,
)
from singletpump.measurement import (
    reconstruct_populations,
    simulate_detection,
    spin_populations,
)
from singletpump.model import SchemeParams, build_sideband_hamiltonian

# ---------------------------------------------------------------------------
# A layout is ion1 (x) ion2 (x) motional modes.  Three ion levels are enough
# here: qubit |down>, |up>, and the repump intermediary |aux>.  One pumping
# mode truncated at 5 Fock states gives a 3*3*5 = 45 dimensional space.
layout = build_layout(ion_levels=3, mode_dims=(5,))
print("layout dims:", layout.dims, "-> total dimension", layout.total_dim)

# Physical parameters of the reference continuous operating point.  Only the
# sideband rate matters for this demo; the rest keep their defaults.
params = SchemeParams(
    omega_s=2 * np.pi * 7.8e3,
    omega_c=2 * np.pi * 543.0,
    kappa=1.0 / 203e-6,
    gamma_up_a=(5 / 9) / 88e-6,
    gamma_down_a=(4 / 9) / 88e-6,
)

h_s = build_sideband_hamiltonian(params, layout).to_dense()

# ---------------------------------------------------------------------------
# The singlet (|up,down> - |down,up>)/sqrt(2) is annihilated by the sideband
# drive at every motional occupation: the two excitation paths interfere
# destructively.  The triplet, by contrast, is driven at full strength.
for n in range(layout.mode_dims[0]):
    dark = np.linalg.norm(h_s @ singlet_ket(layout, fock=(n,)))
    bright = np.linalg.norm(h_s @ triplet_ket(layout, fock=(n,)))
    print(f"  n={n}:  |H_s S> = {dark:.2e}   |H_s T> = {bright:.3e}")

# With an imbalance r between the two ions' couplings the *balanced* singlet
# is no longer dark, but a slightly skewed superposition still is:
r, phi = 0.08, 0.4
imb = params.replace(r=r, phi=phi)
h_imb = build_sideband_hamiltonian(imb, layout).to_dense()
skewed = imbalanced_singlet_ket(layout, r, phi, fock=(0,))
print("\nimbalanced drive (r=%.2f):" % r)
print("  balanced singlet residual:", f"{np.linalg.norm(h_imb @ singlet_ket(layout)):.3e}")
print("  skewed singlet residual:  ", f"{np.linalg.norm(h_imb @ skewed):.3e}")

# ---------------------------------------------------------------------------
# Where does the pumped population go?  The sideband couples the aux-singlet
# with zero phonons to the spin-antisymmetric |up,aux>-type state with one
# phonon, and nothing else -- an exactly closed 2x2 block with eigenvalues
# +/- Omega_s (the dressed-state splitting that protects the dark state).
s_a = (
    product_ket(layout, (AUX, DOWN), fock=(0,))
    - product_ket(layout, (DOWN, AUX), fock=(0,))
) / np.sqrt(2)
a_1 = (
    product_ket(layout, (AUX, UP), fock=(1,))
    - product_ket(layout, (UP, AUX), fock=(1,))
) / np.sqrt(2)
basis = np.column_stack([s_a, a_1])
block = basis.conj().T @ h_s @ basis
print("\n2x2 dressed block / Omega_s:")
print(np.round(block.real / params.omega_s, 12))
print("eigenvalues / Omega_s:", np.linalg.eigvalsh(block) / params.omega_s)

# ---------------------------------------------------------------------------
# Detection never sees the density matrix; it sees how many ions fluoresce
# (|down> is bright).  The singlet always has exactly one bright ion:
rho_s = ket_to_density(singlet_ket(layout))
d = simulate_detection(rho_s, "none", layout)
print("\nsinglet detection: p2=%.3f  p1=%.3f  p0=%.3f" % (d.p2, d.p1, d.p0))

# One ion bright cannot by itself tell singlet from triplet.  Adding a pi
# pulse and a phase-averaged pi/2 pulse makes the four spin populations
# identifiable; reconstruct_populations inverts the three readings.
mix = 0.6 * rho_s + 0.4 * ket_to_density(triplet_ket(layout))
rec = reconstruct_populations(
    simulate_detection(mix, "none", layout),
    simulate_detection(mix, "pi", layout),
    simulate_detection(mix, "pi_half_phase_averaged", layout),
)
direct = spin_populations(mix, layout)
print("reconstructed P_S = %.6f   direct P_S = %.6f" % (rec.P_S, direct.P_S))
print("reconstructed P_T = %.6f   direct P_T = %.6f" % (rec.P_T, direct.P_T))
