"""Spin-state readout and population reconstruction.

Detection is fluorescence-style: an ion is *bright* exactly when it sits in
|down>, so a two-ion readout yields the probabilities (p2, p1, p0) of seeing
two, one, or zero bright ions.  Three readout configurations are modeled:

- ``none``: direct readout;
- ``pi``: an ideal, instantaneous pi rotation on the |down> <-> |up|
  subspace of both ions (identity on |a> and the leak level), then readout;
- ``pi_half_phase_averaged``: a pi/2 rotation whose phase is uniformly
  random shot to shot.  Every readout probability is a trigonometric
  polynomial of degree <= 4 in the pulse phase, so averaging over 8 equally
  spaced phases reproduces the continuous average exactly.

From the three detection results the four qubit-manifold populations
(singlet, triplet, both-up, both-down) are reconstructed by linear algebra
that is exact whenever neither ion occupies |a> or the leak level; the
reconstruction flags out-of-range results instead of clipping them, since
they signal exactly that assumption failing.  All functions operate on the
mode-traced two-ion spin density matrix, so they are cheap regardless of
the bosonic truncation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from singletpump.hilbert import (
    AUX,
    DOWN,
    UP,
    DensityState,
    HilbertLayout,
    partial_trace_modes,
)

__all__ = [
    "SpinPopulations",
    "DetectionResult",
    "ReconstructedPopulations",
    "spin_populations",
    "simulate_detection",
    "simulate_detection_at_phase",
    "reconstruct_populations",
    "outside_manifold_probability",
]

PULSES = ("none", "pi", "pi_half_phase_averaged")


@dataclass(frozen=True)
class SpinPopulations:
    """Directly evaluated spin populations (sums to 1 for a unit-trace state)."""

    P_S: float
    P_T: float
    P_uu: float
    P_dd: float
    P_a_manifold: float
    P_leak: float

    def total(self) -> float:
        return (
            self.P_S + self.P_T + self.P_uu + self.P_dd
            + self.P_a_manifold + self.P_leak
        )


@dataclass(frozen=True)
class DetectionResult:
    """Bright-ion count distribution for one readout configuration."""

    p2: float
    p1: float
    p0: float
    pulse: str

    def __post_init__(self):
        if self.pulse not in PULSES:
            raise ValueError(f"unknown pulse {self.pulse!r}; valid: {PULSES}")

    def validate(self, tol: float = 1e-10) -> None:
        for name, p in (("p2", self.p2), ("p1", self.p1), ("p0", self.p0)):
            if not -tol <= p <= 1.0 + tol:
                raise ValueError(f"{name}={p} outside [0,1]")
        if abs(self.p2 + self.p1 + self.p0 - 1.0) > tol:
            raise ValueError("detection probabilities do not sum to 1")


@dataclass(frozen=True)
class ReconstructedPopulations:
    """Qubit-manifold populations inferred from three detection results.

    ``out_of_range`` is set when any inferred population leaves [0,1]
    beyond numerical noise, which signals non-negligible population outside
    the |down>/|up> manifold (the reconstruction identities assume none).
    """

    P_S: float
    P_T: float
    P_uu: float
    P_dd: float
    out_of_range: bool


# ---------------------------------------------------------------------------
# Reduced spin density and direct populations
# ---------------------------------------------------------------------------

def _spin_density(rho, layout: HilbertLayout | None = None) -> tuple[np.ndarray, int]:
    """Mode-traced two-ion density matrix and the per-ion level count."""
    if isinstance(rho, DensityState):
        spin = partial_trace_modes(rho.data, rho.layout)
        return spin, rho.layout.ion_levels
    if layout is None:
        raise ValueError("layout required when rho is a bare array")
    return partial_trace_modes(np.asarray(rho), layout), layout.ion_levels


def spin_populations(rho, layout: HilbertLayout | None = None) -> SpinPopulations:
    """Populations of the singlet/triplet/up-up/down-down/|a>/leak buckets.

    The singlet and triplet populations are the usual coherence-sensitive
    combinations P_{S,T} = (rho_ud,ud + rho_du,du)/2 -/+ Re(rho_ud,du).
    ``P_a_manifold`` is the probability that at least one ion occupies |a>
    while none occupies the leak level; ``P_leak`` is the probability that
    at least one ion has left {down, up, a}.  The six buckets partition
    unity exactly.
    """
    spin, nl = _spin_density(rho, layout)
    ud = DOWN * nl + UP      # |down,up| composite index, ion1 major
    du = UP * nl + DOWN
    uu = UP * nl + UP
    dd = DOWN * nl + DOWN
    half_sum = 0.5 * (spin[ud, ud].real + spin[du, du].real)
    re_cross = spin[ud, du].real
    diag = spin.diagonal().real

    qubit = (DOWN, UP)
    in_qubit = in_amanifold = 0.0
    for i in range(nl):
        for j in range(nl):
            p = diag[i * nl + j]
            if i in qubit and j in qubit:
                in_qubit += p
            if i <= AUX and j <= AUX:
                in_amanifold += p
    total = float(diag.sum())
    return SpinPopulations(
        P_S=float(half_sum - re_cross),
        P_T=float(half_sum + re_cross),
        P_uu=float(spin[uu, uu].real),
        P_dd=float(spin[dd, dd].real),
        P_a_manifold=float(in_amanifold - in_qubit),
        P_leak=float(total - in_amanifold),
    )


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bright_count_masks(nl: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks over the two-ion basis with 2, 1, 0 ions in |down>."""
    counts = np.zeros(nl * nl, dtype=int)
    for i in range(nl):
        for j in range(nl):
            counts[i * nl + j] = int(i == DOWN) + int(j == DOWN)
    return counts == 2, counts == 1, counts == 0


def _rotation(nl: int, theta: float, phase: float) -> np.ndarray:
    """Ideal resonant rotation on {|down>, |up>}, identity elsewhere."""
    u = np.eye(nl, dtype=np.complex128)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    u[DOWN, DOWN] = c
    u[UP, UP] = c
    u[DOWN, UP] = -1j * np.exp(-1j * phase) * s
    u[UP, DOWN] = -1j * np.exp(1j * phase) * s
    return u


def _detect(spin: np.ndarray, nl: int) -> tuple[float, float, float]:
    diag = spin.diagonal().real
    m2, m1, m0 = _bright_count_masks(nl)
    return float(diag[m2].sum()), float(diag[m1].sum()), float(diag[m0].sum())


def simulate_detection_at_phase(
    rho, theta: float, phase: float, layout: HilbertLayout | None = None
) -> tuple[float, float, float]:
    """(p2, p1, p0) after a single rotation of angle theta and fixed phase.

    Building block for the phase-averaged readout; also the brute-force
    oracle hook for validating the analytic average.
    """
    spin, nl = _spin_density(rho, layout)
    u1 = _rotation(nl, theta, phase)
    u = np.kron(u1, u1)
    return _detect(u @ spin @ u.conj().T, nl)


def simulate_detection(
    rho, pulse: str = "none", layout: HilbertLayout | None = None
) -> DetectionResult:
    """Readout distribution for one of the three analysis configurations."""
    if pulse not in PULSES:
        raise ValueError(f"unknown pulse {pulse!r}; valid: {PULSES}")
    spin, nl = _spin_density(rho, layout)
    if pulse == "none":
        p2, p1, p0 = _detect(spin, nl)
    elif pulse == "pi":
        u1 = _rotation(nl, np.pi, 0.0)
        u = np.kron(u1, u1)
        p2, p1, p0 = _detect(u @ spin @ u.conj().T, nl)
    else:
        # Exact uniform-phase average: all phase harmonics of the readout
        # probabilities have order <= 4, so an 8-point rule is exact.
        acc = np.zeros(3)
        n_phases = 8
        for j in range(n_phases):
            phase = 2.0 * np.pi * j / n_phases
            u1 = _rotation(nl, np.pi / 2.0, phase)
            u = np.kron(u1, u1)
            acc += _detect(u @ spin @ u.conj().T, nl)
        p2, p1, p0 = acc / n_phases
    return DetectionResult(p2=float(p2), p1=float(p1), p0=float(p0), pulse=pulse)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

def _expect_pulses(d_none: DetectionResult, d_pi: DetectionResult,
                   d_pihalf: DetectionResult | None = None) -> None:
    if d_none.pulse != "none":
        raise ValueError("first detection result must use pulse='none'")
    if d_pi.pulse != "pi":
        raise ValueError("second detection result must use pulse='pi'")
    if d_pihalf is not None and d_pihalf.pulse != "pi_half_phase_averaged":
        raise ValueError(
            "third detection result must use pulse='pi_half_phase_averaged'"
        )


def reconstruct_populations(
    d_none: DetectionResult,
    d_pi: DetectionResult,
    d_pihalf: DetectionResult,
    *,
    range_tol: float = 1e-6,
) -> ReconstructedPopulations:
    """Infer (P_S, P_T, P_uu, P_dd) from the three readout distributions.

    Exact when no population sits outside the |down>/|up> manifold:
    the one-bright-ion probabilities fix rho_ud,ud + rho_du,du, the pi-pulse
    readout fixes the stretched-state populations, and the phase-averaged
    pi/2 readout isolates Re(rho_ud,du).
    """
    _expect_pulses(d_none, d_pi, d_pihalf)
    coh_sum = d_none.p1 - (d_pi.p0 - d_none.p2)
    re_cross = (
        -0.5
        + 2.0 * d_pihalf.p0
        + 0.5 * (d_none.p2 - d_none.p0)
        + 0.5 * (d_pi.p2 - d_pi.p0)
    )
    p_s = 0.5 * coh_sum - re_cross
    p_t = 0.5 * coh_sum + re_cross
    p_uu = d_pi.p2
    p_dd = d_none.p2
    out = any(
        not -range_tol <= p <= 1.0 + range_tol for p in (p_s, p_t, p_uu, p_dd)
    )
    return ReconstructedPopulations(
        P_S=float(p_s),
        P_T=float(p_t),
        P_uu=float(p_uu),
        P_dd=float(p_dd),
        out_of_range=bool(out),
    )


def outside_manifold_probability(
    d_none: DetectionResult, d_pi: DetectionResult
) -> float:
    """Probability of at least one ion outside {|down>, |up>}.

    Evaluates p0 + p0_pi - (p2 + p2_pi), which equals the expected number
    of out-of-manifold ions; it coincides with the at-least-one probability
    whenever double occupation of the outside levels is negligible.
    """
    _expect_pulses(d_none, d_pi)
    return float(d_none.p0 + d_pi.p0 - (d_none.p2 + d_pi.p2))
