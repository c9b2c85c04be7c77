"""Tests for fluorescence detection and population reconstruction."""

import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from singletpump.hilbert import (
    AUX,
    DOWN,
    LEAK,
    UP,
    DensityState,
    HilbertLayout,
    ket_to_density,
    product_ket,
    singlet_ket,
    thermal_mode_density,
    triplet_ket,
)
from singletpump.measurement import (
    DetectionResult,
    outside_manifold_probability,
    reconstruct_populations,
    simulate_detection,
    simulate_detection_at_phase,
    spin_populations,
)

LAYOUT = HilbertLayout(ion_levels=4, mode_dims=(3,))


# ---------------------------------------------------------------------------
# Oracles: everything below is re-derived from scratch, sharing no code with
# the measurement module (full-space expm rotations, reshape-based counting).
# ---------------------------------------------------------------------------

def oracle_rotation(layout, theta, phase):
    """Full-space readout rotation built from its generator via expm."""
    nl = layout.ion_levels
    h = np.zeros((nl, nl), dtype=np.complex128)
    h[DOWN, UP] = np.exp(-1j * phase)
    h[UP, DOWN] = np.exp(1j * phase)
    u1 = expm(-0.5j * theta * h)
    mode_eye = np.eye(int(np.prod(layout.mode_dims)))
    return np.kron(np.kron(u1, u1), mode_eye)


def oracle_bright_probs(rho_full, layout):
    """(p2, p1, p0) by reshaping the full diagonal onto tensor axes."""
    diag = np.diag(rho_full).real.reshape(layout.dims)
    probs = [0.0, 0.0, 0.0]
    nl = layout.ion_levels
    for i in range(nl):
        for j in range(nl):
            probs[int(i == DOWN) + int(j == DOWN)] += float(diag[i, j].sum())
    return probs[2], probs[1], probs[0]


def random_density(rng, dim):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def qubit_manifold_indices(layout):
    idx = []
    for levels in itertools.product((DOWN, UP), repeat=2):
        for fock in itertools.product(*(range(d) for d in layout.mode_dims)):
            idx.append(layout.index(levels, fock))
    return np.array(sorted(idx))


def random_qubit_manifold_density(rng, layout):
    """Random full-rank state of (two-ion qubit manifold) x (modes)."""
    idx = qubit_manifold_indices(layout)
    rho = np.zeros((layout.total_dim, layout.total_dim), dtype=np.complex128)
    rho[np.ix_(idx, idx)] = random_density(rng, idx.size)
    return rho


def detect_all(rho, layout):
    return tuple(
        simulate_detection(rho, pulse, layout)
        for pulse in ("none", "pi", "pi_half_phase_averaged")
    )


# ---------------------------------------------------------------------------
# Direct spin populations
# ---------------------------------------------------------------------------

class TestSpinPopulations:
    def test_singlet(self):
        pops = spin_populations(ket_to_density(singlet_ket(LAYOUT)), LAYOUT)
        assert pops.P_S == pytest.approx(1.0, abs=1e-14)
        assert pops.P_T == pytest.approx(0.0, abs=1e-14)
        assert pops.P_uu == pops.P_dd == 0.0
        assert pops.P_a_manifold == pytest.approx(0.0, abs=1e-14)
        assert pops.P_leak == pytest.approx(0.0, abs=1e-14)

    def test_triplet(self):
        pops = spin_populations(ket_to_density(triplet_ket(LAYOUT)), LAYOUT)
        assert pops.P_T == pytest.approx(1.0, abs=1e-14)
        assert pops.P_S == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize(
        "levels, field",
        [((UP, UP), "P_uu"), ((DOWN, DOWN), "P_dd")],
    )
    def test_stretched_states(self, levels, field):
        pops = spin_populations(
            ket_to_density(product_ket(LAYOUT, levels)), LAYOUT
        )
        assert getattr(pops, field) == 1.0
        assert pops.total() == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize(
        "levels, expect_a, expect_leak",
        [
            ((AUX, DOWN), 1.0, 0.0),
            ((AUX, AUX), 1.0, 0.0),
            ((LEAK, DOWN), 0.0, 1.0),
            ((AUX, LEAK), 0.0, 1.0),
        ],
    )
    def test_outside_buckets(self, levels, expect_a, expect_leak):
        pops = spin_populations(
            ket_to_density(product_ket(LAYOUT, levels)), LAYOUT
        )
        assert pops.P_a_manifold == pytest.approx(expect_a, abs=1e-14)
        assert pops.P_leak == pytest.approx(expect_leak, abs=1e-14)

    def test_buckets_partition_unity(self, rng):
        for _ in range(20):
            rho = random_density(rng, LAYOUT.total_dim)
            pops = spin_populations(rho, LAYOUT)
            assert pops.total() == pytest.approx(1.0, abs=1e-12)
            for p in (pops.P_S, pops.P_T, pops.P_uu, pops.P_dd,
                      pops.P_a_manifold, pops.P_leak):
                assert p >= -1e-12

    def test_singlet_triplet_sum_is_antialigned_population(self, rng):
        # P_S + P_T must equal rho_ud,ud + rho_du,du with no rounding slack:
        # the cross term enters the two with opposite signs.
        rho = random_density(rng, LAYOUT.total_dim)
        pops = spin_populations(rho, LAYOUT)
        diag = np.diag(rho).real.reshape(LAYOUT.dims)
        direct = float(diag[UP, DOWN].sum() + diag[DOWN, UP].sum())
        assert pops.P_S + pops.P_T == pytest.approx(direct, abs=1e-13)

    def test_density_state_input_needs_no_layout(self):
        state = DensityState(
            data=ket_to_density(singlet_ket(LAYOUT)), layout=LAYOUT, time=0.0
        )
        assert spin_populations(state).P_S == pytest.approx(1.0, abs=1e-14)

    def test_bare_array_requires_layout(self):
        rho = ket_to_density(singlet_ket(LAYOUT))
        with pytest.raises(ValueError, match="layout"):
            spin_populations(rho)

    def test_mode_content_is_traced_out(self, rng):
        spin = random_density(rng, LAYOUT.ion_levels ** 2)
        hot = np.kron(spin, thermal_mode_density(LAYOUT.mode_dims[0], 0.7))
        cold = np.kron(spin, thermal_mode_density(LAYOUT.mode_dims[0], 0.0))
        a, b = spin_populations(hot, LAYOUT), spin_populations(cold, LAYOUT)
        assert a.P_S == pytest.approx(b.P_S, abs=1e-14)
        assert a.P_leak == pytest.approx(b.P_leak, abs=1e-14)


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

class TestDetection:
    def test_fixed_phase_matches_full_space_oracle(self, rng):
        for theta, phase in [(0.3, 0.0), (np.pi / 2, 1.1), (np.pi, 2.7),
                             (2.4, 4.0)]:
            rho = random_density(rng, LAYOUT.total_dim)
            u = oracle_rotation(LAYOUT, theta, phase)
            expect = oracle_bright_probs(u @ rho @ u.conj().T, LAYOUT)
            got = simulate_detection_at_phase(rho, theta, phase, LAYOUT)
            assert np.allclose(got, expect, atol=1e-12)

    def test_no_pulse_counts_down_ions(self):
        cases = [
            ((DOWN, DOWN), (1.0, 0.0, 0.0)),
            ((DOWN, UP), (0.0, 1.0, 0.0)),
            ((UP, UP), (0.0, 0.0, 1.0)),
            ((AUX, DOWN), (0.0, 1.0, 0.0)),
            ((AUX, AUX), (0.0, 0.0, 1.0)),
        ]
        for levels, (p2, p1, p0) in cases:
            d = simulate_detection(
                ket_to_density(product_ket(LAYOUT, levels)), "none", LAYOUT
            )
            assert (d.p2, d.p1, d.p0) == pytest.approx((p2, p1, p0), abs=1e-14)

    def test_pi_pulse_swaps_stretched_states(self):
        uu = ket_to_density(product_ket(LAYOUT, (UP, UP)))
        d = simulate_detection(uu, "pi", LAYOUT)
        assert d.p2 == pytest.approx(1.0, abs=1e-14)
        dd = ket_to_density(product_ket(LAYOUT, (DOWN, DOWN)))
        d = simulate_detection(dd, "pi", LAYOUT)
        assert d.p0 == pytest.approx(1.0, abs=1e-14)

    def test_pi_pulse_acts_trivially_outside_qubit(self):
        aa = ket_to_density(product_ket(LAYOUT, (AUX, AUX)))
        for pulse in ("none", "pi"):
            d = simulate_detection(aa, pulse, LAYOUT)
            assert d.p0 == pytest.approx(1.0, abs=1e-14)

    def test_antialigned_states_keep_one_bright_under_pi(self):
        for ket in (singlet_ket(LAYOUT), triplet_ket(LAYOUT)):
            for pulse in ("none", "pi"):
                d = simulate_detection(ket_to_density(ket), pulse, LAYOUT)
                assert d.p1 == pytest.approx(1.0, abs=1e-13)

    def test_phase_average_matches_dense_quadrature(self, rng):
        # Probabilities are degree-<=4 trig polynomials in the pulse phase,
        # so the 8-point average already equals any finer uniform rule.
        for _ in range(5):
            rho = random_density(rng, LAYOUT.total_dim)
            d = simulate_detection(rho, "pi_half_phase_averaged", LAYOUT)
            acc = np.zeros(3)
            for k in range(64):
                acc += simulate_detection_at_phase(
                    rho, np.pi / 2, 2 * np.pi * k / 64, LAYOUT
                )
            acc /= 64
            assert np.allclose((d.p2, d.p1, d.p0), acc, atol=1e-10)

    def test_results_validate_for_physical_states(self, rng):
        for _ in range(10):
            rho = random_density(rng, LAYOUT.total_dim)
            for d in detect_all(rho, LAYOUT):
                d.validate()

    def test_unknown_pulse_rejected(self):
        rho = ket_to_density(product_ket(LAYOUT, (DOWN, DOWN)))
        with pytest.raises(ValueError, match="unknown pulse"):
            simulate_detection(rho, "pi_half", LAYOUT)

    def test_density_state_input(self):
        state = DensityState(
            data=ket_to_density(product_ket(LAYOUT, (DOWN, DOWN))),
            layout=LAYOUT,
            time=0.0,
        )
        assert simulate_detection(state, "none").p2 == pytest.approx(1.0)

    def test_validate_rejects_bad_distributions(self):
        with pytest.raises(ValueError, match="outside"):
            DetectionResult(p2=1.3, p1=-0.3, p0=0.0, pulse="none").validate()
        with pytest.raises(ValueError, match="sum"):
            DetectionResult(p2=0.5, p1=0.4, p0=0.0, pulse="none").validate()

    def test_constructor_rejects_unknown_pulse(self):
        with pytest.raises(ValueError, match="unknown pulse"):
            DetectionResult(p2=1.0, p1=0.0, p0=0.0, pulse="3pi/2")


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

class TestReconstruction:
    def test_exact_on_qubit_manifold_states(self, rng):
        worst = 0.0
        for _ in range(1000):
            rho = random_qubit_manifold_density(rng, LAYOUT)
            direct = spin_populations(rho, LAYOUT)
            rec = reconstruct_populations(*detect_all(rho, LAYOUT))
            assert not rec.out_of_range
            worst = max(
                worst,
                abs(rec.P_S - direct.P_S),
                abs(rec.P_T - direct.P_T),
                abs(rec.P_uu - direct.P_uu),
                abs(rec.P_dd - direct.P_dd),
            )
        assert worst <= 1e-9

    def test_exact_on_correlated_spin_mode_states(self, rng):
        # Entanglement between spin and mode must not bias the readout:
        # draw states with spin-mode correlations, still inside the qubit
        # manifold on the ion side.
        for _ in range(50):
            rho = random_qubit_manifold_density(rng, LAYOUT)
            direct = spin_populations(rho, LAYOUT)
            rec = reconstruct_populations(*detect_all(rho, LAYOUT))
            assert rec.P_S == pytest.approx(direct.P_S, abs=1e-12)
            assert rec.P_T == pytest.approx(direct.P_T, abs=1e-12)

    def test_named_states_reconstruct(self):
        cases = [
            (singlet_ket(LAYOUT), "P_S"),
            (triplet_ket(LAYOUT), "P_T"),
            (product_ket(LAYOUT, (UP, UP)), "P_uu"),
            (product_ket(LAYOUT, (DOWN, DOWN)), "P_dd"),
        ]
        for ket, field in cases:
            rec = reconstruct_populations(
                *detect_all(ket_to_density(ket), LAYOUT)
            )
            assert getattr(rec, field) == pytest.approx(1.0, abs=1e-13)
            assert not rec.out_of_range

    def test_out_of_range_flag_raised_not_clipped(self):
        d_none = DetectionResult(p2=0.0, p1=1.0, p0=0.0, pulse="none")
        d_pi = DetectionResult(p2=0.0, p1=1.0, p0=0.0, pulse="pi")
        d_ph = DetectionResult(
            p2=0.05, p1=0.05, p0=0.9, pulse="pi_half_phase_averaged"
        )
        rec = reconstruct_populations(d_none, d_pi, d_ph)
        assert rec.out_of_range
        assert rec.P_T > 1.0
        assert rec.P_S < 0.0
        # values are reported as-is so the caller can see the failure size
        assert rec.P_S + rec.P_T == pytest.approx(1.0, abs=1e-14)

    def test_pulse_order_enforced(self):
        rho = ket_to_density(singlet_ket(LAYOUT))
        d_none, d_pi, d_ph = detect_all(rho, LAYOUT)
        with pytest.raises(ValueError, match="pulse='none'"):
            reconstruct_populations(d_pi, d_pi, d_ph)
        with pytest.raises(ValueError, match="pulse='pi'"):
            reconstruct_populations(d_none, d_ph, d_ph)
        with pytest.raises(ValueError, match="pi_half"):
            reconstruct_populations(d_none, d_pi, d_none)


# ---------------------------------------------------------------------------
# Out-of-manifold witness
# ---------------------------------------------------------------------------

class TestOutsideManifold:
    def test_zero_inside_qubit_manifold(self, rng):
        for _ in range(25):
            rho = random_qubit_manifold_density(rng, LAYOUT)
            d_none, d_pi, _ = detect_all(rho, LAYOUT)
            assert outside_manifold_probability(d_none, d_pi) == pytest.approx(
                0.0, abs=1e-12
            )

    @pytest.mark.parametrize(
        "levels, expected",
        [
            ((AUX, DOWN), 1.0),
            ((DOWN, LEAK), 1.0),
            ((AUX, AUX), 2.0),
            ((AUX, LEAK), 2.0),
        ],
    )
    def test_counts_out_of_manifold_ions(self, levels, expected):
        rho = ket_to_density(product_ket(LAYOUT, levels))
        d_none, d_pi, _ = detect_all(rho, LAYOUT)
        assert outside_manifold_probability(d_none, d_pi) == pytest.approx(
            expected, abs=1e-14
        )

    def test_linear_in_mixtures(self, rng):
        clean = random_qubit_manifold_density(rng, LAYOUT)
        dirty = ket_to_density(product_ket(LAYOUT, (AUX, DOWN)))
        eps = 0.03
        rho = (1 - eps) * clean + eps * dirty
        d_none, d_pi, _ = detect_all(rho, LAYOUT)
        assert outside_manifold_probability(d_none, d_pi) == pytest.approx(
            eps, abs=1e-12
        )

    def test_pulse_order_enforced(self):
        rho = ket_to_density(singlet_ket(LAYOUT))
        d_none, d_pi, _ = detect_all(rho, LAYOUT)
        with pytest.raises(ValueError, match="pulse='pi'"):
            outside_manifold_probability(d_none, d_none)
