import numpy as np
import pytest

from braggsim import gridprop, ladder
from braggsim.errors import ParameterError
from braggsim.ladder import (LadderState, default_j_window, free_evolve,
                             integrate_ladder, ladder_hamiltonian, ladder_state,
                             propagate_batch, propagate_sequence, truncation_check)
from braggsim.pulses import FreeEvolution, Pulse, PulseSequence

TWO_PI = 2 * np.pi


@pytest.fixture(scope="module")
def mirror(rb87):
    return Pulse.on_resonance(rb87, 3, 90e-6, rabi_avg=TWO_PI * 23e3)


class TestHamiltonian:
    def test_zero_rabi_diagonal(self, rb87):
        pulse = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=0.0)
        H = ladder_hamiltonian(0.2, pulse, rb87, 1.0, (-3, 5))
        j = np.arange(-3, 6)
        assert np.allclose(H, np.diag((0.2 + j) ** 2))

    def test_hermitian_random_arguments(self, rb87):
        rng = np.random.default_rng(3)
        for _ in range(10):
            pulse = Pulse.on_resonance(rb87, 3, 90e-6, rabi_avg=TWO_PI * 20e3,
                                       phase=rng.uniform(0, TWO_PI))
            H = ladder_hamiltonian(rng.uniform(-1, 1), pulse, rb87,
                                   rng.uniform(0, 8), (-5, 8))
            assert np.allclose(H, H.conj().T, atol=1e-15)

    def test_coupling_value_and_phase(self, rb87):
        W = 1.1 * rb87.omega_k
        phi = 0.63
        pulse = Pulse.on_resonance(rb87, 1, 80e-6, rabi_peak=W, phase=phi,
                                   envelope_kind="rectangular")
        t = 2.31
        H = ladder_hamiltonian(0.0, pulse, rb87, t, (-2, 3))
        dw = pulse.delta_omega / rb87.omega_k
        expected = 0.5 * (W / rb87.omega_k) * np.exp(-1j * (dw * t - phi))
        assert H[1, 0] == pytest.approx(expected, rel=1e-12)
        assert H[0, 1] == pytest.approx(np.conj(expected), rel=1e-12)

    def test_two_level_reduction_matches_grid(self, rb87):
        # deep-Bragg n=1: ladder vs grid within 1e-3 through a pi/2 flop
        tau = 250e-6
        pulse = Pulse.on_resonance(rb87, 1, tau, rabi_avg=(np.pi / 2) / tau)
        lout = integrate_ladder(ladder_state(0, 0.0, order=1), pulse, rb87)
        gout = gridprop.propagate_pulse(gridprop.plane_wave(gridprop.Grid(), 0, 0.0),
                                        pulse, rb87)
        gpops = gridprop.momentum_populations(gout)
        for j in (0, 1):
            assert lout.population(j) == pytest.approx(gpops[j], abs=1e-3)


class TestIntegrate:
    def test_zero_rabi_kinetic_phases(self, rb87):
        pulse = Pulse.on_resonance(rb87, 2, 70e-6, rabi_peak=0.0)
        st = ladder_state(1, 0.2, order=2)
        st.amps[0] = 0.6
        st.amps[1 - st.j_min] = 0.8
        out = integrate_ladder(st, pulse, rb87)
        tau_t = rb87.units().to_dimensionless(70e-6, "time")
        ref = st.amps * np.exp(-1j * (st.q + st.j) ** 2 * tau_t)
        assert np.max(np.abs(out.amps - ref)) < 1e-12

    def test_norm_conservation(self, rb87, mirror):
        out = integrate_ladder(ladder_state(0, 0.0, order=3), mirror, rb87)
        assert abs(out.norm - 1.0) < 1e-10

    def test_matches_grid_on_mirror(self, rb87, mirror):
        lout = integrate_ladder(ladder_state(0, 0.05, order=3), mirror, rb87)
        gout = gridprop.propagate_pulse(
            gridprop.plane_wave(gridprop.Grid(), 0, 0.05), mirror, rb87)
        gpops = gridprop.momentum_populations(gout)
        for j in range(-2, 8):
            assert lout.population(j) == pytest.approx(gpops.get(j, 0.0), abs=1e-4)

    def test_interaction_and_bare_frames_agree(self, rb87):
        pulse = Pulse.on_resonance(rb87, 1, 40e-6, rabi_avg=TWO_PI * 10e3)
        st = ladder_state(0, 0.1, order=1)
        a = integrate_ladder(st, pulse, rb87, frame="interaction")
        b = integrate_ladder(st, pulse, rb87, frame="bare", rtol=1e-11, atol=1e-13)
        assert np.max(np.abs(a.amps - b.amps)) < 1e-8

    def test_phase_gauge_invariance(self, rb87):
        base = Pulse.on_resonance(rb87, 3, 60e-6, rabi_avg=TWO_PI * 20e3)
        shifted = Pulse.on_resonance(rb87, 3, 60e-6, rabi_avg=TWO_PI * 20e3,
                                     phase=1.234567)
        a = integrate_ladder(ladder_state(0, 0.0, order=3), base, rb87,
                             rtol=1e-13, atol=1e-15)
        b = integrate_ladder(ladder_state(0, 0.0, order=3), shifted, rb87,
                             rtol=1e-13, atol=1e-15)
        diff = max(abs(a.population(j) - b.population(j))
                   for j in range(a.j_min, a.j_max + 1))
        assert diff < 1e-12

    def test_batch_equals_single(self, rb87, mirror):
        qs = np.array([-0.2, 0.0, 0.15])
        j_min, j_max = default_j_window(3)
        dim = j_max - j_min + 1
        c0 = np.zeros((dim, 3, 2), dtype=complex)
        c0[0 - j_min, :, 0] = 1.0
        c0[1 - j_min, :, 1] = 1.0
        batch = propagate_batch(qs, c0, mirror, rb87)
        for iq, q in enumerate(qs):
            for col, cls in enumerate((0, 1)):
                single = integrate_ladder(ladder_state(cls, q, order=3), mirror, rb87)
                assert np.max(np.abs(batch[:, iq, col] - single.amps)) < 5e-9

    def test_unknown_frame(self, rb87, mirror):
        with pytest.raises(ParameterError):
            integrate_ladder(ladder_state(0, 0.0, order=3), mirror, rb87,
                             frame="rotating")


class TestSequenceAndFree:
    def test_free_evolution_phases(self, rb87):
        st = ladder_state(2, 0.3, order=3)
        out = free_evolve(st, 1e-3, rb87)
        T_t = rb87.units().to_dimensionless(1e-3, "time")
        assert out.amps[2 - st.j_min] == pytest.approx(
            np.exp(-1j * (0.3 + 2) ** 2 * T_t), rel=1e-12)

    def test_sequence_durations_accumulate(self, rb87):
        p = Pulse.on_resonance(rb87, 1, 50e-6, rabi_avg=TWO_PI * 5e3)
        seq = PulseSequence((p, FreeEvolution(2e-4), p))
        st = propagate_sequence(ladder_state(0, 0.0, order=1), seq, rb87)
        tau_t = rb87.units().to_dimensionless(50e-6 + 2e-4 + 50e-6, "time")
        assert st.time == pytest.approx(tau_t, rel=1e-12)


class TestTruncation:
    def test_zero_rabi_no_change(self, rb87):
        pulse = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=0.0)
        rep = truncation_check(ladder_state(0, 0.0, order=3), pulse, rb87)
        assert rep.passes and rep.max_population_change == 0.0

    def test_acceptance_window_passes(self, rb87, mirror):
        st = ladder_state(0, 0.0, j_window=(-6, 9))
        rep = truncation_check(st, mirror, rb87)
        assert rep.passes

    def test_extreme_rabi_flagged(self, rb87):
        pulse = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=TWO_PI * 500e3)
        rep = truncation_check(ladder_state(0, 0.0, order=3), pulse, rb87,
                               rtol=1e-8, atol=1e-10)
        assert not rep.passes
