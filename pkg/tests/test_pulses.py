import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from braggsim.errors import ParameterError
from braggsim.physics import HBAR
from braggsim.pulses import (Envelope, FreeEvolution, Pulse, PulseSequence,
                             blackman, mach_zehnder_sequence, rabi_from_power,
                             resonance_delta_omega)

TWO_PI = 2 * np.pi


class TestBlackman:
    def test_peak_at_center(self):
        assert blackman(45e-6, 90e-6) == pytest.approx(1.0, abs=1e-15)

    def test_zero_at_edges(self):
        # 0.42 - 0.5 + 0.08 = 0 exactly
        assert blackman(0.0, 90e-6) == pytest.approx(0.0, abs=1e-16)
        assert blackman(90e-6, 90e-6) == pytest.approx(0.0, abs=1e-15)

    def test_zero_outside_support(self):
        assert blackman(-1e-6, 90e-6) == 0.0
        assert blackman(91e-6, 90e-6) == 0.0

    def test_symmetry(self):
        tau = 123e-6
        rng = np.random.default_rng(5)
        t = rng.uniform(0, tau, 200)
        assert np.max(np.abs(blackman(t, tau) - blackman(tau - t, tau))) < 1e-14

    def test_fwhm(self):
        # independent root finding of f(t) = 1/2
        tau = 1.0
        lo = brentq(lambda t: blackman(t, tau) - 0.5, 0.0, 0.5)
        hi = brentq(lambda t: blackman(t, tau) - 0.5, 0.5, 1.0)
        assert (hi - lo) == pytest.approx(0.405, abs=0.002)
        assert Envelope("blackman", 90e-6).fwhm() == pytest.approx(0.405 * 90e-6,
                                                                   abs=0.002 * 90e-6)

    def test_mean_by_quadrature(self):
        val, _ = quad(lambda t: blackman(t, 1.0), 0.0, 1.0)
        assert val == pytest.approx(0.42, abs=1e-10)
        assert Envelope("blackman", 1.0).mean == 0.42

    def test_invalid_duration(self):
        with pytest.raises(ParameterError):
            blackman(0.0, -1e-6)


class TestEnvelope:
    def test_tabulated_clipping_and_mean(self):
        samples = ((0.0, 0.0), (0.25, 1.4), (0.5, 0.8), (0.75, -0.2), (1.0, 0.0))
        env = Envelope("tabulated", 1.0, samples)
        u = np.linspace(0, 1, 500)
        v = env.value_frac(u)
        assert np.all(v >= 0.0) and np.all(v <= 1.0)
        ref, _ = quad(env.value_frac, 0.0, 1.0, limit=200)
        assert env.mean == pytest.approx(ref, abs=1e-6)

    def test_tabulated_needs_samples(self):
        with pytest.raises(ParameterError):
            Envelope("tabulated", 1.0, ((0.0, 0.5),))

    def test_rectangular(self):
        env = Envelope("rectangular", 2.0)
        assert env.mean == 1.0
        assert env.value(1.0) == 1.0
        assert env.value(2.5) == 0.0


class TestResonance:
    def test_third_order(self, rb87):
        # n * 2*pi*15.1 kHz, n = 3
        assert resonance_delta_omega(3, 0.0, rb87) == pytest.approx(TWO_PI * 45.3e3,
                                                                    rel=0.01)

    def test_fifth_order(self, rb87):
        assert resonance_delta_omega(5, 0.0, rb87) == pytest.approx(TWO_PI * 75.5e3,
                                                                    rel=0.01)

    def test_nonzero_initial_momentum(self, rb87):
        # p0 = hbar*k_eff adds 2*omega_k: total 3*omega_k for n = 1
        got = resonance_delta_omega(1, HBAR * rb87.k_eff, rb87)
        assert got == pytest.approx(3 * rb87.omega_k, rel=1e-12)

    def test_affine_in_p0(self, rb87):
        p = np.linspace(-2, 2, 7) * HBAR * rb87.k_eff
        vals = [resonance_delta_omega(2, x, rb87) for x in p]
        slopes = np.diff(vals) / np.diff(p)
        assert np.allclose(slopes, rb87.k_eff / rb87.atom_mass, rtol=1e-12)

    def test_linear_in_n(self, rb87):
        vals = [resonance_delta_omega(n, 0.0, rb87) for n in range(1, 8)]
        assert np.allclose(np.diff(vals), rb87.omega_k, rtol=1e-12)

    def test_invalid_order(self, rb87):
        with pytest.raises(ParameterError):
            resonance_delta_omega(0, 0.0, rb87)


class TestRabiFromPower:
    def test_zero_power(self):
        assert rabi_from_power(0.0, 1.17e-3, 1e-36) == 0.0

    def test_linearity(self):
        a = rabi_from_power(0.1, 1.17e-3, 1e-36)
        b = rabi_from_power(0.2, 1.17e-3, 1e-36)
        assert b == pytest.approx(2 * a, rel=1e-14)

    def test_default_envelope_mean_is_blackman_average(self):
        mean, _ = quad(lambda t: blackman(t, 1.0), 0.0, 1.0)
        got = rabi_from_power(0.1, 1e-3, 1e-36)
        ref = rabi_from_power(0.1, 1e-3, 1e-36, envelope_mean=mean)
        assert got == pytest.approx(ref, rel=1e-9)

    def test_invalid_waist(self):
        with pytest.raises(ParameterError):
            rabi_from_power(0.1, 0.0, 1e-36)


class TestPulse:
    def test_avg_peak_conversion(self, rb87):
        p = Pulse.on_resonance(rb87, 3, 90e-6, rabi_avg=TWO_PI * 23e3)
        assert p.rabi_peak * 0.42 == pytest.approx(TWO_PI * 23e3, rel=1e-14)
        assert p.rabi_avg == pytest.approx(TWO_PI * 23e3, rel=1e-14)

    def test_on_resonance_detuning(self, rb87):
        p = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=1e5)
        ref = resonance_delta_omega(3, 0.0, rb87)
        assert abs(p.delta_omega - ref) <= 1e-12 * ref

    def test_requires_one_convention(self, rb87):
        with pytest.raises(ParameterError):
            Pulse.on_resonance(rb87, 3, 90e-6)
        with pytest.raises(ParameterError):
            Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=1.0, rabi_avg=1.0)

    def test_negative_rabi_rejected(self, rb87):
        with pytest.raises(ParameterError):
            Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=-1.0)


class TestSequence:
    def test_total_duration_exact(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, 1e5, 120e-6, 9e4, 1e-3)
        assert seq.total_duration == 90e-6 + 1e-3 + 120e-6 + 1e-3 + 90e-6

    def test_mzi_structure_and_resonance(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, 1e5, 120e-6, 9e4, 1e-3)
        assert len(seq.items) == 5
        for p in seq.pulses:
            assert p.delta_omega == pytest.approx(TWO_PI * 45.3e3, rel=0.01)

    def test_degenerate_back_to_back(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, 1e5, 120e-6, 9e4, 0.0)
        assert len(seq.items) == 3
        assert all(isinstance(i, Pulse) for i in seq.items)

    def test_mirror_matches_dichroic_parameters(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, 1e5, 120e-6, TWO_PI * 21e3,
                                    1e-3, rabi_convention="avg")
        mirror = seq.pulses[1]
        assert mirror.duration == 120e-6
        assert mirror.rabi_avg == pytest.approx(TWO_PI * 21e3, rel=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ParameterError):
            PulseSequence(())

    def test_negative_free_evolution_rejected(self):
        with pytest.raises(ParameterError):
            FreeEvolution(-1e-6)
