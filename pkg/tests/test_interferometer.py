import numpy as np
import pytest

from braggsim import ladder
from braggsim.ensemble import MomentumDistribution, Quadrature
from braggsim.errors import ParameterError
from braggsim.interferometer import (branch_summary, fit_fringe, fringe_scan,
                                     mirror_response, path_resolved_mzi, run_mzi)
from braggsim.pulses import (FreeEvolution, Pulse, PulseSequence,
                             mach_zehnder_sequence)

TWO_PI = 2 * np.pi
FAST = Quadrature("gauss-hermite", 9)
DELTA = MomentumDistribution("delta", 0.0, 0.0)


def _ideal_two_level_mzi(cfg, phi3=0.0, t_free=2e-4):
    # deep-Bragg first order: rabi_avg * tau sets the pulse area
    tau = 250e-6
    om_pi = np.pi / tau
    return mach_zehnder_sequence(cfg, 1, tau, om_pi / 2, tau, om_pi, t_free,
                                 phi3=phi3, rabi_convention="avg")


class TestRunMzi:
    def test_lattice_off_stays_in_class_zero(self, rb87):
        p0 = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=0.0)
        seq = PulseSequence((p0, FreeEvolution(1e-4), p0, FreeEvolution(1e-4), p0))
        rep = run_mzi(seq, DELTA, rb87)
        assert rep.ports[0] == pytest.approx(1.0, abs=1e-10)
        assert rep.ports[3] == pytest.approx(0.0, abs=1e-10)

    def test_ports_plus_undetected_is_one(self, rb87, cloud):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3,
                                    120e-6, TWO_PI * 21e3, 5e-4,
                                    rabi_convention="avg")
        rep = run_mzi(seq, cloud, rb87, quadrature=FAST)
        assert rep.total == pytest.approx(1.0, abs=1e-9)

    def test_two_level_fringe_extrema(self, rb87):
        bright = run_mzi(_ideal_two_level_mzi(rb87, phi3=0.0), DELTA, rb87)
        dark = run_mzi(_ideal_two_level_mzi(rb87, phi3=np.pi), DELTA, rb87)
        # (1 + cos(phi3))/2 behavior up to a fixed offset phase: the two
        # extremes must be swapped and near 0/1
        hi = max(bright.ports[0], dark.ports[0])
        lo = min(bright.ports[0], dark.ports[0])
        assert hi > 0.98 and lo < 0.02

    def test_global_phase_invariance(self, rb87):
        # propagate a phased copy of the same initial state
        pulse = Pulse.on_resonance(rb87, 1, 100e-6, rabi_avg=TWO_PI * 4e3)
        st = ladder.ladder_state(0, 0.0, order=1)
        stp = st.copy()
        stp.amps = stp.amps * np.exp(1j * 0.7321)
        a = ladder.integrate_ladder(st, pulse, rb87)
        b = ladder.integrate_ladder(stp, pulse, rb87)
        for j in range(a.j_min, a.j_max + 1):
            assert abs(a.population(j) - b.population(j)) < 1e-12


class TestPathResolved:
    def test_pure_class_single_branch(self, rb87):
        p0 = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=0.0)
        seq = PulseSequence((p0, FreeEvolution(1e-4), p0, FreeEvolution(1e-4), p0))
        tree, rep = path_resolved_mzi(seq, DELTA, rb87, split_after=(0,))
        live = [nd for nd in tree if nd.weight > 1e-12]
        assert len(live) == 1 and live[0].history == (0,)

    def test_branch_explosion_guard(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16e3, 120e-6,
                                    TWO_PI * 21e3, 1e-4, rabi_convention="avg")
        with pytest.raises(ParameterError):
            path_resolved_mzi(seq, DELTA, rb87, split_after=(0, 1), max_branches=3)

    def test_weights_account_for_everything(self, rb87, cloud):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3, 120e-6,
                                    TWO_PI * 21e3, 5e-4, rabi_convention="avg")
        tree, rep = path_resolved_mzi(seq, cloud, rb87, quadrature=FAST)
        total = sum(nd.weight for nd in tree)
        assert total + rep.pruned == pytest.approx(1.0, abs=2 * rep.pruned + 1e-9)

    def test_coherent_recombination_matches_unsplit_run(self, rb87):
        seq = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3, 120e-6,
                                    TWO_PI * 21e3, 5e-4, rabi_convention="avg")
        tree, rep = path_resolved_mzi(seq, DELTA, rb87, split_after=(0, 1))
        direct = run_mzi(seq, DELTA, rb87)
        for p in rep.ports:
            assert rep.ports[p] == pytest.approx(direct.ports[p],
                                                 abs=2 * rep.pruned + 1e-8)

    def test_free_time_independence_of_coupled_fraction(self, rb87):
        out = {}
        for T in (3e-4, 8e-4):
            seq = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3, 120e-6,
                                        TWO_PI * 21e3, T, rabi_convention="avg")
            tree, _ = path_resolved_mzi(seq, DELTA, rb87)
            out[T] = branch_summary(tree, 0)
        for cls in (1, 2):
            assert out[3e-4][cls]["port_coupled_fraction"] == pytest.approx(
                out[8e-4][cls]["port_coupled_fraction"], abs=1e-9)


class TestMirrorResponse:
    def test_lattice_off_before_equals_after(self, rb87, cloud):
        p0 = Pulse.on_resonance(rb87, 3, 90e-6, rabi_peak=0.0)
        rows = mirror_response(range(4), p0, cloud, rb87, quadrature=FAST)
        for r in rows:
            assert r["after"][r["input"]] == pytest.approx(1.0, abs=1e-10)

    def test_dichroic_mirror_keeps_parasitic_input(self, rb87, cloud):
        dmp = Pulse.on_resonance(rb87, 3, 120e-6, rabi_avg=TWO_PI * 21e3)
        rows = mirror_response([1], dmp, cloud, rb87, quadrature=FAST)
        after = rows[0]["after"]
        assert max(after, key=after.get) == 1

    def test_plain_mirror_redirects_parasitic_input(self, rb87, cloud):
        plain = Pulse.on_resonance(rb87, 3, 90e-6, rabi_avg=TWO_PI * 23e3)
        rows = mirror_response([1], plain, cloud, rb87, quadrature=FAST)
        after = rows[0]["after"]
        assert max(after, key=after.get) == 2


class TestFringe:
    def test_fit_on_synthetic_fringe(self):
        phis = np.linspace(0, TWO_PI, 40, endpoint=False)
        y = 0.4 * (1 + 0.85 * np.cos(3 * phis - 0.6))
        fit = fit_fringe(phis, y, harmonic=3)
        assert fit.offset == pytest.approx(0.4, abs=1e-12)
        assert fit.contrast == pytest.approx(0.85, abs=1e-12)
        assert fit.phase == pytest.approx(0.6, abs=1e-12)
        assert fit.max_residual < 1e-12

    def test_grid_must_span_two_pi(self, rb87):
        seq = _ideal_two_level_mzi(rb87)
        with pytest.raises(ParameterError):
            fringe_scan(seq, np.linspace(0, 2.0, 5), DELTA, rb87)

    def test_two_level_contrast_and_completeness(self, rb87):
        seq = _ideal_two_level_mzi(rb87)
        phis = np.linspace(0, TWO_PI, 12, endpoint=False)
        rows, fits = fringe_scan(seq, phis, DELTA, rb87)
        for r in rows:
            assert r["port_0"] + r["port_1"] + r["undetected"] == pytest.approx(
                1.0, abs=1e-9)
        assert fits[0].contrast > 0.99
        assert fits[0].max_residual < 0.01

    def test_multipath_residual_plain_vs_dichroic(self, rb87, cloud):
        phis = np.linspace(0, TWO_PI, 10, endpoint=False)
        fast = Quadrature("gauss-hermite", 7)
        seq_plain = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3, 90e-6,
                                          TWO_PI * 23e3, 4e-4, rabi_convention="avg")
        seq_dmp = mach_zehnder_sequence(rb87, 3, 90e-6, TWO_PI * 16.2e3, 120e-6,
                                        TWO_PI * 21e3, 4e-4, rabi_convention="avg")
        _, fit_plain = fringe_scan(seq_plain, phis, cloud, rb87, quadrature=fast)
        _, fit_dmp = fringe_scan(seq_dmp, phis, cloud, rb87, quadrature=fast)
        assert fit_plain[0].max_residual > fit_dmp[0].max_residual
