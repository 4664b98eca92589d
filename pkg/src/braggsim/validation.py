"""Numerical invariant suite backing the `check` and `oracle-diff` commands."""
from __future__ import annotations

import numpy as np

from . import gridprop, ladder
from .ensemble import MomentumDistribution, Quadrature, ensemble_average, reflectivity_matrix
from .pulses import Pulse
from .splitting import get_scheme


def oracle_diff(pulse, cfg, classes=None, grid_opts=None, tol=1e-3,
                rtol=ladder.DEFAULT_RTOL, atol=ladder.DEFAULT_ATOL):
    """Max class-population deviation between ladder and grid backends.

    Plane-wave input for every class 0..n; both backends at their default
    (tight) tolerances.
    """
    n = pulse.order_hint
    delta = MomentumDistribution("delta", 0.0, 0.0)
    rec_l = reflectivity_matrix(pulse, delta, cfg, order=n, backend="ladder",
                                rtol=rtol, atol=atol)
    rec_g = reflectivity_matrix(pulse, delta, cfg, order=n, backend="grid",
                                grid_opts=grid_opts)
    dev = float(np.max(np.abs(rec_l.matrix - rec_g.matrix)))
    return {"max_abs_dev": dev, "tol": tol, "passes": bool(dev < tol),
            "order": n, "tau_s": pulse.duration,
            "rabi_avg_rad_s": pulse.rabi_avg}


def check_suite(cfg, grid_opts=None, verbose=False):
    """Quick numerical-property checks; returns [(name, passed, detail)].

    Covers unit round-trips, norm conservation, palindromic time
    reversal, phase-gauge invariance, quadrature convergence and
    cross-backend agreement on a moderate pulse.
    """
    results = []
    units = cfg.units()

    def record(name, passed, detail):
        results.append((name, bool(passed), detail))

    # unit round trip
    vals = {"time": 9e-5, "momentum": 3.2e-27, "frequency": 1e5, "length": 1e-6,
            "energy": 1e-29}
    worst = max(abs(units.from_dimensionless(units.to_dimensionless(v, k), k) / v - 1)
                for k, v in vals.items())
    record("unit_round_trip", worst < 1e-12, f"max rel err {worst:.2e}")

    pulse = Pulse.on_resonance(cfg, 3, 90e-6, rabi_avg=2 * np.pi * 23e3)

    # ladder norm drift
    st = ladder.ladder_state(0, 0.0, order=3)
    out = ladder.integrate_ladder(st, pulse, cfg)
    drift = abs(out.norm - 1.0)
    record("ladder_norm_drift", drift < 1e-10, f"{drift:.2e}")

    # grid norm drift
    gopts = dict(grid_opts or {})
    scheme = get_scheme(gopts.pop("scheme", "pp34a"))
    tol = gopts.pop("tol", gridprop.DEFAULT_TOL)
    grid = gridprop.Grid(**gopts)
    gs = gridprop.plane_wave(grid, 0, 0.0)
    go = gridprop.propagate_pulse(gs, pulse, cfg, scheme=scheme, tol=tol)
    gdrift = abs(go.norm - 1.0)
    record("grid_norm_drift", gdrift < 1e-10, f"{gdrift:.2e}")

    # quasimomentum conservation on the grid
    pops = gridprop.momentum_populations(go, comb_only=True)
    record("offcomb_population", pops["offcomb"] < 1e-12, f"{pops['offcomb']:.2e}")

    # palindromic forward/backward return
    if scheme.is_palindromic:
        fwd = gridprop.propagate_pulse_fixed(gs, pulse, cfg, scheme=scheme,
                                             n_steps=600, advance="primary")
        back = gridprop.propagate_pulse_fixed(fwd, pulse, cfg, scheme=scheme,
                                              n_steps=600, swap_roles=True,
                                              backward=True)
        ret = float(np.linalg.norm(back.psi - gs.psi))
        record("palindromic_reversal", ret < 1e-8, f"return error {ret:.2e}")

    # phase gauge invariance (tight tolerance run)
    st0 = ladder.integrate_ladder(ladder.ladder_state(0, 0.0, order=3),
                                  Pulse.on_resonance(cfg, 3, 60e-6,
                                                     rabi_avg=2 * np.pi * 20e3),
                                  cfg, rtol=1e-13, atol=1e-15)
    st1 = ladder.integrate_ladder(ladder.ladder_state(0, 0.0, order=3),
                                  Pulse.on_resonance(cfg, 3, 60e-6,
                                                     rabi_avg=2 * np.pi * 20e3,
                                                     phase=1.234567),
                                  cfg, rtol=1e-13, atol=1e-15)
    gauge = max(abs(st0.population(j) - st1.population(j))
                for j in range(st0.j_min, st0.j_max + 1))
    record("phase_gauge_invariance", gauge < 1e-12, f"max pop change {gauge:.2e}")

    # quadrature convergence N vs N+8
    dist = MomentumDistribution("gaussian", 0.0, 0.13)
    cpa = ensemble_average(pulse, dist, cfg, quadrature=Quadrature("gauss-hermite", 41))
    cpb = ensemble_average(pulse, dist, cfg, quadrature=Quadrature("gauss-hermite", 49))
    qdev = max(abs(cpa[c] - cpb[c]) for c in cpa.norm_set)
    record("quadrature_convergence", qdev < 1e-4, f"max class change {qdev:.2e}")

    # truncation window
    rep = ladder.truncation_check(ladder.ladder_state(0, 0.0, order=3), pulse, cfg)
    record("ladder_truncation", rep.passes, f"max change {rep.max_population_change:.2e}")

    # cross-backend agreement
    od = oracle_diff(pulse, cfg, grid_opts=grid_opts, tol=1e-3)
    record("oracle_diff", od["passes"], f"max dev {od['max_abs_dev']:.2e}")

    return results
