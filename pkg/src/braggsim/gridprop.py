"""Split-step Fourier propagation on a real-space grid.

The wavefunction is stored as the periodic part u(x) of
psi(x) = exp(i*q*x) u(x), with q the quasimomentum offset in units of
hbar*k_eff and x in units of 1/k_eff (lattice period 2*pi).  The kinetic
factor then uses (k + q)^2 on the FFT wavenumber comb k = m/num_periods,
and any q can be propagated on the same grid.

Steps follow a splitting scheme from :mod:`braggsim.splitting`; the
kinetic substep carries the clock, the potential substep is evaluated at
the frozen clock time.  Adaptive stepping controls the embedded pair
estimate of the scheme per unit time.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import fft, ifft

from .errors import ParameterError, StiffnessError
from .pulses import Pulse
from .splitting import PP34A, SplittingScheme

DEFAULT_NUM_POINTS = 512
DEFAULT_NUM_PERIODS = 8
DEFAULT_TOL = 1e-8          # error estimate per unit dimensionless time


@dataclass(frozen=True)
class Grid:
    """Periodic spatial grid spanning an integer number of lattice periods."""

    num_points: int = DEFAULT_NUM_POINTS
    num_periods: int = DEFAULT_NUM_PERIODS

    def __post_init__(self):
        n = self.num_points
        if n < 4 or (n & (n - 1)) != 0:
            raise ParameterError(f"num_points must be a power of two >= 4, got {n}")
        if self.num_periods < 1:
            raise ParameterError(f"num_periods must be >= 1, got {self.num_periods}")

    @property
    def length(self):
        return 2 * np.pi * self.num_periods

    @property
    def x(self):
        return np.arange(self.num_points) * (self.length / self.num_points)

    @property
    def k(self):
        """FFT-ordered wavenumbers in units of k_eff (momentum comb spacing
        1/num_periods)."""
        return np.fft.fftfreq(self.num_points, d=self.length / self.num_points) * 2 * np.pi

    @property
    def nyquist(self):
        """Largest resolvable |momentum| in hbar*k_eff."""
        return self.num_points / (2 * self.num_periods)

    def check_order(self, order):
        """Nyquist margin rule: resolve classes up to order + 4."""
        if self.nyquist <= order + 4:
            raise ParameterError(
                f"grid Nyquist momentum {self.nyquist} hbar*k_eff cannot resolve "
                f"order {order} with margin 4; increase num_points or decrease num_periods")


@dataclass
class GridState:
    """Periodic amplitude array plus quasimomentum offset and clock time."""

    grid: Grid
    psi: np.ndarray            # complex, sum |psi|^2 = 1
    q: float = 0.0             # hbar*k_eff
    time: float = 0.0          # dimensionless

    def copy(self):
        return GridState(self.grid, self.psi.copy(), self.q, self.time)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)))


def plane_wave(grid, j=0, q=0.0):
    """Plane wave at momentum q + j (hbar*k_eff), unit norm."""
    psi = np.exp(1j * j * grid.x) / np.sqrt(grid.num_points)
    return GridState(grid, psi.astype(complex), q=float(q), time=0.0)


def momentum_populations(state, comb_only=False):
    """Probabilities on the momentum grid, binned per momentum class.

    Bins are centered on the state's comb q + j with halfwidth 1/2, so a
    plane-wave state maps exactly onto ladder class indices.  With
    comb_only=True only the exact comb modes are summed (off-comb mass is
    reported under key "offcomb").
    """
    pk = np.abs(fft(state.psi)) ** 2
    pk /= pk.sum()
    k = state.grid.k
    jj = np.floor(k + 0.5).astype(int)
    out = {}
    if comb_only:
        on = np.abs(k - np.round(k)) < 1e-9
        for j in np.unique(jj[on]):
            out[int(j)] = float(pk[on & (jj == j)].sum())
        out["offcomb"] = float(pk[~on].sum())
        return out
    for j in np.unique(jj):
        out[int(j)] = float(pk[jj == j].sum())
    return out


class _Stepper:
    """Applies splitting substeps for one pulse on one grid."""

    def __init__(self, state, pulse_dimless, envelope):
        self.grid = state.grid
        self.tau, self.W, self.dw, self.phi = pulse_dimless
        self.env = envelope
        k = self.grid.k + state.q
        self.k2 = k * k
        x = self.grid.x
        self.cosx = np.cos(x)
        self.sinx = np.sin(x)

    def kinetic(self, psi, dt):
        return ifft(fft(psi) * np.exp(-1j * self.k2 * dt))

    def potential(self, psi, t, dt):
        # V(x,t) = W f (1 + cos(x - dw*t + phi)); f evaluated at fraction t/tau
        f = self.env.value_frac(t / self.tau)
        if f == 0.0 or self.W == 0.0:
            return psi
        theta = self.dw * t - self.phi
        cosshift = self.cosx * np.cos(theta) + self.sinx * np.sin(theta)
        c = self.W * f * dt
        return psi * (np.exp(-1j * c) * np.exp(-1j * c * cosshift))

    def step(self, psi, t, h, scheme, swap_roles=False):
        clock = t
        for slot, w in scheme.substeps(swap_roles=swap_roles):
            if slot == "A":
                psi = self.kinetic(psi, w * h)
                clock += w * h
            else:
                psi = self.potential(psi, clock, w * h)
        return psi


def propagate_pulse(state, pulse: Pulse, cfg, scheme: SplittingScheme = PP34A,
                    tol=DEFAULT_TOL, max_dt_frac=1 / 200):
    """Advance a grid state through one pulse with adaptive splitting steps.

    tol bounds the embedded-pair error estimate per unit dimensionless
    time.  Raises StiffnessError if the controller underflows below
    tau * 1e-9.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    state.grid.check_order(pulse.order_hint)
    units = cfg.units()
    dl = pulse.dimensionless(units)
    tau = dl[0]
    st = _Stepper(state, dl, pulse.envelope)
    psi = state.psi.copy()
    t = 0.0
    h = tau * max_dt_frac
    h_min = tau * 1e-9
    expo = 1.0 / (scheme.err_order + 1)
    while t < tau:
        h = min(h, tau - t)
        psi_ab = st.step(psi, t, h, scheme, swap_roles=False)
        psi_ba = st.step(psi, t, h, scheme, swap_roles=True)
        err = 0.5 * float(np.linalg.norm(psi_ab - psi_ba))
        tol_step = tol * h
        if err <= tol_step:
            psi = 0.5 * (psi_ab + psi_ba) if scheme.advance == "average" else psi_ab
            t += h
        if err > 0:
            h *= min(5.0, max(0.2, 0.9 * (tol_step / err) ** expo))
        else:
            h *= 5.0
        if h < h_min and t < tau:
            raise StiffnessError(
                "step size underflow in split-step propagation",
                context={"t": t, "tau": tau, "h": h, "tol": tol,
                         "rabi_peak": pulse.rabi_peak, "duration": pulse.duration})
    return GridState(state.grid, psi, state.q, state.time + tau)


def propagate_pulse_fixed(state, pulse, cfg, scheme=PP34A, n_steps=400,
                          swap_roles=False, backward=False, advance=None):
    """Fixed-step propagation, forward or exactly reversed.

    backward=True steps the clock from tau down to 0 with negated
    weights; for a palindromic scheme run with swap_roles=True this is
    the exact inverse of the forward pass (to roundoff).
    advance overrides the scheme's advance mode ("primary"/"average").
    """
    units = cfg.units()
    dl = pulse.dimensionless(units)
    tau = dl[0]
    st = _Stepper(state, dl, pulse.envelope)
    psi = state.psi.copy()
    h = tau / n_steps
    mode = scheme.advance if advance is None else advance
    if backward:
        for i in range(n_steps - 1, -1, -1):
            t_end = (i + 1) * h
            psi = st.step(psi, t_end, -h, scheme, swap_roles=swap_roles)
        return GridState(state.grid, psi, state.q, state.time - tau)
    for i in range(n_steps):
        t = i * h
        if mode == "average":
            psi = 0.5 * (st.step(psi, t, h, scheme, swap_roles=False)
                         + st.step(psi, t, h, scheme, swap_roles=True))
        else:
            psi = st.step(psi, t, h, scheme, swap_roles=swap_roles)
    return GridState(state.grid, psi, state.q, state.time + tau)


def kinetic_phase(state, duration):
    """Exact kinetic factor exp(-i (k+q)^2 * duration) (dimensionless time)."""
    if duration == 0.0:
        return state.copy()
    k = state.grid.k + state.q
    psi = ifft(fft(state.psi) * np.exp(-1j * k * k * duration))
    return GridState(state.grid, psi, state.q, state.time + duration)


def potential_phase(state, pulse, cfg, t, duration):
    """Pointwise lattice phase exp(-i V(x, t) * duration) at frozen time t.

    t and duration in dimensionless units; norm is preserved exactly.
    """
    st = _Stepper(state, pulse.dimensionless(cfg.units()), pulse.envelope)
    return GridState(state.grid, st.potential(state.psi.copy(), t, duration),
                     state.q, state.time)


def free_evolve(state, T, cfg=None):
    """Exact lattice-off evolution for duration T.

    T in seconds when cfg is given, else dimensionless.
    """
    if T < 0:
        raise ParameterError(f"free evolution must be nonnegative, got {T}")
    T_t = cfg.units().to_dimensionless(T, "time") if cfg is not None else T
    return kinetic_phase(state, T_t)
