"""Momentum-ladder propagator: the independent oracle.

For quasimomentum q (conserved by the lattice) the state lives on the
discrete comb p = q + j, j integer, in units of hbar*k_eff.  The coupled
amplitudes obey, in lattice-recoil units,

    i dc_j/dt = [(q+j)^2 + W f(t)] c_j
                + (W f(t)/2) [e^{-i(dw*t - phi)} c_{j-1}
                              + e^{+i(dw*t - phi)} c_{j+1}],

with W the peak two-photon Rabi frequency and dw the beam frequency
difference.  The raising matrix element <j+1|H|j> carries
e^{-i(dw*t - phi)}.

Integration runs by default in the interaction picture of the static
kinetic diagonal (c_j = e^{-i(q+j)^2 t} a_j), an exact reformulation that
removes the fastest phases; the oscillating lattice coupling itself is
integrated directly (no co-moving or rotating-wave transformation).  The
bare frame is available for cross-checks via frame="bare".
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, ParameterError
from .pulses import FreeEvolution, Pulse, PulseSequence

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


def default_j_window(order):
    """Truncation window [-(n+4), 2n+4] covering classes 0..n with margin."""
    return -(order + 4), 2 * order + 4


@dataclass
class LadderState:
    """Amplitudes c_j on the momentum comb q + j, j in [j_min, j_max]."""

    q: float
    j_min: int
    j_max: int
    amps: np.ndarray
    time: float = 0.0   # dimensionless

    def __post_init__(self):
        if self.j_max <= self.j_min:
            raise ParameterError("empty ladder window")
        if len(self.amps) != self.dim:
            raise ParameterError(f"amplitude vector has length {len(self.amps)}, "
                                 f"window needs {self.dim}")

    @property
    def dim(self):
        return self.j_max - self.j_min + 1

    @property
    def j(self):
        return np.arange(self.j_min, self.j_max + 1)

    def copy(self):
        return LadderState(self.q, self.j_min, self.j_max, self.amps.copy(), self.time)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def population(self, j):
        if not self.j_min <= j <= self.j_max:
            return 0.0
        return float(np.abs(self.amps[j - self.j_min]) ** 2)

    def populations(self):
        return {int(j): float(p) for j, p in zip(self.j, np.abs(self.amps) ** 2)}


def ladder_state(cls=0, q=0.0, order=None, j_window=None):
    """Unit-population state in class `cls` with a default or explicit window."""
    if j_window is None:
        j_window = default_j_window(order if order is not None else max(1, cls))
    j_min, j_max = j_window
    if not j_min <= cls <= j_max:
        raise ParameterError(f"class {cls} outside window [{j_min}, {j_max}]")
    amps = np.zeros(j_max - j_min + 1, dtype=complex)
    amps[cls - j_min] = 1.0
    return LadderState(float(q), j_min, j_max, amps)


def ladder_hamiltonian(q, pulse, cfg, t, j_window):
    """Dense Hermitian ladder Hamiltonian at dimensionless time t.

    Diagonal (q+j)^2 + W f(t); couplings W f(t)/2 with the phase
    convention stated in the module docstring.  t may lie outside the
    pulse, where the envelope is zero.
    """
    tau, W, dw, phi = pulse.dimensionless(cfg.units())
    j_min, j_max = j_window
    j = np.arange(j_min, j_max + 1)
    f = pulse.envelope.value_frac(t / tau)
    H = np.zeros((len(j), len(j)), dtype=complex)
    np.fill_diagonal(H, (q + j) ** 2 + W * f)
    raising = 0.5 * W * f * np.exp(-1j * (dw * t - phi))
    idx = np.arange(len(j) - 1)
    H[idx + 1, idx] = raising
    H[idx, idx + 1] = np.conj(raising)
    return H


def _envelope_scalar(envelope):
    """Fast scalar envelope(u) on fractional time, 0 outside [0, 1]."""
    kind = envelope.kind
    if kind == "blackman":
        def f(u):
            if u < 0.0 or u > 1.0:
                return 0.0
            return 0.42 - 0.5 * math.cos(2 * math.pi * u) + 0.08 * math.cos(4 * math.pi * u)
        return f
    if kind == "rectangular":
        return lambda u: 1.0 if 0.0 <= u <= 1.0 else 0.0
    return lambda u: float(envelope.value_frac(u))


def propagate_batch(qs, c0, pulse, cfg, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                    j_window=None, frame="interaction"):
    """Propagate amplitudes c0 of shape (dim, nq, ni) through one pulse.

    qs has shape (nq,); all quasimomenta share one integration (their
    dynamics are independent, the batching only amortizes solver
    overhead).  Returns the bare-frame amplitudes at the end of the
    pulse.
    """
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    if j_window is None:
        j_window = default_j_window(pulse.order_hint)
    j_min, j_max = j_window
    j = np.arange(j_min, j_max + 1)
    dim, nq, ni = c0.shape
    if dim != len(j) or nq != len(qs):
        raise ParameterError("c0 shape does not match window/quasimomentum batch")
    tau, W, dw, phi = pulse.dimensionless(cfg.units())
    env = _envelope_scalar(pulse.envelope)
    K = (qs[None, :] + j[:, None]) ** 2          # (dim, nq)
    eiphi = complex(np.exp(1j * phi))

    if W == 0.0:
        out = c0 * np.exp(-1j * K * tau)[:, :, None]
        return out

    if frame == "interaction":
        wbond = (K[1:] - K[:-1]) - dw            # (dim-1, nq) bond j -> j+1

        def rhs(t, y):
            a = y.reshape(dim, nq, ni)
            f = env(t / tau)
            P = np.exp(1j * (t * wbond)) * eiphi
            da = np.empty_like(a)
            da[1:] = P[:, :, None] * a[:-1]
            da[0] = 0.0
            da[:-1] += np.conj(P)[:, :, None] * a[1:]
            da += 2.0 * a
            da *= -0.5j * (W * f)
            return da.ravel()
    elif frame == "bare":
        def rhs(t, y):
            c = y.reshape(dim, nq, ni)
            f = env(t / tau)
            P = complex(np.exp(-1j * (dw * t - phi)))
            dc = np.empty_like(c)
            dc[1:] = P * c[:-1]
            dc[0] = 0.0
            dc[:-1] += np.conj(P) * c[1:]
            dc *= 0.5 * W * f
            dc += (K[:, :, None] + W * f) * c
            dc *= -1j
            return dc.ravel()
    else:
        raise ParameterError(f"unknown frame {frame!r}; use 'interaction' or 'bare'")

    sol = solve_ivp(rhs, (0.0, tau), np.ascontiguousarray(c0).ravel(), method="DOP853",
                    rtol=rtol, atol=atol, first_step=tau / 1000, max_step=tau / 50)
    if not sol.success:
        raise IntegrationError(f"ladder integration failed: {sol.message}",
                               context={"tau": tau, "rabi_peak": pulse.rabi_peak})
    a = sol.y[:, -1].reshape(dim, nq, ni)
    if frame == "interaction":
        a = a * np.exp(-1j * K * tau)[:, :, None]
    return a


def integrate_ladder(state, pulse, cfg, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                     frame="interaction"):
    """Advance one LadderState through a pulse."""
    c0 = state.amps.reshape(state.dim, 1, 1)
    c = propagate_batch(np.array([state.q]), c0, pulse, cfg, rtol=rtol, atol=atol,
                        j_window=(state.j_min, state.j_max), frame=frame)
    return LadderState(state.q, state.j_min, state.j_max, c[:, 0, 0],
                       state.time + pulse.dimensionless(cfg.units())[0])


def free_evolve(state, T, cfg=None):
    """Exact lattice-off phases for duration T (seconds if cfg given)."""
    T_t = cfg.units().to_dimensionless(T, "time") if cfg is not None else T
    phases = np.exp(-1j * (state.q + state.j) ** 2 * T_t)
    return LadderState(state.q, state.j_min, state.j_max, state.amps * phases,
                       state.time + T_t)


def propagate_sequence(state, seq: PulseSequence, cfg, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL):
    """Run a full pulse sequence on one ladder state."""
    for item in seq.items:
        if isinstance(item, Pulse):
            state = integrate_ladder(state, item, cfg, rtol=rtol, atol=atol)
        elif isinstance(item, FreeEvolution):
            state = free_evolve(state, item.duration, cfg)
        else:
            raise ParameterError(f"unknown sequence item {type(item)}")
    return state


@dataclass(frozen=True)
class TruncationReport:
    window: tuple
    widened_window: tuple
    max_population_change: float
    passes: bool


def truncation_check(state, pulse, cfg, widen=2, threshold=1e-8,
                     rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Re-run with the window widened on both sides; report the change.

    Passes when no class population moves by more than `threshold`.
    """
    base = integrate_ladder(state, pulse, cfg, rtol=rtol, atol=atol)
    wide_min, wide_max = state.j_min - widen, state.j_max + widen
    amps = np.zeros(wide_max - wide_min + 1, dtype=complex)
    amps[state.j_min - wide_min:state.j_max - wide_min + 1] = state.amps
    wide0 = LadderState(state.q, wide_min, wide_max, amps, state.time)
    wide = integrate_ladder(wide0, pulse, cfg, rtol=rtol, atol=atol)
    changes = [abs(base.population(j) - wide.population(j))
               for j in range(state.j_min, state.j_max + 1)]
    outer = sum(wide.population(j) for j in list(range(wide_min, state.j_min))
                + list(range(state.j_max + 1, wide_max + 1)))
    max_change = max(max(changes), outer)
    return TruncationReport(window=(state.j_min, state.j_max),
                            widened_window=(wide_min, wide_max),
                            max_population_change=float(max_change),
                            passes=bool(max_change < threshold))
