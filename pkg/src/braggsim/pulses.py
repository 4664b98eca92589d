"""Pulse envelopes, resonance condition, pulse sequences and the
power-to-Rabi-frequency calibration.

Rabi-frequency conventions
--------------------------
``Pulse.rabi_peak`` is the peak two-photon Rabi frequency: the quantity
multiplying the envelope f(t) in the lattice potential
``2*hbar*rabi_peak*f(t)*cos^2((k_eff*x - delta_omega*t + phase)/2)``.

Laboratories usually quote the envelope-averaged value instead (for a
Blackman pulse the average power of the pulse carries the factor
mean(f) = 0.42, so power-calibrated numbers come out pre-multiplied by
it).  Constructors accept either convention via ``rabi_peak=`` or
``rabi_avg=``; the two are related by ``rabi_peak = rabi_avg / mean(f)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import ParameterError
from .physics import HBAR, PhysicalConfig

BLACKMAN_MEAN = 0.42  # exact: the DC Fourier coefficient of the window


def blackman(t, tau):
    """Blackman window 0.42 - 0.5*cos(2*pi*t/tau) + 0.08*cos(4*pi*t/tau).

    Defined on [0, tau] and zero outside; t and tau in any common unit.
    Vectorized in t.
    """
    if tau <= 0:
        raise ParameterError(f"pulse duration must be positive, got {tau}")
    t = np.asarray(t, dtype=float)
    u = 2 * np.pi * t / tau
    val = 0.42 - 0.5 * np.cos(u) + 0.08 * np.cos(2 * u)
    out = np.where((t >= 0) & (t <= tau), val, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Envelope:
    """Pulse envelope shape with values in [0, 1] on [0, duration].

    Tabulated envelopes keep their sample times as fractions of the
    duration, so the same shape can be evaluated in SI or dimensionless
    time.  Interpolation is monotone cubic, which cannot overshoot the
    clipped sample range.
    """

    kind: str                      # "blackman" | "rectangular" | "tabulated"
    duration: float                # seconds
    samples: tuple = ()            # tabulated only: ((t, value), ...)
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.duration <= 0:
            raise ParameterError(f"envelope duration must be positive, got {self.duration}")
        if self.kind not in ("blackman", "rectangular", "tabulated"):
            raise ParameterError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "tabulated":
            if len(self.samples) < 2:
                raise ParameterError("tabulated envelope needs at least 2 samples")
            t = np.asarray([s[0] for s in self.samples], dtype=float)
            v = np.clip([s[1] for s in self.samples], 0.0, 1.0)
            if t[0] < 0 or t[-1] > self.duration or np.any(np.diff(t) <= 0):
                raise ParameterError("tabulated samples must be strictly increasing in [0, duration]")
            object.__setattr__(self, "_interp", PchipInterpolator(t / self.duration, v,
                                                                  extrapolate=False))

    def value_frac(self, u):
        """Envelope at fractional time u = t/duration, zero outside [0, 1]."""
        u = np.asarray(u, dtype=float)
        if self.kind == "blackman":
            w = 2 * np.pi * u
            val = 0.42 - 0.5 * np.cos(w) + 0.08 * np.cos(2 * w)
        elif self.kind == "rectangular":
            val = np.ones_like(u)
        else:
            val = np.nan_to_num(self._interp(np.clip(u, 0.0, 1.0)), nan=0.0)
        out = np.where((u >= 0) & (u <= 1), val, 0.0)
        return out if out.ndim else float(out)

    def value(self, t, duration=None):
        """Envelope at time t (same unit as duration; SI by default)."""
        tau = self.duration if duration is None else duration
        return self.value_frac(np.asarray(t, dtype=float) / tau)

    @property
    def mean(self):
        """Time average of the envelope over [0, duration]."""
        if self.kind == "blackman":
            return BLACKMAN_MEAN
        if self.kind == "rectangular":
            return 1.0
        return float(self._interp.integrate(0.0, 1.0))

    def fwhm(self):
        """Full width at half maximum, in the duration's unit."""
        u = np.linspace(0.0, 1.0, 2001)
        v = self.value_frac(u)
        peak = v.max()
        i_peak = int(v.argmax())
        f = lambda x: self.value_frac(x) - 0.5 * peak
        lo = brentq(f, 0.0, u[i_peak])
        hi = brentq(f, u[i_peak], 1.0)
        return (hi - lo) * self.duration


def resonance_delta_omega(n, p0, cfg: PhysicalConfig):
    """Beam frequency difference for n-th order resonance at initial momentum p0.

    Returns n*hbar*k_eff^2/(2m) + p0*k_eff/m in rad/s; p0 in SI kg*m/s.
    """
    if n <= 0:
        raise ParameterError(f"diffraction order must be a positive integer, got {n}")
    return n * cfg.omega_k + p0 * cfg.k_eff / cfg.atom_mass


def rabi_from_power(power, waist, dipole_factor, envelope_mean=BLACKMAN_MEAN):
    """Two-photon Rabi frequency from beam power, lab convention.

    envelope_mean * 4 * P * U0 / (hbar * pi * w0^2); the default
    envelope_mean = 0.42 is the Blackman time average, making the result
    the envelope-averaged Rabi frequency.
    """
    if waist <= 0:
        raise ParameterError(f"beam waist must be positive, got {waist}")
    if power < 0:
        raise ParameterError(f"beam power must be nonnegative, got {power}")
    return envelope_mean * 4 * power * dipole_factor / (HBAR * np.pi * waist**2)


@dataclass(frozen=True)
class Pulse:
    """One lattice pulse: envelope, peak Rabi frequency, detuning and phase.

    All fields SI; order_hint records which Bragg order the pulse targets
    (metadata for truncation windows and reporting, not dynamics).
    """

    envelope: Envelope
    rabi_peak: float        # rad/s, peak two-photon Rabi frequency
    delta_omega: float      # rad/s
    phase: float = 0.0      # rad
    order_hint: int = 1

    def __post_init__(self):
        if self.rabi_peak < 0:
            raise ParameterError(f"rabi_peak must be nonnegative, got {self.rabi_peak}")
        if self.order_hint < 1:
            raise ParameterError(f"order_hint must be >= 1, got {self.order_hint}")

    @property
    def duration(self):
        return self.envelope.duration

    @property
    def rabi_avg(self):
        """Envelope-averaged Rabi frequency (the lab-quoted convention)."""
        return self.rabi_peak * self.envelope.mean

    @classmethod
    def on_resonance(cls, cfg, n, tau, rabi_peak=None, rabi_avg=None, phase=0.0,
                     p0=0.0, envelope_kind="blackman", samples=()):
        """Pulse tuned to the n-th order resonance for initial momentum p0 (SI).

        Exactly one of rabi_peak / rabi_avg must be given.
        """
        if (rabi_peak is None) == (rabi_avg is None):
            raise ParameterError("give exactly one of rabi_peak or rabi_avg")
        env = Envelope(envelope_kind, tau, tuple(samples))
        if rabi_peak is None:
            rabi_peak = rabi_avg / env.mean
        return cls(envelope=env, rabi_peak=rabi_peak,
                   delta_omega=resonance_delta_omega(n, p0, cfg),
                   phase=phase, order_hint=n)

    def dimensionless(self, units):
        """(tau, rabi_peak, delta_omega, phase) in lattice-recoil units."""
        return (units.to_dimensionless(self.duration, "time"),
                units.to_dimensionless(self.rabi_peak, "frequency"),
                units.to_dimensionless(self.delta_omega, "frequency"),
                self.phase)


@dataclass(frozen=True)
class FreeEvolution:
    """Lattice-off segment of a pulse sequence."""

    duration: float  # seconds

    def __post_init__(self):
        if self.duration < 0:
            raise ParameterError(f"free evolution must be nonnegative, got {self.duration}")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses and free-evolution gaps.

    Each pulse's lattice phase restarts its local clock: the potential of
    item k is evaluated with t measured from that pulse's own start, so
    ``phase`` is the lattice phase at the start of the pulse.  For
    symmetric sequences (equal gaps) this matches the usual
    phi_1 - 2*phi_2 + phi_3 readout convention.
    """

    items: tuple

    def __post_init__(self):
        if not self.items:
            raise ParameterError("pulse sequence must not be empty")
        for it in self.items:
            if not isinstance(it, (Pulse, FreeEvolution)):
                raise ParameterError(f"sequence items must be Pulse or FreeEvolution, got {type(it)}")

    @property
    def total_duration(self):
        return sum(it.duration for it in self.items)

    @property
    def pulses(self):
        return [it for it in self.items if isinstance(it, Pulse)]

    @property
    def order_hint(self):
        return max((p.order_hint for p in self.pulses), default=1)


def mach_zehnder_sequence(cfg, n, tau_bs, omega_bs, tau_mirror, omega_mirror,
                          t_free, phi1=0.0, phi2=0.0, phi3=0.0, p0=0.0,
                          rabi_convention="peak"):
    """pi/2 - pi - pi/2 sequence on the n-th order resonance for momentum p0.

    omega_bs / omega_mirror follow rabi_convention ("peak" or "avg").
    t_free = 0 yields a valid back-to-back 3-pulse sequence.
    """
    if tau_bs <= 0 or tau_mirror <= 0:
        raise ParameterError("pulse durations must be positive")
    if t_free < 0:
        raise ParameterError("free evolution time must be nonnegative")
    kw = {"rabi_peak" if rabi_convention == "peak" else "rabi_avg": None}

    def mk(tau, omega, phi):
        kwargs = dict(kw)
        kwargs[next(iter(kwargs))] = omega
        return Pulse.on_resonance(cfg, n, tau, phase=phi, p0=p0, **kwargs)

    items = [mk(tau_bs, omega_bs, phi1)]
    if t_free > 0:
        items.append(FreeEvolution(t_free))
    items.append(mk(tau_mirror, omega_mirror, phi2))
    if t_free > 0:
        items.append(FreeEvolution(t_free))
    items.append(mk(tau_bs, omega_bs, phi3))
    return PulseSequence(tuple(items))
