"""Physical constants, atom/laser configuration, and the dimensionless unit
system used by every propagator.

Internally all dynamics run in lattice-recoil units: hbar = 1, momentum in
units of hbar*k_eff, energy in hbar*omega_k and time in 1/omega_k, where
omega_k = hbar*k_eff^2/(2m) is the two-photon recoil angular frequency
(the n = 1 Bragg resonance). Positions are measured in 1/k_eff, so the
lattice period is 2*pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParameterError

# CODATA 2018
HBAR = 1.054571817e-34          # J s
ATOMIC_MASS_KG = 1.660539066e-27  # kg

# AME 2020 atomic mass of Rb-87
RB87_MASS_U = 86.909180531
RB87_MASS_KG = RB87_MASS_U * ATOMIC_MASS_KG

# Effective wavelength of the Bragg beams used for the Rb-87 default.
RB87_WAVELENGTH_M = 780.226e-9


@dataclass(frozen=True)
class PhysicalConfig:
    """Atom and laser constants for one simulation setup.

    k_eff is taken as twice the single-beam wavenumber (counterpropagating
    beams); the kHz-scale frequency difference between the beams shifts
    k_eff at the 1e-11 level and is ignored.
    """

    atom_mass: float            # kg
    wavelength: float           # m
    label: str = ""
    k_eff: float = field(init=False)
    recoil_angular_frequency: float = field(init=False)

    def __post_init__(self):
        if self.atom_mass <= 0:
            raise ParameterError(f"atom_mass must be positive, got {self.atom_mass}")
        if self.wavelength <= 0:
            raise ParameterError(f"wavelength must be positive, got {self.wavelength}")
        k_eff = 2 * (2 * np.pi / self.wavelength)
        object.__setattr__(self, "k_eff", k_eff)
        object.__setattr__(self, "recoil_angular_frequency",
                           HBAR * k_eff**2 / (2 * self.atom_mass))

    @property
    def omega_k(self):
        """Two-photon recoil angular frequency hbar*k_eff^2/(2m) in rad/s."""
        return self.recoil_angular_frequency

    def units(self):
        return UnitSystem(self)


def default_rb87():
    """Rb-87 with counterpropagating beams at 780.226 nm.

    The derived two-photon recoil comes out at omega_k/(2*pi) = 15.08 kHz.
    """
    return PhysicalConfig(atom_mass=RB87_MASS_KG, wavelength=RB87_WAVELENGTH_M,
                          label="Rb-87 D2")


_KINDS = ("time", "momentum", "frequency", "length", "energy")


@dataclass(frozen=True)
class UnitSystem:
    """Conversions between SI and the dimensionless lattice-recoil units.

    momentum_unit = hbar*k_eff, time_unit = 1/omega_k, energy_unit =
    hbar*omega_k, length_unit = 1/k_eff.  "frequency" converts angular
    frequencies (rad/s) to units of omega_k.
    """

    cfg: PhysicalConfig

    @property
    def momentum_unit(self):
        return HBAR * self.cfg.k_eff

    @property
    def time_unit(self):
        return 1.0 / self.cfg.omega_k

    @property
    def energy_unit(self):
        return HBAR * self.cfg.omega_k

    @property
    def length_unit(self):
        return 1.0 / self.cfg.k_eff

    def _unit(self, kind):
        if kind == "time":
            return self.time_unit
        if kind == "momentum":
            return self.momentum_unit
        if kind == "frequency":
            return self.cfg.omega_k
        if kind == "length":
            return self.length_unit
        if kind == "energy":
            return self.energy_unit
        raise ConfigurationError(
            f"unknown quantity kind {kind!r}; expected one of {_KINDS}")

    def to_dimensionless(self, value, kind):
        """Divide an SI value by the matching unit."""
        return value / self._unit(kind)

    def from_dimensionless(self, value, kind):
        """Inverse of :meth:`to_dimensionless`."""
        return value * self._unit(kind)
