"""Double-sided NV-cavity scattering: coefficients and transition rules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hilbert import Freq, Pol, Port, Spin

TWO_PI = 2 * math.pi

# Measured microdisk values, in GHz (angular rates are 2*pi times these).
G_ZPL_GHZ = 0.30
KAPPA_GHZ = 26.0
GAMMA_TOTAL_GHZ = 0.013
GAMMA_ZPL_GHZ = 0.0004


class InvalidParameterError(ValueError):
    """A physical parameter violates its invariant."""


@dataclass(frozen=True)
class CavityParams:
    """Rates and frequencies of one NV-cavity unit, all in one angular unit.

    Only detunings enter the coefficients, so the absolute frequency origin is
    arbitrary. ``kappa_s`` and ``gamma`` are the full rates (the steady-state
    formula uses ``kappa_s/2`` and ``gamma/2``).
    """

    g: float
    kappa: float
    kappa_s: float
    gamma: float
    omega: float = 0.0
    omega_c: float = 0.0
    omega_x: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "kappa_s", "gamma", "omega", "omega_c", "omega_x"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.g < 0:
            raise InvalidParameterError(f"g >= 0 violated (g = {self.g})")
        if self.kappa <= 0:
            raise InvalidParameterError(f"kappa > 0 violated (kappa = {self.kappa})")
        if self.kappa_s < 0:
            raise InvalidParameterError(f"kappa_s >= 0 violated (kappa_s = {self.kappa_s})")
        if self.gamma <= 0:
            raise InvalidParameterError(f"gamma > 0 violated (gamma = {self.gamma})")

    @property
    def cooperativity(self) -> float:
        return self.g ** 2 / (self.kappa * self.gamma)

    @property
    def ks_over_k(self) -> float:
        return self.kappa_s / self.kappa

    @property
    def detuning_c(self) -> float:
        return self.omega_c - self.omega

    @property
    def detuning_x(self) -> float:
        return self.omega_x - self.omega

    @classmethod
    def from_ratios(cls, cooperativity: float, ks_over_k: float, kappa: float = 1.0,
                    gamma: float | None = None, detuning_c: float = 0.0,
                    detuning_x: float = 0.0) -> "CavityParams":
        """Build parameters from g^2/(kappa*gamma) and kappa_s/kappa."""
        if gamma is None:
            gamma = kappa * GAMMA_ZPL_GHZ / KAPPA_GHZ
        if cooperativity < 0:
            raise InvalidParameterError(f"cooperativity >= 0 violated ({cooperativity})")
        g = math.sqrt(cooperativity * kappa * gamma)
        return cls(g=g, kappa=kappa, kappa_s=ks_over_k * kappa, gamma=gamma,
                   omega=0.0, omega_c=detuning_c, omega_x=detuning_x)


def preset_realistic(ks_over_k: float = 0.1) -> CavityParams:
    """Microdisk NV parameters at resonance, in rad/ns (2*pi*GHz).

    ``gamma`` is the zero-phonon-line rate: with it g^2/(kappa*gamma) = 8.654,
    whereas the total emission rate would give about 0.266.
    """
    kappa = TWO_PI * KAPPA_GHZ
    return CavityParams(
        g=TWO_PI * G_ZPL_GHZ,
        kappa=kappa,
        kappa_s=ks_over_k * kappa,
        gamma=TWO_PI * GAMMA_ZPL_GHZ,
    )


@dataclass(frozen=True)
class ScatteringCoeffs:
    """Hot-cavity (r, t) and cold-cavity (r0, t0) amplitudes."""

    r: complex
    t: complex
    r0: complex
    t0: complex

    def __post_init__(self):
        for name in ("r", "t", "r0", "t0"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise InvalidParameterError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @property
    def coupled_factor(self) -> complex:
        """Branch factor t + r of the coupled Block branch."""
        return self.t + self.r

    @property
    def uncoupled_factor(self) -> complex:
        return self.t0 + self.r0

    def is_passive(self, atol: float = 1e-12) -> bool:
        return (abs(self.r) ** 2 + abs(self.t) ** 2 <= 1 + atol
                and abs(self.r0) ** 2 + abs(self.t0) ** 2 <= 1 + atol)

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return (self.r, self.t, self.r0, self.t0)

    def to_json(self) -> dict:
        return {k: {"re": v.real, "im": v.imag}
                for k, v in zip(("r", "t", "r0", "t0"), self.as_tuple())}

    @classmethod
    def from_json(cls, data: dict) -> "ScatteringCoeffs":
        return cls(*(complex(data[k]["re"], data[k]["im"]) for k in ("r", "t", "r0", "t0")))


IDEAL = ScatteringCoeffs(1.0, 0.0, 0.0, -1.0)


def _reflection_transmission(p: CavityParams, g: float) -> tuple[complex, complex]:
    dipole = 1j * (p.omega_x - p.omega) + p.gamma / 2
    cavity = 1j * (p.omega_c - p.omega) + p.kappa_s / 2
    denom = dipole * (cavity + p.kappa) + g ** 2
    r = (dipole * cavity + g ** 2) / denom
    t = -p.kappa * dipole / denom
    return complex(r), complex(t)


def scattering_coeffs(p: CavityParams) -> ScatteringCoeffs:
    """Steady-state amplitudes in the weak-excitation limit (<sigma_z> = -1)."""
    r, t = _reflection_transmission(p, p.g)
    r0, t0 = _reflection_transmission(p, 0.0)
    return ScatteringCoeffs(r, t, r0, t0)


def is_coupled(port: Port, pol: Pol, freq: Freq, spin: Spin) -> bool:
    """Whether the photon drives the NV transition for this spin.

    R-down / L-up photons at w1 couple to |+>; R-up / L-down at w2 couple to |->.
    """
    down_r_or_up_l = (port is Port.DOWN) == (pol is Pol.R)
    if freq is Freq.W1:
        return down_r_or_up_l and spin is Spin.PLUS
    return (not down_r_or_up_l) and spin is Spin.MINUS


class TransitionKey(NamedTuple):
    port: Port
    pol: Pol
    freq: Freq
    spin: Spin


class Term(NamedTuple):
    coeff: complex
    port: Port
    pol: Pol


@dataclass(frozen=True)
class TransitionTable:
    """Scattering rule for each of the 16 (port, pol, freq, spin) inputs.

    Each input goes to ``t|same> + r|reversed port, flipped pol>`` (coupled) or
    the same with (t0, r0); terms with an exactly zero coefficient are dropped.
    Frequency and spin are preserved.
    """

    rules: dict

    def __getitem__(self, key) -> tuple[Term, ...]:
        return self.rules[TransitionKey(*key)]

    def __len__(self) -> int:
        return len(self.rules)

    def coupled_keys(self) -> list[TransitionKey]:
        return [k for k in self.rules if is_coupled(*k)]

    def matrix(self) -> np.ndarray:
        """16x16 map on (pol, freq, port, spin), little-endian in that order."""
        def idx(pol, freq, port, spin):
            return int(pol + 2 * freq + 4 * port + 8 * spin)

        m = np.zeros((16, 16), dtype=complex)
        for key, terms in self.rules.items():
            col = idx(key.pol, key.freq, key.port, key.spin)
            for term in terms:
                m[idx(term.pol, key.freq, term.port, key.spin), col] += term.coeff
        return m


def transition_table(c: ScatteringCoeffs) -> TransitionTable:
    rules = {}
    for port in Port:
        for pol in Pol:
            for freq in Freq:
                for spin in Spin:
                    key = TransitionKey(port, pol, freq, spin)
                    keep, flip = (c.t, c.r) if is_coupled(*key) else (c.t0, c.r0)
                    terms = []
                    if keep != 0:
                        terms.append(Term(keep, port, pol))
                    if flip != 0:
                        terms.append(Term(flip, Port(1 - port), Pol(1 - pol)))
                    rules[key] = tuple(terms)
    return TransitionTable(rules)
