"""Bath spectral densities, thermal occupations and the thermofield split.

A bosonic bath at inverse temperature ``beta`` is purified by an auxiliary
copy with negated frequencies.  After the Bogoliubov rotation the doubled
bath starts in its vacuum and the system couples to two zero-temperature
baths whose coupling measures are ``u(w)^2 J(w)`` and ``v(w)^2 J(w)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

BOSONIC = "bosonic"
FERMIONIC = "fermionic"

#: Inverse temperature of a zero-temperature bath.  Always tested with
#: :func:`is_zero_temperature`, never used in arithmetic.
ZERO_TEMPERATURE = math.inf

#: Conversion from J(w) to the chain-mapping measure dmu(w) = MEASURE_SCALE * J(w) dw
#: for the coupling S_x (x) sum g (a + a^dag).  Calibrated so that the
#: independent-boson mean heat saturates at alpha * omega_c.
MEASURE_SCALE = 1.0

#: Default hard frequency cutoff in units of omega_c for Ohmic densities.
DEFAULT_CUTOFF_FACTOR = 10.0

_SMALL_OMEGA = 1e-12


def is_zero_temperature(beta: float) -> bool:
    return math.isinf(beta)


@dataclass(frozen=True)
class SpectralDensity:
    """Analytic Ohmic or tabulated spectral density on ``[0, domain_max]``.

    Use :meth:`ohmic` or :meth:`tabulated` rather than the constructor.
    """

    kind: str
    domain_max: float
    alpha: float = 0.0
    cutoff: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("ohmic", "tabulated"):
            raise ValueError(f"unknown spectral density kind {self.kind!r}")
        if not self.domain_max > 0:
            raise ValueError("domain_max must be positive")
        if self.kind == "ohmic":
            if self.alpha < 0:
                raise ValueError("alpha must be non-negative")
            if not self.cutoff > 0:
                raise ValueError("cutoff frequency must be positive")
        else:
            w = np.array([p[0] for p in self.table])
            j = np.array([p[1] for p in self.table])
            if len(w) < 2:
                raise ValueError("a tabulated density needs at least two points")
            if w[0] < 0:
                raise ValueError("tabulated frequencies must be non-negative")
            if np.any(np.diff(w) <= 0):
                raise ValueError("tabulated frequencies must be strictly increasing")
            if np.any(j < 0):
                raise ValueError("tabulated J(w) must be non-negative")
            if self.domain_max > w[-1] * (1 + 1e-12):
                raise ValueError("domain_max exceeds the tabulated range")

    @classmethod
    def ohmic(cls, alpha: float, cutoff: float, domain_max: float | None = None) -> "SpectralDensity":
        if domain_max is None:
            domain_max = DEFAULT_CUTOFF_FACTOR * cutoff
        return cls("ohmic", float(domain_max), alpha=float(alpha), cutoff=float(cutoff))

    @classmethod
    def tabulated(cls, omegas, values, domain_max: float | None = None) -> "SpectralDensity":
        pairs = tuple((float(w), float(j)) for w, j in zip(omegas, values))
        if domain_max is None:
            domain_max = pairs[-1][0] if pairs else 1.0
        return cls("tabulated", float(domain_max), table=pairs)

    @classmethod
    def from_file(cls, path: str | Path, domain_max: float | None = None) -> "SpectralDensity":
        """Read a two-column ``w J(w)`` text file; ``#`` starts a comment."""
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
            rows.append((float(parts[0]), float(parts[1])))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        w, j = zip(*rows)
        return cls.tabulated(w, j, domain_max)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind == "ohmic":
            out = 2.0 * self.alpha * omega * np.exp(-omega / self.cutoff)
        else:
            w = np.array([p[0] for p in self.table])
            j = np.array([p[1] for p in self.table])
            out = np.interp(omega, w, j, left=0.0, right=0.0)
        return np.where((omega >= 0) & (omega <= self.domain_max), out, 0.0)

    def over_omega(self, omega):
        """J(w)/w, finite as w -> 0."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "ohmic":
            out = 2.0 * self.alpha * np.exp(-omega / self.cutoff)
            return np.where((omega >= 0) & (omega <= self.domain_max), out, 0.0)
        w0, j0 = self.table[0]
        w1, j1 = self.table[1]
        slope = (j1 - j0) / (w1 - w0) if w0 == 0.0 else 0.0
        safe = np.where(omega > _SMALL_OMEGA, omega, 1.0)
        return np.where(omega > _SMALL_OMEGA, self(omega) / safe, slope)

    @property
    def is_zero(self) -> bool:
        if self.kind == "ohmic":
            return self.alpha == 0.0
        return all(p[1] == 0.0 for p in self.table)


@dataclass(frozen=True)
class BathSpec:
    spectral: SpectralDensity
    beta: float = ZERO_TEMPERATURE
    mu: float = 0.0
    statistics: str = BOSONIC

    def __post_init__(self):
        if self.statistics not in (BOSONIC, FERMIONIC):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        if math.isnan(self.beta) or self.beta < 0:
            raise ValueError("beta must be non-negative (use ZERO_TEMPERATURE for T = 0)")
        if self.statistics == BOSONIC and self.mu != 0.0:
            raise ValueError("bosonic baths require mu = 0")

    @classmethod
    def from_temperature(cls, spectral: SpectralDensity, temperature: float, **kw) -> "BathSpec":
        if temperature < 0:
            raise ValueError("temperature must be non-negative")
        beta = ZERO_TEMPERATURE if temperature == 0 else 1.0 / temperature
        return cls(spectral, beta, **kw)

    @property
    def eta(self) -> int:
        return 1 if self.statistics == BOSONIC else 0

    @property
    def zero_temperature(self) -> bool:
        return is_zero_temperature(self.beta)


def thermal_occupation(omega, bath: BathSpec):
    """Bose-Einstein or Fermi-Dirac occupation ``1/(exp(beta (w - mu)) + (-1)^eta)``."""
    omega = np.asarray(omega, dtype=float)
    if bath.statistics == BOSONIC and np.any(omega <= 0):
        raise ValueError("bosonic occupation is only defined for omega > 0")
    x = omega - bath.mu
    if bath.zero_temperature:
        if bath.statistics == BOSONIC:
            return np.zeros_like(omega)
        return np.where(x > 0, 0.0, np.where(x < 0, 1.0, 0.5))
    if bath.statistics == BOSONIC:
        y = bath.beta * x
        return np.exp(-y) / -np.expm1(-y)  # 1 / (e^y - 1) without overflow
    # logistic form avoids overflow for large beta * x
    return 0.5 * (1.0 - np.tanh(0.5 * bath.beta * x))


@dataclass(frozen=True)
class BogoliubovFactors:
    u: Callable
    v: Callable


def bogoliubov_coefficients(omega, bath: BathSpec):
    """Return ``(u, v)`` with ``v = sqrt(n)`` and ``u^2 + (-1)^eta v^2 = 1``."""
    n = thermal_occupation(omega, bath)
    v = np.sqrt(n)
    # bosons: u^2 - v^2 = 1, fermions: u^2 + v^2 = 1
    sign = 1.0 if bath.eta == 1 else -1.0
    u = np.sqrt(1.0 + sign * n)
    return u, v


def bogoliubov_factors(bath: BathSpec) -> BogoliubovFactors:
    return BogoliubovFactors(
        u=lambda w: bogoliubov_coefficients(w, bath)[0],
        v=lambda w: bogoliubov_coefficients(w, bath)[1],
    )


@dataclass(frozen=True)
class Measure:
    """A non-negative density on ``[0, domain_max]`` (vectorised callable)."""

    density: Callable = field(repr=False)
    domain_max: float
    label: str = ""
    is_zero: bool = False
    steep_near_zero: bool = False

    def __call__(self, omega):
        return self.density(np.asarray(omega, dtype=float))

    def scaled(self, factor: float) -> "Measure":
        """Measure in rescaled frequency units, w -> factor * w (mass is preserved up to factor)."""
        dens = self.density
        return Measure(
            lambda w: dens(w / factor),
            self.domain_max * factor,
            self.label,
            self.is_zero,
            self.steep_near_zero,
        )


def _occupation_times_density(spectral: SpectralDensity, beta: float):
    # n(w) J(w) = (J(w)/w) * w / expm1(beta w); the second factor -> 1/beta at w -> 0
    def f(omega):
        omega = np.asarray(omega, dtype=float)
        x = beta * omega
        small = omega < _SMALL_OMEGA * max(spectral.cutoff, 1.0)
        safe = np.where(small, 1.0, x)
        ratio = np.where(small, 1.0 / beta, omega / np.expm1(safe))
        return spectral.over_omega(omega) * ratio

    return f


def thermofield_split(bath: BathSpec, scale: float = MEASURE_SCALE) -> tuple[Measure, Measure]:
    """Split a thermal bath into the coupling measures of the original and
    auxiliary zero-temperature chains.

    Returns ``(measure_O, measure_A)`` with densities ``scale * u^2 J`` and
    ``scale * v^2 J``.  At zero temperature ``measure_A`` is flagged
    ``is_zero`` and the auxiliary chain must be omitted.
    """
    spectral = bath.spectral
    omax = spectral.domain_max
    if bath.zero_temperature:
        o = Measure(lambda w: scale * spectral(w), omax, "O", spectral.is_zero)
        a = Measure(lambda w: np.zeros_like(np.asarray(w, dtype=float)), omax, "A", True)
        return o, a
    if bath.statistics == FERMIONIC:
        def occ(w):
            return thermal_occupation(w, bath)
        o = Measure(lambda w: scale * (1.0 - occ(w)) * spectral(w), omax, "O", spectral.is_zero)
        a = Measure(lambda w: scale * occ(w) * spectral(w), omax, "A", spectral.is_zero)
        return o, a
    nj = _occupation_times_density(spectral, bath.beta)
    o = Measure(lambda w: scale * (spectral(w) + nj(w)), omax, "O", spectral.is_zero, True)
    a = Measure(lambda w: scale * nj(w), omax, "A", spectral.is_zero, True)
    return o, a
