"""Internal unit system: everything inside the solver runs in rescaled units.

The magnitudes of the physical inputs span ~23 decades in SI (diffusivities
around 1e-14 m^2/s against moduli around 1e9 Pa).  Rescaling the base units
compresses that range a lot and keeps the assembled systems better
conditioned.  The rescaling is a plain change of unit system: every quantity
is divided by the scale factor of its physical dimension, so the governing
equations keep their form exactly and outputs re-dimensionalize to SI without
approximation.

Dimensions are tracked as exponent tuples over the SI base units
(kg, m, s, K, A, mol).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Dim:
    """Exponents of the SI base units kg, m, s, K, A, mol."""

    kg: int = 0
    m: int = 0
    s: int = 0
    K: int = 0
    A: int = 0
    mol: int = 0

    def __mul__(self, other: "Dim") -> "Dim":
        return Dim(self.kg + other.kg, self.m + other.m, self.s + other.s,
                   self.K + other.K, self.A + other.A, self.mol + other.mol)

    def __truediv__(self, other: "Dim") -> "Dim":
        return Dim(self.kg - other.kg, self.m - other.m, self.s - other.s,
                   self.K - other.K, self.A - other.A, self.mol - other.mol)


NONE = Dim()
LENGTH = Dim(m=1)
AREA = Dim(m=2)
TIME = Dim(s=1)
TEMPERATURE = Dim(K=1)
VOLT = Dim(kg=1, m=2, s=-3, A=-1)
STRESS = Dim(kg=1, m=-1, s=-2)                    # Pa
CONCENTRATION = Dim(mol=1, m=-3)
CURRENT_DENSITY = Dim(A=1, m=-2)
DIFFUSIVITY = Dim(m=2, s=-1)
CONDUCTIVITY = Dim(kg=-1, m=-3, s=3, A=2)          # S/m
THERMAL_CONDUCTIVITY = Dim(kg=1, m=1, s=-3, K=-1)  # W/(m K)
VOL_HEAT_CAPACITY = Dim(kg=1, m=-1, s=-2, K=-1)    # J/(m^3 K)
MOLAR_VOLUME = Dim(m=3, mol=-1)
INV_TEMPERATURE = Dim(K=-1)
GAS_CONSTANT = Dim(kg=1, m=2, s=-2, K=-1, mol=-1)  # J/(mol K)
FARADAY = Dim(A=1, s=1, mol=-1)                    # C/mol
# k_BV carries m^2.5 mol^-0.5 s^-1; its half-integer exponents are handled by
# composing the factor directly (see ScaleSet.k_bv_factor).
DIFF_CONDUCTIVITY = CONDUCTIVITY * VOLT            # S/m * V, the kappa_D unit


@dataclass(frozen=True)
class ScaleSet:
    """Reference scales defining the internal unit system.

    ``length`` and ``time`` are the primary choices (defaults: the practical
    length unit 1e-4 m and the practical time unit of one minute).  The
    remaining references (potential, temperature, concentration, stress) pin
    down the rest of the base-unit scales; with all references at 1.0 the
    internal system is plain SI.
    """

    length: float = 1e-4          # m per internal length unit
    time: float = 60.0            # s per internal time unit
    potential: float = 1.0        # V per internal potential unit
    temperature: float = 1.0      # K per internal temperature unit
    concentration: float = 1e3    # mol/m^3 per internal concentration unit
    stress: float = 1e6           # Pa per internal stress unit

    def __post_init__(self):
        for name in ("length", "time", "potential", "temperature",
                     "concentration", "stress"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"scale '{name}' must be positive")

    @classmethod
    def identity(cls) -> "ScaleSet":
        return cls(length=1.0, time=1.0, potential=1.0, temperature=1.0,
                   concentration=1.0, stress=1.0)

    # Derived base-unit scale factors.  Stress pins the mass unit, potential
    # then pins the current unit, concentration the amount unit.
    @property
    def mass(self) -> float:
        return self.stress * self.length * self.time**2

    @property
    def current(self) -> float:
        return self.mass * self.length**2 / (self.time**3 * self.potential)

    @property
    def amount(self) -> float:
        return self.concentration * self.length**3

    def factor(self, dim: Dim) -> float:
        """SI units per internal unit for a quantity of dimension ``dim``."""
        return (self.mass ** dim.kg
                * self.length ** dim.m
                * self.time ** dim.s
                * self.temperature ** dim.K
                * self.current ** dim.A
                * self.amount ** dim.mol)

    def to_internal(self, value, dim: Dim):
        return value / self.factor(dim)

    def to_si(self, value, dim: Dim):
        return value * self.factor(dim)

    def k_bv_factor(self) -> float:
        """Scale factor for the reaction-rate constant (m^2.5 mol^-0.5 s^-1)."""
        return self.length**2.5 * self.amount**-0.5 / self.time

    def describe(self) -> dict:
        return {
            "length_m": self.length,
            "time_s": self.time,
            "potential_V": self.potential,
            "temperature_K": self.temperature,
            "concentration_mol_per_m3": self.concentration,
            "stress_Pa": self.stress,
            "mass_kg": self.mass,
            "current_A": self.current,
            "amount_mol": self.amount,
        }
