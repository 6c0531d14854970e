"""Physical parameters and lab-to-scaled unit conversion for the He* tripod.

All frequencies inside the simulator are "barred": divided by 1 GHz, the
Doppler width that sets the optical coherence decay.  Decay rates quoted in
s^-1 are angular by default and are divided by 2*pi * 1 GHz instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

FREQUENCY_SCALE_HZ = 1.0e9
ANGULAR_SCALE = 2.0 * math.pi * FREQUENCY_SCALE_HZ

# coupling Rabi frequency (barred) reached with 22 mW of coupling power
RABI_AT_22MW = 8.6e-3
RABI_PER_SQRT_MW = RABI_AT_22MW / math.sqrt(22.0)

# probe Rabi frequency relative to the coupling one
DEFAULT_PROBE_RATIO = 1.0e-2
PERTURBATIVE_PROBE_RATIO = 1.0e-3
# probe used when the coupling is off and a ratio would give zero
MIN_PROBE_RABI = 1.0e-8

OPTICAL_DECAY_BAR = 1.0 / 3.0


class Config(str, enum.Enum):
    """Polarization arrangement of the tripod.

    ``PERP``: sigma+/sigma- probe on e-g-/e-g+, pi coupling on e-g0.
    ``PARA``: pi probe on e-g0, sigma+/sigma- coupling on e-g-/e-g+.
    """

    PERP = "config1"
    PARA = "config2"

    @classmethod
    def parse(cls, value: "str | Config") -> "Config":
        if isinstance(value, Config):
            return value
        key = str(value).strip().lower()
        aliases = {"1": cls.PERP, "config1": cls.PERP, "perp": cls.PERP,
                   "2": cls.PARA, "config2": cls.PARA, "para": cls.PARA}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown configuration {value!r}") from None


@dataclass(frozen=True)
class PhysicalConstants:
    bohr_magneton: float = 9.274e-24  # J/T
    planck_h: float = 6.62607015e-34  # J s
    lande_g: float = 2.002
    m_j: float = 1.0
    # optical coherence decay, angular, from the ~1 GHz Doppler width
    gamma_opt: float = ANGULAR_SCALE

    def __post_init__(self):
        for name in ("bohr_magneton", "planck_h", "lande_g", "m_j", "gamma_opt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")


DEFAULT_CONSTANTS = PhysicalConstants()


def zeeman_shift(b_mG: float, constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Zeeman shift mu_B * g * m_J * B / h in Hz for a field given in mG."""
    if not math.isfinite(b_mG):
        raise ValueError(f"magnetic field must be finite, got {b_mG!r}")
    b_tesla = b_mG * 1e-7
    return (constants.bohr_magneton * constants.lande_g * constants.m_j
            * b_tesla / constants.planck_h)


def power_to_rabi_scaled(p_mW: float) -> float:
    """Barred coupling Rabi frequency from beam power, using a sqrt(P) law."""
    if not math.isfinite(p_mW) or p_mW < 0:
        raise ValueError(f"power must be finite and non-negative, got {p_mW!r}")
    return RABI_PER_SQRT_MW * math.sqrt(p_mW)


def scale_frequency(f_hz):
    return f_hz / FREQUENCY_SCALE_HZ


def unscale_frequency(f_bar):
    return f_bar * FREQUENCY_SCALE_HZ


def scale_rate(rate_per_s: float, angular: bool = True) -> float:
    """Barred decay rate.  ``angular=False`` divides by 1e9 only."""
    return rate_per_s / (ANGULAR_SCALE if angular else FREQUENCY_SCALE_HZ)


@dataclass(frozen=True)
class RelaxationRates:
    """Barred relaxation rates.

    ``gammaR_bar`` is the total ground-coherence decay and already contains
    the transit contribution, so it may not be smaller than ``gammaT_bar``.
    """

    gamma0_bar: float
    gammaT_bar: float
    gammaR_bar: float
    optical_bar: float = OPTICAL_DECAY_BAR

    def __post_init__(self):
        for name in ("gamma0_bar", "gammaT_bar", "gammaR_bar", "optical_bar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if self.gammaR_bar < self.gammaT_bar:
            raise ValueError("gammaR_bar must include the transit rate (gammaR_bar >= gammaT_bar)")
        if self.optical_bar < self.gamma0_bar / 2 + self.gammaT_bar:
            raise ValueError("optical coherence decay is below its radiative + transit floor")

    @classmethod
    def from_lab(cls, gamma0: float = 1e7, gamma_t: float = 1e3, gamma_r: float = 1e4,
                 angular: bool = True) -> "RelaxationRates":
        return cls(scale_rate(gamma0, angular), scale_rate(gamma_t, angular),
                   scale_rate(gamma_r, angular))


DEFAULT_RATES = RelaxationRates.from_lab()


@dataclass(frozen=True)
class DriveField:
    role: str  # "probe" or "coupling"
    rabi_bar: float
    optical_detuning_bar: float = 0.0

    def __post_init__(self):
        if self.role not in ("probe", "coupling"):
            raise ValueError(f"role must be 'probe' or 'coupling', got {self.role!r}")
        if not (math.isfinite(self.rabi_bar) and self.rabi_bar >= 0):
            raise ValueError(f"rabi_bar must be finite and >= 0, got {self.rabi_bar!r}")


@dataclass(frozen=True)
class ZeemanField:
    b_mG: float
    delta_z_bar: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta_z_bar", scale_frequency(zeeman_shift(self.b_mG)))


@dataclass(frozen=True)
class MediumGeometry:
    length_cm: float = 6.0
    optical_depth: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.optical_depth) and self.optical_depth >= 0):
            raise ValueError(f"optical_depth must be >= 0, got {self.optical_depth!r}")
        if not (self.length_cm > 0):
            raise ValueError("length_cm must be positive")


@dataclass(frozen=True)
class TripodModel:
    """Complete, immutable description of one tripod steady-state problem.

    The Raman detuning is not stored; it is always the difference of the
    probe and coupling optical detunings.
    """

    configuration: Config
    probe: DriveField
    coupling: DriveField
    zeeman: ZeemanField = ZeemanField(0.0)
    rates: RelaxationRates = DEFAULT_RATES
    geometry: MediumGeometry = MediumGeometry()

    def __post_init__(self):
        object.__setattr__(self, "configuration", Config.parse(self.configuration))
        if self.probe.role != "probe" or self.coupling.role != "coupling":
            raise ValueError("TripodModel needs exactly one probe and one coupling drive")

    @property
    def raman_detuning_bar(self) -> float:
        return self.probe.optical_detuning_bar - self.coupling.optical_detuning_bar

    @property
    def delta_z_bar(self) -> float:
        return self.zeeman.delta_z_bar

    @property
    def perturbative(self) -> bool:
        """Probe weak enough for the first-order closed forms."""
        return self.probe.rabi_bar <= PERTURBATIVE_PROBE_RATIO * self.coupling.rabi_bar

    def with_raman_detuning(self, delta_bar: float) -> "TripodModel":
        """Copy with the probe retuned so that the Raman detuning is ``delta_bar``."""
        probe = replace(self.probe,
                        optical_detuning_bar=self.coupling.optical_detuning_bar + delta_bar)
        return replace(self, probe=probe)

    @classmethod
    def from_lab(cls, configuration, power_mW: float, b_mG: float,
                 delta_hz: float = 0.0, coupling_detuning_hz: float = 0.0,
                 probe_ratio: float = DEFAULT_PROBE_RATIO,
                 probe_rabi_bar: float | None = None,
                 rates: RelaxationRates = DEFAULT_RATES,
                 optical_depth: float = 1.0) -> "TripodModel":
        omega_c = power_to_rabi_scaled(power_mW)
        if probe_rabi_bar is None:
            probe_rabi_bar = max(probe_ratio * omega_c, MIN_PROBE_RABI)
        delta_c = scale_frequency(coupling_detuning_hz)
        return cls(
            configuration=Config.parse(configuration),
            probe=DriveField("probe", probe_rabi_bar, delta_c + scale_frequency(delta_hz)),
            coupling=DriveField("coupling", omega_c, delta_c),
            zeeman=ZeemanField(b_mG),
            rates=rates,
            geometry=MediumGeometry(optical_depth=optical_depth),
        )
