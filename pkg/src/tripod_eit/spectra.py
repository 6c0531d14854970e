"""Parameter sweeps and Beer-Lambert transmission spectra."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .model import (DEFAULT_PROBE_RATIO, DEFAULT_RATES, Config, RelaxationRates,
                    TripodModel, scale_frequency)
from .steady import SteadyStateTimeout, numeric_spectrum

BACKENDS = ("analytic", "numeric")
COLUMNS = ("config", "power_mW", "b_mG", "delta_hz", "re_chi", "im_chi", "transmission")


class SweepError(RuntimeError):
    """A grid point of a sweep could not be computed."""


def transmission(im_chi_normalized, optical_depth: float):
    """exp(-optical_depth * Im chi / Im chi_bare)."""
    if optical_depth < 0:
        raise ValueError("optical_depth must be >= 0")
    return np.exp(-optical_depth * np.asarray(im_chi_normalized, dtype=float))


@dataclass(frozen=True)
class SweepSpec:
    configuration: Config = Config.PERP
    model: str = "analytic"
    delta_range_hz: tuple[float, float] = (-3.0e5, 3.0e5)
    points: int = 2001
    powers_mW: tuple[float, ...] = (1.0, 10.0, 22.0)
    b_fields_mG: tuple[float, ...] = (0.0, 10.0, 30.0)
    optical_depth: float = 1.0
    rates: RelaxationRates = DEFAULT_RATES
    probe_ratio: float = DEFAULT_PROBE_RATIO
    coupling_detuning_hz: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "configuration", Config.parse(self.configuration))
        object.__setattr__(self, "powers_mW", tuple(float(p) for p in self.powers_mW))
        object.__setattr__(self, "b_fields_mG", tuple(float(b) for b in self.b_fields_mG))
        object.__setattr__(self, "delta_range_hz", tuple(float(x) for x in self.delta_range_hz))
        lo, hi = self.delta_range_hz
        if not lo < hi:
            raise ValueError("delta_range_hz must satisfy min < max")
        if int(self.points) != self.points or self.points < 3:
            raise ValueError("points must be an integer >= 3")
        if not self.powers_mW:
            raise ValueError("powers_mW must be non-empty")
        if not self.b_fields_mG:
            raise ValueError("b_fields_mG must be non-empty")
        if any(not np.isfinite(p) or p < 0 for p in self.powers_mW):
            raise ValueError("powers_mW must be finite and >= 0")
        if any(not np.isfinite(b) for b in self.b_fields_mG):
            raise ValueError("b_fields_mG must be finite")
        if self.model not in BACKENDS:
            raise ValueError(f"model must be one of {BACKENDS}, got {self.model!r}")
        if not self.optical_depth >= 0:
            raise ValueError("optical_depth must be >= 0")

    def delta_grid_hz(self) -> np.ndarray:
        return np.linspace(*self.delta_range_hz, int(self.points))

    def model_for(self, power_mW: float, b_mG: float) -> TripodModel:
        return TripodModel.from_lab(self.configuration, power_mW, b_mG,
                                    coupling_detuning_hz=self.coupling_detuning_hz,
                                    probe_ratio=self.probe_ratio, rates=self.rates,
                                    optical_depth=self.optical_depth)


@dataclass(frozen=True)
class Spectrum:
    """One (configuration, power, field) trace over a uniform detuning grid."""

    config: Config
    power_mW: float
    b_mG: float
    delta_hz: np.ndarray
    chi: np.ndarray  # normalized so the bare line has Im chi = 1
    transmission: np.ndarray
    optical_depth: float = 1.0

    @property
    def im_chi(self) -> np.ndarray:
        return self.chi.imag

    @property
    def bare_transmission(self) -> float:
        return float(np.exp(-self.optical_depth))


@dataclass
class SpectrumTable:
    """Flat table of sweep results, sorted by (power, B, delta)."""

    config: list = field(default_factory=list)
    power_mW: np.ndarray = field(default_factory=lambda: np.empty(0))
    b_mG: np.ndarray = field(default_factory=lambda: np.empty(0))
    delta_hz: np.ndarray = field(default_factory=lambda: np.empty(0))
    re_chi: np.ndarray = field(default_factory=lambda: np.empty(0))
    im_chi: np.ndarray = field(default_factory=lambda: np.empty(0))
    transmission: np.ndarray = field(default_factory=lambda: np.empty(0))
    optical_depth: float = 1.0

    def __len__(self) -> int:
        return len(self.delta_hz)

    def rows(self):
        for i in range(len(self)):
            yield (self.config[i], float(self.power_mW[i]), float(self.b_mG[i]),
                   float(self.delta_hz[i]), float(self.re_chi[i]), float(self.im_chi[i]),
                   float(self.transmission[i]))

    @classmethod
    def from_spectra(cls, spectra, optical_depth: float = 1.0) -> "SpectrumTable":
        spectra = sorted(spectra, key=lambda s: (s.config.value, s.power_mW, s.b_mG))
        if not spectra:
            return cls(optical_depth=optical_depth)
        cat = np.concatenate
        return cls(
            config=[s.config.value for s in spectra for _ in s.delta_hz],
            power_mW=cat([np.full(len(s.delta_hz), s.power_mW) for s in spectra]),
            b_mG=cat([np.full(len(s.delta_hz), s.b_mG) for s in spectra]),
            delta_hz=cat([s.delta_hz for s in spectra]),
            re_chi=cat([s.chi.real for s in spectra]),
            im_chi=cat([s.chi.imag for s in spectra]),
            transmission=cat([s.transmission for s in spectra]),
            optical_depth=optical_depth,
        )

    def spectra(self) -> list[Spectrum]:
        """Split back into per-(config, power, B) traces, in table order."""
        out = []
        keys = list(zip(self.config, self.power_mW, self.b_mG))
        start = 0
        for i in range(1, len(keys) + 1):
            if i == len(keys) or keys[i] != keys[start]:
                sl = slice(start, i)
                out.append(Spectrum(Config.parse(keys[start][0]), float(keys[start][1]),
                                    float(keys[start][2]), self.delta_hz[sl].copy(),
                                    self.re_chi[sl] + 1j * self.im_chi[sl],
                                    self.transmission[sl].copy(), self.optical_depth))
                start = i
        return out

    def check(self) -> None:
        """Raise ``ValueError`` unless the table invariants hold."""
        if np.any(self.transmission <= 0) or np.any(self.transmission > 1):
            raise ValueError("transmission outside (0, 1]")
        for s in self.spectra():
            steps = np.diff(s.delta_hz)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
                raise ValueError("detuning grid is not uniform and increasing")
        order = [(c, p, b) for c, p, b in zip(self.config, self.power_mW, self.b_mG)]
        if order != sorted(order):
            raise ValueError("rows are not sorted by (config, power, B)")


def compute_spectrum(model: TripodModel, delta_hz: np.ndarray, backend: str = "analytic",
                     power_mW: float = float("nan"), b_mG: float | None = None) -> Spectrum:
    """Normalized susceptibility and transmission of ``model`` over ``delta_hz``."""
    delta_bar = scale_frequency(np.asarray(delta_hz, dtype=float))
    bare = analytic.bare_absorption(model.configuration)
    if backend == "analytic":
        chi = analytic.chi_analytic(model, delta_bar)
    elif backend == "numeric":
        chi = numeric_spectrum(model, delta_bar)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    chi = np.asarray(chi, dtype=complex) / bare
    depth = model.geometry.optical_depth
    return Spectrum(model.configuration, power_mW,
                    model.zeeman.b_mG if b_mG is None else b_mG,
                    np.asarray(delta_hz, dtype=float), chi,
                    transmission(chi.imag, depth), depth)


def run_sweep(spec: SweepSpec, threads: int = 1) -> SpectrumTable:
    """Evaluate every (power, B) pair of ``spec`` on its detuning grid.

    Grid points are independent; ``threads > 1`` evaluates spectra
    concurrently, and the result is ordered canonically either way.
    """
    grid = spec.delta_grid_hz()
    pairs = list(itertools.product(spec.powers_mW, spec.b_fields_mG))

    def one(pair):
        power, b = pair
        try:
            return compute_spectrum(spec.model_for(power, b), grid, spec.model, power, b)
        except (ArithmeticError, ValueError, SteadyStateTimeout, np.linalg.LinAlgError) as exc:
            raise SweepError(f"{spec.configuration.value} backend={spec.model} "
                             f"power={power} mW B={b} mG: {exc}") from exc

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(one, pairs))
    else:
        spectra = [one(p) for p in pairs]
    return SpectrumTable.from_spectra(spectra, spec.optical_depth)
