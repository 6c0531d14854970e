"""Closed-form first-order probe susceptibilities of the two tripod arrangements.

All functions broadcast over numpy arrays of Raman detuning.  Subsystem
labels follow ``a_minus = delta - Delta_Z`` and ``a_plus = delta + Delta_Z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .liouvillian import E, G0, GM, GP, build_hamiltonian
from .model import OPTICAL_DECAY_BAR, Config, TripodModel

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Config1Params:
    delta_bar: float | np.ndarray
    delta_z_bar: float
    omega_c_bar: float
    gamma_r_bar: float
    delta_c_bar: float = 0.0
    amplitude: float = 1.0

    @property
    def a_minus(self):
        return self.delta_bar - self.delta_z_bar

    @property
    def a_plus(self):
        return self.delta_bar + self.delta_z_bar

    @property
    def lam(self) -> float:
        """Half width of each transparency Lorentzian."""
        return self.gamma_r_bar + 0.75 * abs(self.omega_c_bar) ** 2


@dataclass(frozen=True)
class Config2Params:
    delta_bar: float | np.ndarray
    delta_z_bar: float
    omega_c_bar: float
    gamma_r_bar: float
    delta_c_bar: float = 0.0
    amplitude: float = 1.0

    @property
    def a_minus(self):
        return self.delta_bar - self.delta_z_bar

    @property
    def a_plus(self):
        return self.delta_bar + self.delta_z_bar

    @property
    def b(self):
        return self.delta_bar + self.delta_c_bar - 1j * OPTICAL_DECAY_BAR

    @property
    def q(self):
        return self.delta_bar - 1j * self.gamma_r_bar

    @property
    def x(self) -> float:
        return 2 * self.gamma_r_bar + 1.5 * abs(self.omega_c_bar) ** 2

    @property
    def y(self):
        return self.delta_bar ** 2 + self.delta_z_bar ** 2


def _lambda_branch(a, omega_c, gamma_r, delta_c):
    """1 / [(a + Delta_C - i/3) - |Omega_C|^2 / (4 (a - i Gamma_R))].

    Written as (a - iG) / [(a + dc - i/3)(a - iG) - |Omega_C|^2/4] so that
    a = 0 with G = 0 is a regular point (the removable dark-state pole).
    """
    s = a - 1j * gamma_r
    return s / ((a + delta_c - 1j * OPTICAL_DECAY_BAR) * s - abs(omega_c) ** 2 / 4)


def chi_config1(p: Config1Params):
    """Sum of two detuned Lambda-EIT responses (probe perpendicular to B).

    ``delta_c_bar`` restores the coupling detuning that the printed formula
    drops; at its default of 0 the printed expression is reproduced.
    """
    terms = (_lambda_branch(p.a_plus, p.omega_c_bar, p.gamma_r_bar, p.delta_c_bar)
             + _lambda_branch(p.a_minus, p.omega_c_bar, p.gamma_r_bar, p.delta_c_bar))
    return p.amplitude / (2 * SQRT2) * terms


def im_chi_config1_lorentzian(p: Config1Params):
    """Two-Lorentzian approximation of Im chi for config1."""
    lam = p.lam
    oc2 = abs(p.omega_c_bar) ** 2
    dips = lam / (p.a_plus ** 2 + lam ** 2) + lam / (p.a_minus ** 2 + lam ** 2)
    return 3 * p.amplitude / SQRT2 * (1 - 3 * oc2 / 8 * dips)


def chi_config2(p: Config2Params, drop_raman_in_b: bool = False):
    """Probe susceptibility with a pi probe and sigma+/sigma- coupling.

    ``drop_raman_in_b`` replaces ``b`` by ``Delta_C - i/3``, i.e. neglects
    the Raman detuning against the optical width; the imaginary part is then
    exactly :func:`im_chi_config2`.
    """
    b = p.delta_c_bar - 1j * OPTICAL_DECAY_BAR if drop_raman_in_b else p.b
    prod = (p.a_minus - 1j * p.gamma_r_bar) * (p.a_plus - 1j * p.gamma_r_bar)
    return p.amplitude * prod / (2 * b * prod - p.q * abs(p.omega_c_bar) ** 2 / 2)


def im_chi_config2(p: Config2Params):
    gr = p.gamma_r_bar
    x, y = p.x, p.y
    am2, ap2 = p.a_minus ** 2, p.a_plus ** 2
    num = 2 * am2 * ap2 + gr * y * (2 * gr + x) + gr ** 3 * x
    den = (4 * am2 * ap2 + 4 * gr * x * y + x ** 2 * gr ** 2
           + 9 * p.delta_bar ** 2 * abs(p.omega_c_bar) ** 4 / 4)
    return 3 * p.amplitude * num / den


def chi_three_level(delta_bar, omega_c_bar: float, gamma_r_bar: float,
                    delta_c_bar: float = 0.0, amplitude: float = 1.0):
    """Standard Lambda-EIT susceptibility with the same normalization as config2."""
    s = delta_bar - 1j * gamma_r_bar
    b = delta_bar + delta_c_bar - 1j * OPTICAL_DECAY_BAR
    return amplitude * s / (2 * b * s - abs(omega_c_bar) ** 2 / 2)


def bare_absorption(configuration, amplitude: float = 1.0) -> float:
    """Im chi at delta = 0 with the coupling off; the Beer-Lambert reference."""
    if Config.parse(configuration) is Config.PERP:
        return 3 * amplitude / SQRT2
    return 1.5 * amplitude


def params_for(model: TripodModel, delta_bar=None, amplitude: float = 1.0):
    """Closed-form parameter set for ``model`` (optionally over a detuning grid)."""
    if delta_bar is None:
        delta_bar = model.raman_detuning_bar
    cls = Config1Params if model.configuration is Config.PERP else Config2Params
    return cls(delta_bar=delta_bar, delta_z_bar=model.delta_z_bar,
               omega_c_bar=model.coupling.rabi_bar, gamma_r_bar=model.rates.gammaR_bar,
               delta_c_bar=model.coupling.optical_detuning_bar, amplitude=amplitude)


def chi_analytic(model: TripodModel, delta_bar=None, amplitude: float = 1.0):
    p = params_for(model, delta_bar, amplitude)
    return chi_config1(p) if isinstance(p, Config1Params) else chi_config2(p)


@dataclass(frozen=True)
class MorrisShoreReduction:
    """Three-level (C, g0, e) system equivalent to config2 at zero field."""

    omega_c_eff: float
    omega_p: float
    gamma_r_bar: float
    delta_c_bar: float
    basis: np.ndarray  # rows: e, NC, g0, C in the (e, g-, g0, g+) basis
    rotated_hamiltonian: np.ndarray

    def chi(self, delta_bar, amplitude: float = 1.0):
        return chi_three_level(delta_bar, self.omega_c_eff, self.gamma_r_bar,
                               self.delta_c_bar, amplitude)


def morris_shore_reduce(model: TripodModel) -> MorrisShoreReduction:
    """Rotate g-/g+ into uncoupled (NC) and coupled (C) combinations.

    The coupling components on e-g- and e-g+ have equal amplitude, so
    NC = (g- - g+)/sqrt2 decouples and C = (g- + g+)/sqrt2 carries the whole
    coupling Rabi frequency.
    """
    if model.configuration is not Config.PARA:
        raise ValueError("Morris-Shore reduction applies to config2 only")
    if model.delta_z_bar != 0:
        raise ValueError("Morris-Shore reduction invalid for split sublevels")
    h = build_hamiltonian(model).matrix
    u = np.zeros((4, 4))
    u[0, E] = 1.0
    u[1, GM], u[1, GP] = 1 / SQRT2, -1 / SQRT2
    u[2, G0] = 1.0
    u[3, GM], u[3, GP] = 1 / SQRT2, 1 / SQRT2
    # elementwise sum rather than BLAS matmul, so that the equal and opposite
    # products in the NC row cancel exactly
    hr = (u[:, :, None, None] * h[None, :, :, None] * u.T[None, None, :, :]).sum(axis=(1, 2))
    if hr[0, 1] != 0 or hr[1, 0] != 0:
        raise ArithmeticError("dark combination is coupled to e")
    omega_eff = float(-2 * hr[0, 3].real)
    return MorrisShoreReduction(omega_eff, model.probe.rabi_bar, model.rates.gammaR_bar,
                                model.coupling.optical_detuning_bar, u, hr)

