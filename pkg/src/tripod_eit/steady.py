"""Steady states of the tripod Liouvillian and the probe susceptibility."""

from __future__ import annotations

import numpy as np

from .liouvillian import (DIM, E, G0, GM, GP, DensityMatrix, LiouvillianMatrix,
                          build_liouvillian, detuning_generator, unvec, vec)
from .model import Config, TripodModel


class DegenerateSteadyStateError(ValueError):
    """The Liouvillian kernel is not one-dimensional."""


class SteadyStateTimeout(RuntimeError):
    def __init__(self, residual: float, steps: float):
        super().__init__(f"time integration did not converge after {steps:.3g} steps "
                         f"(residual {residual:.3e})")
        self.residual = residual
        self.steps = steps


# relative singular-value threshold for the kernel dimension test
KERNEL_RTOL = 1e-13


def kernel_dimensions(lmats: np.ndarray) -> np.ndarray:
    """Numerical kernel dimension of each matrix in a (..., n, n) stack."""
    s = np.linalg.svd(lmats, compute_uv=False)
    scale = np.where(s[..., :1] > 0, s[..., :1], 1.0)
    return np.sum(s <= KERNEL_RTOL * scale, axis=-1)


def kernel_dimension(lv: LiouvillianMatrix) -> int:
    return int(kernel_dimensions(lv.matrix[None])[0])


def solve_steady_stack(lmats: np.ndarray) -> np.ndarray:
    """Steady states for a (k, 16, 16) stack of Liouvillians, shape (k, 4, 4).

    The e-e population row is replaced by the trace constraint and the
    dense system is solved directly, followed by one round of iterative
    refinement.
    """
    lmats = np.asarray(lmats, dtype=complex)
    dims = kernel_dimensions(lmats)
    bad = np.flatnonzero(dims != 1)
    if bad.size:
        raise DegenerateSteadyStateError(
            f"degenerate steady state: Liouvillian kernel has dimension {dims[bad[0]]}"
            f" (stack index {bad[0]})")
    a = lmats.copy()
    a[:, 0, :] = vec(np.eye(DIM))
    rhs = np.zeros((len(a), DIM * DIM, 1), dtype=complex)
    rhs[:, 0, 0] = 1.0
    x = np.linalg.solve(a, rhs)
    x = x + np.linalg.solve(a, rhs - a @ x)

    rho = x[:, :, 0].reshape(len(a), DIM, DIM).transpose(0, 2, 1)  # undo column stacking
    rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
    rho = rho / np.trace(rho, axis1=1, axis2=2).real[:, None, None]

    vecs = rho.transpose(0, 2, 1).reshape(len(a), DIM * DIM, 1)
    residual = np.max(np.abs(lmats @ vecs), axis=(1, 2))
    norm = np.max(np.abs(lmats).sum(axis=2), axis=1)
    worst = np.argmax(residual / np.maximum(norm, 1e-300))
    if residual[worst] >= 1e-12 * max(norm[worst], 1e-300):
        raise ArithmeticError(f"steady-state residual {residual[worst]:.3e} too large "
                              f"(stack index {worst})")
    return rho


def solve_steady(lv: LiouvillianMatrix) -> DensityMatrix:
    """Unique rho with L vec(rho) = 0 and tr(rho) = 1."""
    return DensityMatrix(solve_steady_stack(lv.matrix[None])[0])


def evolve_to_steady(lv: LiouvillianMatrix, rho0: DensityMatrix | np.ndarray,
                     tol: float = 1e-9, max_steps: float = 2.0 ** 60) -> DensityMatrix:
    """Fixed-step RK4 integration of d vec(rho)/dt = L vec(rho) to stationarity.

    The step is 0.1 / ||L||_inf.  Because the equation is linear, one RK4
    step is the matrix ``1 + E`` with ``E = hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24``
    and 2N steps follow from N steps as ``E -> 2E + E^2``.  The step count is
    doubled this way until ``||d rho/dt||_inf < tol`` and the state moved by
    less than ``tol / 10`` over the last doubling.  Keeping ``E`` apart from
    the identity preserves the relative precision of the slow rates.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho0 = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    lm = lv.matrix
    v0 = vec(rho0).astype(complex)
    norm = np.max(np.abs(lm).sum(axis=1))
    if norm == 0.0:
        return DensityMatrix(rho0.copy())

    hl = (0.1 / norm) * lm
    hl2 = hl @ hl
    e = hl + hl2 / 2 + hl2 @ hl / 6 + hl2 @ hl2 / 24
    steps = 1.0
    v = v0 + e @ v0
    while True:
        residual = np.max(np.abs(lm @ v))
        e = 2 * e + e @ e
        steps *= 2
        v_next = v0 + e @ v0
        moved = np.max(np.abs(v_next - v))
        v = v_next
        if residual < tol and moved < tol / 10:
            break
        if steps >= max_steps:
            raise SteadyStateTimeout(float(np.max(np.abs(lm @ v))), steps)
    return DensityMatrix(unvec(v))


def steady_state(model: TripodModel) -> DensityMatrix:
    return solve_steady(build_liouvillian(model))


def population_difference(rho: DensityMatrix, configuration: Config) -> float:
    """Population difference across the probed transition(s).

    Averaged over g- and g+ for config1, so that a fully pumped config1
    atom gives 0.5 and a fully pumped config2 atom gives 1.
    """
    m = rho.matrix.real
    if Config.parse(configuration) is Config.PERP:
        return 0.5 * (m[GM, GM] + m[GP, GP]) - m[E, E]
    return m[G0, G0] - m[E, E]


NOMINAL_POPULATION_DIFFERENCE = {Config.PERP: 0.5, Config.PARA: 1.0}


def probe_susceptibility_numeric(rho: DensityMatrix, model: TripodModel,
                                 amplitude: float = 1.0,
                                 population: str = "actual") -> complex:
    """Probe susceptibility from the steady-state optical coherences.

    The scale matches the closed forms: ``amplitude`` plays the role of the
    lumped prefactor, which contains the population difference ``w`` of the
    probed transition.  ``"actual"`` takes ``w`` from ``rho`` itself, so the
    coupling-off limit reproduces the bare absorption exactly;
    ``"nominal"`` uses the fully pumped value (0.5 or 1).
    """
    om_p = model.probe.rabi_bar
    if om_p == 0:
        raise ZeroDivisionError("probe Rabi frequency is zero; use the analytic "
                                "susceptibilities for the zero-probe limit")
    cfg = model.configuration
    if population == "nominal":
        w = NOMINAL_POPULATION_DIFFERENCE[cfg]
    elif population == "actual":
        w = population_difference(rho, cfg)
    else:
        raise ValueError(f"population must be 'nominal' or 'actual', got {population!r}")
    m = rho.matrix
    if cfg is Config.PERP:
        # chi = A1/(2 sqrt2) sum 1/D and rho_eg/Omega_P = (w/sqrt2)/(2 D)
        return complex(amplitude * (m[E, GM] + m[E, GP]) / (w * om_p))
    return complex(amplitude * m[E, G0] / (w * om_p))


def _chi_from_stack(rho: np.ndarray, cfg: Config, om_p: float, amplitude: float,
                    population: str) -> np.ndarray:
    if population == "actual":
        if cfg is Config.PERP:
            w = 0.5 * (rho[:, GM, GM] + rho[:, GP, GP]).real - rho[:, E, E].real
        else:
            w = rho[:, G0, G0].real - rho[:, E, E].real
    elif population == "nominal":
        w = NOMINAL_POPULATION_DIFFERENCE[cfg]
    else:
        raise ValueError(f"population must be 'nominal' or 'actual', got {population!r}")
    if cfg is Config.PERP:
        return amplitude * (rho[:, E, GM] + rho[:, E, GP]) / (w * om_p)
    return amplitude * rho[:, E, G0] / (w * om_p)


def numeric_spectrum(model: TripodModel, delta_bar, amplitude: float = 1.0,
                     population: str = "actual", return_states: bool = False):
    """Steady-state probe susceptibility over an array of Raman detunings.

    Only the probe detuning changes along the sweep, and the Liouvillian is
    affine in it, so the stack is ``L(delta) = L(0) + delta * dL``.
    """
    delta_bar = np.atleast_1d(np.asarray(delta_bar, dtype=float))
    if model.probe.rabi_bar == 0:
        raise ZeroDivisionError("probe Rabi frequency is zero; use the analytic "
                                "susceptibilities for the zero-probe limit")
    l0 = build_liouvillian(model.with_raman_detuning(0.0)).matrix
    dl = detuning_generator(model.configuration)
    stack = l0[None, :, :] + delta_bar[:, None, None] * dl[None, :, :]
    rho = solve_steady_stack(stack)
    chi = _chi_from_stack(rho, model.configuration, model.probe.rabi_bar, amplitude,
                          population)
    return (chi, rho) if return_states else chi
