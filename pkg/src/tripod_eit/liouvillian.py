"""Rotating-frame Hamiltonian, relaxation superoperator and Liouvillian.

Basis order is (e, g-, g0, g+).  Density matrices are vectorized by
stacking columns, ``vec(rho)[i + 4*j] == rho[i, j]``, so that
``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.

The transition e-g(-/+) sits at omega0 -/+ Delta_Z.  Each ground level is
moved into the frame of the field that connects it to ``e``, which makes
every coherence stationary:

=========  ============  ============
level      config1       config2
=========  ============  ============
e          0             0
g-         probe         coupling
g0         coupling      probe
g+         probe         coupling
=========  ============  ============
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Config, RelaxationRates, TripodModel

E, GM, G0, GP = 0, 1, 2, 3
LEVELS = ("e", "g-", "g0", "g+")
GROUND = (GM, G0, GP)
DIM = 4

_FRAMES = {
    Config.PERP: {"e": None, "g-": "probe", "g0": "coupling", "g+": "probe"},
    Config.PARA: {"e": None, "g-": "coupling", "g0": "probe", "g+": "coupling"},
}


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    n = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((n, n), order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> a @ rho."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> rho @ a."""
    return np.kron(a.T, np.eye(a.shape[0]))


@dataclass(frozen=True)
class HamiltonianRWA:
    matrix: np.ndarray
    frame: dict  # level -> field whose photon links it to e (None for e)

    def __post_init__(self):
        m = self.matrix
        if m.shape != (DIM, DIM) or not np.array_equal(m, m.conj().T):
            raise ValueError("Hamiltonian must be an exactly Hermitian 4x4 matrix")


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    HERMITIAN_TOL = 1e-12
    TRACE_TOL = 1e-10
    POSITIVITY_TOL = 1e-8

    def population(self, level: int) -> float:
        return float(self.matrix[level, level].real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm).min())

    def check(self) -> None:
        """Raise ``ValueError`` if any density-matrix invariant is violated."""
        if self.hermiticity_error() > self.HERMITIAN_TOL:
            raise ValueError(f"not Hermitian: {self.hermiticity_error():.3e}")
        if self.trace_error() > self.TRACE_TOL:
            raise ValueError(f"trace differs from 1 by {self.trace_error():.3e}")
        if self.min_eigenvalue() < -self.POSITIVITY_TOL:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.3e}")


@dataclass(frozen=True)
class LiouvillianMatrix:
    matrix: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    def trace_row_defect(self) -> float:
        """max |vec(1)^H L|, zero for a trace-preserving generator."""
        return float(np.max(np.abs(vec(np.eye(DIM)).conj() @ self.matrix)))


def build_hamiltonian(model: TripodModel) -> HamiltonianRWA:
    """Barred RWA Hamiltonian (hbar = 1) in the stationary frame above."""
    cfg = model.configuration
    delta_p = model.probe.optical_detuning_bar
    delta_c = model.coupling.optical_detuning_bar
    z = model.delta_z_bar
    om_p = model.probe.rabi_bar
    om_c = model.coupling.rabi_bar

    h = np.zeros((DIM, DIM), dtype=complex)
    if cfg is Config.PERP:
        h[GM, GM] = -delta_p + z
        h[G0, G0] = -delta_c
        h[GP, GP] = -delta_p - z
        split, single = om_p, om_c
    else:
        h[GM, GM] = -delta_c + z
        h[G0, G0] = -delta_p
        h[GP, GP] = -delta_c - z
        split, single = om_c, om_p
    # the sigma-polarized beam splits equally over e-g- and e-g+ with the same sign
    h[E, GM] = h[E, GP] = -split / (2.0 * np.sqrt(2.0))
    h[E, G0] = -single / 2.0
    for g in GROUND:
        h[g, E] = np.conj(h[E, g])
    return HamiltonianRWA(h, dict(_FRAMES[cfg]))


def detuning_generator(configuration) -> np.ndarray:
    """d L / d delta_P: the Liouvillian's derivative along a probe-detuning sweep."""
    dh = np.zeros((DIM, DIM), dtype=complex)
    if Config.parse(configuration) is Config.PERP:
        dh[GM, GM] = dh[GP, GP] = -1.0
    else:
        dh[G0, G0] = -1.0
    return -1j * (spre(dh) - spost(dh))


def build_relaxation(rates: RelaxationRates) -> np.ndarray:
    """16x16 relaxation superoperator.

    * spontaneous emission e -> each ground level at gamma0/3
    * transit: every state relaxes at gammaT to the unpolarized ground mixture
    * extra dephasing so that the total decay of e-g coherences equals
      ``optical_bar`` and of g-g coherences equals ``gammaR_bar``
    """
    n2 = DIM * DIM
    r = np.zeros((n2, n2), dtype=complex)

    g0 = rates.gamma0_bar
    if g0:
        for g in GROUND:
            jump = np.zeros((DIM, DIM))
            jump[g, E] = np.sqrt(g0 / 3.0)
            jdj = jump.T @ jump
            r += np.kron(jump.conj(), jump) - 0.5 * spre(jdj) - 0.5 * spost(jdj)

    gt = rates.gammaT_bar
    if gt:
        target = np.diag([0.0, 1 / 3, 1 / 3, 1 / 3])
        r += gt * (np.outer(vec(target), vec(np.eye(DIM))) - np.eye(n2))

    optical_extra = rates.optical_bar - 0.5 * g0 - gt
    ground_extra = rates.gammaR_bar - gt
    for i in range(DIM):
        for j in range(DIM):
            if i == j:
                continue
            k = i + DIM * j
            if E in (i, j):
                r[k, k] -= optical_extra
            else:
                r[k, k] -= ground_extra
    return r


def assemble_liouvillian(h: HamiltonianRWA, relaxation: np.ndarray) -> LiouvillianMatrix:
    """L with L @ vec(rho) == vec(-i[H, rho] + R rho)."""
    hm = h.matrix
    return LiouvillianMatrix(-1j * (spre(hm) - spost(hm)) + relaxation)


def build_liouvillian(model: TripodModel) -> LiouvillianMatrix:
    return assemble_liouvillian(build_hamiltonian(model), build_relaxation(model.rates))
