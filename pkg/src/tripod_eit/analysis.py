"""Lineshape analysis: extrema, widths, model fits and the interference test.

Fits operate on normalized absorption (Im chi divided by the bare-line
value) against detuning in Hz.  Internally the detuning axis is in kHz so
that all fit parameters are of order one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .analytic import Config2Params, OPTICAL_DECAY_BAR, im_chi_config2

MODEL_KINDS = ("single-EIT", "double-lorentzian", "interacting-double-dark",
               "incoherent-two-EIT")
FIT_TOLERANCE = 1e-3

# kHz -> barred frequency
_KHZ_BAR = 1e3 / 1e9


class FitError(RuntimeError):
    def __init__(self, message: str, result: "FitResult | None" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SpectralFeature:
    kind: str  # "maximum" or "minimum"
    center_hz: float
    height: float
    prominence: float
    index: int


def _as_grid(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    steps = np.diff(x)
    if not (steps[0] > 0 and np.allclose(steps, steps[0], rtol=1e-9, atol=0)):
        raise ValueError("x must be a uniform, increasing grid")
    return x, y


def find_extrema(x, y, min_prominence: float = 1e-4) -> list[SpectralFeature]:
    """Strict local maxima and minima of ``y`` with prominence >= ``min_prominence``.

    Centers and heights are refined with a three-point parabola.  Features
    are returned by decreasing prominence, ties broken by leftmost center.
    """
    x, y = _as_grid(x, y)
    if not min_prominence > 0:
        raise ValueError("min_prominence must be positive")
    step = x[1] - x[0]
    out = []
    for kind, sign in (("maximum", 1.0), ("minimum", -1.0)):
        idx, props = find_peaks(sign * y, prominence=min_prominence)
        for i, prom in zip(idx, props["prominences"]):
            ym, y0, yp = y[i - 1], y[i], y[i + 1]
            if not (sign * y0 > sign * ym and sign * y0 > sign * yp):
                continue  # plateau, not strict
            curv = ym - 2 * y0 + yp
            shift = 0.5 * (ym - yp) / curv if curv != 0 else 0.0
            center = x[i] + shift * step
            height = y0 - 0.25 * (ym - yp) * shift
            out.append(SpectralFeature(kind, float(center), float(height), float(prom), int(i)))
    out.sort(key=lambda f: (-f.prominence, f.center_hz))
    return out


def maxima(features):
    return [f for f in features if f.kind == "maximum"]


def minima(features):
    return [f for f in features if f.kind == "minimum"]


def _crossing(x, y, i, level, direction, above):
    j = i
    while 0 <= j + direction < len(y):
        k = j + direction
        if (y[k] <= level) if above else (y[k] >= level):
            # linear interpolation between j and k
            return x[j] + (level - y[j]) * (x[k] - x[j]) / (y[k] - y[j])
        j = k
    return None


def feature_fwhm(x, y, feature: SpectralFeature) -> float:
    """Full width of ``feature`` at half its prominence, linearly interpolated."""
    x, y = _as_grid(x, y)
    i = feature.index
    above = feature.kind == "maximum"
    level = y[i] - feature.prominence / 2 if above else y[i] + feature.prominence / 2
    left = _crossing(x, y, i, level, -1, above)
    right = _crossing(x, y, i, level, +1, above)
    if left is None or right is None:
        raise ValueError("half-prominence crossing outside the detuning grid; "
                         "use a wider sweep")
    return float(right - left)


# --------------------------------------------------------------------------
# fit models: y = f(x_khz, params)

def _lorentz(x, c, w):
    return w * w / ((x - c) ** 2 + w * w)


# Widths and couplings enter squared and Raman rates through abs(), so the
# fits run unconstrained.  The optimizer sees Raman rates as squares of an
# internal variable (smooth at zero); reported values are non-negative.

def _single_eit(x, p):
    h, c, w, d = p
    return h * (1 - d * _lorentz(x, c, w))


def _double_lorentzian(x, p):
    h, z, w, d = p
    return h * (1 - 0.5 * d * (_lorentz(x, z, w) + _lorentz(x, -z, w)))


def _interacting(x, p):
    amp, z, om, g = p
    params = Config2Params(delta_bar=x * _KHZ_BAR, delta_z_bar=z * _KHZ_BAR,
                           omega_c_bar=om * 1e-3, gamma_r_bar=abs(g) * _KHZ_BAR)
    return amp * im_chi_config2(params) / 1.5


def eit_profile(x, center, omega_m, gamma_khz):
    """Normalized absorption of one Lambda-EIT subsystem (bare line = 1).

    ``x`` and ``center`` in kHz; ``omega_m`` is the barred coupling Rabi
    frequency in units of 1e-3.
    """
    a = (x - center) * _KHZ_BAR
    s = a - 1j * abs(gamma_khz) * _KHZ_BAR
    branch = s / ((a - 1j * OPTICAL_DECAY_BAR) * s - (omega_m * 1e-3) ** 2 / 4)
    return branch.imag / 3.0


def _incoherent(x, p):
    # each subsystem carries half the line strength, as for two Zeeman
    # Lambda systems sharing one probed level population
    amp, c1, o1, g1, c2, o2, g2 = p
    return 0.5 * amp * (eit_profile(x, c1, o1, g1) + eit_profile(x, c2, o2, g2))


_MODELS = {
    # kind: (function, parameter names, sign-free indices, squared-internally indices)
    "single-EIT": (_single_eit, ("baseline", "center_khz", "halfwidth_khz", "depth"),
                   (2,), ()),
    "double-lorentzian": (_double_lorentzian, ("baseline", "zeeman_khz", "halfwidth_khz",
                                               "depth"), (1, 2), ()),
    "interacting-double-dark": (_interacting, ("amplitude", "zeeman_khz", "omega_c_milli",
                                               "gamma_r_khz"), (1, 2, 3), (3,)),
    "incoherent-two-EIT": (_incoherent, ("amplitude", "center1_khz", "omega1_milli",
                                         "gamma1_khz", "center2_khz", "omega2_milli",
                                         "gamma2_khz"), (2, 3, 5, 6), (3, 6)),
}


def model_function(kind: str):
    """``f(x_hz, params)`` for a fit model kind, params in the FitResult order."""
    func = _MODELS[kind][0]
    return lambda x_hz, params: func(np.asarray(x_hz, dtype=float) / 1e3, np.asarray(params))


def model_parameter_names(kind: str) -> tuple[str, ...]:
    return _MODELS[kind][1]


@dataclass
class FitResult:
    model_kind: str
    parameters: dict
    uncertainties: dict
    residual_rms: float
    converged: bool
    metrics: dict = field(default_factory=dict)

    def values(self) -> np.ndarray:
        return np.array([self.parameters[k] for k in model_parameter_names(self.model_kind)])

    def evaluate(self, x_hz) -> np.ndarray:
        return model_function(self.model_kind)(x_hz, self.values())

    def to_dict(self) -> dict:
        return {"model_kind": self.model_kind, "parameters": dict(self.parameters),
                "uncertainties": dict(self.uncertainties), "residual_rms": self.residual_rms,
                "converged": self.converged, "metrics": dict(self.metrics)}

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(d["model_kind"], dict(d["parameters"]), dict(d["uncertainties"]),
                   float(d["residual_rms"]), bool(d["converged"]), dict(d.get("metrics", {})))


def _width_guess(x, y, feat, fallback):
    try:
        return 0.5 * feature_fwhm(x, y, feat) / 1e3
    except ValueError:
        return fallback


def _initial_guess(kind, x, y):
    """Deterministic starting point from the absorption minima (transparencies)."""
    xk = x / 1e3
    span = xk[-1] - xk[0]
    feats = find_extrema(x, y, min_prominence=1e-6 * max(np.ptp(y), 1e-300))
    dips = sorted(minima(feats)[:2], key=lambda f: f.center_hz)
    top = float(np.max(y))
    if not dips:
        w = span / 20
        centers = [0.0, 0.0]
        depth = 0.0
    else:
        w = max(_width_guess(x, y, dips[0], span / 20), 2 * (xk[1] - xk[0]))
        centers = [f.center_hz / 1e3 for f in dips]
        depth = max((top - min(f.height for f in dips)) / top, 1e-3) if top > 0 else 0.0
        if len(centers) == 1:
            centers = [centers[0] - w / 2, centers[0] + w / 2]
    z = max(abs(centers[1] - centers[0]) / 2, 1e-3 * w)
    c_mid = 0.5 * (centers[0] + centers[1])

    if kind == "single-EIT":
        return [top, c_mid, w, depth]
    if kind == "double-lorentzian":
        return [top, z, w, depth]
    # EIT half width (kHz) -> coupling: lambda = gamma + 3 omega^2 / 4
    lam_bar = w * _KHZ_BAR
    gamma = max(lam_bar * (1 - min(depth, 0.99)), 1e-3 * lam_bar)
    omega_m = np.sqrt(max(4 * (lam_bar - gamma) / 3, 1e-12)) / 1e-3
    if kind == "interacting-double-dark":
        return [top, z, omega_m, gamma / _KHZ_BAR]
    return [top, centers[0], omega_m, gamma / _KHZ_BAR,
            centers[1], omega_m, gamma / _KHZ_BAR]


def _central_jacobian(func, p, scale):
    h = 1e-6 * scale
    cols = []
    for i in range(len(p)):
        up, dn = p.copy(), p.copy()
        up[i] += h[i]
        dn[i] -= h[i]
        cols.append((func(up) - func(dn)) / (2 * h[i]))
    return np.stack(cols, axis=1)


def fit_model(x_hz, y, kind: str, initial_guess_strategy: str | list = "extrema",
              max_nfev: int = 20000) -> FitResult:
    """Levenberg-Marquardt fit of one lineshape model to normalized absorption.

    ``initial_guess_strategy`` is ``"extrema"`` (seed from the spectral
    features) or an explicit parameter list.  The Jacobian is taken by
    central differences with steps of 1e-6 of each parameter's scale.
    ``converged`` requires a small-step (or small-gradient) stop and a
    gradient orthogonal to the residual to 1e-4.  Non-convergence is
    reported through the flag, never raised.
    """
    if kind not in _MODELS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    x, y = _as_grid(x_hz, y)
    func, names, nonneg, squared = _MODELS[kind]
    squared = list(squared)
    if len(x) < 5 * len(names):
        raise ValueError(f"{kind} needs at least {5 * len(names)} points, got {len(x)}")
    if isinstance(initial_guess_strategy, str):
        if initial_guess_strategy != "extrema":
            raise ValueError(f"unknown initial guess strategy {initial_guess_strategy!r}")
        p0 = _initial_guess(kind, x, y)
    else:
        p0 = list(initial_guess_strategy)
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (len(names),):
        raise ValueError(f"{kind} takes {len(names)} parameters")
    xk = x / 1e3

    def physical(u):
        p = u.copy()
        p[squared] = u[squared] ** 2
        return p

    def resid(u):
        return func(xk, physical(u)) - y

    u0 = p0.copy()
    u0[squared] = np.sqrt(np.abs(p0[squared]))
    scale = np.where(np.abs(u0) > 0, np.abs(u0), 1.0)
    res = least_squares(resid, u0, jac=lambda u: _central_jacobian(resid, u, scale),
                        method="lm", x_scale=scale, ftol=1e-14, xtol=1e-12, gtol=1e-15,
                        max_nfev=max_nfev)
    ubest = res.x
    n, npar = len(x), len(names)
    r = resid(ubest)
    rss = float(r @ r)
    jac = _central_jacobian(resid, ubest, scale)

    pbest = physical(ubest)
    pbest[list(nonneg)] = np.abs(pbest[list(nonneg)])
    pscale = np.where(np.abs(pbest) > 0, np.abs(pbest), 1.0)
    jac_phys = _central_jacobian(lambda p: func(xk, p) - y, pbest, pscale)
    cov = np.linalg.pinv(jac_phys.T @ jac_phys) * (rss / max(n - npar, 1))
    sig = np.sqrt(np.clip(np.diag(cov), 0, None))

    rnorm = np.sqrt(rss)
    colnorm = np.linalg.norm(jac, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = np.abs(jac.T @ r) / (colnorm * rnorm)
    cosines = np.nan_to_num(cosines, nan=0.0, posinf=0.0)
    # a Raman rate pinned at zero is optimal if raising it would raise the cost
    for i in squared:
        if abs(ubest[i]) <= 1e-6 * scale[i] and jac_phys[:, i] @ r >= 0:
            cosines[i] = 0.0
    tiny = rnorm <= 1e-12 * max(np.linalg.norm(y), 1e-300)
    converged = bool(res.status in (1, 2, 3, 4) and (tiny or cosines.max() <= 1e-4))

    params = {k: float(v) for k, v in zip(names, pbest)}
    result = FitResult(kind, params, {k: float(v) for k, v in zip(names, sig)},
                       float(np.sqrt(rss / n)), converged)
    result.metrics = _derived_metrics(kind, params)
    return result


def _derived_metrics(kind, p) -> dict:
    if kind == "single-EIT":
        return {"center_hz": p["center_khz"] * 1e3, "fwhm_hz": 2e3 * p["halfwidth_khz"]}
    if kind == "double-lorentzian":
        lam = p["halfwidth_khz"] * _KHZ_BAR
        return {"centers_hz": [-1e3 * p["zeeman_khz"], 1e3 * p["zeeman_khz"]],
                "fwhm_hz": 2e3 * p["halfwidth_khz"],
                "gamma_r_bar": lam * (1 - p["depth"]),
                "omega_c_bar": float(np.sqrt(max(4 * lam * p["depth"] / 3, 0.0)))}
    if kind == "interacting-double-dark":
        return {"centers_hz": [-1e3 * p["zeeman_khz"], 1e3 * p["zeeman_khz"]],
                "omega_c_bar": p["omega_c_milli"] * 1e-3,
                "gamma_r_bar": p["gamma_r_khz"] * _KHZ_BAR}
    lams = [p[f"gamma{k}_khz"] * _KHZ_BAR + 0.75 * (p[f"omega{k}_milli"] * 1e-3) ** 2
            for k in (1, 2)]
    return {"centers_hz": [1e3 * p["center1_khz"], 1e3 * p["center2_khz"]],
            "fwhm_hz": [2 * lam * 1e9 for lam in lams]}


# --------------------------------------------------------------------------

def dip_location(x, transmission) -> int:
    """Index of the strict transmission minimum nearest zero detuning,
    or of the global minimum if there is no interior one."""
    x, t = _as_grid(x, transmission)
    inner = [f for f in find_extrema(x, t, 1e-12) if f.kind == "minimum"]
    if inner:
        return min(inner, key=lambda f: (abs(f.center_hz), f.center_hz)).index
    return int(np.argmin(t))


def incoherent_excess(spectrum, return_fit: bool = False):
    """How much deeper the measured dip is than any incoherent two-EIT account.

    Fits two independent EIT absorption profiles (free centers, couplings
    and Raman widths, equal shares of one amplitude) to the spectrum's
    normalized absorption, then
    returns ``(T_fit - T_data)`` at the dip divided by the bare-line contrast
    ``1 - exp(-optical_depth)``.
    """
    od = spectrum.optical_depth
    if not od > 0:
        raise ValueError("incoherent_excess needs a positive optical depth")
    x = spectrum.delta_hz
    absorption = spectrum.chi.imag
    fit = fit_model(x, absorption, "incoherent-two-EIT")
    if not fit.converged:
        raise FitError(f"incoherent two-EIT fit did not converge "
                       f"(rms {fit.residual_rms:.3e}, params {fit.parameters})", fit)
    i = dip_location(x, spectrum.transmission)
    t_fit = float(np.exp(-od * fit.evaluate(x[i : i + 1])[0]))
    excess = (t_fit - float(spectrum.transmission[i])) / (1 - np.exp(-od))
    return (excess, fit) if return_fit else excess


def double_peak_separation(x, transmission, min_prominence: float = 1e-4) -> float:
    """Distance between the two most prominent transmission maxima."""
    peaks = maxima(find_extrema(x, transmission, min_prominence))[:2]
    if len(peaks) < 2:
        raise ValueError("double peak not resolved")
    return abs(peaks[1].center_hz - peaks[0].center_hz)


def separation_slope(spectra, min_prominence: float = 1e-4) -> float:
    """Least-squares slope (Hz per mG) of the double-peak separation against B."""
    fields, seps = [], []
    for s in spectra:
        if s.b_mG == 0:
            continue
        try:
            seps.append(double_peak_separation(s.delta_hz, s.transmission, min_prominence))
        except ValueError:
            continue
        fields.append(s.b_mG)
    if len(set(fields)) < 2:
        raise ValueError("separation slope needs at least two nonzero fields "
                         "with resolved double peaks")
    slope, _ = np.polyfit(np.asarray(fields), np.asarray(seps), 1)
    return float(slope)


def central_dip_contrast(spectrum, min_prominence: float = 1e-4) -> float:
    """Fraction of the transparency-peak height missing at zero detuning.

    ``(T_peak - T(0)) / (T_peak - T_bare)`` with ``T_peak`` the mean of the
    two most prominent maxima: 1 for fully separated peaks, 0 once they have
    merged into one.
    """
    x, t = spectrum.delta_hz, spectrum.transmission
    peaks = maxima(find_extrema(x, t, min_prominence))[:2]
    if len(peaks) < 2:
        return 0.0
    t_peak = 0.5 * (peaks[0].height + peaks[1].height)
    t0 = float(np.interp(0.0, x, t))
    return float((t_peak - t0) / (t_peak - spectrum.bare_transmission))
