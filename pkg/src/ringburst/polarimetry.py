"""Time-dependent emission polarimetry: gated windowed transforms, Stokes
parameters, band-integrated power, and the circular-polarization degree.

The detector applies a Gaussian gate

    G(t) = (2/pi)^(1/4) / sqrt(DeltaT) * exp(-t^2 / DeltaT^2)

and the gated transform of a sampled signal f is

    (f)_d(omega, t) = integral f(t') G(t' - t_d - t) exp(+i omega t') dt'.

For dipole emission along +z (theta = 0) with the right-handed polarization
basis e_sigma = x, e_pi = y, n = z and circular unit vectors
e_+- = (e_sigma +- i e_pi)/sqrt(2), the Stokes parameters of the coherent
field reduce to quadratic forms in X = (acc_x)_d and Y = (acc_y)_d:

    S0 = P (|X|^2 + |Y|^2)          S1 = P (|X|^2 - |Y|^2)
    S2 = 2 P Re[conj(X) Y]          S3 = 2 P Im[conj(X) Y]

with P = sqrt(kappa) / (4 pi c^3) / (4 pi eps0); see docs/theory.md for the
derivation from the polarized-intensity differences.  A counterclockwise
rotation (acc_x, acc_y) = A (cos w0 t, sin w0 t) gives S3 = +S0 at w0.

Retardation note: the geometric delay t_0 = R/c and the detector delay t_d
cancel in every detected quantity when t_d = t_0; both default to zero
(source-time detection).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import czt as _czt

from .constants import C_LIGHT, COULOMB_E2, EPS0
from .errors import BandError, ConfigError, UnsupportedFeatureError
from .ring import RingConfig, RingScales

__all__ = [
    "DetectorSpec",
    "GatedValue",
    "gated_transform",
    "StokesSpectrogram",
    "stokes_perpendicular",
    "stokes_from_intensities",
    "stokes_angular",
    "AngularStokes",
    "band_integrate",
    "circular_polarization_degree",
    "s_norm",
]

_GATE_SUPPORT = 5.0  # gate truncated at +-5 DeltaT; tail below 1e-10 of the norm


@dataclass(frozen=True)
class DetectorSpec:
    """Gate width, delay, and the detection grids.

    omegas: frequency grid [rad/s], uniform ascending.  times: detection
    times [s], uniform ascending.
    """

    delta_t: float
    omegas: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    t_d: float = 0.0

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ConfigError("gate width DeltaT must be positive")
        for name, grid in (("omegas", self.omegas), ("times", self.times)):
            g = np.asarray(grid, dtype=float)
            if g.ndim != 1 or len(g) < 1 or not np.all(np.isfinite(g)):
                raise ConfigError(f"{name} must be a finite 1-d grid")
            if len(g) > 1:
                steps = np.diff(g)
                if steps.min() <= 0 or np.ptp(steps) > 1e-9 * steps.mean():
                    raise ConfigError(f"{name} must be uniform ascending")
            object.__setattr__(self, name, g)
            g.setflags(write=False)


def _gate(delta_t: float, u: np.ndarray) -> np.ndarray:
    return (2.0 / np.pi) ** 0.25 / np.sqrt(delta_t) * np.exp(-((u / delta_t) ** 2))


@dataclass(frozen=True)
class GatedValue:
    """Transform value plus a flag telling whether the gate was fully covered."""

    value: complex
    covered: bool


def _window_indices(t0: float, dt: float, n: int, lo: float, hi: float) -> tuple[int, int]:
    j0 = max(0, int(np.ceil((lo - t0) / dt - 1e-9)))
    j1 = min(n - 1, int(np.floor((hi - t0) / dt + 1e-9)))
    return j0, j1


def gated_transform(
    t: np.ndarray,
    f: np.ndarray,
    omega,
    t_det: float,
    delta_t: float,
    t_d: float = 0.0,
    zero_before: bool = False,
):
    """Discrete gated transform of a uniformly sampled real series.

    Quadrature is the plain Riemann sum on the sample grid; the gate decays
    to ~1e-11 of its peak at the window edges, so end corrections are
    negligible provided dt <= pi / (4 omega_max).  Returns a GatedValue (or
    an array plus one flag for vector omega); covered=False flags a window
    truncated by the series edges (a series that is exactly zero before its
    start may declare zero_before=True, which keeps the left edge exact).
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.shape != f.shape or t.ndim != 1 or len(t) < 2:
        raise ConfigError("need matching 1-d time and value arrays")
    dt = t[1] - t[0]
    center = t_det + t_d
    lo, hi = center - _GATE_SUPPORT * delta_t, center + _GATE_SUPPORT * delta_t
    covered = (zero_before or lo >= t[0] - 0.5 * dt) and hi <= t[-1] + 0.5 * dt
    j0, j1 = _window_indices(t[0], dt, len(t), lo, hi)
    if j1 < j0:
        value = np.zeros(np.shape(omega), dtype=complex) if np.ndim(omega) else 0.0 + 0.0j
        return GatedValue(value, covered)
    tw = t[j0 : j1 + 1]
    g = f[j0 : j1 + 1] * _gate(delta_t, tw - center)
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    val = dt * (np.exp(1j * np.outer(omega_arr, tw)) @ g)
    if np.ndim(omega) == 0:
        return GatedValue(complex(val[0]), covered)
    return GatedValue(val, covered)


def _transform_grid(
    series, omegas: np.ndarray, t_det: float, delta_t: float, t_d: float
) -> tuple[np.ndarray, np.ndarray, bool]:
    """(X, Y) on a uniform omega grid via the chirp-z transform.

    Exactly the Riemann sum of :func:`gated_transform`, evaluated for all
    grid frequencies at once.
    """
    t0, dt, n = series.t0, series.dt, series.n
    center = t_det + t_d
    lo, hi = center - _GATE_SUPPORT * delta_t, center + _GATE_SUPPORT * delta_t
    covered = (series.zero_before_start or lo >= t0 - 0.5 * dt) and hi <= series.t_end + 0.5 * dt
    j0, j1 = _window_indices(t0, dt, n, lo, hi)
    nw = j1 - j0 + 1
    if nw < 1:
        z = np.zeros(len(omegas), dtype=complex)
        return z, z.copy(), covered
    tw = t0 + dt * np.arange(j0, j1 + 1)
    g = _gate(delta_t, tw - center)
    w0 = omegas[0]
    dw = omegas[1] - omegas[0] if len(omegas) > 1 else 0.0
    phase = dt * np.exp(1j * omegas * tw[0])

    def one(values):
        x = values[j0 : j1 + 1] * g
        if len(omegas) == 1:
            return phase * np.sum(x * np.exp(1j * w0 * (tw - tw[0])))
        spec = _czt(
            x * np.exp(1j * w0 * dt * np.arange(nw)),
            m=len(omegas),
            w=np.exp(1j * dw * dt),
            a=1.0 + 0.0j,
        )
        return phase * spec

    return one(series.acc_x), one(series.acc_y), covered


@dataclass(frozen=True)
class StokesSpectrogram:
    """Stokes parameters on the (omega, t) detection grid at theta = 0.

    s0..s3 have shape (n_omega, n_t); covered flags detection times whose
    gate was fully inside the sampled series.
    """

    omegas: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    s0: np.ndarray = field(repr=False)
    s1: np.ndarray = field(repr=False)
    s2: np.ndarray = field(repr=False)
    s3: np.ndarray = field(repr=False)
    covered: np.ndarray = field(repr=False)
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for arr in (self.omegas, self.times, self.s0, self.s1, self.s2, self.s3, self.covered):
            arr.setflags(write=False)


def _stokes_prefactor(kappa: float) -> float:
    # sqrt(kappa)/(4 pi c^3), with the squared-dipole Gaussian->SI conversion
    return np.sqrt(kappa) / (4.0 * np.pi * C_LIGHT**3) / (4.0 * np.pi * EPS0)


def stokes_perpendicular(series, det: DetectorSpec, kappa: float) -> StokesSpectrogram:
    """Stokes spectrogram of the dipole emission along +z (theta = 0)."""
    n_w, n_t = len(det.omegas), len(det.times)
    s = [np.empty((n_w, n_t)) for _ in range(4)]
    covered = np.empty(n_t, dtype=bool)
    pref = _stokes_prefactor(kappa)
    for k, t_det in enumerate(det.times):
        x, y, cov = _transform_grid(series, det.omegas, t_det, det.delta_t, det.t_d)
        covered[k] = cov
        xx = np.abs(x) ** 2
        yy = np.abs(y) ** 2
        cross = np.conj(x) * y
        s[0][:, k] = pref * (xx + yy)
        s[1][:, k] = pref * (xx - yy)
        s[2][:, k] = 2.0 * pref * np.real(cross)
        s[3][:, k] = 2.0 * pref * np.imag(cross)
    return StokesSpectrogram(
        omegas=det.omegas.copy(),
        times=det.times.copy(),
        s0=s[0],
        s1=s[1],
        s2=s[2],
        s3=s[3],
        covered=covered,
    )


def stokes_from_intensities(series, det: DetectorSpec, kappa: float) -> StokesSpectrogram:
    """Stokes parameters assembled from the six polarized intensities.

    Projects the field onto e_sigma, e_pi, e_+-45, e_+- and takes the
    intensity differences; an independent route used to cross-check
    :func:`stokes_perpendicular`.
    """
    n_w, n_t = len(det.omegas), len(det.times)
    s = [np.empty((n_w, n_t)) for _ in range(4)]
    covered = np.empty(n_t, dtype=bool)
    pref = _stokes_prefactor(kappa)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    # e_alpha^* . (E_x, E_y) for the six analyzer settings
    analyzers = {
        "sigma": (1.0, 0.0),
        "pi": (0.0, 1.0),
        "p45": (inv_sqrt2, inv_sqrt2),
        "m45": (inv_sqrt2, -inv_sqrt2),
        "plus": (inv_sqrt2, -1j * inv_sqrt2),
        "minus": (inv_sqrt2, 1j * inv_sqrt2),
    }
    for k, t_det in enumerate(det.times):
        x, y, cov = _transform_grid(series, det.omegas, t_det, det.delta_t, det.t_d)
        covered[k] = cov
        inten = {
            name: pref * np.abs(cx * x + cy * y) ** 2
            for name, (cx, cy) in analyzers.items()
        }
        s[0][:, k] = inten["sigma"] + inten["pi"]
        s[1][:, k] = inten["sigma"] - inten["pi"]
        s[2][:, k] = inten["p45"] - inten["m45"]
        s[3][:, k] = inten["plus"] - inten["minus"]
    return StokesSpectrogram(
        omegas=det.omegas.copy(),
        times=det.times.copy(),
        s0=s[0],
        s1=s[1],
        s2=s[2],
        s3=s[3],
        covered=covered,
    )


@dataclass(frozen=True)
class AngularStokes:
    """S0 (phi-averaged) and S3 at a tilted detector direction."""

    omegas: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    s0: np.ndarray = field(repr=False)
    s3: np.ndarray = field(repr=False)
    covered: np.ndarray = field(repr=False)
    theta: float = 0.0
    phi: float = 0.0


def stokes_angular(
    perp: StokesSpectrogram, theta: float, phi: float = 0.0, include_linear: bool = False
):
    """Angular scaling of the normal-incidence spectrogram.

    S3 scales with cos(theta); the phi-averaged S0 with (1 + cos^2 theta)/2.
    S1 and S2 have no closed angular form here and are only available at
    theta = 0.
    """
    if not 0.0 <= theta <= np.pi:
        raise ConfigError(f"theta must lie in [0, pi], got {theta}")
    if include_linear and theta != 0.0:
        raise UnsupportedFeatureError(
            "S1/S2 are only defined at theta = 0 in this detection model"
        )
    if include_linear:
        return perp
    c = np.cos(theta)
    return AngularStokes(
        omegas=perp.omegas,
        times=perp.times,
        s0=perp.s0 * (1.0 + c * c) / 2.0,
        s3=perp.s3 * c,
        covered=perp.covered,
        theta=theta,
        phi=phi,
    )


def band_integrate(
    omegas: np.ndarray, values: np.ndarray, band: tuple[float, float]
) -> np.ndarray:
    """Band-integrated trace: 2 * integral over the band of S d omega / (2 pi).

    The band must lie inside the computed grid; endpoints snap to the nearest
    grid points.
    """
    lo, hi = band
    if lo < omegas[0] - 1e-9 * omegas[-1] or hi > omegas[-1] * (1 + 1e-12):
        raise BandError(
            f"band [{lo:.3e}, {hi:.3e}] outside computed grid "
            f"[{omegas[0]:.3e}, {omegas[-1]:.3e}]"
        )
    if hi <= lo:
        raise BandError("band must have positive width")
    sel = (omegas >= lo - 1e-12 * omegas[-1]) & (omegas <= hi + 1e-12 * omegas[-1])
    if sel.sum() < 2:
        raise BandError("band contains fewer than two grid points")
    return 2.0 * np.trapezoid(values[sel], omegas[sel], axis=0) / (2.0 * np.pi)


_POWER_FLOOR = 1e-12


def circular_polarization_degree(
    sbar0: np.ndarray, sbar3: np.ndarray, covered=None
) -> tuple[np.ndarray, np.ndarray]:
    """P_circ(t) = Sbar3/Sbar0 with an undefined marker below the power floor.

    Returns (p_circ, defined); p_circ is NaN wherever the band power is below
    1e-12 of its maximum or the gate was not covered.
    """
    sbar0 = np.asarray(sbar0, dtype=float)
    sbar3 = np.asarray(sbar3, dtype=float)
    defined = sbar0 > _POWER_FLOOR * max(sbar0.max(initial=0.0), 0.0)
    if covered is not None:
        defined = defined & np.asarray(covered, dtype=bool)
    p = np.full_like(sbar0, np.nan)
    p[defined] = sbar3[defined] / sbar0[defined]
    return p, defined


def s_norm(cfg: RingConfig, scales: RingScales) -> float:
    """Spectrogram normalization sqrt(kappa) e^2 r0^2 omega_F^3 / (4 pi c^3)."""
    return (
        np.sqrt(cfg.kappa)
        * COULOMB_E2
        * cfg.r0**2
        * scales.omega_f**3
        / (4.0 * np.pi * C_LIGHT**3)
    )
