"""Dissipation rates: radiative damping, spontaneous-emission decoherence,
coherent LA-phonon emission, and incoherent LA-phonon scattering.

All rates are SI (1/s).  Fields named gamma_* follow the channel they damp:
the scalar channels (radiative, coherent-phonon) damp the rotating dipole,
the (m, m') tables damp individual coherences.  Channels are independent in
the weak-coupling regime and add.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR, C_LIGHT, COULOMB_E2
from .errors import ConfigError, ValidityError
from .ring import RingConfig, RingScales

__all__ = [
    "form_factor",
    "form_factor_batch",
    "radiative_decay_rate",
    "array_decay_rate",
    "spread_time",
    "ArrayInfo",
    "spontaneous_emission_rate",
    "la_rate_unit",
    "coherent_phonon_rate",
    "incoherent_phonon_rate",
    "effective_dipole_phonon_rate",
    "total_coherence_decay",
    "RateTable",
    "build_rate_table",
    "CHANNELS",
]

CHANNELS = ("radiative", "spontaneous", "coherent_phonon", "incoherent_phonon")

_FOUR_PI2 = 4.0 * np.pi**2


def _band_kernel(x: np.ndarray) -> np.ndarray:
    """sin^2(x/2) / (x^2 (x^2 - 4 pi^2)^2), stable at the removable points.

    The zeros of sin^2(x/2) at x = 0 and x = 2 pi cancel the denominator
    zeros exactly; each half-range uses the factorization that stays 0/0-free
    there (sinc forms).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    low = x < np.pi
    xl = x[low]
    s = np.sinc(xl / (2.0 * np.pi))  # sin(x/2) / (x/2)
    out[low] = s * s / (4.0 * (xl * xl - _FOUR_PI2) ** 2)
    xh = x[~low]
    s = np.sinc((xh - 2.0 * np.pi) / (2.0 * np.pi))  # sin((x-2pi)/2) / ((x-2pi)/2)
    out[~low] = s * s / (4.0 * xh * xh * (xh + 2.0 * np.pi) ** 2)
    return out


def form_factor(y: float, tol: float = 1e-12) -> float:
    """Radial-confinement form factor for LA-phonon coupling.

    F(y) = 8 pi^2 y * int_0^y dx (1 - x^2/y^2)^(-1/2) sin^2(x/2)
                                   / (x^2 (x^2 - (2 pi)^2)^2)

    The substitution x = y sin(theta) removes the endpoint singularity; the
    integrand is then smooth and the integral is evaluated by node-doubling
    composite Simpson until the absolute change is below tol * max(1, F).
    F is even; negative wavenumber arguments map to |y|.
    """
    if not np.isfinite(y):
        raise ValidityError(f"form factor argument must be finite, got {y}")
    if y < 0:
        raise ValidityError(f"form factor argument must be >= 0, got {y}")
    if y == 0.0:
        return 0.0
    # resolve the sin^2(x/2) oscillations: about y/2pi periods over the range
    n = 128
    while n < 8 * y:
        n *= 2
    prev = None
    while True:
        val = 8.0 * np.pi**2 * y * y * _simpson_theta(np.asarray([y]), n)[0]
        if prev is not None and (abs(val - prev) <= tol * max(1.0, abs(val)) or n >= 2**22):
            return float(val)
        prev = val
        n *= 2


def _simpson_theta(y: np.ndarray, n: int) -> np.ndarray:
    """Composite Simpson of the theta-form integrand for a batch of y."""
    theta = np.linspace(0.0, np.pi / 2.0, n + 1)
    x = np.outer(y, np.sin(theta))
    v = _band_kernel(x.ravel()).reshape(x.shape)
    h = theta[1] - theta[0]
    return (h / 3.0) * (
        v[:, 0] + v[:, -1] + 4.0 * v[:, 1:-1:2].sum(axis=1) + 2.0 * v[:, 2:-1:2].sum(axis=1)
    )


def form_factor_batch(y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Vectorized :func:`form_factor` for non-negative arguments."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValidityError("form factor arguments must be finite and >= 0")
    out = np.zeros_like(y)
    todo = y > 0
    # group by required starting resolution to keep the node matrices small
    for lo, hi, n0 in ((0.0, 16.0, 128), (16.0, 64.0, 1024), (64.0, np.inf, 8192)):
        sel = todo & (y > lo) & (y <= hi)
        if not np.any(sel):
            continue
        ys = y[sel]
        n = n0
        val = 8.0 * np.pi**2 * ys * ys * _simpson_theta(ys, n)
        while True:
            n *= 2
            nxt = 8.0 * np.pi**2 * ys * ys * _simpson_theta(ys, n)
            if np.all(np.abs(nxt - val) <= tol * np.maximum(1.0, np.abs(nxt))) or n >= 2**22:
                val = nxt
                break
            val = nxt
        out[sel] = val
    return out


def radiative_decay_rate(cfg: RingConfig, scales: RingScales) -> float:
    """Dipole damping from back-action of the coherently emitted field.

    gamma = sqrt(kappa) * (e^2 / 4 pi eps0) * omega_F^2 * N / (6 m_eff c^3).
    Linear in the carrier count N.
    """
    return (
        np.sqrt(cfg.kappa)
        * COULOMB_E2
        * scales.omega_f**2
        * cfg.n_carriers
        / (6.0 * cfg.m_eff * C_LIGHT**3)
    )


@dataclass(frozen=True)
class ArrayInfo:
    """Coherent-emission figures for a planar array of nominally equal rings.

    gamma_sigma holds only at short times after excitation, before the ring
    radii spread dephases the array; past tau_spr it is just an upper bound.
    """

    n_rings: int
    delta_r0: float
    gamma_sigma: float
    tau_spr: float

    def __post_init__(self):
        if self.n_rings < 1:
            raise ConfigError(f"ring count must be >= 1, got {self.n_rings}")


def array_decay_rate(cfg: RingConfig, scales: RingScales, n_rings: int) -> float:
    """Coherent array damping rate: n_rings times the single-ring rate."""
    if n_rings < 1:
        raise ConfigError(f"ring count must be >= 1, got {n_rings}")
    return radiative_decay_rate(cfg, scales) * n_rings


def spread_time(cfg: RingConfig, scales: RingScales, delta_r0: float) -> float:
    """Dephasing time of an array with radius spread delta_r0."""
    if not 0 < delta_r0 < cfg.r0:
        raise ConfigError(f"need 0 < delta_r0 < r0, got {delta_r0}")
    return (2.0 * np.pi / scales.omega_f) * (cfg.r0 / delta_r0)


def array_info(cfg: RingConfig, scales: RingScales, n_rings: int, delta_r0: float) -> ArrayInfo:
    return ArrayInfo(
        n_rings=n_rings,
        delta_r0=delta_r0,
        gamma_sigma=array_decay_rate(cfg, scales, n_rings),
        tau_spr=spread_time(cfg, scales, delta_r0),
    )


def spontaneous_emission_rate(
    m: int, mp: int, scales: RingScales, gamma: float
) -> float:
    """Spontaneous-emission decoherence of rho_{m m'}.

    gamma * |(eps_m - eps_m')/(hbar omega_F)|^3
          * (2 + f0_{m+1} + f0_{m'+1} - f0_{m-1} - f0_{m'-1})

    The occupancy bracket lies in [0, 4]; occupations outside the window take
    their T-limit value 0.  The energy ratio enters as |.|^3 so the rate is
    non-negative for either index order.
    """
    de = abs(scales.eps_of(m) - scales.eps_of(mp))
    ratio = de / (HBAR * scales.omega_f)
    bracket = (
        2.0
        + scales.f0_of(m + 1)
        + scales.f0_of(mp + 1)
        - scales.f0_of(m - 1)
        - scales.f0_of(mp - 1)
    )
    return gamma * ratio**3 * max(bracket, 0.0)


def la_rate_unit(cfg: RingConfig) -> float:
    """1/tau_LA = |D|^2 / (hbar c_LA^2 rho_s d^2 r0)."""
    return cfg.deform**2 / (HBAR * cfg.c_la**2 * cfg.rho_s * cfg.d**2 * cfg.r0)


def coherent_phonon_rate(cfg: RingConfig, scales: RingScales) -> float:
    """Dipole decay via emission of coherent LA phonon waves.

    gamma_s = F(omega_F d / c_LA) / tau_LA, valid for omega_F < omega_Debye.
    """
    if scales.omega_f >= cfg.omega_debye:
        raise ValidityError(
            f"omega_F={scales.omega_f:.3e} >= omega_Debye={cfg.omega_debye:.3e}: "
            "coherent-phonon formula outside validity"
        )
    return la_rate_unit(cfg) * form_factor(scales.omega_f * cfg.d / cfg.c_la)


# occupancy factors below this floor cannot contribute at double precision
_OCC_FLOOR = 1e-18


def _scatter_out_sums(cfg: RingConfig, scales: RingScales) -> np.ndarray:
    """sum_a R(a, b) for every window index b; R per the incoherent channel.

    R(a, b) couples state b to state a with phonon wavenumber
    q = (eps_a - eps_b)/(hbar c_LA).  Emission (q < 0 window) carries the
    emptiness 1 - f0_a of the lower final state, absorption-side terms
    (q > 0 window) the occupation f0_a; both require matching index signs
    (sgn 0 matches either) and |q| inside the Debye window.  States beyond
    the index window carry f0 = 0 and drop out on the q > 0 side only.
    """
    m_cut = scales.m_cut
    unit = HBAR**2 / (2.0 * cfg.m_eff * cfg.r0**2)  # eps_m = unit * m^2
    q_max = cfg.omega_debye / cfg.c_la
    de_max = HBAR * cfg.c_la * q_max  # = hbar * omega_debye
    b_vals = np.arange(-m_cut, m_cut + 1)

    # candidate partner indices: |a^2 - b^2| * unit < de_max
    a_lim = int(np.floor(np.sqrt(m_cut**2 + de_max / unit))) + 1
    a_vals = np.arange(-a_lim, a_lim + 1)

    A, B = np.meshgrid(a_vals, b_vals, indexing="ij")
    de = unit * (A.astype(float) ** 2 - B.astype(float) ** 2)
    q = de / (HBAR * cfg.c_la)
    inside = (np.abs(q) < q_max) & (q != 0.0)
    sign_ok = (A == 0) | (B == 0) | (np.sign(A) == np.sign(B))

    f_a = np.zeros(len(a_vals))
    in_window = np.abs(a_vals) <= m_cut
    f_a[in_window] = scales.f0[a_vals[in_window] + m_cut]
    occ = np.where(q > 0, f_a[:, None], 1.0 - f_a[:, None])

    active = inside & sign_ok & (occ > _OCC_FLOOR)
    y = np.abs(q[active]) * cfg.d
    y_unique, inv = np.unique(y, return_inverse=True)
    f_of_y = form_factor_batch(y_unique)
    contrib = np.zeros_like(q)
    contrib[active] = f_of_y[inv] * occ[active]
    return contrib.sum(axis=0)


def incoherent_phonon_rate(m: int, mp: int, cfg: RingConfig, scales: RingScales) -> float:
    """Decoherence of rho_{m m'} by spontaneous emission of incoherent phonons.

    (1/tau_LA) * sum_nu [ R(m+nu, m) + R(m'+nu, m') ]; symmetric in (m, m').
    """
    sums = _scatter_out_sums(cfg, scales)
    i, j = scales.index(m), scales.index(mp)
    return la_rate_unit(cfg) * (sums[i] + sums[j])


def effective_dipole_phonon_rate(cfg: RingConfig, scales: RingScales) -> float:
    """Incoherent-phonon decay of the dipole itself.

    Occupation-difference-weighted average of the (m, m-1) coherence rates,
    the same weights |f0_{m-1} - f0_m| with which a weak kick populates them.
    """
    sums = _scatter_out_sums(cfg, scales)
    rate = la_rate_unit(cfg) * (sums[1:] + sums[:-1])
    weights = np.abs(scales.f0[:-1] - scales.f0[1:])
    total = weights.sum()
    if total == 0.0:
        return 0.0
    return float((weights * rate).sum() / total)


def total_coherence_decay(
    m: int,
    mp: int,
    *,
    gamma_rad: float = 0.0,
    gamma_s: float = 0.0,
    gamma_sp: float = 0.0,
    gamma_ssp: float = 0.0,
) -> float:
    """Combined off-diagonal decay: independent channels add.

    The scalar dipole rates apply with unit weight to every coherence; this
    is the simplest consistent extension of rates defined for the first
    coherences and is the declared modeling choice.
    """
    return gamma_rad + gamma_s + gamma_sp + gamma_ssp


@dataclass(frozen=True)
class RateTable:
    """All decay channels for one ring configuration.

    gamma_sp / gamma_ssp are (2 m_cut + 1)^2 tables over (m, m'); gamma_total
    combines the enabled channels for use by the propagator (diagonal kept 0,
    populations do not decay in this model).
    """

    m_cut: int
    gamma_rad: float
    gamma_s: float
    gamma_sp: np.ndarray = field(repr=False)
    gamma_ssp: np.ndarray = field(repr=False)
    gamma_total: np.ndarray = field(repr=False)
    channels: tuple = CHANNELS

    def __post_init__(self):
        for arr in (self.gamma_sp, self.gamma_ssp, self.gamma_total):
            arr.setflags(write=False)


def build_rate_table(
    cfg: RingConfig, scales: RingScales, channels=CHANNELS
) -> RateTable:
    """Evaluate every enabled channel on the full (m, m') window."""
    unknown = set(channels) - set(CHANNELS)
    if unknown:
        raise ConfigError(f"unknown rate channels: {sorted(unknown)}")
    n = 2 * scales.m_cut + 1
    gamma = radiative_decay_rate(cfg, scales)
    gamma_s = coherent_phonon_rate(cfg, scales) if "coherent_phonon" in channels else 0.0

    if "spontaneous" in channels:
        # spontaneous-emission table, vectorized over the index grid
        de = np.abs(np.subtract.outer(scales.eps, scales.eps))
        f_pad = np.zeros(n + 2)
        f_pad[1:-1] = scales.f0  # one T-limit zero on each side for m +- 1 lookups
        f_up = f_pad[2:]  # f0_{m+1}
        f_dn = f_pad[:-2]  # f0_{m-1}
        bracket = 2.0 + np.add.outer(f_up, f_up) - np.add.outer(f_dn, f_dn)
        g_sp = gamma * (de / (HBAR * scales.omega_f)) ** 3 * np.maximum(bracket, 0.0)
    else:
        g_sp = np.zeros((n, n))

    if "incoherent_phonon" in channels:
        sums = _scatter_out_sums(cfg, scales)
        g_ssp = la_rate_unit(cfg) * np.add.outer(sums, sums)
    else:
        g_ssp = np.zeros((n, n))

    total = g_sp + g_ssp
    if "radiative" in channels:
        total += gamma
    total += gamma_s
    np.fill_diagonal(total, 0.0)

    return RateTable(
        m_cut=scales.m_cut,
        gamma_rad=gamma,
        gamma_s=gamma_s,
        gamma_sp=g_sp,
        gamma_ssp=g_ssp,
        gamma_total=total,
        channels=tuple(channels),
    )
