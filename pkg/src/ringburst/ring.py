"""Single-particle spectrum, derived scales, and equilibrium occupation of a quantum ring.

The ring is a thin two-dimensional channel of radius r0 and width d (d << r0)
holding N spin-degenerate carriers in the lowest radial channel.  States are
labeled by the angular-momentum index m with the one-channel dispersion

    eps_m = hbar^2 m^2 / (2 m_eff r0^2).

One spin species is described explicitly; its equilibrium occupation f0_m is a
Fermi-Dirac distribution fixed by 2 * sum_m f0_m = N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import HBAR, ELECTRON_MASS, K_B, EV
from .errors import ConfigError, CutoffError

__all__ = [
    "MATERIALS",
    "RingConfig",
    "RingScales",
    "make_config",
    "fermi_index",
    "default_m_cut",
    "level_energy",
    "energy_ladder",
    "equilibrium_occupation",
    "derive_scales",
]

# Material presets.  Phonon constants are standard literature values for the
# LA deformation-potential channel; deform is stored signed, only |D|^2 enters.
MATERIALS = {
    "GaAs": {
        "m_eff_me": 0.067,
        "kappa": 12.5,
        "deform_ev": -8.6,
        "rho_s_kg_m3": 5.32e3,
        "c_la_m_s": 5.29e3,
        "debye_mev": 30.0,
    },
}


@dataclass(frozen=True)
class RingConfig:
    """Full physical parameter set of one ring.

    All quantities SI: r0, d in m; m_eff in kg; deform in J; rho_s in kg/m^3;
    c_la in m/s; omega_debye in rad/s; temperature in K.  m_cut of None means
    "use the default window" (see :func:`default_m_cut`).
    """

    r0: float
    d: float
    n_carriers: int
    m_eff: float
    kappa: float
    temperature: float
    deform: float
    rho_s: float
    c_la: float
    omega_debye: float
    m_cut: int | None = None

    def __post_init__(self):
        if not self.r0 > 0:
            raise ConfigError(f"ring radius r0 must be positive, got {self.r0}")
        if not 0 < self.d < self.r0 / 2:
            raise ConfigError(
                f"ring width d must satisfy 0 < d < r0/2, got d={self.d}, r0={self.r0}"
            )
        if self.n_carriers < 2 or self.n_carriers % 2 != 0:
            raise ConfigError(
                f"carrier count N must be even and >= 2, got {self.n_carriers}"
            )
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if self.m_eff <= 0 or self.kappa <= 0 or self.rho_s <= 0 or self.c_la <= 0:
            raise ConfigError("material constants must be positive")
        if self.omega_debye <= 0:
            raise ConfigError("Debye frequency must be positive")
        if self.m_cut is not None:
            m_f = fermi_index(self.n_carriers)
            if self.m_cut < m_f + 5:
                raise ConfigError(
                    f"m_cut={self.m_cut} too small: need at least m_F + 5 = {m_f + 5}"
                )


def make_config(
    r0: float,
    d: float,
    n_carriers: int,
    temperature: float,
    material: str = "GaAs",
    m_cut: int | None = None,
    materials: dict | None = None,
    **overrides,
) -> RingConfig:
    """Build a RingConfig from a material preset plus per-field overrides.

    Overrides use the preset key names (m_eff_me, kappa, deform_ev,
    rho_s_kg_m3, c_la_m_s, debye_mev).
    """
    table = dict(MATERIALS)
    if materials:
        table.update(materials)
    if material not in table:
        raise ConfigError(f"unknown material {material!r}; known: {sorted(table)}")
    params = dict(table[material])
    for key, val in overrides.items():
        if key not in params:
            raise ConfigError(f"unknown material override {key!r}")
        params[key] = val
    return RingConfig(
        r0=r0,
        d=d,
        n_carriers=n_carriers,
        m_eff=params["m_eff_me"] * ELECTRON_MASS,
        kappa=params["kappa"],
        temperature=temperature,
        deform=params["deform_ev"] * EV,
        rho_s=params["rho_s_kg_m3"],
        c_la=params["c_la_m_s"],
        omega_debye=params["debye_mev"] * 1e-3 * EV / HBAR,
        m_cut=m_cut,
    )


def fermi_index(n_carriers: int) -> int:
    """Edge index m_F = round(N/4) for spin-degenerate filling of +-m states."""
    return int(round(n_carriers / 4))


def _eps_raw(m, cfg: RingConfig):
    """Dispersion without window checks; valid for any integer index."""
    m = np.asarray(m, dtype=float)
    return HBAR**2 * m**2 / (2.0 * cfg.m_eff * cfg.r0**2)


def level_energy(m: int, cfg: RingConfig) -> float:
    """Single-particle energy eps_m in J.  Raises outside the index window."""
    m_cut = cfg.m_cut if cfg.m_cut is not None else default_m_cut(cfg)
    if abs(m) > m_cut:
        raise CutoffError(f"|m|={abs(m)} exceeds m_cut={m_cut}")
    return float(_eps_raw(m, cfg))


def energy_ladder(cfg: RingConfig, m_cut: int) -> np.ndarray:
    """eps_m for m in [-m_cut, m_cut], index order ascending in m."""
    return _eps_raw(np.arange(-m_cut, m_cut + 1), cfg)


def default_m_cut(cfg: RingConfig) -> int:
    """Index window m_F + max(20, 6*ceil(k_B T / (hbar omega_F))).

    Sized so thermally and kick-populated states fit; convergence is checked
    by doubling in the test suite.
    """
    m_f = fermi_index(cfg.n_carriers)
    omega_f = HBAR * m_f / (cfg.m_eff * cfg.r0**2)
    thermal = math.ceil(K_B * cfg.temperature / (HBAR * omega_f)) if cfg.temperature > 0 else 0
    return m_f + max(20, 6 * thermal)


def _occupation_t0(eps: np.ndarray, n_per_spin: int) -> tuple[float, np.ndarray]:
    """Ground-state filling of the n_per_spin lowest-|m| states.

    A partially filled +-m shell is split equally between the two members so
    the equilibrium state keeps inversion symmetry.
    """
    m_cut = (len(eps) - 1) // 2
    f = np.zeros_like(eps)
    center = m_cut  # index of m = 0
    f[center] = 1.0
    remaining = n_per_spin - 1
    shell = 0
    while remaining > 0:
        shell += 1
        if shell > m_cut:
            raise ConfigError("carrier count exceeds index window capacity")
        fill = min(2, remaining)
        f[center - shell] = fill / 2.0
        f[center + shell] = fill / 2.0
        remaining -= fill
    if remaining == 0 and f[center + shell] == 0.5:
        mu = eps[center + shell]  # Fermi level pinned at the half-filled shell
    else:
        upper = eps[center + shell + 1] if center + shell + 1 < len(eps) else eps[center + shell]
        mu = 0.5 * (eps[center + shell] + upper)
    return float(mu), f


def equilibrium_occupation(cfg: RingConfig, eps: np.ndarray) -> tuple[float, np.ndarray]:
    """Chemical potential and per-spin occupations f0_m on the given ladder.

    Solves 2 * sum_m f0_m = N by bisection on mu to relative tolerance 1e-12;
    T = 0 takes a dedicated step-filling branch.
    """
    n = cfg.n_carriers
    if n > 2 * len(eps):
        raise ConfigError(
            f"N={n} exceeds window capacity 2*(2*m_cut+1)={2 * len(eps)}"
        )
    if cfg.temperature == 0.0:
        return _occupation_t0(eps, n // 2)

    kt = K_B * cfg.temperature

    def filling(mu):
        # expit-style stable Fermi function
        x = np.clip((eps - mu) / kt, -700.0, 700.0)
        return 1.0 / (np.exp(x) + 1.0)

    lo = float(eps.min() - 800.0 * kt)
    hi = float(eps.max() + 800.0 * kt)
    if not 2.0 * filling(lo).sum() <= n <= 2.0 * filling(hi).sum():
        raise ConfigError("no bracketing interval for the chemical potential")
    # bisect down to float resolution; the particle-number derivative can be
    # steep, so a loose mu interval is not good enough for the sum constraint
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if 2.0 * filling(mid).sum() < n:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    f0 = filling(mu)
    if abs(2.0 * f0.sum() - n) > 1e-10 * n:
        raise ConfigError("chemical potential bisection failed to close the sum")
    return mu, f0


@dataclass(frozen=True)
class RingScales:
    """Derived scales of a ring: energy ladder, Fermi scales, equilibrium state.

    eps and f0 are arrays over m in [-m_cut, m_cut]; index i maps to
    m = i - m_cut.
    """

    m_cut: int
    eps: np.ndarray = field(repr=False)
    f0: np.ndarray = field(repr=False)
    m_f: int
    v_f: float
    tau_f: float
    omega_f: float
    mu_c: float

    def __post_init__(self):
        self.eps.setflags(write=False)
        self.f0.setflags(write=False)

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(-self.m_cut, self.m_cut + 1)

    def index(self, m: int) -> int:
        if abs(m) > self.m_cut:
            raise CutoffError(f"|m|={abs(m)} exceeds m_cut={self.m_cut}")
        return m + self.m_cut

    def eps_of(self, m: int) -> float:
        return float(self.eps[self.index(m)])

    def f0_of(self, m) -> float:
        """Occupation; indices beyond the window take their T-limit value 0."""
        if abs(m) > self.m_cut:
            return 0.0
        return float(self.f0[m + self.m_cut])


def derive_scales(cfg: RingConfig) -> RingScales:
    """Fermi scales and equilibrium occupation for a ring configuration."""
    if cfg.n_carriers < 2:
        raise ConfigError("need at least 2 carriers")
    m_cut = cfg.m_cut if cfg.m_cut is not None else default_m_cut(cfg)
    m_f = fermi_index(cfg.n_carriers)
    v_f = HBAR * m_f / (cfg.m_eff * cfg.r0)
    tau_f = 2.0 * np.pi * cfg.r0 / v_f
    omega_f = 2.0 * np.pi / tau_f
    eps = energy_ladder(cfg, m_cut)
    mu_c, f0 = equilibrium_occupation(replace(cfg, m_cut=m_cut), eps)
    return RingScales(
        m_cut=m_cut,
        eps=eps,
        f0=f0,
        m_f=m_f,
        v_f=v_f,
        tau_f=tau_f,
        omega_f=omega_f,
        mu_c=mu_c,
    )
