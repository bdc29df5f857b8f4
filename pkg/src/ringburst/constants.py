"""Physical constants, SI, CODATA via scipy."""

from scipy import constants as _sc

HBAR = _sc.hbar              # J*s
E_CHARGE = _sc.e             # C, elementary charge (positive)
ELECTRON_MASS = _sc.m_e      # kg
K_B = _sc.k                  # J/K
C_LIGHT = _sc.c              # m/s
EPS0 = _sc.epsilon_0         # F/m
EV = _sc.electron_volt       # J per eV

# e^2/(4 pi eps0): converts Gaussian-unit e^2 factors to SI, J*m
COULOMB_E2 = E_CHARGE**2 / (4.0 * _sc.pi * EPS0)

# observables from a single propagated spin species carry this factor
SPIN_DEGENERACY = 2.0
