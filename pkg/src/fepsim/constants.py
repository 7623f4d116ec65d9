"""Pinned physical constants (CODATA) used by the dispersion-phase calculator.

Everything downstream of these numbers must go through this table so that
results are reproducible bit-for-bit across machines.
"""

# Electron rest energy m_e c^2 in eV.
ELECTRON_REST_ENERGY_EV = 510998.95

# Speed of light in m/s (exact).
SPEED_OF_LIGHT = 299792458.0

# Reduced Planck constant in J*s (exact since the 2019 SI redefinition).
HBAR_JS = 1.054571817e-34

# Elementary charge in C (exact).
ELEMENTARY_CHARGE = 1.602176634e-19
