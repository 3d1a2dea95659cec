'''
Unit system of ionshuttle: micrometre, microsecond, atomic mass unit and
volt. Energies are then in amu um^2/us^2 and actions in amu um^2/us.

The conversion factors come from scipy.constants:

>>> from ionshuttle.units import CHARGE_VOLT, HBAR, PLANCK, angular
>>> print("%.5e" % CHARGE_VOLT)
9.64853e+07

>>> print("%.6f" % HBAR)
0.063508

>>> abs(PLANCK - 2 * 3.141592653589793 * HBAR) < 1e-15
True

Frequencies are given in MHz (cycles per microsecond):

>>> print("%.4f" % angular(1.3))
8.1681
'''

import numpy as np
from scipy import constants

AMU = constants.atomic_mass

# energy of the elementary charge at 1 V
CHARGE_VOLT = constants.e / AMU

# amu um^2/us  ==  AMU * 1e-12 / 1e-6  J s
HBAR = constants.hbar / (AMU * 1e-6)
PLANCK = constants.h / (AMU * 1e-6)

CALCIUM_40 = 40.0

def angular(frequency_mhz):
    ''' Angular frequency in rad/us for a frequency in MHz. '''
    return 2 * np.pi * frequency_mhz

def phonons(energy, omega):
    ''' Express an energy in units of hbar*omega. '''
    return energy / (HBAR * omega)

def ground_state_width(mass, omega):
    ''' Position spread sqrt(hbar/(2 m omega)) of the ground state. '''
    return np.sqrt(HBAR / (2 * mass * omega))
