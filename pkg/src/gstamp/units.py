"""Unit conversion constants shared across the package.

All dynamical quantities use kpc for length, km/s for velocity, Myr for
time and Julian years for long intervals.  Potentials and specific
energies are in (km/s)^2; masses enter only through G*M in kpc*(km/s)^2.
"""

import math

# IAU 2012/2015 values: 1 au in km, 1 pc = 648000/pi au.
AU_KM = 1.495978707e8
PC_KM = AU_KM * 648000.0 / math.pi        # 3.0856775814913673e13
KPC_KM = PC_KM * 1000.0

# Julian year and megayear in seconds.
JYEAR_S = 3.15576e7
MYR_S = JYEAR_S * 1e6

# Tangential velocity of 1 mas/yr at 1 kpc, in km/s (= 1 au/Julian yr).
KMS_PER_MASYR_KPC = AU_KM / JYEAR_S       # 4.740470463533348

# 1 km/s expressed in kpc/Myr.
KPC_PER_MYR_PER_KMS = MYR_S / KPC_KM      # 1.0227121650537077e-3

# Time for a landmark moving at 1 km/s to cover 1 kpc, in Julian years.
YR_PER_KPC_PER_KMS = KPC_KM / JYEAR_S     # 9.777922163783267e8

DEG2RAD = math.pi / 180.0
RAD2DEG = 180.0 / math.pi
