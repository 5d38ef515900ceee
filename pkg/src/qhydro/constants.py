"""Physical constants and unit helpers (SI internally, eV at the API edge)."""

import scipy.constants as const

KB = const.k                    # Boltzmann constant [J/K]
HBAR = const.hbar               # reduced Planck constant [J s]
M_E = const.m_e                 # electron rest mass [kg]
Q_E = const.e                   # elementary charge [C]
EV = const.e                    # 1 eV [J]


def ev_to_joule(x):
    return x * EV


def joule_to_ev(x):
    return x / EV
