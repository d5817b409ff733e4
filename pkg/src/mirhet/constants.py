"""Physical constants (CODATA, via scipy.constants) and small unit helpers."""

from dataclasses import dataclass

import numpy as np
import scipy.constants as pc


@dataclass(frozen=True)
class PhysicalConstants:
    e: float = pc.e  # elementary charge [C]
    h: float = pc.h  # Planck constant [J s]
    c: float = pc.c  # speed of light [m/s]
    k_b: float = pc.k  # Boltzmann constant [J/K]


CONST = PhysicalConstants()

T_AMBIENT = 295.0  # room-temperature electronics [K]


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def watts_to_dbm(p):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p, dtype=float) / 1e-3)


def dbm_to_watts(dbm):
    return 1e-3 * 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)
