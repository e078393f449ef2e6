"""Bounded influence function, its smoothed envelope, and shared constants.

The estimators in this package cap the effect of outliers by replacing the
identity with a bounded, odd, non-decreasing function ``psi``.  The concave
envelope ``chi`` is a quadratic smoothing of ``psi`` above the point where
``psi'' = -1/4``; it is what the bound calculators in :mod:`robustgram.bounds`
are derived from.  Everything here is pure and array-friendly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)

# Universal constants, stored as literals; tests recompute them from the
# defining formulas below and require agreement to 1e-12.
#   c       = 15 / (8 log(2) (sqrt(2)-1)) * exp((1 + 2 sqrt(2)) / 2)
#   z1      = 1 - sqrt(4 sqrt(2) - 5)        (psi''(z1) = -1/4)
#   p1      = sqrt(4 sqrt(2) - 5) / (2 (sqrt(2)-1))   (= psi'(z1))
#   sup_chi = -log(2 (sqrt(2)-1)) + (1 + 2 sqrt(2)) / 2
C_UNIVERSAL = 44.28777720541279
Z1 = 0.18953454762563715
P1 = 0.9783183434785161
SUP_CHI = 2.1024399688326927


@dataclass(frozen=True)
class PsiConstants:
    """The scalar constants attached to the influence function."""

    c: float = C_UNIVERSAL
    z1: float = Z1
    p1: float = P1
    sup_chi: float = SUP_CHI


CONSTANTS = PsiConstants()


def _as_float_array(t):
    return np.asarray(t, dtype=float)


def _maybe_scalar(out, t):
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def psi(t):
    """Bounded odd influence function.

    Equals -log(1 - t + t^2/2) on [0, 1], saturates at log(2) beyond, and is
    extended by psi(-t) = -psi(t).  Accepts scalars or arrays.
    """
    arr = _as_float_array(t)
    a = np.abs(arr)
    capped = np.minimum(a, 1.0)
    # 1 - a + a^2/2 >= 1/2 on [0, 1], so log1p is safe
    body = -np.log1p(capped * (0.5 * capped - 1.0))
    out = np.sign(arr) * np.where(a >= 1.0, LOG2, body)
    return _maybe_scalar(out, t)


def psi_prime(t):
    """Derivative of ``psi``; even, in [0, 1], and 0 outside (-1, 1).

    At t = +/-1 the interior one-sided value 0 is used, which coincides with
    the flat exterior branch, so the function is continuous.
    """
    a = np.abs(_as_float_array(t))
    capped = np.minimum(a, 1.0)
    out = np.where(a >= 1.0, 0.0, (1.0 - capped) / (1.0 - capped + 0.5 * capped * capped))
    return _maybe_scalar(out, t)


def chi(z):
    """Smoothed upper envelope of ``psi``.

    Coincides with psi below z1, continues as the tangent parabola
    psi(z1) + p1 (z - z1) - (z - z1)^2 / 8 up to z1 + 4 p1, and is constant
    (equal to ``SUP_CHI``) beyond.  Satisfies psi <= chi <= log(1 + z + z^2/2).
    """
    z_arr = _as_float_array(z)
    psi_z1 = SUP_CHI - 2.0 * P1 * P1
    dz = z_arr - Z1
    parabola = psi_z1 + P1 * dz - dz * dz / 8.0
    out = np.where(
        z_arr <= Z1,
        psi(z_arr),
        np.where(z_arr >= Z1 + 4.0 * P1, SUP_CHI, parabola),
    )
    return _maybe_scalar(out, z)
