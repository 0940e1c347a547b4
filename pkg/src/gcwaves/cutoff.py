"""Smooth frequency cutoffs.

All cutoffs derive from one C-infinity bump profile chi(r): identically 1
for |r| <= delta/2, identically 0 for |r| >= delta, glued with the standard
exp(-1/t) partition in between.  The transition zone is tabulated once on a
fine grid and evaluated through a cubic spline, so the compiled and the
NumPy code paths see byte-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

TABLE_POINTS = 10_000


def _glue(t: np.ndarray) -> np.ndarray:
    """Smooth descent from 1 at t=0 to 0 at t=1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
        b = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffProfile:
    """Even bump chi(r): 1 on |r| <= delta/2, 0 on |r| >= delta.

    The two-argument cutoff used by the paradifferential quantization is
    chi(xi_prime, xi) = chi(xi_prime / <xi>) with <xi> = sqrt(1 + xi^2).
    """

    delta: float = 0.4
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        r = np.linspace(self.delta / 2, self.delta, TABLE_POINTS)
        t = (r - self.delta / 2) / (self.delta / 2)
        object.__setattr__(self, "_spline", CubicSpline(r, _glue(t)))

    def chi_tilde(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        out = np.ones_like(r)
        out[r >= self.delta] = 0.0
        mid = (r > self.delta / 2) & (r < self.delta)
        out[mid] = self._spline(r[mid])
        return out

    def chi(self, xi_prime, xi) -> np.ndarray:
        bracket = np.sqrt(1.0 + np.asarray(xi, dtype=float)**2)
        return self.chi_tilde(np.asarray(xi_prime, dtype=float) / bracket)

    def spline_tables(self):
        """Breakpoints and polynomial coefficients of the transition spline
        (consumed by the compiled kernel for bit-identical evaluation)."""
        return self._spline.x.copy(), self._spline.c.copy()


# cutoff used inside the dispersion multipliers: supported in |xi| < 1/2
_LOW_FREQ = CutoffProfile(delta=0.5)


def low_frequency_chi(xi) -> np.ndarray:
    """chi(xi): 1 near 0, vanishing for |xi| >= 1/2; kills the origin in
    smoothed dispersion multipliers while leaving every integer mode alone."""
    return _LOW_FREQ.chi_tilde(xi)
