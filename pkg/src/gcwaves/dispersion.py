"""Linear dispersion of gravity-capillary waves on depth-1 water, small
divisors, resonance bookkeeping, and non-resonance scans.

The frequency of the n-th mode (gravity normalised to 1) is

    m_kappa(xi) = (xi tanh xi)^(1/2) (1 + kappa xi^2)^(1/2),

growing like sqrt(kappa) |xi|^(3/2).  A general gravity g rescales time by
sqrt(g) and kappa by 1/g, which is how every routine here treats it.
Divisors are signed sums of these frequencies over integer tuples; a tuple
whose plus and minus frequency multisets coincide gives a divisor that is
zero for every kappa and is flagged resonant instead of scanned.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .cutoff import low_frequency_chi
from . import kernels


class DispersionError(ValueError):
    pass


@dataclass(frozen=True)
class PhysParams:
    """Gravity and surface tension; the depth is fixed at 1."""

    g: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.g > 0 and self.kappa > 0):
            raise DispersionError(f"need g > 0 and kappa > 0, got g={self.g}, kappa={self.kappa}")


@dataclass(frozen=True)
class ReducedParams:
    params: PhysParams      # g = 1, kappa replaced by kappa/g
    time_scale: float       # t_phys = t_scaled / sqrt(g)
    psi_scale: float        # psi_scaled = sqrt(g) * psi_phys


def reduce_g(params: PhysParams) -> ReducedParams:
    s = math.sqrt(params.g)
    return ReducedParams(PhysParams(1.0, params.kappa / params.g), s, s)


def m_kappa(xi, params: PhysParams, smoothed: bool = False):
    """Dispersion multiplier; even in xi, vanishing at 0.

    With `smoothed` the low-frequency cutoff factor (1 - chi(xi)) is
    included; chi is supported in |xi| < 1/2 so both forms coincide on
    every nonzero integer mode.
    """
    xi = np.abs(np.asarray(xi, dtype=float))
    keff = params.kappa / params.g
    out = math.sqrt(params.g) * np.sqrt(xi * np.tanh(xi)) * np.sqrt(1.0 + keff * xi**2)
    if smoothed:
        out = out * (1.0 - low_frequency_chi(xi))
    return out if out.ndim else float(out)


def lambda_kappa(xi, params: PhysParams, smoothed: bool = False):
    """Quarter-power companion multiplier; m_kappa(n) * lambda_kappa(n)^2
    equals n tanh n on nonzero integers (at g = 1)."""
    xi = np.abs(np.asarray(xi, dtype=float))
    keff = params.kappa / params.g
    with np.errstate(invalid="ignore"):
        out = np.where(xi > 0, (xi * np.tanh(xi) / (1.0 + keff * xi**2))**0.25, 0.0)
    if smoothed:
        out = out * (1.0 - low_frequency_chi(xi))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DivisorTuple:
    """Sign-split frequency tuple: indices 0..ell carry +, the rest -."""

    p: int
    ell: int
    n: tuple

    def __post_init__(self):
        if self.p < 0:
            raise DispersionError("p must be >= 0")
        if not -1 <= self.ell <= self.p + 1:
            raise DispersionError(f"ell must lie in [-1, {self.p + 1}], got {self.ell}")
        if len(self.n) != self.p + 2:
            raise DispersionError(f"tuple needs {self.p + 2} entries, got {len(self.n)}")
        if any(int(v) < 1 or int(v) != v for v in self.n):
            raise DispersionError("frequencies must be positive integers")
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))

    @property
    def plus_block(self):
        return self.n[: self.ell + 1]

    @property
    def minus_block(self):
        return self.n[self.ell + 1:]


def small_divisor(t: DivisorTuple, params: PhysParams) -> float:
    m = m_kappa(np.asarray(t.n, dtype=float), params)
    k = t.ell + 1
    return float(np.sum(m[:k]) - np.sum(m[k:]))


def is_resonant_tuple(t: DivisorTuple) -> bool:
    """True iff the + and - multisets coincide (divisor vanishes for all kappa)."""
    a, b = t.plus_block, t.minus_block
    return len(a) == len(b) and sorted(a) == sorted(b)


def find_wilton_kappa(a: int, b: int, params: PhysParams = PhysParams(),
                      bracket=(1e-6, 1e3), tol=1e-12):
    """kappa root of m(a) + m(b) = m(a+b), or None when no sign change.

    A root is a quadratic (three-wave) resonance of the linearised dynamics.
    """
    if a < 1 or b < 1:
        raise DispersionError("frequencies must be positive integers")

    def f(kap):
        pp = PhysParams(params.g, kap)
        return m_kappa(a, pp) + m_kappa(b, pp) - m_kappa(a + b, pp)

    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if flo * fhi > 0:
        return None
    root = brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    if abs(f(root)) > 1e-10:
        return None
    return float(root)


@dataclass(frozen=True)
class KappaScanRow:
    kappa: float
    min_abs_divisor: float
    worst_tuple: tuple
    worst_split: tuple      # (size_plus, size_minus) of the worst tuple
    fitted_N0: float
    tuples_scanned: int
    resonant_candidate: bool


@dataclass(frozen=True)
class ResonanceReport:
    p_max: int
    n_sum_max: int
    rows: tuple
    wilton_roots: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("kappa,min_abs_divisor,fitted_N0,worst_tuple,plus_size,tuples_scanned,resonant_candidate\n")
        for r in self.rows:
            tup = " ".join(str(v) for v in r.worst_tuple)
            buf.write(f"{r.kappa:.17e},{r.min_abs_divisor:.17e},{r.fitted_N0:.6f},"
                      f"{tup},{r.worst_split[0]},{r.tuples_scanned},{int(r.resonant_candidate)}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "p_max": self.p_max,
            "n_sum_max": self.n_sum_max,
            "kappa": [r.kappa for r in self.rows],
            "min_abs_D": [r.min_abs_divisor for r in self.rows],
            "fitted_N0": [r.fitted_N0 for r in self.rows],
            "wilton_roots": list(self.wilton_roots),
        }, indent=1)


def _splits(p_max: int):
    """Canonical (size_plus, size_minus) block splits with size_plus <= size_minus.

    Swapping the blocks only flips the divisor sign, so each unordered split
    is visited once; the symmetry factor is 2 whenever the sizes differ and
    for distinct blocks of equal size.
    """
    seen = set()
    for p in range(p_max + 1):
        for ell in range(-1, p + 2):
            s_plus, s_minus = ell + 1, p + 1 - ell
            key = (min(s_plus, s_minus), max(s_plus, s_minus))
            if key not in seen:
                seen.add(key)
                yield key


def scan_nonresonance(params: PhysParams, p_max: int, n_sum_max: int,
                      kappa_grid) -> ResonanceReport:
    """Enumerate non-resonant divisors and fit the small-divisor exponent.

    Per kappa the scan records min |D| over all canonical tuples with
    sum n_j <= n_sum_max and p <= p_max, the worst tuple, and the least
    squares exponent N0 in min|D|(nu) ~ c nu^(-N0) over max-frequency
    buckets nu.
    """
    if p_max > 4 or n_sum_max > 200:
        raise DispersionError("scan capped at p_max <= 4, n_sum_max <= 200")
    kappa_grid = list(kappa_grid)
    if not kappa_grid:
        raise DispersionError("empty kappa grid")
    if n_sum_max < 2:
        raise DispersionError("n_sum_max must allow at least one pair")

    rows = []
    for kap in kappa_grid:
        pk = PhysParams(params.g, kap)
        mvals = m_kappa(np.arange(n_sum_max + 1, dtype=float), pk)
        best = np.inf
        worst, worst_split = (), (0, 0)
        min_by_nu = np.full(n_sum_max + 1, np.inf)
        total = 0
        for s_plus, s_minus in _splits(p_max):
            mb, w, cnt = kernels.divisor_scan(mvals, s_plus, s_minus, n_sum_max)
            total += cnt
            np.minimum(min_by_nu, mb, out=min_by_nu)
            i = int(np.argmin(mb))
            if mb[i] < best:
                best = float(mb[i])
                worst = tuple(int(v) for v in w)
                worst_split = (s_plus, s_minus)
        nu = np.nonzero(np.isfinite(min_by_nu))[0]
        nu = nu[nu >= 2]
        if len(nu) >= 3:
            slope = np.polyfit(np.log(nu.astype(float)), np.log(min_by_nu[nu]), 1)[0]
            fitted = -float(slope)
        else:
            fitted = float("nan")
        rows.append(KappaScanRow(float(kap), best, worst, worst_split, fitted,
                                 total, best < 1e-10))

    roots = []
    for a in range(1, 4):
        for b in range(a, 4):
            if a + b <= n_sum_max:
                r = find_wilton_kappa(a, b, params)
                if r is not None:
                    roots.append(r)
    return ResonanceReport(p_max, n_sum_max, tuple(rows), tuple(sorted(roots)))
