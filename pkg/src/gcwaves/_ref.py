"""NumPy reference implementations of the hot kernels.

Always importable; `gcwaves.kernels` prefers the compiled twin `_accel`
when it is present.  Both implementations must agree to the last bit on the
shared test battery (see tests/test_kernels_parity.py).
"""

from __future__ import annotations

import itertools

import numpy as np


def bw_coupling_matrix(fcoeffs: np.ndarray, ghalf: np.ndarray,
                       chi_table: np.ndarray) -> np.ndarray:
    """Mode-coupling matrix of one separable paradifferential term.

    W[k, n] = F(k - n) * g((k + n)/2) * chi[k, n] over centered mode indices
    k, n in {-M/2+1, ..., M/2}.

    Parameters
    ----------
    fcoeffs : complex, length M
        Fourier coefficients of the x-part in centered order
        (mode -M/2+1 first).
    ghalf : complex, length 2M-1
        xi-part evaluated on the half-integer lattice (k+n)/2, i.e.
        ghalf[j] = g((j + 2*nmin)/2) with nmin = -M/2+1.
    chi_table : float, shape (M, M)
        Cutoff values chi((k-n)/<(k+n)/2>) on the same centered lattice.
    """
    M = len(fcoeffs)
    nmin = -(M // 2) + 1
    k = np.arange(nmin, nmin + M)
    diff = k[:, None] - k[None, :]            # k - n
    summ = (k[:, None] + k[None, :]) - 2 * nmin  # index into ghalf
    fidx = diff - nmin
    valid = (fidx >= 0) & (fidx < M)
    W = np.zeros((M, M), dtype=np.complex128)
    W[valid] = fcoeffs[fidx[valid]] * ghalf[summ[valid]] * chi_table[valid]
    return W


def bw_coupling_matrix_shifted(fcoeffs: np.ndarray, gfun,
                               chi_table: np.ndarray, shift: float) -> np.ndarray:
    """Like `bw_coupling_matrix` but with the xi argument shifted per x-mode:
    W[k, n] = F(m) * g((k+n)/2 - shift*m) * chi[k, n],  m = k - n.

    Used to realize the standard->Weyl symbol transcription exactly.
    """
    M = len(fcoeffs)
    nmin = -(M // 2) + 1
    k = np.arange(nmin, nmin + M)
    diff = k[:, None] - k[None, :]
    half = 0.5 * (k[:, None] + k[None, :]).astype(float)
    fidx = diff - nmin
    valid = (fidx >= 0) & (fidx < M)
    W = np.zeros((M, M), dtype=np.complex128)
    args = half[valid] - shift * diff[valid]
    W[valid] = fcoeffs[fidx[valid]] * np.asarray(gfun(args), dtype=np.complex128) \
        * chi_table[valid]
    return W


def divisor_scan(mvals: np.ndarray, size_plus: int, size_minus: int,
                 n_sum_max: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Scan all canonical sign-split frequency tuples for the minimum divisor.

    Enumerates nondecreasing tuples A (length size_plus) and B (length
    size_minus) of integers >= 1 with sum(A) + sum(B) <= n_sum_max, skipping
    the resonant case A == B (possible only when the sizes agree), and
    tracks |D| = |sum m(A) - sum m(B)| bucketed by nu = max frequency.

    Returns
    -------
    min_by_nu : float array, length n_sum_max + 1
        min |D| among tuples with max frequency nu (inf where empty).
    worst : int array
        the tuple (A..., B...) realizing the global minimum.
    count : int
        number of non-resonant tuples visited.
    """
    min_by_nu = np.full(n_sum_max + 1, np.inf)
    worst = None
    best = np.inf
    count = 0
    for a in _nondecreasing_tuples(size_plus, n_sum_max - size_minus):
        sa = sum(a)
        ma = sum(mvals[j] for j in a)
        rem = n_sum_max - sa
        for b in _nondecreasing_tuples(size_minus, rem):
            if size_plus == size_minus and a == b:
                continue
            count += 1
            d = abs(ma - sum(mvals[j] for j in b))
            nu = max(a[-1] if a else 1, b[-1] if b else 1)
            if d < min_by_nu[nu]:
                min_by_nu[nu] = d
            if d < best:
                best = d
                worst = a + b
    if worst is None:
        worst = ()
    return min_by_nu, np.array(worst, dtype=np.int64), count


def _nondecreasing_tuples(length: int, total_max: int):
    """All nondecreasing tuples of positive integers with bounded sum."""
    if length == 0:
        if total_max >= 0:
            yield ()
        return
    if total_max < length:
        return
    for tup in _bounded(length, 1, total_max):
        yield tup


def _bounded(length, lo, budget):
    if length == 1:
        for v in range(lo, budget + 1):
            yield (v,)
        return
    for v in range(lo, budget // length + 1):
        for rest in _bounded(length - 1, v, budget - v):
            yield (v,) + rest
