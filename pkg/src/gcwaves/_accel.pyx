# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in `_ref`.

Loop order, summation order, and arithmetic grouping replicate the NumPy
reference exactly, so both backends agree to the last bit (enforced by
tests/test_kernels_parity.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def bw_coupling_matrix(cnp.ndarray[cnp.complex128_t, ndim=1] fcoeffs,
                       cnp.ndarray[cnp.complex128_t, ndim=1] ghalf,
                       cnp.ndarray[cnp.float64_t, ndim=2] chi_table):
    """Banded mode-coupling matrix of one separable paradifferential term."""
    cdef Py_ssize_t M = fcoeffs.shape[0]
    cdef Py_ssize_t half = M // 2 - 1
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] W = np.zeros((M, M), dtype=np.complex128)
    cdef Py_ssize_t i, j, fidx
    cdef double chi
    for i in range(M):
        for j in range(M):
            chi = chi_table[i, j]
            if chi == 0.0:
                continue
            fidx = i - j + half
            if fidx < 0 or fidx >= M:
                continue
            W[i, j] = fcoeffs[fidx] * ghalf[i + j] * chi
    return W


cdef class _Scanner:
    cdef double[:] mvals
    cdef double[:] min_by_nu
    cdef long[:] abuf
    cdef long[:] bbuf
    cdef int sp, sm, nmax
    cdef double best, ma
    cdef long count
    cdef long[:] worst

    def __init__(self, double[:] mvals, int sp, int sm, int nmax):
        self.mvals = mvals
        self.sp = sp
        self.sm = sm
        self.nmax = nmax
        self.min_by_nu = np.full(nmax + 1, np.inf)
        self.abuf = np.zeros(max(sp, 1), dtype=np.int64)
        self.bbuf = np.zeros(max(sm, 1), dtype=np.int64)
        self.worst = np.zeros(sp + sm, dtype=np.int64)
        self.best = np.inf
        self.count = 0

    cdef void run(self):
        self._rec_a(self.sp, 1, self.nmax - self.sm, 0, 0.0)

    cdef void _rec_a(self, int length, long lo, long budget, int pos, double acc):
        cdef long v
        if length == 0:
            if budget >= 0:
                self.ma = acc
                self._rec_b(self.sm, 1, self.nmax - self._asum(), 0, 0.0)
            return
        if budget < length:
            return
        if length == 1:
            for v in range(lo, budget + 1):
                self.abuf[pos] = v
                self.ma = acc + self.mvals[v]
                self._rec_b(self.sm, 1, self.nmax - self._asum(), 0, 0.0)
            return
        for v in range(lo, budget // length + 1):
            self.abuf[pos] = v
            self._rec_a(length - 1, v, budget - v, pos + 1, acc + self.mvals[v])

    cdef long _asum(self):
        cdef long s = 0
        cdef int i
        for i in range(self.sp):
            s += self.abuf[i]
        return s

    cdef void _rec_b(self, int length, long lo, long budget, int pos, double acc):
        cdef long v
        if length == 0:
            if budget >= 0:
                self._visit(acc)
            return
        if budget < length:
            return
        if length == 1:
            for v in range(lo, budget + 1):
                self.bbuf[pos] = v
                self._visit(acc + self.mvals[v])
            return
        for v in range(lo, budget // length + 1):
            self.bbuf[pos] = v
            self._rec_b(length - 1, v, budget - v, pos + 1, acc + self.mvals[v])

    cdef void _visit(self, double mb):
        cdef int i
        cdef long nu, la, lb
        cdef double d
        if self.sp == self.sm:
            for i in range(self.sp):
                if self.abuf[i] != self.bbuf[i]:
                    break
            else:
                return
        self.count += 1
        d = fabs(self.ma - mb)
        la = self.abuf[self.sp - 1] if self.sp > 0 else 1
        lb = self.bbuf[self.sm - 1] if self.sm > 0 else 1
        nu = la if la > lb else lb
        if d < self.min_by_nu[nu]:
            self.min_by_nu[nu] = d
        if d < self.best:
            self.best = d
            for i in range(self.sp):
                self.worst[i] = self.abuf[i]
            for i in range(self.sm):
                self.worst[self.sp + i] = self.bbuf[i]


def divisor_scan(mvals, int size_plus, int size_minus, int n_sum_max):
    """Minimum non-resonant divisor over canonical sign-split tuples,
    bucketed by the maximal frequency.  Semantics match `_ref.divisor_scan`."""
    cdef double[:] mv = np.ascontiguousarray(mvals, dtype=np.float64)
    scanner = _Scanner(mv, size_plus, size_minus, n_sum_max)
    scanner.run()
    if scanner.count == 0:
        worst = np.zeros(0, dtype=np.int64)
    else:
        worst = np.asarray(scanner.worst).copy()
    return np.asarray(scanner.min_by_nu).copy(), worst, int(scanner.count)
