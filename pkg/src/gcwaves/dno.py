"""The Dirichlet-Neumann operator of the water-waves problem on depth-1 fluid.

Route taken: the harmonic potential under the free surface y = eta(x) is
pulled back to the fixed strip [-1,0] x T^1 by y = eta + zt*(1 + eta).  The
pulled-back potential solves

    (dxx + dzz) u = dzz[G2 u] + dz[G1 u] + G0 u,
    u(0) = psi,   dz u(-1) = 0,

with variable coefficients quadratic/linear in eta, each G2/G1 carrying
(1+zt) factors vanishing at the bottom.  Writing u = phi0 + w with the flat
extension phi0 = cosh((zt+1)D)/cosh(D) psi, the correction is a Neumann
series: u_{k+1} = phi0 + M0 u_k, where M0 inverts the flat operator with
the mixed boundary conditions.  Worked into an integrated-by-parts form so
no discrete z-derivative ever hits the unknown:

    M0 u = G2 u (z,.) + C(z,D)[eta'^2 u(0,.)]
           + Inv[D_x^2 G2 u + G0 u] + dz Inv'[G1 u],

where Inv is the per-mode solve of (dzz - n^2) v = f, v(0)=0, v'(-1)=0
(the kernel K0 as an operator), the C(z,D) term is the boundary relic of
integrating int K0 dzz[G2 u] by parts twice against the inhomogeneous
Dirichlet trace u(0,.) = psi, and the G1 transport piece uses the adjoint
trick: int K0(z,z') d_{z'}[G1 u] dz' = P'(z) with
(dzz - n^2) P = G1 u, P'(0) = 0, P(-1) = -G1u(-1)/n^2 (= 0 here since
G1 vanishes at the bottom).  Every per-mode solve is a well-conditioned
spectral collocation system; no exponentially weighted quadrature appears.

Differentiating the fixed point at zt = 0 gives the top trace implicitly
(the G2 term contributes -eta'^2 dzu(0)):

  (1+eta'^2) dzu(0) = D tanh(D) psi - 2 eta'^2 psi + D tanh(D)[eta'^2 psi]
        + int C(z',D)[D_x^2 G2 u + G0 u] dz' + G1u(0,.)
        - sech(D)[G1u(-1,.)] - int C_z(z',D)[G1 u] dz',

with C(z,n) = cosh((z+1)n)/cosh(n) (bounded by 1, so plain Clenshaw-Curtis
rows are stable).  The G1u(0,.) term is the jump of d_{z'}K0 colliding with
the top boundary.  The surface value then follows from the chain rule of
the coordinate change (re-derived here): with T := dzu(0),

    G(eta) psi = (1 + eta'^2) T / (1 + eta) - eta' psi_x.

An independent second route resamples the solution in flattened-top
coordinates y = z + eta(x) and differentiates the trace one-sidedly; the
two routes must agree (tested).

The explicit fundamental pair w_+/w_- of the frozen-coefficient problem
(dzz - 2ia xi dz - (1+b) xi^2) w = 0 with a = eta'/(1+eta'^2),
b = -eta'^2/(1+eta'^2), their Wronskian and the kernel assembled from them
give closed-form cross-checks, including the order-(-1) correction of the
top-trace expansion.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve

from .fields import (FieldError, PeriodicField, SpectralGrid, dx, field_from_modes,
                     field_from_samples, linf_norm, multiply, pointwise, symmetrize)
from .symbols import SymbolObject, SymbolTerm, op_bw_apply, xifun


class DNOError(RuntimeError):
    pass


@dataclass(frozen=True)
class DNOConfig:
    J: int = 64
    tol: float = 1e-12
    max_iter: int = 200
    zkind: str = "cheb"          # 'cheb' (spectral) or 'uniform' (FD cross-check)

    def __post_init__(self):
        if self.J < 16:
            raise DNOError("need J >= 16")
        if not self.tol > 0 or self.max_iter < 1:
            raise DNOError("tolerance must be positive, max_iter >= 1")
        if self.zkind not in ("cheb", "uniform"):
            raise DNOError(f"unknown z-grid kind {self.zkind!r}")


# -- stable hyperbolic profiles ------------------------------------------------
# Arranged so every exponential has a nonpositive exponent on z in [-1, 0].

def _C(z, n):
    """cosh((z+1)n)/cosh(n); bounded by 1."""
    z, n = np.broadcast_arrays(np.asarray(z, float), np.asarray(n, float))
    return np.exp(z * n) * (1 + np.exp(-2 * (z + 1) * n)) / (1 + np.exp(-2 * n))


def _S(z, n):
    """sinh(zn)/(n cosh n); -> z as n -> 0; bounded by 1."""
    z, n = np.broadcast_arrays(np.asarray(z, float), np.asarray(n, float))
    small = n < 1e-12
    nn = np.where(small, 1.0, n)
    out = -np.exp(-(z + 1) * nn) * (1 - np.exp(2 * z * nn)) / (nn * (1 + np.exp(-2 * nn)))
    return np.where(small, z, out)


def _Cz(z, n):
    """d/dz of _C: n sinh((z+1)n)/cosh(n); bounded by n."""
    z, n = np.broadcast_arrays(np.asarray(z, float), np.asarray(n, float))
    return n * np.exp(z * n) * (1 - np.exp(-2 * (z + 1) * n)) / (1 + np.exp(-2 * n))


def _Sz(z, n):
    """d/dz of _S: cosh(zn)/cosh(n); bounded by 1."""
    z, n = np.broadcast_arrays(np.asarray(z, float), np.asarray(n, float))
    return (np.exp((z - 1) * n) + np.exp(-(z + 1) * n)) / (1 + np.exp(-2 * n))


def k0_kernel(z, zp, n):
    """Flat-strip kernel: (dzz - n^2)K0 = delta(z-z'), K0(0)=0, K0_z(-1)=0.

    Branch z <= z' is cosh((z+1)n) sinh(z'n)/(n cosh n); symmetric in (z,z').
    Evaluated in an all-negative-exponent arrangement.
    """
    z, zp, n = np.broadcast_arrays(np.asarray(z, float), np.asarray(zp, float),
                                   np.asarray(n, float))
    lo = np.minimum(z, zp)
    hi = np.maximum(z, zp)
    small = n < 1e-12
    nn = np.where(small, 1.0, n)
    num = (np.exp((lo + hi) * nn) - np.exp((lo - hi) * nn)
           + np.exp((hi - lo - 2) * nn) - np.exp(-(lo + hi + 2) * nn))
    out = num / (2 * nn * (1 + np.exp(-2 * nn)))
    return np.where(small, hi, out)


# -- z grids ---------------------------------------------------------------------

def _cheb_diff_matrix(t: np.ndarray) -> np.ndarray:
    N = len(t) - 1
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c = c * (-1.0)**np.arange(N + 1)
    T = np.tile(t, (N + 1, 1)).T
    dT = T - T.T + np.eye(N + 1)
    D = np.outer(c, 1.0 / c) / dT
    D -= np.diag(D.sum(axis=1))
    return D


@dataclass(frozen=True)
class ZGrid:
    J: int
    kind: str
    z: np.ndarray        # ascending, z[0] = -1, z[-1] = 0
    diff: np.ndarray     # first-derivative matrix
    diff2: np.ndarray    # second-derivative matrix
    weights: np.ndarray  # full-interval quadrature weights


@lru_cache(maxsize=8)
def make_zgrid(J: int, kind: str = "cheb") -> ZGrid:
    if kind == "cheb":
        t = np.cos(np.pi * np.arange(J, -1, -1) / J)   # ascending -1..1
        z = (t - 1.0) / 2.0
        z[0], z[-1] = -1.0, 0.0
        D = 2.0 * _cheb_diff_matrix(t)
        # Clenshaw-Curtis weights on t, halved for dz = dt/2
        c = np.zeros(J + 1)
        for j in range(J + 1):
            theta = np.pi * j / J
            acc = 1.0
            for k in range(2, J + 1, 2):
                bk = 1.0 if k < J else 0.5
                acc -= bk * 2.0 * np.cos(k * theta) / (k * k - 1)
            c[j] = 2.0 * acc / J
        c[0] /= 2.0
        c[-1] /= 2.0
        w = 0.5 * c                    # symmetric, so t-ordering is immaterial
        return ZGrid(J, kind, z, D, D @ D, w)
    if kind == "uniform":
        z = np.linspace(-1.0, 0.0, J + 1)
        h = z[1] - z[0]
        D = np.zeros((J + 1, J + 1))
        for i in range(1, J):
            D[i, i - 1], D[i, i + 1] = -0.5 / h, 0.5 / h
        D[0, :3] = np.array([-1.5, 2.0, -0.5]) / h
        D[-1, -3:] = np.array([0.5, -2.0, 1.5]) / h
        D2 = np.zeros((J + 1, J + 1))
        for i in range(1, J):
            D2[i, i - 1:i + 2] = np.array([1.0, -2.0, 1.0]) / h**2
        D2[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h**2
        D2[-1, -4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h**2
        w = np.full(J + 1, h)
        w[0] = w[-1] = h / 2.0         # trapezoid base
        # Simpson correction when J even
        if J % 2 == 0:
            w = np.zeros(J + 1)
            w[0] = w[-1] = h / 3.0
            w[1:-1:2] = 4.0 * h / 3.0
            w[2:-1:2] = 2.0 * h / 3.0
        return ZGrid(J, kind, z, D, D2, w)
    raise DNOError(f"unknown z-grid kind {kind!r}")


# -- strip fields ------------------------------------------------------------------

@dataclass(frozen=True)
class StripField:
    """Function on [-1,0] x T^1: x-Fourier coefficients per z node."""

    grid: SpectralGrid
    zgrid: ZGrid
    coeffs: np.ndarray        # (J+1, M) complex
    is_real: bool = True
    is_even: bool = True

    def level_field(self, i: int) -> PeriodicField:
        return field_from_modes(self.coeffs[i], self.grid)

    def top(self) -> PeriodicField:
        return self.level_field(self.zgrid.J)

    def samples(self) -> np.ndarray:
        s = np.fft.ifft(self.coeffs, axis=1) * self.grid.M
        return s.real if self.is_real else s

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# gcwaves-strip,M={self.grid.M},J={self.zgrid.J},kind={self.zgrid.kind}\n")
        buf.write("z,n,re,im\n")
        for i, z in enumerate(self.zgrid.z):
            for n, c in zip(self.grid.modes, self.coeffs[i]):
                if c != 0:
                    buf.write(f"{z:.17e},{n},{c.real:.17e},{c.imag:.17e}\n")
        return buf.getvalue()


def _strip_mult(coeffs: np.ndarray, f: PeriodicField) -> np.ndarray:
    """Dealiased product of every z level with a fixed x-field."""
    from .fields import _pad_coeffs, _truncate_coeffs
    M = f.grid.M
    K = 3 * M // 2
    fpad = np.fft.ifft(_pad_coeffs(f.coeffs, M, K)) * K
    srows = np.fft.ifft(_pad_coeffs(coeffs, M, K), axis=1) * K
    prod = np.fft.fft(srows * fpad[None, :], axis=1) / K
    return _truncate_coeffs(prod, M)


def _strip_dx(coeffs: np.ndarray, grid: SpectralGrid, order: int = 1) -> np.ndarray:
    mult = (1j * grid.modes.astype(float))**order
    return coeffs * mult[None, :]


# -- per-mode flat solves ------------------------------------------------------------

class StripOperators:
    """Per-mode collocation solves and bounded-kernel trace rows."""

    def __init__(self, grid: SpectralGrid, zgrid: ZGrid):
        self.grid = grid
        self.zgrid = zgrid
        z, J = zgrid.z, zgrid.J
        nabs = np.abs(grid.modes).astype(float)
        self.nuniq = np.unique(nabs)
        self._col = {n: np.where(nabs == n)[0] for n in self.nuniq}
        D, D2 = zgrid.diff, zgrid.diff2
        self._luA, self._luB = {}, {}
        for n in self.nuniq:
            A = D2 - (n * n) * np.eye(J + 1)
            A[J] = 0.0
            A[J, J] = 1.0           # v(0) = 0
            A[0] = D[0]             # v'(-1) = 0
            self._luA[n] = lu_factor(A)
            B = D2 - (n * n) * np.eye(J + 1)
            B[J] = D[J]             # P'(0) = 0
            B[0] = 0.0
            B[0, 0] = 1.0           # P(-1) = 0
            self._luB[n] = lu_factor(B)
        self.C_table = {n: _C(z, n) for n in self.nuniq}
        self.S_table = {n: _S(z, n) for n in self.nuniq}
        w = zgrid.weights
        self.trace_C = {n: w * _C(z, n) for n in self.nuniq}
        self.trace_Cz = {n: w * _Cz(z, n) for n in self.nuniq}

    def _per_mode_solve(self, lus, F):
        out = np.zeros_like(F)
        J = self.zgrid.J
        for n in self.nuniq:
            cols = self._col[n]
            rhs = F[:, cols].copy()
            rhs[J] = 0.0
            rhs[0] = 0.0
            out[:, cols] = lu_solve(lus[n], rhs)
        return out

    def invert_flat(self, F):
        """v with (dzz - n^2)v = f_n, v(0)=0, v'(-1)=0 (K0 as an operator)."""
        return self._per_mode_solve(self._luA, F)

    def invert_flat_neumann_top(self, F):
        """P with (dzz - n^2)P = f_n, P'(0)=0, P(-1)=0."""
        return self._per_mode_solve(self._luB, F)

    def dz(self, F):
        return self.zgrid.diff @ F

    def multiplier_profile(self, table, fcoeffs):
        out = np.zeros((self.zgrid.J + 1, self.grid.M), dtype=np.complex128)
        for n in self.nuniq:
            out[:, self._col[n]] = np.outer(table[n], fcoeffs[self._col[n]])
        return out

    def trace_integral(self, table, F):
        out = np.zeros(self.grid.M, dtype=np.complex128)
        for n in self.nuniq:
            cols = self._col[n]
            out[cols] = table[n] @ F[:, cols]
        return out


_OPS_CACHE: dict = {}


def strip_operators(grid: SpectralGrid, cfg: DNOConfig) -> StripOperators:
    key = (grid.M, cfg.J, cfg.zkind)
    if key not in _OPS_CACHE:
        _OPS_CACHE[key] = StripOperators(grid, make_zgrid(cfg.J, cfg.zkind))
    return _OPS_CACHE[key]


# -- public operations ----------------------------------------------------------------

def harmonic_extension_flat(psi: PeriodicField, zgrid: ZGrid) -> StripField:
    """phi0(x,z) = cosh((z+1)D)/cosh(D) psi: harmonic, Dirichlet trace psi at
    z = 0, vanishing Neumann trace at z = -1; mode 0 extends as the constant."""
    M = psi.grid.M
    nabs = np.abs(psi.grid.modes).astype(float)
    coeffs = np.zeros((zgrid.J + 1, M), dtype=np.complex128)
    for n in np.unique(nabs):
        cols = np.where(nabs == n)[0]
        coeffs[:, cols] = np.outer(_C(zgrid.z, n), psi.coeffs[cols])
    return StripField(psi.grid, zgrid, coeffs, psi.is_real, psi.is_even)


def poisson_kernel_apply(f: StripField) -> StripField:
    """z -> int_{-1}^0 K0(z,z',D) f(z',.) dz', realized as the per-mode
    two-point solve the kernel inverts."""
    ops = StripOperators(f.grid, f.zgrid)
    return StripField(f.grid, f.zgrid, ops.invert_flat(f.coeffs), f.is_real, f.is_even)


class GCoefficients:
    """Variable-coefficient operators of the pulled-back Laplace problem."""

    def __init__(self, eta: PeriodicField):
        if linf_norm(eta) >= 0.5:
            raise DNOError(f"|eta|_inf = {linf_norm(eta):.3f} >= 0.5: "
                           "coordinate change out of its validity range")
        self.eta = eta
        ep = dx(eta)
        epp = dx(eta, 2)
        self.ep = ep
        self.ep2 = multiply(ep, ep)
        self.a1 = 2.0 * (ep + multiply(ep, eta))            # 2 eta'(1+eta)
        self.b1 = 2.0 * self.ep2 + epp + multiply(epp, eta)  # 2 eta'^2 + eta''(1+eta)
        self.c0 = 2.0 * eta + multiply(eta, eta)
        self.b0 = epp + multiply(epp, eta)

    def g2(self, strip: StripField) -> np.ndarray:
        z = strip.zgrid.z
        return -((1.0 + z)**2)[:, None] * _strip_mult(strip.coeffs, self.ep2)

    def g1(self, strip: StripField) -> np.ndarray:
        z = strip.zgrid.z
        fx = _strip_dx(strip.coeffs, strip.grid)
        rows = _strip_mult(fx, self.a1) + _strip_mult(strip.coeffs, self.b1)
        return (1.0 + z)[:, None] * rows

    def g0(self, strip: StripField) -> np.ndarray:
        fxx = _strip_dx(strip.coeffs, strip.grid, 2)
        fx = _strip_dx(strip.coeffs, strip.grid)
        return -(_strip_mult(fxx, self.c0) + _strip_mult(fx, self.a1)
                 + _strip_mult(strip.coeffs, self.b0))


def build_G_coefficients(eta: PeriodicField) -> GCoefficients:
    return GCoefficients(eta)


def _neumann_map(ops: StripOperators, gc: GCoefficients, strip: StripField) -> np.ndarray:
    """M0 u: the inverted right-hand side of the transformed problem."""
    g2u = gc.g2(strip)
    g1u = gc.g1(strip)
    g0u = gc.g0(strip)
    u0 = strip.top()
    q = multiply(gc.ep2, u0)
    term_c = ops.multiplier_profile(ops.C_table, q.coeffs)
    n2 = (ops.grid.modes.astype(float)**2)[None, :]
    inner = ops.invert_flat(n2 * g2u + g0u)
    transport = ops.dz(ops.invert_flat_neumann_top(g1u))
    return g2u + term_c + inner + transport


def solve_strip(eta: PeriodicField, psi: PeriodicField, cfg: DNOConfig = DNOConfig()):
    """Neumann-series solution of the transformed problem.

    Returns (StripField, diagnostics).  Convergence and contraction are
    measured, never assumed: three consecutive non-contracting increments
    abort, as does exhausting max_iter.
    """
    if eta.grid.M != psi.grid.M:
        raise FieldError("eta/psi grid mismatch")
    ops = strip_operators(eta.grid, cfg)
    gc = GCoefficients(eta)
    phi0 = harmonic_extension_flat(psi, ops.zgrid)
    u = phi0.coeffs.copy()
    scale = float(np.max(np.abs(u))) or 1.0
    deltas, ratios = [], []
    for it in range(cfg.max_iter):
        strip = StripField(eta.grid, ops.zgrid, u, psi.is_real, psi.is_even)
        unew = phi0.coeffs + _neumann_map(ops, gc, strip)
        delta = float(np.max(np.abs(unew - u)))
        deltas.append(delta)
        if len(deltas) >= 2 and deltas[-2] > 0:
            ratios.append(deltas[-1] / deltas[-2])
            if len(ratios) >= 3 and all(r >= 1.0 for r in ratios[-3:]):
                raise DNOError(f"Neumann iteration is not contracting "
                               f"(last ratios {[f'{r:.3f}' for r in ratios[-3:]]})")
        u = unew
        if delta <= cfg.tol * scale:
            break
    else:
        raise DNOError(f"Neumann iteration exceeded {cfg.max_iter} iterations "
                       f"(last increment {deltas[-1]:.3e})")
    strip = StripField(eta.grid, ops.zgrid, u, psi.is_real, psi.is_even)
    resid = float(np.max(np.abs(phi0.coeffs + _neumann_map(ops, gc, strip) - u)))
    top_err = float(np.max(np.abs(strip.coeffs[-1] - psi.coeffs)))
    dz_bot = float(np.max(np.abs((ops.zgrid.diff @ strip.coeffs)[0])))
    diag = {
        "iterations": it + 1,
        "contraction_ratio": max(ratios) if ratios else 0.0,
        "residual": resid,
        "trace_errors": {"dirichlet_top": top_err, "neumann_bottom": dz_bot},
    }
    return strip, diag


def _dz_top_bracket(ops: StripOperators, gc: GCoefficients, psi: PeriodicField,
                    strip: StripField) -> PeriodicField:
    """(1 + eta'^2) dz u(0,.) assembled from bounded trace rows."""
    grid = strip.grid
    g2u = gc.g2(strip)
    g1u = gc.g1(strip)
    g0u = gc.g0(strip)
    n = grid.modes.astype(float)
    ntanh = np.abs(n) * np.tanh(np.abs(n))
    sech = 1.0 / np.cosh(n)
    q = multiply(gc.ep2, psi)
    dz_phi0 = field_from_modes(ntanh * psi.coeffs, grid)
    t2 = field_from_modes(ntanh * q.coeffs, grid)
    t4 = field_from_modes(
        ops.trace_integral(ops.trace_C, (n**2)[None, :] * g2u + g0u), grid)
    g1_top = field_from_modes(g1u[-1], grid)
    g1_bot = field_from_modes(sech * g1u[0], grid)
    t5 = field_from_modes(ops.trace_integral(ops.trace_Cz, g1u), grid)
    return dz_phi0 - 2.0 * q + t2 + t4 + g1_top - g1_bot - t5


def dirichlet_neumann(eta: PeriodicField, psi: PeriodicField,
                      cfg: DNOConfig = DNOConfig(), with_diagnostics: bool = False):
    """G(eta)psi: surface trace of the rescaled normal derivative.

    Chain rule of y = eta + zt(1+eta) at zt = 0 (module docstring):
    G = (1+eta'^2) dzu(0)/(1+eta) - eta' psi_x.  The mean is measured before
    being projected out (zero mean is an exact flux identity).
    """
    strip, diag = solve_strip(eta, psi, cfg)
    ops = strip_operators(eta.grid, cfg)
    gc = GCoefficients(eta)
    bracket = _dz_top_bracket(ops, gc, psi, strip)
    g = pointwise(lambda b, e: b / (1.0 + e), bracket, eta) - multiply(gc.ep, dx(psi))
    diag["mean_before_projection"] = abs(complex(g.coeff(0)))
    c = g.coeffs.copy()
    c[0] = 0.0
    g = field_from_modes(c, eta.grid, mean_convention="zero_mean")
    if eta.is_even and psi.is_even and eta.is_real and psi.is_real:
        g = symmetrize(g).with_mean_convention("zero_mean")
    if with_diagnostics:
        return g, strip, diag
    return g


def dn_flattened_top_route(eta: PeriodicField, psi: PeriodicField,
                           cfg: DNOConfig = DNOConfig(), h: float = 0.01):
    """Independent route: G = ((1+eta'^2) dz Phi - eta' dx Phi)|_{z=0} in the
    flattened-top coordinates y = z + eta(x).

    The strip solution is resampled at zt = z/(1+eta(x)) on a one-sided
    stencil z = 0, -h, ..., -4h and differentiated by 4th-order finite
    differences; dx Phi(.,0) = psi_x exactly.  Cross-checks the implicit
    trace algebra of the main route.
    """
    if cfg.zkind != "cheb":
        raise DNOError("flattened-top resampling requires the Chebyshev z-grid")
    strip, _ = solve_strip(eta, psi, cfg)
    grid = eta.grid
    zg = strip.zgrid
    t = 2.0 * zg.z + 1.0
    V = np.polynomial.chebyshev.chebvander(t, zg.J)
    cheb_coeffs = np.linalg.solve(V, strip.coeffs)          # (J+1, M)
    eta_s = np.real(eta.samples)
    phases = np.exp(1j * np.outer(grid.x, grid.modes.astype(float)))
    stencil = h * np.array([0.0, -1.0, -2.0, -3.0, -4.0])
    vals = np.zeros((5, grid.M))
    for k, zk in enumerate(stencil):
        tk = 2.0 * (zk / (1.0 + eta_s)) + 1.0
        modal = np.polynomial.chebyshev.chebval(tk, cheb_coeffs)   # (M,) per x -> (M, Mx)
        vals[k] = np.real(np.sum(phases * modal.T, axis=1))
    dz_phi = (25 * vals[0] - 48 * vals[1] + 36 * vals[2]
              - 16 * vals[3] + 3 * vals[4]) / (12 * h)
    ep_s = np.real(dx(eta).samples)
    psix_s = np.real(dx(psi).samples)
    g = field_from_samples((1.0 + ep_s**2) * dz_phi - ep_s * psix_s, grid)
    c = g.coeffs.copy()
    c[0] = 0.0
    return field_from_modes(c, grid, mean_convention="zero_mean")


def good_unknown_fields(eta: PeriodicField, psi: PeriodicField,
                        cfg: DNOConfig = DNOConfig()):
    """B = (G psi + eta' psi_x)/(1+eta'^2), V = psi_x - eta' B,
    omega = psi - Op_para[B] eta."""
    g = dirichlet_neumann(eta, psi, cfg)
    ep = dx(eta)
    psix = dx(psi)
    B = pointwise(lambda gv, e, p: (gv + e * p) / (1.0 + e * e), g, ep, psix)
    V = psix - multiply(ep, B)
    omega = psi - op_bw_apply(SymbolObject.from_field(B), eta)
    return B, V, omega.with_mean_convention("mod_constants")


def dn_principal_expand(eta: PeriodicField, psi: PeriodicField,
                        cfg: DNOConfig = DNOConfig()):
    """Principal paradifferential approximation of G and its residual.

    G_approx = D tanh(D) omega - i Op_para[V xi] eta; the dropped operators
    are smoothing, so the relative residual must decay with the input
    frequency.  Also compares the trace B against
    D tanh(D) omega + Op_para[a1] omega with
    a1 = i eta'/(1+eta'^2) xi - (xi tanh xi) eta'^2/(1+eta'^2).
    """
    g = dirichlet_neumann(eta, psi, cfg)
    B, V, omega = good_unknown_fields(eta, psi, cfg)
    grid = eta.grid
    n = grid.modes.astype(float)
    ntanh = np.abs(n) * np.tanh(np.abs(n))
    dtanhd_omega = field_from_modes(ntanh * omega.coeffs, grid)
    v_xi = SymbolObject(grid, terms=[SymbolTerm(V, xifun("xi_pow", 1))], order=1.0)
    ga = dtanhd_omega - 1j * op_bw_apply(v_xi, eta)
    c = ga.coeffs.copy()
    c[0] = 0.0
    g_approx = field_from_modes(c, grid, mean_convention="zero_mean")
    ep = dx(eta)
    f1 = pointwise(lambda e: e / (1.0 + e * e), ep)
    f2 = pointwise(lambda e: -e * e / (1.0 + e * e), ep)
    a1 = SymbolObject(grid, terms=[SymbolTerm(1j * f1, xifun("xi_pow", 1)),
                                   SymbolTerm(f2, xifun("xi_tanh_xi"))], order=1.0)
    dz_approx = dtanhd_omega + op_bw_apply(a1, omega)
    return {
        "G": g, "G_approx": g_approx, "residual": g - g_approx,
        "B": B, "dz_approx": dz_approx, "residual_trace": B - dz_approx,
        "V": V, "omega": omega,
    }


# -- explicit frozen-coefficient solutions ------------------------------------------

@dataclass(frozen=True)
class FundamentalData:
    """Fundamental pair of (dzz - 2ia xi dz - (1+b) xi^2) w = 0 under the
    mixed boundary normalization, with derivatives and Wronskian closures."""

    eta_prime: float
    xi: float
    a: float
    b: float
    c: float
    w_plus: object
    w_minus: object
    dz_w_plus: object
    dz_w_minus: object
    wronskian: object


def fundamental_solutions(eta_prime_value: float, xi: float) -> FundamentalData:
    ep = float(eta_prime_value)
    a = ep / (1.0 + ep**2)
    b = -ep**2 / (1.0 + ep**2)
    disc = 1.0 + b - a**2
    if disc <= 0.25:
        raise DNOError("eta' out of the admissible range (1+b-a^2 too small)")
    c = math.sqrt(disc) - 1.0
    X = xi * (1.0 + c)
    Xa = abs(X)
    d = 1j * a / (1.0 + c)
    denom = 1.0 - d * np.tanh(X)

    def w_plus(z):
        z = np.asarray(z, dtype=float)
        core = _C(z, Xa) * (1.0 - d * np.tanh((z + 1.0) * X))
        return np.exp(1j * z * a * xi) * core / denom

    def dz_w_plus(z):
        z = np.asarray(z, dtype=float)
        core = _C(z, Xa) * (1.0 - d * np.tanh((z + 1.0) * X))
        dcore = (_Cz(z, Xa) * (1.0 - d * np.tanh((z + 1.0) * X))
                 - _C(z, Xa) * d * X / np.cosh(np.minimum(np.abs((z + 1.0) * X), 350.0))**2)
        return np.exp(1j * z * a * xi) * (1j * a * xi * core + dcore) / denom

    def w_minus(z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * (z + 1.0) * a * xi) * _S(z, Xa) / denom

    def dz_w_minus(z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * (z + 1.0) * a * xi) * (
            1j * a * xi * _S(z, Xa) + _Sz(z, Xa)) / denom

    def wronskian(z):
        z = np.asarray(z, dtype=float)
        return np.exp(1j * (2 * z + 1.0) * a * xi) / (np.cosh(X) * denom)

    return FundamentalData(ep, xi, a, b, c, w_plus, w_minus,
                           dz_w_plus, dz_w_minus, wronskian)


def _sinh_pair(u, v, n):
    """sinh(un) sinh(vn)/(n cosh n), u in [0,1], v in [-1,0], stable."""
    u, v, n = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float),
                                  np.asarray(n, float))
    small = n < 1e-12
    nn = np.where(small, 1.0, n)
    num = (np.exp((u + v - 1) * nn) - np.exp((u - v - 1) * nn)
           - np.exp((v - u - 1) * nn) + np.exp(-(u + v + 1) * nn))
    out = num / (2 * nn * (1 + np.exp(-2 * nn)))
    return np.where(small, u * v, out)


def green_kernel_var(eta_prime_value: float, xi: float):
    """Kernel of the frozen-coefficient problem including the (1+eta'^2)
    normalization, as a closure K(z, z'), plus d_z K(z,z')|_{z=0}."""
    ep = float(eta_prime_value)
    fd = fundamental_solutions(ep, xi)
    a, c = fd.a, fd.c
    X = xi * (1.0 + c)
    Xa = abs(X)
    sgnX = math.copysign(1.0, X) if X != 0 else 0.0
    d = 1j * a / (1.0 + c)
    denom = 1.0 - d * np.tanh(X)
    fac = 1.0 / (1.0 + ep**2)

    def _branch(zlo, zhi):
        """[cosh((zlo+1)X) - d sinh((zlo+1)X)] sinh(zhi... with zlo <= zhi:
        value of K-tilde without phase: the (z<=z') branch evaluated at
        (z, z') = (zlo, zhi)."""
        K = k0_kernel(zlo, zhi, Xa)
        Mx = _sinh_pair(zlo + 1.0, zhi, Xa) * sgnX
        return (K - d * Mx) / denom

    def kern(z, zp):
        z, zp = np.broadcast_arrays(np.asarray(z, float), np.asarray(zp, float))
        val = np.where(z <= zp, _branch(z, zp), _branch(zp, z))
        return fac * np.exp(1j * (z - zp) * a * xi) * val

    def dz_kern_top(zp):
        # d_z at z = 0 of the z >= z' branch: the sinh(zX) prefactor vanishes
        # there, so only its derivative X survives, leaving
        # [cosh((z'+1)X) - d sinh((z'+1)X)] / (cosh X * denom).
        zp = np.asarray(zp, dtype=float)
        if Xa < 1e-12:
            sh = np.zeros_like(zp)
        else:
            sh = sgnX * _Cz(zp, Xa) / Xa      # sinh((z'+1)X)/cosh X
        val = _C(zp, Xa) - d * sh
        return fac * np.exp(-1j * zp * a * xi) * val / denom

    return kern, dz_kern_top


def order_m1_trace_check(eta: PeriodicField, xi: float, nquad: int = 200):
    """Order-(-1) correction of the top trace: quadrature of the
    frozen-coefficient kernel against the transport of the leading symbol,
    compared with the closed form -(1/2) eta'' (sgn xi + i eta')^2/(1+eta'^2).

    Returns (computed, predicted) arrays over the x grid.
    """
    if abs(xi) < 4:
        raise DNOError("trace comparison restricted to |xi| >= 4")
    ep_s = np.real(dx(eta).samples)
    epp_s = np.real(dx(eta, 2).samples)
    nodes, wq = np.polynomial.legendre.leggauss(nquad)
    zq = 0.5 * (nodes - 1.0)
    wq = 0.5 * wq
    sgn = math.copysign(1.0, xi)
    M = eta.grid.M
    computed = np.zeros(M, dtype=np.complex128)
    predicted = np.zeros(M, dtype=np.complex128)
    for i in range(M):
        ep, epp = ep_s[i], epp_s[i]
        fd = fundamental_solutions(ep, xi)
        _, dz_top = green_kernel_var(ep, xi)
        rhs = -abs(xi) * (sgn - 1j * ep)**-2 * epp * fd.w_plus(zq)
        computed[i] = (1.0 + ep**2) * np.sum(wq * dz_top(zq) * rhs)
        predicted[i] = -0.5 * epp * (sgn + 1j * ep)**2 / (1.0 + ep**2)
    return computed, predicted
