"""Paradifferential calculus on the torus.

Operators are quantized from symbols a(x, xi) in the Weyl fashion: the
coefficient of exp(ikx) in Op[a]u picks up A(k-n, (k+n)/2) u_n, where
A(m, xi) is the m-th x-Fourier coefficient of a(., xi).  The para version
additionally damps the x-spectrum of the symbol through a smooth cutoff
chi((k-n)/<(k+n)/2>), which confines the output frequency to a band around
the input frequency and makes the operator bounded uniformly in the
roughness of the coefficients.

Symbols are kept in separable form, a = sum_j f_j(x) g_j(xi), with the
xi-parts backed by sympy expressions (exact xi-derivatives, no finite
differences).  Operations that leave the separable class - the principal
symbol of a conjugation by a diffeomorphism, for instance - fall back to a
sampled representation that the quantizer consumes equally well.

The composition expansion implemented by `compose_symbols` is

    (a#b)_rho = sum_{l < rho} (1/l!) (i/2)^l sum_j C(l,j) (-1)^(l-j)
                (d_x^j d_xi^(l-j) a) (d_x^(l-j) d_xi^j b),

whose l = 0, 1 terms are the product and the Poisson bracket over 2i.

Diffeomorphisms x -> x + beta(x) act through the time-one flow of a
transport para-operator with symbol beta/(1 + theta beta_x) xi; the flow is
integrated in theta by classical RK4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import sympy as sp

from .cutoff import CutoffProfile
from . import kernels
from .fields import (FieldError, PeriodicField, SpectralGrid, dx, field_from_modes,
                     field_from_samples, multiply, pointwise, zero_field)

DEFAULT_CUTOFF = CutoffProfile(delta=0.4)

_XI = sp.Symbol("xi", real=True)


class SymbolError(ValueError):
    pass


class XiFunction:
    """A function of frequency with exact derivatives, backed by sympy."""

    def __init__(self, expr, order: float, family: str = "derived", params: dict | None = None,
                 d_max: int = 6):
        self.expr = sp.sympify(expr)
        self.order = float(order)
        self.family = family
        self.params = dict(params or {})
        self.d_max = d_max
        self._lamb = {}

    def _fn(self, k: int):
        if k > self.d_max:
            raise SymbolError(f"xi-derivative order {k} exceeds d_max={self.d_max}")
        if k not in self._lamb:
            self._lamb[k] = sp.lambdify(_XI, sp.diff(self.expr, _XI, k), "numpy")
        return self._lamb[k]

    def value(self, xi):
        out = self._fn(0)(np.asarray(xi, dtype=float))
        return np.asarray(out, dtype=np.complex128) + np.zeros_like(np.asarray(xi, dtype=float))

    def deriv(self, k: int):
        return XiFunction(sp.diff(self.expr, _XI, k), self.order - k, d_max=self.d_max - k)

    def product(self, other: "XiFunction") -> "XiFunction":
        return XiFunction(self.expr * other.expr, self.order + other.order,
                          d_max=min(self.d_max, other.d_max))

    def conj_reflect(self) -> "XiFunction":
        """xi-part of the transform a -> conj(a(x, -xi))."""
        return XiFunction(sp.conjugate(self.expr.subs(_XI, -_XI)), self.order,
                          d_max=self.d_max)

    def is_even(self, probe=None) -> bool:
        probe = probe if probe is not None else np.linspace(0.5, 12.5, 25)
        a, b = self.value(probe), self.value(-probe)
        return bool(np.max(np.abs(a - b)) <= 1e-12 * (np.max(np.abs(a)) or 1.0))

    def is_odd(self, probe=None) -> bool:
        probe = probe if probe is not None else np.linspace(0.5, 12.5, 25)
        a, b = self.value(probe), self.value(-probe)
        return bool(np.max(np.abs(a + b)) <= 1e-12 * (np.max(np.abs(a)) or 1.0))


@lru_cache(maxsize=None)
def xifun(family: str, *params) -> XiFunction:
    """Named multiplier families (also the JSON vocabulary)."""
    if family == "const":
        (c,) = params or (1.0,)
        return XiFunction(sp.Float(c) if not isinstance(c, complex) else c, 0.0,
                          "const", {"c": c})
    if family == "xi_pow":
        (k,) = params
        return XiFunction(_XI**int(k), float(k), "xi_pow", {"k": int(k)})
    if family == "tanh_xi":
        return XiFunction(sp.tanh(_XI), 0.0, "tanh_xi")
    if family == "xi_tanh_xi":
        return XiFunction(_XI * sp.tanh(_XI), 1.0, "xi_tanh_xi")
    if family == "m_kappa":
        (kappa,) = params
        expr = sp.sqrt(_XI * sp.tanh(_XI)) * sp.sqrt(1 + kappa * _XI**2)
        return XiFunction(expr, 1.5, "m_kappa", {"kappa": kappa})
    if family == "lambda_kappa":
        (kappa,) = params
        expr = (_XI * sp.tanh(_XI) / (1 + kappa * _XI**2))**sp.Rational(1, 4)
        return XiFunction(expr, -0.25, "lambda_kappa", {"kappa": kappa})
    if family == "sech_profile":
        return XiFunction(1 / sp.cosh(_XI), 0.0, "sech_profile")
    raise SymbolError(f"unknown multiplier family {family!r}")


@dataclass(frozen=True)
class SymbolTerm:
    f: PeriodicField            # coefficient in x
    g: XiFunction               # multiplier in xi
    weyl_shift: float = 0.0     # kernel uses g(xi - weyl_shift * m) on x-mode m


class SymbolObject:
    """a(x, xi), either a finite separable sum or a sampled closure."""

    def __init__(self, grid: SpectralGrid, terms=None, sampler=None, order: float = 0.0,
                 reality_tag: str = "none"):
        if (terms is None) == (sampler is None):
            raise SymbolError("provide exactly one of terms / sampler")
        self.grid = grid
        self.terms = tuple(terms) if terms is not None else None
        self.sampler = sampler
        self.order = float(order)
        self.reality_tag = reality_tag
        if self.terms:
            for t in self.terms:
                if t.f.grid.M != grid.M:
                    raise FieldError("symbol coefficient grid mismatch")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def from_field(f: PeriodicField, g: XiFunction | None = None, order=None):
        g = g or xifun("const", 1.0)
        return SymbolObject(f.grid, terms=[SymbolTerm(f, g)],
                            order=g.order if order is None else order)

    @staticmethod
    def from_multiplier(g: XiFunction, grid: SpectralGrid):
        one = field_from_modes(np.eye(1, grid.M, 0).ravel(), grid)
        return SymbolObject(grid, terms=[SymbolTerm(one, g)], order=g.order)

    @staticmethod
    def constant(c, grid: SpectralGrid):
        return SymbolObject.from_multiplier(xifun("const", c), grid)

    # -- evaluation ---------------------------------------------------------

    @property
    def separable(self) -> bool:
        return self.terms is not None

    @property
    def shift_free(self) -> bool:
        return self.separable and all(t.weyl_shift == 0.0 for t in self.terms)

    def eval_samples(self, xi: float) -> np.ndarray:
        """Samples of a(., xi) on the grid for one frequency value."""
        if self.sampler is not None:
            return np.asarray(self.sampler(float(xi)), dtype=np.complex128)
        out = np.zeros(self.grid.M, dtype=np.complex128)
        for t in self.terms:
            if t.weyl_shift != 0.0:
                raise SymbolError("shifted symbol has no pointwise (x, xi) values")
            out += np.asarray(t.f.samples, dtype=np.complex128) * t.g.value(xi)
        return out

    def order_bound_ok(self, slack: float = 10.0) -> bool:
        """|a(x, xi)| <= slack * C * <xi>^order on the grid's frequency range."""
        xi_probe = np.linspace(1.0, self.grid.max_mode, 8)
        if not self.separable:
            vals = np.array([np.max(np.abs(self.eval_samples(x))) for x in xi_probe])
        else:
            vals = np.zeros_like(xi_probe)
            for t in self.terms:
                fmax = float(np.max(np.abs(t.f.samples)))
                vals += fmax * np.abs(t.g.value(xi_probe))
        bracket = np.sqrt(1 + xi_probe**2)**self.order
        base = max(float(np.max(vals / bracket)), 1e-30)
        return bool(np.max(vals / bracket) <= slack * max(base, 1.0) + 1e-30)

    def bar_vee(self) -> "SymbolObject":
        """conj(a(x, -xi)) - the symbol of the conjugated operator."""
        if self.separable:
            terms = [SymbolTerm(t.f.conj(), t.g.conj_reflect(), t.weyl_shift)
                     for t in self.terms]
            return SymbolObject(self.grid, terms=terms, order=self.order)
        smp = self.sampler
        return SymbolObject(self.grid, sampler=lambda xi: np.conj(smp(-xi)),
                            order=self.order)

    def is_even_in_x_xi(self) -> bool:
        """a(-x, -xi) == a(x, xi), checked termwise."""
        if not self.separable:
            raise SymbolError("parity check requires separable form")
        for t in self.terms:
            rep = check_field_parity(t.f)
            if rep == "even" and t.g.is_even():
                continue
            if rep == "odd" and t.g.is_odd():
                continue
            if rep == "zero":
                continue
            return False
        return True

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        if not self.separable:
            raise SymbolError("sampled symbols are not serializable")
        terms = []
        for t in self.terms:
            if t.g.family == "derived":
                raise SymbolError("derived xi-part has no named family; cannot dump")
            nz = [[int(n), float(c.real), float(c.imag)]
                  for n, c in zip(t.f.grid.modes, t.f.coeffs) if c != 0]
            terms.append({"f": nz, "g": {"family": t.g.family, "params": t.g.params},
                          "weyl_shift": t.weyl_shift})
        return json.dumps({"M": self.grid.M, "order": self.order,
                           "reality_tag": self.reality_tag, "terms": terms}, indent=1)

    @staticmethod
    def from_json(text: str) -> "SymbolObject":
        d = json.loads(text)
        grid = SpectralGrid(d["M"])
        terms = []
        for t in d["terms"]:
            c = np.zeros(grid.M, dtype=np.complex128)
            for n, re, im in t["f"]:
                c[grid.index_of(n)] = re + 1j * im
            g = xifun(t["g"]["family"], *t["g"]["params"].values())
            terms.append(SymbolTerm(field_from_modes(c, grid), g, t.get("weyl_shift", 0.0)))
        return SymbolObject(grid, terms=terms, order=d["order"],
                            reality_tag=d.get("reality_tag", "none"))


def check_field_parity(f: PeriodicField) -> str:
    scale = float(np.max(np.abs(f.coeffs))) or 1.0
    if scale <= 1e-300:
        return "zero"
    rev = f.coeffs[(-np.arange(f.grid.M)) % f.grid.M]
    if np.max(np.abs(rev - f.coeffs)) <= 1e-12 * scale:
        return "even"
    if np.max(np.abs(rev + f.coeffs)) <= 1e-12 * scale:
        return "odd"
    return "none"


# -- quantization ------------------------------------------------------------

_CHI_CACHE: dict = {}


def _chi_table(grid: SpectralGrid, cutoff: CutoffProfile) -> np.ndarray:
    key = (grid.M, cutoff.delta)
    if key not in _CHI_CACHE:
        M = grid.M
        nmin = -(M // 2) + 1
        k = np.arange(nmin, nmin + M, dtype=float)
        diff = k[:, None] - k[None, :]
        half = 0.5 * (k[:, None] + k[None, :])
        _CHI_CACHE[key] = cutoff.chi(diff, half)
    return _CHI_CACHE[key]


def _centered(coeffs: np.ndarray, M: int) -> np.ndarray:
    return np.roll(coeffs, M // 2 - 1)


def _uncentered(cent: np.ndarray, M: int) -> np.ndarray:
    return np.roll(cent, -(M // 2 - 1))


def coupling_matrix(a: SymbolObject, cutoff: CutoffProfile | None) -> np.ndarray:
    """W[k, n] over centered modes; Op[a]u has centered coefficients W @ u."""
    grid = a.grid
    M = grid.M
    chi = _chi_table(grid, cutoff) if cutoff is not None else np.ones((M, M))
    if a.separable:
        W = np.zeros((M, M), dtype=np.complex128)
        nmin = -(M // 2) + 1
        half_lattice = (np.arange(2 * M - 1) + 2 * nmin) / 2.0
        for t in a.terms:
            fc = _centered(t.f.coeffs, M)
            if t.weyl_shift == 0.0:
                gh = t.g.value(half_lattice)
                W += kernels.bw_coupling_matrix(fc, gh, chi)
            else:
                W += kernels.bw_coupling_matrix_shifted(fc, t.g.value, chi, t.weyl_shift)
        return W
    # sampled symbol: fill anti-diagonals k + n = const
    nmin = -(M // 2) + 1
    W = np.zeros((M, M), dtype=np.complex128)
    for j in range(2 * M - 1):
        xi = (j + 2 * nmin) / 2.0
        fc = _centered(np.fft.fft(a.eval_samples(xi)) / M, M)
        ks = np.arange(max(0, j - (M - 1)), min(M, j + 1))
        ns = j - ks
        ms = ks - ns  # centered difference index offset
        fidx = ms + (M // 2 - 1)
        ok = (fidx >= 0) & (fidx < M)
        W[ks[ok], ns[ok]] = fc[fidx[ok]] * chi[ks[ok], ns[ok]]
    return W


def op_bw_apply(a: SymbolObject, u: PeriodicField,
                cutoff: CutoffProfile = DEFAULT_CUTOFF) -> PeriodicField:
    """Para (Bony-Weyl) action of the symbol on a band-limited field."""
    if a.grid.M != u.grid.M:
        raise FieldError("symbol/field grid mismatch")
    W = coupling_matrix(a, cutoff)
    out = _uncentered(W @ _centered(u.coeffs, u.grid.M), u.grid.M)
    return field_from_modes(out, u.grid, mean_convention=u.mean_convention
                            if u.mean_convention != "zero_mean" else "free")


def op_weyl_apply(a: SymbolObject, u: PeriodicField) -> PeriodicField:
    """Uncut Weyl action (oracle path; unbounded for rough symbols)."""
    return op_bw_apply(a, u, cutoff=None)


def op_standard_apply(a: SymbolObject, u: PeriodicField) -> PeriodicField:
    """Classical quantization sum_n a(x, n) u_n exp(inx), dealiased."""
    if a.grid.M != u.grid.M:
        raise FieldError("symbol/field grid mismatch")
    M = u.grid.M
    nmin = -(M // 2) + 1
    k = np.arange(nmin, nmin + M)
    W = np.zeros((M, M), dtype=np.complex128)
    if a.separable and a.shift_free:
        for t in a.terms:
            fc = _centered(t.f.coeffs, M)
            gv = t.g.value(k.astype(float))
            diff = k[:, None] - k[None, :]
            fidx = diff + (M // 2 - 1)
            ok = (fidx >= 0) & (fidx < M)
            Wt = np.zeros((M, M), dtype=np.complex128)
            Wt[ok] = fc[fidx[ok]]
            W += Wt * gv[None, :]
    else:
        for jn, n in enumerate(k):
            fc = _centered(np.fft.fft(a.eval_samples(float(n))) / M, M)
            diff = k - n
            fidx = diff + (M // 2 - 1)
            ok = (fidx >= 0) & (fidx < M)
            W[ok, jn] = fc[fidx[ok]]
    out = _uncentered(W @ _centered(u.coeffs, M), M)
    return field_from_modes(out, u.grid)


def weyl_from_standard(a: SymbolObject) -> SymbolObject:
    """Symbol b with Op(a) = Op_Weyl(b): the kernel argument shifts by m/2."""
    if not a.separable:
        raise SymbolError("need separable form")
    terms = [replace(t, weyl_shift=t.weyl_shift + 0.5) for t in a.terms]
    return SymbolObject(a.grid, terms=terms, order=a.order, reality_tag=a.reality_tag)


def compose_symbols(a: SymbolObject, b: SymbolObject, rho: int) -> SymbolObject:
    """Asymptotic composition to rho terms; declared order adds."""
    if not (0 <= rho <= 4):
        raise SymbolError(f"rho must lie in 0..4, got {rho}")
    if not (a.separable and b.separable and a.shift_free and b.shift_free):
        raise SymbolError("composition needs shift-free separable symbols")
    dmax = min(min(t.g.d_max for t in a.terms), min(t.g.d_max for t in b.terms))
    if rho - 1 > dmax:
        raise SymbolError(f"rho={rho} exceeds available xi-derivatives ({dmax})")
    terms = []
    for ell in range(rho):
        base = (1j / 2)**ell / math.factorial(ell)
        for j in range(ell + 1):
            coeff = base * math.comb(ell, j) * (-1)**(ell - j)
            for ta in a.terms:
                for tb in b.terms:
                    fa = dx(ta.f, j) if j else ta.f
                    fb = dx(tb.f, ell - j) if ell - j else tb.f
                    f = multiply(fa, fb) * coeff
                    g = ta.g.deriv(ell - j).product(tb.g.deriv(j))
                    terms.append(SymbolTerm(f, g))
    return SymbolObject(a.grid, terms=terms, order=a.order + b.order)


# -- diffeomorphisms ---------------------------------------------------------

class DiffeoError(ValueError):
    pass


@dataclass(frozen=True)
class DiffeoPair:
    """x -> x + beta(x) together with its inverse y -> y + gamma(y)."""

    beta: PeriodicField
    gamma: PeriodicField
    lipschitz: float
    gamma_mean: float
    residual: float


def invert_diffeo(beta: PeriodicField, tol: float = 1e-13, max_iter: int = 200) -> DiffeoPair:
    """Solve gamma(y) = -beta(y + gamma(y)) by contraction iteration."""
    if not beta.is_real:
        raise DiffeoError("beta must be real")
    lip = float(np.max(np.abs(dx(beta).samples)))
    if lip > 0.5:
        raise DiffeoError(f"contraction precondition violated: sup|beta'| = {lip:.3f} > 0.5")
    y = beta.grid.x
    gam = np.zeros_like(y)
    for _ in range(max_iter):
        new = -np.real(beta.evaluate(y + gam))
        delta = float(np.max(np.abs(new - gam)))
        gam = new
        if delta <= tol:
            break
    else:
        raise DiffeoError(f"inverse iteration did not converge (last delta {delta:.2e})")
    residual = float(np.max(np.abs(gam + np.real(beta.evaluate(y + gam)))))
    gfield = field_from_samples(gam, beta.grid)
    return DiffeoPair(beta, gfield, lip, float(np.real(gfield.coeff(0))), residual)


def transport_coefficient(beta: PeriodicField, theta: float) -> PeriodicField:
    """b(theta, x) = beta / (1 + theta beta_x)."""
    return pointwise(lambda b, bp: b / (1.0 + theta * bp), beta, dx(beta))


def paracomposition_flow(beta: PeriodicField, u: PeriodicField, theta: float,
                         steps: int = 64, cutoff: CutoffProfile = DEFAULT_CUTOFF,
                         theta_from: float = 0.0) -> PeriodicField:
    """Integrate the transport para-flow from theta_from to theta (RK4).

    At theta_from = 0 this realizes the paracomposition operator: the
    result approximates u(x + theta*beta(x)) up to a smoothing error.
    """
    if steps < 1:
        raise SymbolError("steps must be >= 1")
    if not -1.0 <= theta <= 1.0:
        raise SymbolError("theta restricted to [-1, 1]")
    xi1 = xifun("xi_pow", 1)

    def rhs(th: float, v: PeriodicField) -> PeriodicField:
        sym = SymbolObject(beta.grid,
                           terms=[SymbolTerm(transport_coefficient(beta, th), xi1)],
                           order=1.0)
        return 1j * op_bw_apply(sym, v, cutoff)

    h = (theta - theta_from) / steps
    v = u
    th = theta_from
    for _ in range(steps):
        k1 = rhs(th, v)
        k2 = rhs(th + h / 2, v + (h / 2) * k1)
        k3 = rhs(th + h / 2, v + (h / 2) * k2)
        k4 = rhs(th + h, v + h * k3)
        v = v + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        th += h
    return v


def flow_conjugate(a: SymbolObject, beta: PeriodicField, u: PeriodicField,
                   steps: int = 64, cutoff: CutoffProfile = DEFAULT_CUTOFF) -> PeriodicField:
    """Omega(1) Op[a] Omega(1)^{-1} u - the operator-level conjugation."""
    w = paracomposition_flow(beta, u, 0.0, steps=steps, cutoff=cutoff, theta_from=1.0)
    v = op_bw_apply(a, w, cutoff)
    return paracomposition_flow(beta, v, 1.0, steps=steps, cutoff=cutoff)


def conjugate_principal(a: SymbolObject, dp: DiffeoPair) -> SymbolObject:
    """Principal symbol of the conjugated operator:
    a(x + beta(x), xi * (1 + gamma'(y)) at y = x + beta(x))."""
    if not (a.separable and a.shift_free):
        raise SymbolError("need a shift-free separable symbol")
    grid = a.grid
    phi_x = grid.x + np.real(dp.beta.samples)
    w = 1.0 + np.real(dx(dp.gamma).evaluate(phi_x))
    parts = [(np.asarray(t.f.evaluate(phi_x), dtype=np.complex128), t.g) for t in a.terms]

    def sampler(xi: float) -> np.ndarray:
        out = np.zeros(grid.M, dtype=np.complex128)
        for fvals, g in parts:
            out += fvals * g.value(xi * w)
        return out

    return SymbolObject(grid, sampler=sampler, order=a.order)
