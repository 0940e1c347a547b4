"""Periodic scalar functions on the circle of circumference 2*pi.

A field is held in dual representation: equispaced samples u(x_j),
x_j = 2*pi*j/M, and Fourier coefficients c(n) with

    u(x) = sum_n c(n) * exp(i n x),      n in {-M/2+1, ..., M/2}.

The Nyquist mode is labelled +M/2 (on the grid exp(i(M/2)x_j) and
exp(-i(M/2)x_j) coincide, so the label is a pure convention).  Structural
metadata travel with the field: reality (c(-n) = conj(c(n))), evenness in x
(c(-n) = c(n)), and the mean convention.  `zero_mean` pins c(0) = 0 exactly;
`mod_constants` keeps c(0) but every norm and comparison ignores it; `free`
makes no promise.

Nonlinear products are dealiased by zero padding (3/2 rule for pairwise
products; pointwise compositions are evaluated on a doubled grid before
truncation).  Parity and reality are measured properties here, re-detected
after each operation, rather than assumptions.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

SYM_TOL = 1e-12

MEAN_CONVENTIONS = ("zero_mean", "mod_constants", "free")


class FieldError(ValueError):
    """Raised when field data contradict the requested structure flags."""


@dataclass(frozen=True)
class SpectralGrid:
    """Equispaced grid with M samples on [0, 2*pi)."""

    M: int

    def __post_init__(self):
        if self.M < 8 or self.M % 2 != 0:
            raise FieldError(f"grid size must be even and >= 8, got {self.M}")

    @property
    def x(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M) / self.M

    @property
    def modes(self) -> np.ndarray:
        """Mode labels in FFT storage order, Nyquist labelled +M/2."""
        n = np.fft.fftfreq(self.M, d=1.0 / self.M).astype(np.int64)
        n[self.M // 2] = self.M // 2
        return n

    @property
    def max_mode(self) -> int:
        return self.M // 2

    def index_of(self, n: int) -> int:
        if abs(n) > self.M // 2:
            raise FieldError(f"mode {n} outside grid range |n| <= {self.M // 2}")
        return n % self.M


def _detect_flags(coeffs: np.ndarray) -> tuple[bool, bool]:
    scale = float(np.max(np.abs(coeffs))) or 1.0
    rev = coeffs[(-np.arange(len(coeffs))) % len(coeffs)]
    is_real = bool(np.max(np.abs(np.conj(rev) - coeffs)) <= SYM_TOL * scale)
    is_even = bool(np.max(np.abs(rev - coeffs)) <= SYM_TOL * scale)
    return is_real, is_even


@dataclass(frozen=True)
class PeriodicField:
    """Band-limited 2*pi-periodic function with structure metadata.

    Instances are immutable: the coefficient array is frozen at
    construction and all operations return new fields.
    """

    grid: SpectralGrid
    coeffs: np.ndarray  # complex, FFT storage order
    is_real: bool
    is_even: bool
    mean_convention: str = "free"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.M,):
            raise FieldError(f"coefficient array must have length {self.grid.M}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.mean_convention not in MEAN_CONVENTIONS:
            raise FieldError(f"unknown mean convention {self.mean_convention!r}")

    # -- representation ----------------------------------------------------

    @property
    def samples(self) -> np.ndarray:
        s = np.fft.ifft(self.coeffs) * self.grid.M
        return s.real if self.is_real else s

    def coeff(self, n: int) -> complex:
        return complex(self.coeffs[self.grid.index_of(n)])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Trigonometric evaluation at arbitrary points."""
        x = np.asarray(x, dtype=float)
        n = self.grid.modes
        out = np.tensordot(self.coeffs, np.exp(1j * np.outer(n, x)), axes=(0, 0))
        return out.real if self.is_real else out

    def __add__(self, other):
        _check_same_grid(self, other)
        return field_from_modes(self.coeffs + other.coeffs, self.grid,
                                mean_convention=_combine_mean(self, other))

    def __sub__(self, other):
        _check_same_grid(self, other)
        return field_from_modes(self.coeffs - other.coeffs, self.grid,
                                mean_convention=_combine_mean(self, other))

    def __mul__(self, scalar):
        if isinstance(scalar, PeriodicField):
            return multiply(self, scalar)
        return field_from_modes(self.coeffs * scalar, self.grid,
                                mean_convention=self.mean_convention)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def conj(self) -> "PeriodicField":
        rev = np.conj(self.coeffs[(-np.arange(self.grid.M)) % self.grid.M])
        return field_from_modes(rev, self.grid, mean_convention=self.mean_convention)

    def reflect(self) -> "PeriodicField":
        """x -> -x."""
        rev = self.coeffs[(-np.arange(self.grid.M)) % self.grid.M]
        return field_from_modes(rev, self.grid, mean_convention=self.mean_convention)

    def with_mean_convention(self, convention: str) -> "PeriodicField":
        if convention == "zero_mean":
            c = self.coeffs.copy()
            c[0] = 0.0
            return field_from_modes(c, self.grid, mean_convention="zero_mean")
        return replace(self, mean_convention=convention)


def _check_same_grid(u: PeriodicField, v: PeriodicField):
    if u.grid.M != v.grid.M:
        raise FieldError(f"grid mismatch: M={u.grid.M} vs M={v.grid.M}")


def _combine_mean(u: PeriodicField, v: PeriodicField) -> str:
    if u.mean_convention == v.mean_convention:
        return u.mean_convention
    return "free"


# -- constructors ----------------------------------------------------------

def field_from_modes(coeffs, grid: SpectralGrid, *, is_real=None, is_even=None,
                     mean_convention: str = "free") -> PeriodicField:
    c = np.zeros(grid.M, dtype=np.complex128)
    c[:] = np.asarray(coeffs, dtype=np.complex128)
    scale = float(np.max(np.abs(c))) or 1.0
    det_real, det_even = _detect_flags(c)
    if is_real is None:
        is_real = det_real
    elif is_real and not det_real:
        raise FieldError("is_real requested but coefficients are not conjugate-symmetric")
    if is_even is None:
        is_even = det_even
    elif is_even and not det_even:
        raise FieldError("is_even requested but coefficients are not reflection-symmetric")
    if mean_convention == "zero_mean":
        if abs(c[0]) > SYM_TOL * scale:
            raise FieldError(f"zero_mean requested but mode 0 is {c[0]:.3e}")
        c[0] = 0.0
    if is_real:
        # exact symmetrisation kills rounding-level asymmetry
        rev = np.conj(c[(-np.arange(grid.M)) % grid.M])
        c = 0.5 * (c + rev)
    if is_even:
        rev = c[(-np.arange(grid.M)) % grid.M]
        c = 0.5 * (c + rev)
    return PeriodicField(grid, c, is_real, is_even, mean_convention)


def field_from_samples(samples, grid: SpectralGrid, *, is_real=None, is_even=None,
                       mean_convention: str = "free") -> PeriodicField:
    s = np.asarray(samples)
    if s.shape != (grid.M,):
        raise FieldError(f"sample array must have length {grid.M}")
    if is_real and np.iscomplexobj(s) and np.max(np.abs(s.imag)) > SYM_TOL * (np.max(np.abs(s)) or 1.0):
        raise FieldError("is_real requested but samples are complex")
    c = np.fft.fft(s) / grid.M
    return field_from_modes(c, grid, is_real=is_real, is_even=is_even,
                            mean_convention=mean_convention)


def make_field(data, grid: SpectralGrid, kind: str = "samples", **flags) -> PeriodicField:
    """Build a field from samples or mode coefficients, validating flags."""
    if kind == "samples":
        return field_from_samples(data, grid, **flags)
    if kind == "modes":
        return field_from_modes(data, grid, **flags)
    raise FieldError(f"kind must be 'samples' or 'modes', got {kind!r}")


def zero_field(grid: SpectralGrid, mean_convention="zero_mean") -> PeriodicField:
    return PeriodicField(grid, np.zeros(grid.M, dtype=np.complex128), True, True, mean_convention)


def cosine_field(grid: SpectralGrid, n: int, amplitude: float = 1.0,
                 mean_convention="zero_mean") -> PeriodicField:
    c = np.zeros(grid.M, dtype=np.complex128)
    if n == 0:
        c[0] = amplitude
        mean_convention = "free"
    else:
        c[grid.index_of(n)] += amplitude / 2.0
        c[grid.index_of(-n)] += amplitude / 2.0
    return field_from_modes(c, grid, mean_convention=mean_convention)


def random_even_field(grid: SpectralGrid, seed: int, decay: float = 0.5,
                      n_max: int | None = None, complex_valued: bool = False) -> PeriodicField:
    """Even field with coefficients decaying like decay**n; reproducible."""
    rng = np.random.RandomState(seed)
    n_max = n_max if n_max is not None else grid.M // 4
    c = np.zeros(grid.M, dtype=np.complex128)
    for n in range(1, n_max + 1):
        a = rng.standard_normal() * decay**n
        if complex_valued:
            a = a + 1j * rng.standard_normal() * decay**n
        c[grid.index_of(n)] = a / 2.0
        c[grid.index_of(-n)] = a / 2.0
    return field_from_modes(c, grid, mean_convention="zero_mean")


# -- core operations -------------------------------------------------------

def project_mode(u: PeriodicField, n: int, sign: str = "both"):
    """Projector on the n-th frequency pair, or the amplitude against
    the normalised cosine profile cos(nx)/sqrt(pi)."""
    if n < 1 or n > u.grid.max_mode:
        raise FieldError(f"mode {n} outside 1..{u.grid.max_mode}")
    if sign == "both":
        c = np.zeros(u.grid.M, dtype=np.complex128)
        i, j = u.grid.index_of(n), u.grid.index_of(-n)
        c[i] = u.coeffs[i]
        c[j] = u.coeffs[j]
        return field_from_modes(c, u.grid, mean_convention="zero_mean")
    plus = np.sqrt(np.pi) * (u.coeff(n) + u.coeff(-n))
    if n == u.grid.max_mode:
        plus = np.sqrt(np.pi) * u.coeff(n)
    if sign == "+":
        return plus
    if sign == "-":
        return np.conj(plus)
    raise FieldError(f"sign must be '+', '-' or 'both', got {sign!r}")


@dataclass(frozen=True)
class ModePair:
    """Amplitudes of the +/- components of one frequency against cos(nx)/sqrt(pi)."""

    n: int
    plus_part: complex
    minus_part: complex


def mode_pair(u: PeriodicField, n: int) -> ModePair:
    p = project_mode(u, n, "+")
    return ModePair(n, p, np.conj(p))


def sobolev_norm(u: PeriodicField, s: float) -> float:
    """Homogeneous-style Sobolev norm: mode 0 never contributes.

    ||u||^2 = sum_{n>=1} n^(2s) ||Pi_n u||^2_{L2(0,2pi)}.
    """
    if u.mean_convention == "free" and abs(u.coeff(0)) > SYM_TOL * (np.max(np.abs(u.coeffs)) or 1.0):
        raise FieldError("norm undefined for 'free' mean convention with nonzero mean; "
                         "project the mean or switch to mod_constants")
    M = u.grid.M
    total = 0.0
    for n in range(1, M // 2):
        p2 = abs(u.coeff(n))**2 + abs(u.coeff(-n))**2
        total += float(n)**(2 * s) * 2 * np.pi * p2
    total += float(M // 2)**(2 * s) * 2 * np.pi * abs(u.coeff(M // 2))**2
    return float(np.sqrt(total))


def l2_norm(u: PeriodicField) -> float:
    w = np.abs(u.coeffs)**2
    return float(np.sqrt(2 * np.pi * w.sum()))


def linf_norm(u: PeriodicField) -> float:
    return float(np.max(np.abs(u.samples)))


def mean_value(u: PeriodicField) -> complex:
    return u.coeff(0)


def apply_multiplier(u: PeriodicField, g) -> PeriodicField:
    """Fourier multiplier: c_out(n) = g(n) c_in(n)."""
    gv = np.asarray(g(u.grid.modes.astype(float)), dtype=np.complex128)
    return field_from_modes(gv * u.coeffs, u.grid, mean_convention=u.mean_convention)


def dx(u: PeriodicField, order: int = 1) -> PeriodicField:
    out = apply_multiplier(u, lambda xi: (1j * xi)**order)
    return out.with_mean_convention("zero_mean")


@dataclass(frozen=True)
class SymmetryReport:
    is_real: bool
    is_even: bool
    mean: complex
    max_imag: float
    max_odd_part: float


def check_symmetry(u: PeriodicField) -> SymmetryReport:
    """Measured deviations from reality / evenness / zero mean."""
    scale = float(np.max(np.abs(u.coeffs))) or 1.0
    rev = u.coeffs[(-np.arange(u.grid.M)) % u.grid.M]
    dev_real = float(np.max(np.abs(np.conj(rev) - u.coeffs)))
    dev_even = float(np.max(np.abs(rev - u.coeffs)))
    return SymmetryReport(
        is_real=dev_real <= SYM_TOL * scale,
        is_even=dev_even <= SYM_TOL * scale,
        mean=u.coeff(0),
        max_imag=dev_real,
        max_odd_part=dev_even,
    )


def symmetrize(u: PeriodicField, real: bool = True, even: bool = True) -> PeriodicField:
    """Average with the reflected/conjugated copy to kill parity drift."""
    c = u.coeffs.copy()
    if real:
        rev = np.conj(c[(-np.arange(u.grid.M)) % u.grid.M])
        c = 0.5 * (c + rev)
    if even:
        rev = c[(-np.arange(u.grid.M)) % u.grid.M]
        c = 0.5 * (c + rev)
    return field_from_modes(c, u.grid, is_real=real or None, is_even=even or None,
                            mean_convention=u.mean_convention)


# -- dealiased nonlinear algebra -------------------------------------------

def _pad_coeffs(coeffs: np.ndarray, M: int, K: int) -> np.ndarray:
    """Zero-pad mode coefficients (last axis) from M to K slots."""
    big = np.zeros(coeffs.shape[:-1] + (K,), dtype=np.complex128)
    h = M // 2
    big[..., :h] = coeffs[..., :h]                      # modes 0 .. M/2-1
    big[..., K - (h - 1):] = coeffs[..., M - (h - 1):]  # modes -(M/2-1) .. -1
    # split the Nyquist line symmetrically so padded samples stay real/even
    big[..., h] = 0.5 * coeffs[..., h]
    big[..., K - h] += 0.5 * coeffs[..., h]
    return big


def _truncate_coeffs(big: np.ndarray, M: int) -> np.ndarray:
    """Truncate padded coefficients (last axis) back to M slots."""
    K = big.shape[-1]
    h = M // 2
    c = np.zeros(big.shape[:-1] + (M,), dtype=np.complex128)
    c[..., :h] = big[..., :h]
    c[..., M - h + 1:] = big[..., K - h + 1:]
    c[..., h] = big[..., h] + big[..., K - h]
    return c


def multiply(u: PeriodicField, v: PeriodicField, extra_pad: int = 0) -> PeriodicField:
    """Product with 3/2-rule dealiasing (exact for pairwise products)."""
    _check_same_grid(u, v)
    M = u.grid.M
    K = 3 * M // 2 + extra_pad
    K += K % 2
    su = np.fft.ifft(_pad_coeffs(u.coeffs, M, K)) * K
    sv = np.fft.ifft(_pad_coeffs(v.coeffs, M, K)) * K
    big = np.fft.fft(su * sv) / K
    return field_from_modes(_truncate_coeffs(big, M), u.grid)


def pointwise(fn, *fields: PeriodicField, pad: int = 2) -> PeriodicField:
    """Apply a pointwise function of several fields on a refined grid.

    Exact for polynomial fn of degree <= pad + something; for rational or
    transcendental fn the truncation error is spectrally small on smooth data.
    """
    M = fields[0].grid.M
    K = pad * M
    samples = [np.fft.ifft(_pad_coeffs(f.coeffs, M, K)) * K for f in fields]
    samples = [s.real if f.is_real else s for s, f in zip(samples, fields)]
    big = np.fft.fft(np.asarray(fn(*samples), dtype=np.complex128)) / K
    return field_from_modes(_truncate_coeffs(big, M), fields[0].grid)


# -- serialization ----------------------------------------------------------

def field_to_csv(u: PeriodicField, which: str = "modes") -> str:
    buf = io.StringIO()
    buf.write(f"# gcwaves-field,M={u.grid.M},is_real={u.is_real},is_even={u.is_even},"
              f"mean_convention={u.mean_convention},layout={which}\n")
    if which == "modes":
        buf.write("n,re,im\n")
        order = np.argsort(u.grid.modes)
        for i in order:
            n = u.grid.modes[i]
            buf.write(f"{n},{u.coeffs[i].real:.17e},{u.coeffs[i].imag:.17e}\n")
    elif which == "samples":
        buf.write("x,value\n")
        s = u.samples
        for x, val in zip(u.grid.x, s):
            buf.write(f"{x:.17e},{complex(val).real:.17e}\n")
    else:
        raise FieldError(f"layout must be 'modes' or 'samples', got {which!r}")
    return buf.getvalue()


def field_from_csv(text: str) -> PeriodicField:
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0]
    if not header.startswith("# gcwaves-field"):
        raise FieldError("not a gcwaves field CSV")
    meta = dict(item.split("=", 1) for item in header[2:].split(",")[1:])
    grid = SpectralGrid(int(meta["M"]))
    layout = meta["layout"]
    rows = [ln.split(",") for ln in lines[2:]]
    if layout == "modes":
        c = np.zeros(grid.M, dtype=np.complex128)
        for n_s, re_s, im_s in rows:
            c[grid.index_of(int(n_s))] = float(re_s) + 1j * float(im_s)
        data, kind = c, "modes"
    else:
        data = np.array([float(r[1]) for r in rows])
        kind = "samples"
    return make_field(data, grid, kind=kind,
                      is_real=meta["is_real"] == "True" or None,
                      is_even=meta["is_even"] == "True" or None,
                      mean_convention=meta["mean_convention"])
