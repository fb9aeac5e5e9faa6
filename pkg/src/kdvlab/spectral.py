"""Truncated Fourier fields on the torus [0, 2*pi).

A field of size ``n`` stores the coefficients ``a[xi]`` for ``xi = -n..n`` with

    f(x) = sum_xi a[xi] * exp(i*xi*x),

so pointwise products are plain convolutions of coefficient vectors (no 2*pi
factors). The Japanese bracket is ``<xi> = 1 + |xi|`` throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, PreconditionError

# relative tolerance used when validating the reality / mean-zero flags
_FLAG_RTOL = 1e-10


def bracket(xi):
    """``1 + |xi|`` elementwise, as float."""
    return 1.0 + np.abs(np.asarray(xi, dtype=float))


@dataclass(frozen=True)
class RegularityParams:
    """Exponents ``(s, delta, gamma)`` plus the tail margin of random data.

    ``gamma`` defaults to ``1 - 10*delta`` when omitted.
    """

    s: float
    delta: float
    gamma: float | None = None
    eps_tail: float = 0.05

    def __post_init__(self):
        s, delta = float(self.s), float(self.delta)
        if not 0.0 <= s < 0.5:
            raise ConfigError(f"constraint 0 <= s < 1/2 violated (s = {s})")
        if not 0.0 < 10.0 * delta < 1.0 - 2.0 * s:
            raise ConfigError(
                "constraint 0 < 10*delta < 1 - 2*s violated "
                f"(10*delta = {10 * delta:.6g}, 1 - 2*s = {1 - 2 * s:.6g})"
            )
        gamma = 1.0 - 10.0 * delta if self.gamma is None else float(self.gamma)
        if not 0.0 < gamma <= 1.0 - 10.0 * delta + 1e-15:
            raise ConfigError(
                "constraint 0 < gamma <= 1 - 10*delta violated "
                f"(gamma = {gamma:.6g}, 1 - 10*delta = {1 - 10 * delta:.6g})"
            )
        if not self.eps_tail > 0:
            raise ConfigError(f"eps_tail must be positive (got {self.eps_tail})")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "eps_tail", float(self.eps_tail))

    def to_dict(self):
        return {"s": self.s, "delta": self.delta, "gamma": self.gamma,
                "eps_tail": self.eps_tail}


@dataclass(frozen=True, eq=False)
class FourierField:
    """Coefficients ``a[xi]``, ``xi = -n..n``, stored at index ``xi + n``.

    ``is_real`` asserts conjugate symmetry ``a[-xi] = conj(a[xi])`` and
    ``is_mean_zero`` asserts ``a[0] = 0``. Both are checked on construction
    and then imposed exactly, so downstream symmetry tests are bit-exact.
    The coefficient array is read-only.
    """

    n: int
    coeffs: np.ndarray
    is_real: bool = False
    is_mean_zero: bool = False

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValueError(f"max frequency must be positive, got {n}")
        a = np.array(self.coeffs, dtype=complex, copy=True).reshape(-1)
        if a.shape != (2 * n + 1,):
            raise ValueError(f"expected {2 * n + 1} coefficients, got {a.shape[0]}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite Fourier coefficients")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        tol = _FLAG_RTOL * max(scale, 1e-300)
        if self.is_real:
            mirror = np.conj(a[::-1])
            if np.max(np.abs(a - mirror)) > tol:
                raise PreconditionError("coefficients are not conjugate symmetric")
            a = 0.5 * (a + mirror)
            a[n] = a[n].real
        if self.is_mean_zero:
            if abs(a[n]) > tol:
                raise PreconditionError(f"mean-zero field has a_0 = {a[n]}")
            a[n] = 0.0
        a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "is_real", bool(self.is_real))
        object.__setattr__(self, "is_mean_zero", bool(self.is_mean_zero))

    # -- construction helpers -------------------------------------------
    @classmethod
    def zeros(cls, n, is_real=True, is_mean_zero=True):
        return cls(n, np.zeros(2 * n + 1, dtype=complex), is_real, is_mean_zero)

    @classmethod
    def from_modes(cls, n, modes, is_real=None, is_mean_zero=None):
        """Build from a ``{xi: value}`` mapping; flags are inferred when None."""
        a = np.zeros(2 * n + 1, dtype=complex)
        for xi, val in modes.items():
            if abs(xi) > n:
                raise ValueError(f"mode {xi} outside [-{n}, {n}]")
            a[xi + n] = val
        if is_real is None:
            is_real = bool(np.array_equal(a, np.conj(a[::-1])))
        if is_mean_zero is None:
            is_mean_zero = a[n] == 0
        return cls(n, a, is_real, is_mean_zero)

    @classmethod
    def from_half(cls, half, is_mean_zero=False):
        """Real field from its coefficients at ``xi = 0..n``."""
        half = np.asarray(half, dtype=complex)
        n = half.shape[0] - 1
        a = np.concatenate([np.conj(half[:0:-1]), half])
        a[n] = a[n].real
        return cls(n, a, True, is_mean_zero)

    # -- views ------------------------------------------------------------
    @property
    def freqs(self):
        return np.arange(-self.n, self.n + 1)

    def __getitem__(self, xi):
        if abs(xi) > self.n:
            return 0j
        return self.coeffs[xi + self.n]

    @property
    def half(self):
        """Coefficients at ``xi = 0..n``."""
        return self.coeffs[self.n:]

    def replace(self, coeffs, is_real=None, is_mean_zero=None):
        return FourierField(
            self.n,
            coeffs,
            self.is_real if is_real is None else is_real,
            self.is_mean_zero if is_mean_zero is None else is_mean_zero,
        )

    def resized(self, n):
        """Zero-pad or truncate to max frequency ``n``."""
        a = np.zeros(2 * n + 1, dtype=complex)
        m = min(n, self.n)
        a[n - m:n + m + 1] = self.coeffs[self.n - m:self.n + m + 1]
        return FourierField(n, a, self.is_real, self.is_mean_zero)

    def conj_reflect(self):
        """The field ``x -> conj(f(-x))``; identity on real fields."""
        return self.replace(np.conj(self.coeffs[::-1]))

    def reflect(self):
        """The field ``x -> f(-x)``."""
        return self.replace(self.coeffs[::-1].copy())

    def to_physical(self, m=None):
        """Values on the uniform grid ``x_j = 2*pi*j/m`` (default ``m = 2n+1``)."""
        m = 2 * self.n + 1 if m is None else int(m)
        if m < 2 * self.n + 1:
            raise ValueError("grid too coarse for the stored modes")
        vals = sfft.ifft(_to_grid(self.coeffs, self.n, m)) * m
        return vals.real if self.is_real else vals

    # -- arithmetic -----------------------------------------------------
    def _combine(self, other, op):
        if not isinstance(other, FourierField):
            return NotImplemented
        if other.n != self.n:
            raise PreconditionError(f"size mismatch: {self.n} vs {other.n}")
        return FourierField(
            self.n,
            op(self.coeffs, other.coeffs),
            self.is_real and other.is_real,
            self.is_mean_zero and other.is_mean_zero,
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        c = complex(c)
        real = self.is_real and c.imag == 0
        return FourierField(self.n, self.coeffs * c, real, self.is_mean_zero)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return (f"FourierField(n={self.n}, real={self.is_real}, "
                f"mean_zero={self.is_mean_zero}, l2={sobolev_norm(self, 0.0):.6g})")

    # -- serialization ----------------------------------------------------
    def to_dict(self):
        return {
            "n": self.n,
            "re": self.coeffs.real.tolist(),
            "im": self.coeffs.imag.tolist(),
            "real": self.is_real,
            "mean_zero": self.is_mean_zero,
        }

    @classmethod
    def from_dict(cls, d):
        a = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        return cls(int(d["n"]), a, bool(d["real"]), bool(d["mean_zero"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fields_equal(f, g):
    """Bit-exact equality of coefficients and flags."""
    return (f.n == g.n and f.is_real == g.is_real and f.is_mean_zero == g.is_mean_zero
            and np.array_equal(f.coeffs, g.coeffs))


# -- multipliers -------------------------------------------------------------

class SymbolKind(Enum):
    BESSEL = "bessel"
    DERIVATIVE = "derivative"
    INVERSE_DERIVATIVE = "inverse_derivative"
    BESSEL_INVERSE_DERIVATIVE = "bessel_inverse_derivative"
    MEAN_KILL = "mean_kill"


@dataclass(frozen=True)
class MultiplierSymbol:
    kind: SymbolKind
    sigma: float = 0.0

    @classmethod
    def bessel(cls, sigma):
        return cls(SymbolKind.BESSEL, float(sigma))

    @classmethod
    def derivative(cls):
        return cls(SymbolKind.DERIVATIVE)

    @classmethod
    def inverse_derivative(cls):
        return cls(SymbolKind.INVERSE_DERIVATIVE)

    @classmethod
    def bessel_inverse_derivative(cls, sigma):
        return cls(SymbolKind.BESSEL_INVERSE_DERIVATIVE, float(sigma))

    @classmethod
    def mean_kill(cls):
        return cls(SymbolKind.MEAN_KILL)

    def values(self, xi):
        """Symbol evaluated on integer frequencies (0 where singular)."""
        xi = np.asarray(xi)
        k = self.kind
        if k is SymbolKind.BESSEL:
            return bracket(xi) ** self.sigma + 0j
        if k is SymbolKind.DERIVATIVE:
            return 1j * xi
        if k is SymbolKind.MEAN_KILL:
            return np.where(xi == 0, 0.0, 1.0) + 0j
        safe = np.where(xi == 0, 1, xi)
        inv = np.where(xi == 0, 0.0, 1.0 / (1j * safe))
        if k is SymbolKind.INVERSE_DERIVATIVE:
            return inv
        return bracket(xi) ** self.sigma * inv


def apply_multiplier(field, sym):
    """Multiply each coefficient by the symbol of ``sym``.

    Inverse derivatives need a mean-zero field; their output has ``a_0 = 0``.
    """
    if sym.kind in (SymbolKind.INVERSE_DERIVATIVE, SymbolKind.BESSEL_INVERSE_DERIVATIVE):
        if not field.is_mean_zero:
            raise PreconditionError("inverse derivative needs a mean-zero field")
    out = field.coeffs * sym.values(field.freqs)
    mean_zero = field.is_mean_zero or sym.kind is not SymbolKind.BESSEL
    return FourierField(field.n, out, field.is_real, mean_zero)


def sobolev_norm(field, sigma):
    """``(sum <xi>^(2 sigma) |a_xi|^2)^(1/2)``."""
    w = bracket(field.freqs) ** (2.0 * sigma)
    return float(np.sqrt(np.sum(w * (field.coeffs.real ** 2 + field.coeffs.imag ** 2))))


# -- products ----------------------------------------------------------------

def _to_grid(a, n, m):
    arr = np.zeros(m, dtype=complex)
    arr[:n + 1] = a[n:]
    if n:
        arr[m - n:] = a[:n]
    return arr


def fft_size(min_len):
    return sfft.next_fast_len(int(min_len))


def convolve_coeffs(a, na, b, nb, out_n, real=False):
    """Exact convolution ``c[xi] = sum_eta a[eta] b[xi-eta]`` for ``|xi| <= out_n``.

    Uses a zero-padded transform of length ``> na + nb + out_n`` so no aliased
    mode lands on a retained frequency. With ``real=True`` the inputs must be
    conjugate symmetric and the output is built conjugate symmetric exactly.
    """
    m = fft_size(na + nb + out_n + 1)
    if real:
        pa = sfft.irfft(a[na:], n=m) * m
        pb = sfft.irfft(b[nb:], n=m) * m
        half = sfft.rfft(pa * pb)[:out_n + 1] / m
        half[0] = half[0].real
        return np.concatenate([np.conj(half[:0:-1]), half])
    pa = sfft.ifft(_to_grid(a, na, m)) * m
    pb = sfft.ifft(_to_grid(b, nb, m)) * m
    c = sfft.fft(pa * pb) / m
    return np.concatenate([c[m - out_n:], c[:out_n + 1]]) if out_n else c[:1]


def dealiased_product(u, v):
    """Coefficients of ``u*v`` on ``|xi| <= N`` (2/3-rule exact)."""
    if u.n != v.n:
        raise PreconditionError(f"size mismatch: {u.n} vs {v.n}")
    real = u.is_real and v.is_real
    c = convolve_coeffs(u.coeffs, u.n, v.coeffs, v.n, u.n, real=real)
    return FourierField(u.n, c, real, False)


def direct_convolution(u, v):
    """O(N^2) reference convolution truncated to ``|xi| <= N``."""
    n = u.n
    out = np.zeros(2 * n + 1, dtype=complex)
    a, b = u.coeffs, v.coeffs
    for i in range(2 * n + 1):
        xi1 = i - n
        for j in range(2 * n + 1):
            xi = xi1 + j - n
            if -n <= xi <= n:
                out[xi + n] += a[i] * b[j]
    return out


# -- random data ---------------------------------------------------------------

def rough_magnitudes(n, s, eps_tail):
    xi = np.arange(1, n + 1)
    return bracket(xi) ** (s - 0.5 - eps_tail)


def random_rough_field(n, params, seed, amplitude=1.0):
    """Real mean-zero field with ``|a_xi| = amplitude * <xi>^(s - 1/2 - eps_tail)``.

    Phases are uniform and drawn sequentially for ``xi = 1, 2, ...`` from one
    generator, so fields of different ``n`` with the same seed are nested
    (the smaller is a truncation of the larger).
    """
    if n < 2:
        raise ConfigError("random_rough_field needs n >= 2")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    mags = amplitude * rough_magnitudes(n, params.s, params.eps_tail)
    half = np.concatenate([[0.0], mags * np.exp(1j * phases)])
    return FourierField.from_half(half, is_mean_zero=True)


def rough_norm_bound(s, eps_tail):
    """Infinite-n value of ``2 * sum_{xi>=1} <xi>^(-1-2 eps_tail)`` (H^{-s} norm squared).

    The Hurwitz zeta tail gives the analytic certificate that the truncated
    data lie in ``H^{-s}`` uniformly in ``n``.
    """
    from scipy.special import zeta

    return 2.0 * float(zeta(1.0 + 2.0 * eps_tail, 2.0))


def normalized(field, sigma=0.0, target=1.0):
    nrm = sobolev_norm(field, sigma)
    if nrm == 0:
        return field
    return field * (target / nrm)
