"""Basis-level arithmetic on the Fock space F^2.

Functions are stored by their coefficients against the orthonormal basis
e_n(z) = z^n / sqrt(n!), so that Hilbert norms are plain coefficient sums and
no factorial is ever formed explicitly.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

# Quadratic forms whose eigenvalue lies within this of zero are treated as
# degenerate.
FORM_TOL = 1e-12


def log_basis_norm(n):
    """Return ln sqrt(n!) for a nonnegative integer or integer array."""
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("n must be nonnegative")
    out = 0.5 * gammaln(n + 1.0)
    return float(out) if out.ndim == 0 else out


def _log_sqrt_binom(n, k):
    return log_basis_norm(n) - log_basis_norm(k) - log_basis_norm(np.asarray(n) - k)


def scaled_powers(x: complex, n: int, log_scale=None) -> np.ndarray:
    """x**j * exp(-log_scale[j]) for j < n, computed in log space."""
    j = np.arange(n)
    scale = np.zeros(n) if log_scale is None else np.asarray(log_scale, dtype=float)
    x = complex(x)
    out = np.zeros(n, dtype=complex)
    if x == 0:
        out[0] = math.exp(-scale[0])
        return out
    mag = np.exp(j * math.log(abs(x)) - scale)
    return mag * np.exp(1j * j * cmath.phase(x))


@dataclass(frozen=True)
class SpaceConfig:
    nu: float = 2.0

    def __post_init__(self):
        if not self.nu >= 1:
            raise ValueError(f"nu must be >= 1, got {self.nu}")

    def require_hilbert(self):
        if self.nu != 2:
            raise ValueError("operation needs the Hilbert space F^2 (nu = 2)")


@dataclass(frozen=True, eq=False)
class FockVector:
    """f = sum_n coeffs[n] e_n, with e_n(z) = z^n / sqrt(n!)."""

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def basis(cls, n: int, N: int | None = None) -> "FockVector":
        c = np.zeros(max(n + 1, N or 0), dtype=complex)
        c[n] = 1.0
        return cls(c)

    @property
    def degree_bound(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def padded(self, N: int) -> np.ndarray:
        if N < self.coeffs.size and np.any(self.coeffs[N:]):
            raise ValueError(f"vector has nonzero coefficients beyond {N}")
        out = np.zeros(N, dtype=complex)
        m = min(N, self.coeffs.size)
        out[:m] = self.coeffs[:m]
        return out

    def __add__(self, other: "FockVector") -> "FockVector":
        N = max(self.degree_bound, other.degree_bound)
        return FockVector(self.padded(N) + other.padded(N))

    def __mul__(self, s: complex) -> "FockVector":
        return FockVector(self.coeffs * s)

    __rmul__ = __mul__

    def __call__(self, z):
        return evaluate(self, z)


def evaluate(f: FockVector, z):
    """Pointwise value sum_n c_n z^n / sqrt(n!); accepts scalars or arrays."""
    z_arr = np.asarray(z, dtype=complex)
    c = f.coeffs
    n = np.arange(c.size)
    lbn = log_basis_norm(n)
    zz = z_arr.reshape(-1, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logmag = np.log(np.abs(zz))
        terms = np.where(
            n == 0,
            1.0 + 0j,
            np.exp(n * logmag - lbn + 1j * n * np.angle(zz)),
        )
    out = terms @ c
    return complex(out[0]) if z_arr.ndim == 0 else out.reshape(z_arr.shape)


def taylor_to_fock(t: Sequence[complex]) -> FockVector:
    t = np.asarray(t, dtype=complex)
    return FockVector(t * np.exp(log_basis_norm(np.arange(t.size))))


def fock_to_taylor(f: FockVector) -> np.ndarray:
    return f.coeffs * np.exp(-log_basis_norm(np.arange(f.degree_bound)))


@dataclass(frozen=True)
class LogQuadWeight:
    """Nonvanishing weight w(z) = exp(p + q z + r z^2)."""

    p: complex = 0j
    q: complex = 0j
    r: complex = 0j

    def __post_init__(self):
        for name in ("p", "q", "r"):
            object.__setattr__(self, name, complex(getattr(self, name)))

    @classmethod
    def one(cls) -> "LogQuadWeight":
        return cls()

    def log(self, z):
        return self.p + self.q * z + self.r * z * z

    def __call__(self, z):
        return np.exp(self.log(z))

    def is_one(self) -> bool:
        return self.p == 0 and self.q == 0 and self.r == 0

    def is_constant(self) -> bool:
        return self.q == 0 and self.r == 0

    def __mul__(self, other: "LogQuadWeight") -> "LogQuadWeight":
        return LogQuadWeight(self.p + other.p, self.q + other.q, self.r + other.r)

    def compose_affine(self, a: complex, b: complex) -> "LogQuadWeight":
        """The weight z -> w(a z + b)."""
        p, q, r = self.p, self.q, self.r
        return LogQuadWeight(p + q * b + r * b * b, q * a + 2 * r * a * b, r * a * a)

    def recentered(self, alpha: complex) -> "LogQuadWeight":
        """Coefficients (d0, d1, d2) of log w(alpha + z)."""
        return self.compose_affine(1.0, alpha)

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return self.p, self.q, self.r


def taylor_of_logquad(w: LogQuadWeight, N: int) -> np.ndarray:
    """First N Taylor coefficients of exp(p + q z + r z^2).

    Uses t' = (q + 2 r z) t, i.e. (n+1) t_{n+1} = q t_n + 2 r t_{n-1}.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    t = np.zeros(N, dtype=complex)
    t[0] = cmath.exp(w.p)
    for n in range(N - 1):
        s = w.q * t[n]
        if n >= 1:
            s += 2 * w.r * t[n - 1]
        t[n + 1] = s / (n + 1)
    return t


def fock_of_logquad(w: LogQuadWeight, N: int) -> FockVector:
    """Fock coefficients s_n = t_n sqrt(n!) of exp(p + q z + r z^2).

    Same recurrence as `taylor_of_logquad`, rescaled so nothing underflows
    before the true coefficient does.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    s = np.zeros(N, dtype=complex)
    s[0] = cmath.exp(w.p)
    for n in range(N - 1):
        v = w.q * s[n] / math.sqrt(n + 1)
        if n >= 1:
            v += 2 * w.r * s[n - 1] * math.sqrt(n / (n + 1))
        s[n + 1] = v
    return FockVector(s)


def _real_form(w: LogQuadWeight, extra_quadratic: float = 0.0, extra_linear: complex = 0j):
    """Real quadratic form of 2 Re(p + (q + extra_linear) z + r z^2) - (1 + extra) |z|^2.

    Returns (Q, g, c) with the form equal to x^T Q x + g^T x + c, x = (Re z, Im z).
    """
    r = w.r
    lin = w.q + extra_linear
    diag = 1.0 + extra_quadratic
    Q = np.array([[2 * r.real - diag, -2 * r.imag], [-2 * r.imag, -2 * r.real - diag]])
    g = 2.0 * np.array([lin.real, -lin.imag])
    c = 2.0 * w.p.real
    return Q, g, c


def maximize_quadratic(Q: np.ndarray, g: np.ndarray, c: float, tol: float = FORM_TOL) -> float:
    """sup over R^2 of x^T Q x + g^T x + c; +inf when unbounded above."""
    mu, V = np.linalg.eigh(Q)
    scale = max(1.0, float(np.max(np.abs(Q))))
    gscale = max(1.0, float(np.linalg.norm(g)))
    best = c
    for k in range(2):
        gk = float(g @ V[:, k])
        if mu[k] > tol * scale:
            return math.inf
        if mu[k] >= -tol * scale:
            if abs(gk) > tol * gscale:
                return math.inf
            continue
        best += gk * gk / (-4.0 * mu[k])
    return best


def gaussian_norm_logquad(
    w: LogQuadWeight,
    poly_factor: Sequence[complex] | None = None,
    space: SpaceConfig = SpaceConfig(),
) -> float:
    """F^2 norm of poly(z) * exp(p + q z + r z^2).

    The density exp(2 Re(p + q z + r z^2) - |z|^2) is Gaussian when |r| < 1/2;
    the polynomial moment is then integrated exactly with a tensor
    Gauss-Hermite rule on the standardised variable.
    """
    space.require_hilbert()
    poly = np.array([1.0] if poly_factor is None else poly_factor, dtype=complex)
    nz = np.nonzero(poly)[0]
    if nz.size == 0:
        return 0.0
    poly = poly[: nz[-1] + 1]

    Q, g, c = _real_form(w)
    negdet = float(np.linalg.det(-Q))  # = 1 - 4|r|^2
    if 2 * abs(w.r) >= 1 - FORM_TOL or negdet <= 0:
        return math.inf
    Qinv_g = np.linalg.solve(Q, g)
    peak = c - 0.25 * float(g @ Qinv_g)
    base = math.exp(peak) / math.sqrt(negdet)  # (1/pi) * integral without poly
    if poly.size == 1:
        return math.sqrt(base) * abs(poly[0])

    mean = -0.5 * Qinv_g
    cov = np.linalg.inv(-2.0 * Q)
    L = np.linalg.cholesky(cov)
    deg = poly.size - 1
    x, wts = np.polynomial.hermite_e.hermegauss(deg + 1)
    wts = wts / wts.sum()
    X, Y = np.meshgrid(x, x, indexing="ij")
    pts = mean[:, None] + L @ np.vstack([X.ravel(), Y.ravel()])
    z = pts[0] + 1j * pts[1]
    vals = np.polynomial.polynomial.polyval(z, poly)
    moment = float(np.sum(np.outer(wts, wts).ravel() * np.abs(vals) ** 2))
    return math.sqrt(base * moment)
