"""Finite sections of composition-type operators on span{e_0, ..., e_{N-1}}.

All matrices are dense complex N x N arrays.  Column n holds the image of e_n.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fock import FockVector, LogQuadWeight, fock_of_logquad, log_basis_norm, scaled_powers
from .symbols import AffineSymbol

DENSE_SVD_MAX = 256
DUMP_MAGIC = b"FOCKMAT1"


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    entries: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, TruncatedOperator):
            return TruncatedOperator(
                self.entries @ other.entries, {"product": [self.meta, other.meta]}
            )
        if isinstance(other, FockVector):
            return FockVector(self.entries @ other.padded(self.dim))
        return self.entries @ np.asarray(other)

    def __sub__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return TruncatedOperator(self.entries - other.entries, {"difference": [self.meta, other.meta]})

    @classmethod
    def identity(cls, N: int) -> "TruncatedOperator":
        return cls(np.eye(N, dtype=complex), {"kind": "identity", "N": N})


def _triangle(N: int):
    k, n = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    return k, n


def composition_matrix(phi: AffineSymbol, N: int) -> TruncatedOperator:
    """entry[k][n] = binom(n,k) a^k b^(n-k) sqrt(k!/n!) for k <= n.

    Evaluated as sqrt(binom(n,k)) * a^k * b^j / sqrt(j!), j = n - k, so no
    factorial overflows.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    lbn = log_basis_norm(np.arange(N))
    apow = scaled_powers(phi.a, N)
    bpow = scaled_powers(phi.b, N, lbn)  # b^j / sqrt(j!)
    k, n = _triangle(N)
    j = np.clip(n - k, 0, None)
    upper = k <= n
    log_sqrt_binom = np.where(upper, lbn[n] - lbn[k] - lbn[j], 0.0)
    mat = np.where(upper, np.exp(log_sqrt_binom) * apow[k] * bpow[j], 0)
    return TruncatedOperator(mat, {"kind": "composition", "a": phi.a, "b": phi.b, "N": N})


def multiplication_matrix(t: Sequence[complex] | FockVector, N: int) -> TruncatedOperator:
    """Multiplication by the series t (Taylor coefficients, or a FockVector).

    entry[k][n] = t_{k-n} sqrt(k!/n!) for k >= n.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    lbn = log_basis_norm(np.arange(N))
    if isinstance(t, FockVector):
        s = t.padded(max(N, t.degree_bound))[:N]
    else:
        tt = np.zeros(N, dtype=complex)
        tt[: min(N, len(t))] = np.asarray(t, dtype=complex)[:N]
        s = tt * np.exp(lbn)
    k, n = _triangle(N)
    j = np.clip(k - n, 0, None)
    lower = k >= n
    # t_j sqrt(k!/n!) = s_j sqrt(binom(k, j))
    mat = np.where(lower, s[j] * np.exp(np.where(lower, lbn[k] - lbn[n] - lbn[j], 0.0)), 0)
    return TruncatedOperator(mat, {"kind": "multiplication", "N": N})


def weighted_matrix(w: LogQuadWeight, phi: AffineSymbol, N: int) -> TruncatedOperator:
    """Finite section of f -> w (f o phi).

    Equal to multiplication_matrix(w) @ composition_matrix(phi) (M_w is lower
    and C_phi upper triangular, so the product of sections is the section of
    the product), but built column by column from
    W e_{n+1} = (a z + b) W e_n / sqrt(n+1), W e_0 = w.  This avoids the
    cancellation between the two factors, whose sections can have huge norms
    when |a| = 1 even though W itself is unitary.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    mat = np.zeros((N, N), dtype=complex)
    col = fock_of_logquad(w, N).coeffs.copy()
    up = np.sqrt(np.arange(1, N))  # z e_k = sqrt(k+1) e_{k+1}
    a, b = phi.a, phi.b
    for n in range(N):
        mat[:, n] = col
        if n + 1 < N:
            # real scale factors first: complex division is not exact even
            # when the quotient is 1, and the identity section should be
            s = math.sqrt(n + 1)
            nxt = complex(b.real / s, b.imag / s) * col
            nxt[1:] += a * (up / s) * col[:-1]
            col = nxt
    return TruncatedOperator(
        mat, {"kind": "weighted", "p": w.p, "q": w.q, "r": w.r, "a": phi.a, "b": phi.b, "N": N}
    )


def shift_matrix(N: int) -> np.ndarray:
    """Section of f -> z f: e_n -> sqrt(n+1) e_{n+1}."""
    return np.diag(np.sqrt(np.arange(1, N)), -1).astype(complex)


def derivative_matrix(N: int) -> np.ndarray:
    """f -> f': e_n -> sqrt(n) e_{n-1}."""
    return np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)


def rank_one_projection(alpha: complex, N: int, vector: FockVector | None = None) -> TruncatedOperator:
    """Section of f -> f(alpha) v, with v = 1 unless given."""
    lbn = log_basis_norm(np.arange(N))
    row = scaled_powers(alpha, N, lbn)  # e_n(alpha)
    col = np.zeros(N, dtype=complex)
    if vector is None:
        col[0] = 1.0
    else:
        col = vector.padded(max(N, vector.degree_bound))[:N]
    return TruncatedOperator(np.outer(col, row), {"kind": "rank_one", "alpha": alpha, "N": N})


def _power_iteration_norm(A: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    N = A.shape[1]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    v /= np.linalg.norm(v)
    sigma2 = 0.0
    for _ in range(max_iter):
        u = A.conj().T @ (A @ v)
        new = float(np.linalg.norm(u))
        if new == 0.0:
            return 0.0
        v = u / new
        if abs(new - sigma2) <= tol * new:
            return math.sqrt(new)
        sigma2 = new
    raise NonConvergence(f"power iteration did not converge in {max_iter} steps")


def operator_norm(T: TruncatedOperator | np.ndarray, method: str = "auto") -> float:
    """Largest singular value; dense SVD up to N = 256, power iteration above."""
    A = T.entries if isinstance(T, TruncatedOperator) else np.asarray(T)
    if method == "auto":
        method = "svd" if A.shape[0] <= DENSE_SVD_MAX else "power"
    if method == "svd":
        return float(np.linalg.norm(A, 2))
    if method == "power":
        return _power_iteration_norm(A)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class ConvergenceReport:
    errors: list[float]
    power_norms: list[float]
    first_below: int | None
    rate: float | None
    overflow: bool = False

    @property
    def converged(self) -> bool:
        return self.first_below is not None


def fit_geometric_rate(errors: Sequence[float], floor: float) -> float | None:
    """10**slope of a least-squares fit of log10(error) against n above `floor`."""
    e = np.asarray(errors, dtype=float)
    n = np.arange(1, e.size + 1)
    keep = (e > floor) & np.isfinite(e)
    if keep.sum() < 3:
        return None
    slope = np.polyfit(n[keep], np.log10(e[keep]), 1)[0]
    return float(10.0**slope)


def power_convergence(
    T: TruncatedOperator, target: TruncatedOperator, n_max: int, tol: float
) -> ConvergenceReport:
    """||T^n - target|| for n = 1..n_max by repeated multiplication."""
    A = T.entries
    P = target.entries
    scale = max(1.0, float(np.linalg.norm(P, 2)))
    Tn = np.eye(T.dim, dtype=complex)
    errors, norms = [], []
    first = None
    overflow = False
    for n in range(1, n_max + 1):
        Tn = A @ Tn
        nrm = float(np.linalg.norm(Tn, 2))
        if not math.isfinite(nrm) or nrm > 1e100:
            overflow = True
            break
        norms.append(nrm)
        err = float(np.linalg.norm(Tn - P, 2))
        errors.append(err)
        if first is None and err < tol:
            first = n
    floor = 1e3 * np.finfo(float).eps * scale
    rate = fit_geometric_rate(errors, floor)
    return ConvergenceReport(errors, norms, first, rate, overflow)


def spectrum(T: TruncatedOperator) -> np.ndarray:
    """Eigenvalues sorted by decreasing modulus (ties by argument)."""
    ev = np.linalg.eigvals(T.entries)
    order = np.lexsort((np.angle(ev), -np.abs(ev)))
    return ev[order]


def trust_floor(a: complex, N: int, scale: float = 1.0) -> float:
    """Modulus below which section eigenvalues are not reported as trusted."""
    return scale * abs(a) ** (N / 4)


def write_matrix(path, T: TruncatedOperator) -> None:
    """Binary dump: 8-byte magic, two little-endian uint64 (rows, cols),
    then row-major (re, im) float64 little-endian pairs."""
    A = np.ascontiguousarray(T.entries, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<QQ", *A.shape))
        fh.write(A.tobytes(order="C"))


def read_matrix(path) -> TruncatedOperator:
    data = Path(path).read_bytes()
    if data[:8] != DUMP_MAGIC:
        raise ValueError("not a matrix dump")
    rows, cols = struct.unpack("<QQ", data[8:24])
    A = np.frombuffer(data[24:], dtype="<c16").reshape(rows, cols)
    return TruncatedOperator(A.astype(complex), {"source": str(path)})
