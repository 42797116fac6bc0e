"""C0 semigroups and groups of weighted composition operators.

Two families are represented:

* ``WEIGHTED_CONTRACTIVE``: phi_t(z) = e^{lam t} z + C(e^{lam t} - 1), Re lam < 0,
  w_t = exp(p_t + q_t z + r_t z^2) with
  r_t = alpha_r (1 - e^{2 lam t}),
  q_t = 2 alpha_r C e^{lam t}(1 - e^{lam t}) + gamma (1 - e^{lam t}),
  p_t = -alpha_r C^2 (e^{lam t} - 1)^2 - gamma C (e^{lam t} - 1) + delta t.
* ``WEIGHTED_UNITARY``: Re lam = 0, w_t(z) = w_t(0) exp(conj(C)(e^{lam t} - 1) z),
  w_t(0) = e^{mu t} e^{|C|^2 (e^{lam t} - 1)}; defined for all real t.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .fock import FockVector, LogQuadWeight
from .matrices import (
    TruncatedOperator,
    derivative_matrix,
    operator_norm,
    shift_matrix,
    weighted_matrix,
)
from .symbols import AffineSymbol, classify_weighted_bounded, log_sup_M

GRID_T_MIN, GRID_T_MAX, GRID_POINTS = 1e-6, 1e3, 2000
RECHECK_FLOOR = 1e-9


class Variant(str, Enum):
    WEIGHTED_CONTRACTIVE = "WeightedContractive"
    WEIGHTED_UNITARY = "WeightedUnitary"


@dataclass(frozen=True)
class SemigroupSpec:
    variant: Variant
    lam: complex
    C: complex = 0j
    alpha_r: complex = 0j
    gamma: complex = 0j
    delta: complex = 0j
    mu: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("lam", "C", "alpha_r", "gamma", "delta", "mu"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if self.variant is Variant.WEIGHTED_CONTRACTIVE:
            if not self.lam.real < 0:
                raise ValueError("WeightedContractive needs Re lambda < 0")
            if self.mu != 0:
                raise ValueError("mu belongs to the WeightedUnitary family")
        else:
            if abs(self.lam.real) > 1e-14:
                raise ValueError("WeightedUnitary needs Re lambda = 0")
            object.__setattr__(self, "lam", complex(0.0, self.lam.imag))
            if self.alpha_r != 0 or self.gamma != 0 or self.delta != 0:
                raise ValueError("alpha_r, gamma, delta belong to the WeightedContractive family")

    @property
    def unweighted(self) -> bool:
        if self.variant is Variant.WEIGHTED_CONTRACTIVE:
            return self.alpha_r == 0 and self.gamma == 0 and self.delta == 0
        return self.C == 0 and self.mu == 0


def composition_semigroup(lam: complex, C: complex = 0j) -> SemigroupSpec:
    """Unweighted semigroup C_{phi_t}; Re lam = 0 is only bounded for C = 0."""
    lam, C = complex(lam), complex(C)
    if lam.real < 0:
        return SemigroupSpec(Variant.WEIGHTED_CONTRACTIVE, lam, C)
    if lam.real == 0:
        if C != 0:
            raise ValueError("Re lambda = 0 gives bounded composition operators only for C = 0")
        return SemigroupSpec(Variant.WEIGHTED_UNITARY, lam)
    raise ValueError("Re lambda > 0 does not give a bounded semigroup")


def _check_time(spec: SemigroupSpec, t: float):
    if t < 0 and spec.variant is Variant.WEIGHTED_CONTRACTIVE:
        raise ValueError("negative times are only defined for the unitary (group) family")


def flow_at(spec: SemigroupSpec, t: float) -> AffineSymbol:
    _check_time(spec, t)
    x = cmath.exp(spec.lam * t)
    em1 = np.expm1(spec.lam * t)
    return AffineSymbol(x, spec.C * em1)


def weight_at(spec: SemigroupSpec, t: float) -> LogQuadWeight:
    _check_time(spec, t)
    em1 = complex(np.expm1(spec.lam * t))  # e^{lam t} - 1
    x = 1 + em1
    C = spec.C
    if spec.variant is Variant.WEIGHTED_UNITARY:
        return LogQuadWeight(spec.mu * t + abs(C) ** 2 * em1, C.conjugate() * em1, 0)
    al = spec.alpha_r
    r = -al * em1 * (x + 1)  # alpha (1 - e^{2 lam t})
    q = -2 * al * C * x * em1 - spec.gamma * em1
    p = -al * C * C * em1 * em1 - spec.gamma * C * em1 + spec.delta * t
    return LogQuadWeight(p, q, r)


def operator_at(spec: SemigroupSpec, t: float, N: int) -> TruncatedOperator:
    return weighted_matrix(weight_at(spec, t), flow_at(spec, t), N)


@dataclass
class ValidityReport:
    valid: bool
    bound: float  # largest admissible |alpha_r|
    limit_small_t: float  # sup ratio as t -> 0+
    limit_large_t: float  # ratio as t -> infinity
    grid_sup: float
    grid_argsup: float
    violating_t: float | None = None
    detail: str = ""


def _ratio(lam: complex, t: float) -> float:
    """|1 - e^{2 lam t}| / (1 - e^{2 Re lam t})."""
    return abs(np.expm1(2 * lam * t)) / -np.expm1(2 * lam.real * t)


def validate_spec(spec: SemigroupSpec) -> ValidityReport:
    """Check |r_t| <= (1 - |a_t|^2)/2 for every t > 0."""
    if spec.variant is Variant.WEIGHTED_UNITARY:
        return ValidityReport(True, math.inf, 1.0, 1.0, 1.0, 0.0, detail="unitary family: r_t = 0")
    lam = spec.lam
    small = abs(lam) / abs(lam.real)
    large = 1.0
    ts = np.geomspace(GRID_T_MIN, GRID_T_MAX, GRID_POINTS)
    vals = np.array([_ratio(lam, t) for t in ts])
    i = int(np.argmax(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
    res = minimize_scalar(
        lambda s: -_ratio(lam, math.exp(s)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    grid_sup, grid_arg = vals[i], ts[i]
    if -res.fun > grid_sup:
        grid_sup, grid_arg = -res.fun, math.exp(res.x)
    sup_ratio = max(small, large, grid_sup)
    bound = 0.5 / sup_ratio
    a = abs(spec.alpha_r)
    tol = 1e-12 * max(1.0, bound)

    if a > bound + tol:
        # smallest grid time at which the constraint already fails
        bad = ts[a * vals > 0.5 + tol]
        viol = float(bad[0]) if bad.size else float(grid_arg)
        return ValidityReport(
            False, bound, small, large, grid_sup, grid_arg, viol,
            f"|alpha_r| = {a:.6g} > {bound:.6g}",
        )
    if a >= bound - tol and a > 0:
        # boundary: the sampled operators must satisfy the boundary boundedness test.
        # Only times with |a_t|^2 above RECHECK_FLOOR are representable: beyond
        # that r_t rounds onto 1/2 and a_t onto 0, which is the t -> infinity
        # limit already covered exactly above.
        t_max = math.log(RECHECK_FLOOR) / (2 * lam.real)
        sample = ts[ts <= t_max]
        for t in sample[:: max(1, sample.size // 200)]:
            v = classify_weighted_bounded(weight_at(spec, t), flow_at(spec, t))
            if not v.bounded:
                return ValidityReport(
                    False, bound, small, large, grid_sup, grid_arg, float(t),
                    f"boundary |alpha_r| but T_t unbounded: {v.detail}",
                )
        return ValidityReport(True, bound, small, large, grid_sup, grid_arg, detail="boundary case")
    return ValidityReport(True, bound, small, large, grid_sup, grid_arg, detail="interior")


def cocycle_residual(spec: SemigroupSpec, s: float, t: float) -> float:
    """Max residual of the coefficient identities of w_{t+s} = w_s (w_t o phi_s)."""
    ws, wt, wst = weight_at(spec, s), weight_at(spec, t), weight_at(spec, s + t)
    ph = flow_at(spec, s)
    a_s, b_s = ph.a, ph.b
    rp = wst.p - (ws.p + wt.p + wt.q * b_s + wt.r * b_s * b_s)
    rq = wst.q - (ws.q + wt.q * a_s + 2 * wt.r * a_s * b_s)
    rr = wst.r - (ws.r + a_s * a_s * wt.r)
    return float(max(abs(rp), abs(rq), abs(rr)))


def unitary_factorization_residual(spec: SemigroupSpec, s: float, t: float) -> float:
    """Relative residual of w_{t+s}(0) = w_s(0) w_t(0) exp(|C|^2 (e^{lam t}-1)(e^{lam s}-1))."""
    if spec.variant is not Variant.WEIGHTED_UNITARY:
        raise ValueError("needs the WeightedUnitary family")
    lhs = cmath.exp(weight_at(spec, s + t).p)
    rhs = (
        cmath.exp(weight_at(spec, s).p)
        * cmath.exp(weight_at(spec, t).p)
        * cmath.exp(abs(spec.C) ** 2 * np.expm1(spec.lam * t) * np.expm1(spec.lam * s))
    )
    return abs(lhs - rhs) / abs(rhs)


@dataclass(frozen=True)
class GeneratorData:
    """A f = lam (z + C) f' + (m0 + m1 z + m2 z^2) f."""

    G_linear: tuple[complex, complex]  # (lam, lam C): G(z) = lam z + lam C
    multiplier: tuple[complex, complex, complex]

    def matrix(self, N: int) -> np.ndarray:
        Z = shift_matrix(N)
        D = derivative_matrix(N)
        g1, g0 = self.G_linear
        m0, m1, m2 = self.multiplier
        I = np.eye(N, dtype=complex)
        return (g1 * Z + g0 * I) @ D + m0 * I + m1 * Z + m2 * (Z @ Z)


def generator(spec: SemigroupSpec) -> GeneratorData:
    lam, C = spec.lam, spec.C
    if spec.variant is Variant.WEIGHTED_UNITARY:
        mult = (spec.mu + abs(C) ** 2 * lam, C.conjugate() * lam, 0j)
    else:
        al, ga, de = spec.alpha_r, spec.gamma, spec.delta
        mult = (de - ga * C * lam, -(2 * al * C + ga) * lam, -2 * al * lam)
    return GeneratorData((lam, lam * C), mult)


def generator_fd_errors(
    spec: SemigroupSpec, hs: Sequence[float], N: int = 64, basis: Sequence[int] = range(6)
) -> np.ndarray:
    """errors[i, j] = ||(T_h f - f)/h - A f|| for h = hs[i], f = e_{basis[j]}."""
    A = generator(spec).matrix(N)
    cols = list(basis)
    out = np.empty((len(hs), len(cols)))
    for i, h in enumerate(hs):
        if h < 1e-5:
            raise ValueError("forward differences below h = 1e-5 are roundoff dominated")
        T = operator_at(spec, h, N).entries
        for j, n in enumerate(cols):
            fd = (T[:, n] - (np.arange(N) == n)) / h
            out[i, j] = np.linalg.norm(fd - A[:, n])
    return out


def richardson_errors(
    spec: SemigroupSpec, hs: Sequence[float], N: int = 64, basis: Sequence[int] = range(6)
) -> np.ndarray:
    """Same as `generator_fd_errors` for the extrapolant 2 D(h/2) - D(h)."""
    A = generator(spec).matrix(N)
    I = np.eye(N, dtype=complex)
    cols = list(basis)
    out = np.empty((len(hs), len(cols)))
    for i, h in enumerate(hs):
        D1 = (operator_at(spec, h, N).entries - I) / h
        D2 = (operator_at(spec, h / 2, N).entries - I) / (h / 2)
        R = 2 * D2 - D1
        for j, n in enumerate(cols):
            out[i, j] = np.linalg.norm(R[:, n] - A[:, n])
    return out


class Admissibility(str, Enum):
    ADMISSIBLE_CONTRACTIVE = "AdmissibleLeftHalfPlane"
    ADMISSIBLE_ROTATION = "AdmissibleImaginaryAxis"
    INADMISSIBLE = "Inadmissible"


@dataclass(frozen=True)
class GeneratorVerdict:
    tag: Admissibility
    reason: str
    rule: str = "classify_generator_flow"

    @property
    def admissible(self) -> bool:
        return self.tag is not Admissibility.INADMISSIBLE


def _trim(coeffs: Sequence[complex]) -> list[complex]:
    c = [complex(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c or [0j]


def classify_generator_flow(G: Sequence[complex]) -> GeneratorVerdict:
    """Admissibility of f -> G f' for G = sum_k G[k] z^k.

    Admissible iff G(z) = a z + b with Re a < 0, or Re a = 0 and b = 0.
    """
    c = _trim(G)
    if len(c) > 2:
        return GeneratorVerdict(
            Admissibility.INADMISSIBLE, f"degree {len(c) - 1} > 1", "classify_generator_flow:degree"
        )
    b = c[0]
    a = c[1] if len(c) == 2 else 0j
    if a.real < 0:
        return GeneratorVerdict(
            Admissibility.ADMISSIBLE_CONTRACTIVE, "Re a < 0", "classify_generator_flow:left_half_plane"
        )
    if a.real == 0 and b == 0:
        return GeneratorVerdict(
            Admissibility.ADMISSIBLE_ROTATION, "Re a = 0 and b = 0", "classify_generator_flow:imaginary_axis"
        )
    if a.real == 0:
        return GeneratorVerdict(
            Admissibility.INADMISSIBLE, "Re a = 0 requires b = 0", "classify_generator_flow:translation"
        )
    return GeneratorVerdict(Admissibility.INADMISSIBLE, "Re a > 0", "classify_generator_flow:expanding")


@dataclass(frozen=True)
class Sector:
    theta_max: float
    attained: bool


def analytic_sector(G: Sequence[complex]) -> Sector:
    """Supremum of theta with Re(e^{+-i theta} a) <= 0 for G(z) = a z + b."""
    v = classify_generator_flow(G)
    if not v.admissible:
        raise ValueError(f"generator not admissible: {v.reason}")
    c = _trim(G)
    a = c[1] if len(c) == 2 else 0j
    b = c[0]
    if a.real == 0:
        return Sector(0.0, False)
    theta = math.pi / 2 - abs(cmath.phase(-a))
    # at theta_max one of Re(e^{+-i theta} a) vanishes, which needs b = 0;
    # theta = pi/2 is outside the open range in any case
    attained = b == 0 and theta < math.pi / 2
    return Sector(theta, attained)


def generator_matrix(G: Sequence[complex], N: int) -> np.ndarray:
    """Section of f -> G f' for polynomial G."""
    Z = shift_matrix(N)
    D = derivative_matrix(N)
    out = np.zeros((N, N), dtype=complex)
    Zk = np.eye(N, dtype=complex)
    for g in _trim(G):
        out += g * Zk
        Zk = Zk @ Z
    return out @ D


def numerical_range_samples(
    G: Sequence[complex], N: int, probes: Sequence[FockVector]
) -> list[complex]:
    """<A_N f, f> / ||f||^2 for each probe f, with A f = G f'."""
    A = generator_matrix(G, N)
    out = []
    for f in probes:
        c = f.padded(N)
        out.append(complex(np.vdot(c, A @ c) / np.vdot(c, c).real))
    return out


def designed_probe(n: int, m: int, omega: complex = 1.0, N: int | None = None) -> FockVector:
    """f = n^{m/2} omega z^n + z^{n+m}, scaled by 1/sqrt((n+m)!).

    With G = sum g_k z^k the real part of <G f', f>/||f||^2 picks up
    |g_{m+1}| n^{m/2+1} growth when omega aligns with conj(g_{m+1}).
    """
    from .fock import log_basis_norm

    N = N or n + m + 2
    c = np.zeros(N, dtype=complex)
    c[n] = n ** (m / 2) * omega * math.exp(log_basis_norm(n) - log_basis_norm(n + m))
    c[n + m] = 1.0
    return FockVector(c)


def range_growth(G: Sequence[complex], ns: Sequence[int], m: int) -> tuple[np.ndarray, float]:
    """Re <A f, f>/||f||^2 along the designed probes and the log-log slope against n."""
    c = _trim(G)
    g = c[m + 1] if m + 1 < len(c) else 0j
    omega = g.conjugate() / abs(g) if g != 0 else 1.0
    vals = []
    for n in ns:
        N = n + m + 2
        vals.append(numerical_range_samples(G, N, [designed_probe(n, m, omega, N)])[0].real)
    vals = np.array(vals)
    slope = float(np.polyfit(np.log(ns), np.log(vals), 1)[0]) if np.all(vals > 0) else math.nan
    return vals, slope


@dataclass
class QuasicontractivityReport:
    t_grid: list[float]
    section_norms: list[float]
    omega: float
    lower_closed_form: list[float]  # ln sqrt(M_t) / t
    upper_closed_form: list[float]  # ln(sqrt(M_t)/|a_t|) / t


def quasicontractivity_estimate(
    spec: SemigroupSpec, t_grid: Sequence[float], N: int = 64
) -> QuasicontractivityReport:
    norms, lo, hi, rates = [], [], [], []
    for t in t_grid:
        if t <= 0:
            raise ValueError("t_grid must be positive")
        w, ph = weight_at(spec, t), flow_at(spec, t)
        nrm = operator_norm(weighted_matrix(w, ph, N))
        norms.append(nrm)
        rates.append(math.log(nrm) / t)
        lm = 0.5 * log_sup_M(w, ph)
        lo.append(lm / t)
        hi.append((lm - math.log(abs(ph.a))) / t)
    return QuasicontractivityReport(list(t_grid), norms, max(rates), lo, hi)


@dataclass
class GroupCheck:
    t: float
    residual: float
    closed_form_residual: float


def group_check(spec: SemigroupSpec, t: float, N: int = 64) -> GroupCheck:
    """Residual of T_{-t} T_t = Id on e_0 .. e_{N/4}."""
    if spec.variant is not Variant.WEIGHTED_UNITARY:
        raise ValueError("contractive semigroups have no bounded inverses")
    Tp = operator_at(spec, t, N).entries
    Tm = operator_at(spec, -t, N).entries
    k = N // 4 + 1
    R = (Tm @ Tp)[:, :k] - np.eye(N, dtype=complex)[:, :k]
    residual = float(np.max(np.linalg.norm(R, axis=0)))
    b_t = flow_at(spec, t).b
    prod = cmath.exp(weight_at(spec, -t).p + weight_at(spec, t).p)
    cf = abs(prod - math.exp(-abs(b_t) ** 2))
    return GroupCheck(t, residual, cf)


def sample_spec(rng: np.random.Generator, variant: Variant | str) -> SemigroupSpec:
    """Random valid spec with O(1) parameters."""
    variant = Variant(variant)

    def cplx(scale=1.0):
        return complex(*rng.normal(scale=scale, size=2))

    if variant is Variant.WEIGHTED_UNITARY:
        return SemigroupSpec(variant, 1j * rng.uniform(-2, 2), cplx(), mu=cplx(0.5))
    lam = complex(-rng.uniform(0.1, 1.5), rng.uniform(-1.5, 1.5))
    bound = abs(lam.real) / (2 * abs(lam))
    al = bound * rng.uniform(0, 1) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    return SemigroupSpec(variant, lam, cplx(0.7), al, cplx(0.7), cplx(0.7))
