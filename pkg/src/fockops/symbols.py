"""Closed-form classification of (weighted) composition operators on F^nu.

Symbols are affine maps phi(z) = a z + b and log-quadratic weights
w(z) = exp(p + q z + r z^2).  Every verdict carries a machine-readable rule id
naming the operation and branch that produced it.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fock import (
    LogQuadWeight,
    gaussian_norm_logquad,
    maximize_quadratic,
)

# Tolerance for the equality cases |a| = 1, |r| = beta/2, q = -conj(b) a, ...
EQ_TOL = 1e-12
UNIT_CIRCLE_TOL = 1e-12
# iterate_symbol accumulates the geometric sums directly up to this n
DIRECT_SUM_MAX = 4096


class NotInvertible(ValueError):
    pass


@dataclass(frozen=True)
class AffineSymbol:
    """phi(z) = a z + b."""

    a: complex
    b: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))

    @property
    def beta(self) -> float:
        return 1.0 - abs(self.a) ** 2

    @property
    def alpha(self) -> complex:
        return denjoy_wolff(self)

    def __call__(self, z):
        return self.a * z + self.b

    def then(self, other: "AffineSymbol") -> "AffineSymbol":
        """other o self, i.e. z -> other(self(z))."""
        return AffineSymbol(other.a * self.a, other.a * self.b + other.b)

    def inverse(self) -> "AffineSymbol":
        if self.a == 0:
            raise ZeroDivisionError("constant symbol has no inverse")
        return AffineSymbol(1 / self.a, -self.b / self.a)


def _is_unimodular(a: complex) -> bool:
    return abs(abs(a) - 1.0) <= EQ_TOL


class Boundedness(str, Enum):
    UNBOUNDED = "Unbounded"
    BOUNDED_COMPACT = "BoundedCompact"
    BOUNDED_NONCOMPACT = "BoundedNonCompact"


class Power(str, Enum):
    POWER_BOUNDED = "PowerBounded"
    NOT_POWER_BOUNDED = "NotPowerBounded"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class BoundednessVerdict:
    tag: Boundedness
    detail: str
    rule: str

    @property
    def bounded(self) -> bool:
        return self.tag is not Boundedness.UNBOUNDED


@dataclass(frozen=True)
class PowerVerdict:
    """`margin` > 0 means the power-bounded condition holds with that slack.

    For |a| = 1 it is -|b|^2/2 - Re p; for |a| < 1 it is ln|a| - S with
    S = ln|w(alpha)| the growth statistic (-S when a = 0).
    """

    tag: Power
    margin: float
    rule: str
    detail: str = ""
    statistic: float = math.nan


def classify_composition(phi: AffineSymbol) -> BoundednessVerdict:
    a, b = phi.a, phi.b
    if abs(a) < 1 and not _is_unimodular(a):
        return BoundednessVerdict(
            Boundedness.BOUNDED_COMPACT, "|a| < 1", "classify_composition:contraction"
        )
    if _is_unimodular(a) and b == 0:
        return BoundednessVerdict(
            Boundedness.BOUNDED_NONCOMPACT, "|a| = 1 and b = 0", "classify_composition:rotation"
        )
    return BoundednessVerdict(
        Boundedness.UNBOUNDED,
        "neither |a| < 1 nor (|a| = 1, b = 0)",
        "classify_composition:unbounded",
    )


@dataclass(frozen=True)
class CompositionNorm:
    value: float
    alternate_normalization: float
    note: str = (
        "value uses the Gaussian weight exp(-|z|^2); "
        "alternate_normalization is exp(|b|^2/(4 beta)), the exp(-|z|^2/2) convention"
    )


def composition_norm_exact(phi: AffineSymbol) -> CompositionNorm:
    """Exact norm exp(|b|^2 / (2 beta)) of C_phi on F^2 for |a| < 1."""
    if not abs(phi.a) < 1 or _is_unimodular(phi.a):
        raise ValueError("composition_norm_exact needs |a| < 1")
    x = abs(phi.b) ** 2 / phi.beta
    return CompositionNorm(math.exp(0.5 * x), math.exp(0.25 * x))


def log_sup_M(w: LogQuadWeight, phi: AffineSymbol) -> float:
    """ln sup_z |w(z)|^2 exp(|phi(z)|^2 - |z|^2); +inf when unbounded."""
    a, b = phi.a, phi.b
    beta = phi.beta
    if abs(beta) <= EQ_TOL:
        beta = 0.0
    t = w.q + b.conjugate() * a
    r = w.r
    Q = np.array([[2 * r.real - beta, -2 * r.imag], [-2 * r.imag, -2 * r.real - beta]])
    g = 2.0 * np.array([t.real, -t.imag])
    c = 2.0 * w.p.real + abs(b) ** 2
    return maximize_quadratic(Q, g, c)


def sup_M(w: LogQuadWeight, phi: AffineSymbol) -> float:
    """M(w, phi) = sup_z |w(z)|^2 exp(|phi(z)|^2 - |z|^2).

    Saturates to +inf when the finite supremum exceeds the double range;
    use `log_sup_M` to tell the two apart.
    """
    v = log_sup_M(w, phi)
    return math.inf if v > 709.0 else math.exp(v)


def classify_weighted_bounded(w: LogQuadWeight, phi: AffineSymbol) -> BoundednessVerdict:
    a, b = phi.a, phi.b
    rule = "classify_weighted_bounded"
    if _is_unimodular(a):
        forced_q = -b.conjugate() * a
        if abs(w.r) <= EQ_TOL and abs(w.q - forced_q) <= EQ_TOL * max(1.0, abs(forced_q)):
            return BoundednessVerdict(
                Boundedness.BOUNDED_NONCOMPACT,
                "|a| = 1 with w(z) = w(0) exp(-conj(b) a z)",
                f"{rule}:unimodular_forced_weight",
            )
        return BoundednessVerdict(
            Boundedness.UNBOUNDED,
            "|a| = 1 requires r = 0 and q = -conj(b) a",
            f"{rule}:unimodular_weight_violated",
        )
    if abs(a) > 1:
        return BoundednessVerdict(Boundedness.UNBOUNDED, "|a| > 1", f"{rule}:expanding")

    beta = phi.beta
    half = beta / 2
    if abs(w.r) < half - EQ_TOL:
        return BoundednessVerdict(
            Boundedness.BOUNDED_COMPACT, f"|r| = {abs(w.r):.6g} < beta/2 = {half:.6g}", f"{rule}:interior"
        )
    if abs(w.r) > half + EQ_TOL:
        return BoundednessVerdict(
            Boundedness.UNBOUNDED, f"|r| = {abs(w.r):.6g} > beta/2 = {half:.6g}", f"{rule}:exterior"
        )
    t = w.q + b.conjugate() * a
    scale = max(1.0, abs(w.q), abs(b))
    if abs(t) <= EQ_TOL * scale:
        ok, why = True, "|r| = beta/2 and t = q + conj(b) a = 0"
    else:
        target = -half * t * t / abs(t) ** 2
        ok = abs(w.r - target) <= EQ_TOL * max(1.0, half) * 10
        why = "|r| = beta/2 and r = -(beta/2) t^2/|t|^2" if ok else "|r| = beta/2 but t-condition fails"
    if ok and not math.isfinite(gaussian_norm_logquad(w)):
        # a = 0: the operator is f -> f(b) w, bounded only when w itself is in F^2
        return BoundednessVerdict(
            Boundedness.UNBOUNDED, why + ", but w is not in F^2", f"{rule}:weight_not_in_space"
        )
    if ok:
        return BoundednessVerdict(Boundedness.BOUNDED_NONCOMPACT, why, f"{rule}:boundary")
    return BoundednessVerdict(Boundedness.UNBOUNDED, why, f"{rule}:boundary_violated")


def _growth_statistic(w: LogQuadWeight, phi: AffineSymbol) -> float:
    a, b = phi.a, phi.b
    S = w.p.real + (w.q * b / (1 - a)).real
    if w.r != 0:
        S += (w.r * b * b / (1 - a) ** 2).real
    return S


def classify_power_bounded(w: LogQuadWeight, phi: AffineSymbol) -> PowerVerdict:
    bounded = classify_weighted_bounded(w, phi)
    if not bounded.bounded:
        raise ValueError(f"operator is unbounded ({bounded.detail})")
    a, b = phi.a, phi.b
    rule = "classify_power_bounded"

    if _is_unimodular(a):
        margin = -0.5 * abs(b) ** 2 - w.p.real
        if margin >= -EQ_TOL:
            return PowerVerdict(
                Power.POWER_BOUNDED, margin, f"{rule}:unimodular", "|w(0)| <= exp(-|b|^2/2)"
            )
        return PowerVerdict(
            Power.NOT_POWER_BOUNDED, margin, f"{rule}:unimodular", "|w(0)| > exp(-|b|^2/2)"
        )

    S = _growth_statistic(w, phi)
    case = "case1" if w.r == 0 else "case2"
    if w.is_one():
        # C_phi^n = C_{phi_n} with ||C_{phi_n}|| = exp(|b_n|^2 / (2 beta_n)) bounded in n
        return PowerVerdict(
            Power.POWER_BOUNDED, math.inf, f"{rule}:unweighted_contraction", "w = 1, |a| < 1", S
        )
    if a == 0:
        # rank one: W^n f = w(b)^(n-1) f(b) w
        if S <= EQ_TOL:
            return PowerVerdict(Power.POWER_BOUNDED, -S, f"{rule}:rank_one", "|w(b)| <= 1", S)
        return PowerVerdict(Power.NOT_POWER_BOUNDED, -S, f"{rule}:rank_one", "|w(b)| > 1", S)

    margin = math.log(abs(a)) - S
    if S > 0:
        return PowerVerdict(Power.NOT_POWER_BOUNDED, margin, f"{rule}:{case}", f"S = {S:.6g} > 0", S)
    if margin > 0:
        return PowerVerdict(
            Power.POWER_BOUNDED, margin, f"{rule}:{case}", f"S - ln|a| = {-margin:.6g} < 0", S
        )
    return PowerVerdict(
        Power.INDETERMINATE,
        margin,
        f"{rule}:{case}_gap",
        f"ln|a| <= S = {S:.6g} <= 0: neither sufficient condition applies",
        S,
    )


def _geom(x: complex, n: int) -> complex:
    """sum_{k<n} x^k."""
    if x == 1:
        return complex(n)
    L = cmath.log(x) if x != 0 else None
    if L is None:
        return 1.0 + 0j if n >= 1 else 0j
    return -np.expm1(n * L) / (1 - x)


def iterate_symbol(
    w: LogQuadWeight, phi: AffineSymbol, n: int
) -> tuple[LogQuadWeight, AffineSymbol]:
    """Symbols (w_n, phi_n) with W_{w,phi}^n = W_{w_n, phi_n}.

    w_n(z) = prod_{k<n} w(phi^k(z)), phi^k(z) = a^k z + b s_k and
    s_k = sum_{j<k} a^j.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = phi.a, phi.b
    p, q, r = w.p, w.q, w.r
    if a == 1:
        sum_s = n * (n - 1) / 2
        sum_s2 = (n - 1) * n * (2 * n - 1) / 6
        sum_as = sum_s
        sum_a, sum_a2 = complex(n), complex(n)
        a_n, b_n = 1.0 + 0j, n * b
    elif n <= DIRECT_SUM_MAX:
        # the closed forms below cancel like eps / |1 - a|^2 near a = 1
        s_k, a_k = 0j, 1.0 + 0j
        sum_s = sum_s2 = sum_as = sum_a = sum_a2 = 0j
        for _ in range(n):
            sum_s += s_k
            sum_s2 += s_k * s_k
            sum_as += a_k * s_k
            sum_a += a_k
            sum_a2 += a_k * a_k
            s_k = 1 + a * s_k
            a_k = a_k * a
        a_n, b_n = a**n, b * s_k
    else:
        g1 = _geom(a, n)
        g2 = _geom(a * a, n)
        sum_a, sum_a2 = g1, g2
        sum_s = (n - g1) / (1 - a)
        sum_as = (g1 - g2) / (1 - a)
        sum_s2 = (n - 2 * g1 + g2) / (1 - a) ** 2
        a_n, b_n = a**n, b * g1
    if n == 1:
        return w, phi
    P = n * p + q * b * sum_s + r * b * b * sum_s2
    Qc = q * sum_a + 2 * r * b * sum_as
    R = r * sum_a2
    return LogQuadWeight(P, Qc, R), AffineSymbol(a_n, b_n)


def compose_pairs(
    first: tuple[LogQuadWeight, AffineSymbol], second: tuple[LogQuadWeight, AffineSymbol]
) -> tuple[LogQuadWeight, AffineSymbol]:
    """Symbols of the product W_first W_second = W_{w1 (w2 o phi1), phi2 o phi1}."""
    w1, phi1 = first
    w2, phi2 = second
    return w1 * w2.compose_affine(phi1.a, phi1.b), phi1.then(phi2)


def denjoy_wolff(phi: AffineSymbol) -> complex:
    """Fixed point b / (1 - a) of phi."""
    if phi.a == 1:
        if phi.b != 0:
            raise ValueError("a = 1, b != 0: translation has no fixed point")
        warnings.warn("identity symbol: every point is fixed, returning 0", stacklevel=2)
        return 0j
    return phi.b / (1 - phi.a)


def invert_weighted(
    w: LogQuadWeight, phi: AffineSymbol
) -> tuple[LogQuadWeight, AffineSymbol]:
    """(v, psi) with W_{v,psi} W_{w,phi} = Id."""
    a, b = phi.a, phi.b
    if not _is_unimodular(a):
        raise NotInvertible(f"|a| = {abs(a):.6g} != 1")
    forced_q = -b.conjugate() * a
    if abs(w.r) > EQ_TOL or abs(w.q - forced_q) > EQ_TOL * max(1.0, abs(forced_q)):
        raise NotInvertible("weight is not of the form w(0) exp(-conj(b) a z)")
    psi = AffineSymbol(1 / a, -b / a)
    v = LogQuadWeight(-w.p - abs(b) ** 2, b.conjugate(), 0)
    return v, psi


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue lam = a^M w(alpha) with f(alpha + z) = z^M exp(c1 z + c2 z^2)."""

    M: int
    lam: complex
    alpha: complex
    c1: complex
    c2: complex
    in_space: bool

    def exponent(self) -> LogQuadWeight:
        """exp-part of f as a log-quadratic in the original variable."""
        al, c1, c2 = self.alpha, self.c1, self.c2
        return LogQuadWeight(-c1 * al + c2 * al * al, c1 - 2 * c2 * al, c2)

    def poly_factor(self) -> np.ndarray:
        """Taylor coefficients of (z - alpha)^M."""
        return np.polynomial.polynomial.polyfromroots([self.alpha] * self.M) if self.M else np.ones(1)

    def __call__(self, z):
        u = np.asarray(z) - self.alpha
        return u**self.M * np.exp(self.c1 * u + self.c2 * u * u)


def eigensystem(w: LogQuadWeight, phi: AffineSymbol, M_max: int) -> list[EigenPair]:
    a = phi.a
    if not 0 < abs(a) < 1 or _is_unimodular(a):
        raise ValueError("eigensystem needs 0 < |a| < 1")
    verdict = classify_weighted_bounded(w, phi)
    if verdict.tag is not Boundedness.BOUNDED_COMPACT:
        raise ValueError(f"eigensystem needs a compact operator, got {verdict.tag.value}")
    al = denjoy_wolff(phi)
    d = w.recentered(al)
    c1 = d.q / (1 - a)
    c2 = d.r / (1 - a * a)
    pairs = []
    for M in range(M_max + 1):
        pair = EigenPair(M, a**M * cmath.exp(d.p), al, c1, c2, True)
        norm = gaussian_norm_logquad(pair.exponent(), pair.poly_factor())
        pairs.append(
            EigenPair(M, pair.lam, al, c1, c2, math.isfinite(norm))
        )
    return pairs


def eigen_residual(w: LogQuadWeight, phi: AffineSymbol, pair: EigenPair, z) -> float:
    """max |w(z) f(phi(z)) - lam f(z)| / (1 + |f(z)|) over the sample points z."""
    z = np.asarray(z, dtype=complex)
    fz = pair(z)
    lhs = w(z) * pair(phi(z))
    return float(np.max(np.abs(lhs - pair.lam * fz) / (1 + np.abs(fz))))


class LimitKind(str, Enum):
    RANK_ONE = "RankOne"
    ZERO = "Zero"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class IterateLimit:
    """Norm limit of W^n.

    RANK_ONE: f -> f(alpha) f0 with f0 = exp(fixed_vector) and f0(alpha) = 1
    (f0 = 1 exactly when w = 1).
    """

    kind: LimitKind
    alpha: complex
    offending_M: int | None = None
    fixed_vector: LogQuadWeight | None = None
    power_bounded_certified: bool = True
    rule: str = "iterate_limit"


def iterate_limit(w: LogQuadWeight, phi: AffineSymbol) -> IterateLimit:
    a = phi.a
    if not 0 < abs(a) < 1 or _is_unimodular(a):
        raise ValueError("iterate_limit needs 0 < |a| < 1")
    bv = classify_weighted_bounded(w, phi)
    if bv.tag is not Boundedness.BOUNDED_COMPACT:
        raise ValueError(f"iterate_limit needs a compact operator, got {bv.tag.value}")
    pv = classify_power_bounded(w, phi)
    if pv.tag is Power.NOT_POWER_BOUNDED:
        raise ValueError("iterate_limit needs a power-bounded operator")
    certified = pv.tag is Power.POWER_BOUNDED
    al = denjoy_wolff(phi)
    w_al = complex(w(al))

    M = 0
    while True:
        lam = a**M * w_al
        if abs(lam) < 1 - UNIT_CIRCLE_TOL:
            break
        if abs(abs(lam) - 1) <= UNIT_CIRCLE_TOL and abs(lam - 1) > UNIT_CIRCLE_TOL:
            return IterateLimit(
                LimitKind.NOT_APPLICABLE, al, M, None, certified, "iterate_limit:peripheral_eigenvalue"
            )
        M += 1

    if abs(w_al - 1) <= UNIT_CIRCLE_TOL:
        f0 = eigensystem(w, phi, 0)[0].exponent()
        return IterateLimit(LimitKind.RANK_ONE, al, None, f0, certified, "iterate_limit:fixed_point_value")
    return IterateLimit(LimitKind.ZERO, al, None, None, certified, "iterate_limit:zero")


@dataclass(frozen=True)
class Conjugation:
    """W_{w,phi} = U^{-1} W_{w~, a z} U with U = W_{u, z + alpha} unitary."""

    weight: LogQuadWeight
    symbol: AffineSymbol
    conjugator: tuple[LogQuadWeight, AffineSymbol]
    conjugator_inverse: tuple[LogQuadWeight, AffineSymbol]


def translation_unitary(alpha: complex) -> tuple[LogQuadWeight, AffineSymbol]:
    """Symbols of f -> exp(-conj(alpha) z - |alpha|^2/2) f(z + alpha)."""
    alpha = complex(alpha)
    return LogQuadWeight(-0.5 * abs(alpha) ** 2, -alpha.conjugate(), 0), AffineSymbol(1, alpha)


def weyl_conjugate(w: LogQuadWeight, phi: AffineSymbol) -> Conjugation:
    if phi.a == 1:
        raise ValueError("weyl_conjugate needs a != 1")
    al = denjoy_wolff(phi)
    U = translation_unitary(al)
    U_inv = translation_unitary(-al)
    tw, tphi = compose_pairs(compose_pairs(U, (w, phi)), U_inv)
    # phi~ = a z exactly; the computed translation part is roundoff
    return Conjugation(tw, AffineSymbol(phi.a, 0), U, U_inv)
