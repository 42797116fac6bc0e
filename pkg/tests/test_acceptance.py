"""Acceptance suite: one check per numbered criterion, each reporting PASS or FAIL.

Run under pytest (a summary block is printed at the end of the session) or
directly with ``python3 tests/test_acceptance.py``.  Tolerances are the ones
fixed by the acceptance criteria and are not tuned here.
"""
from __future__ import annotations

import cmath
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from fockops.cli import main as cli_main
from fockops.config import parse_config
from fockops.fock import LogQuadWeight, fock_to_taylor, taylor_to_fock
from fockops.matrices import (
    composition_matrix,
    operator_norm,
    power_convergence,
    rank_one_projection,
    spectrum,
    weighted_matrix,
)
from fockops.report import emit
from fockops.runner import run
from fockops.semigroup import (
    SemigroupSpec,
    Variant,
    analytic_sector,
    cocycle_residual,
    generator_fd_errors,
    group_check,
    range_growth,
    sample_spec,
    unitary_factorization_residual,
)
from fockops.symbols import (
    AffineSymbol,
    Boundedness,
    Power,
    classify_power_bounded,
    classify_weighted_bounded,
    composition_norm_exact,
    invert_weighted,
    iterate_symbol,
    sup_M,
)

RESULTS: dict[int, tuple[bool, str]] = {}

TITLES = {
    1: "norm oracle and normalization audit",
    2: "iterate convergence",
    3: "eigenvalue match",
    4: "power-boundedness boundary",
    5: "norm sandwich",
    6: "cocycle identities",
    7: "generator consistency",
    8: "inversion and group",
    9: "analytic sector",
    10: "numerical-range growth",
    11: "property suites",
}


def line(k: int) -> str:
    ok, detail = RESULTS[k]
    return f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d} ({TITLES[k]}): {detail}"


# --- criteria ----------------------------------------------------------------


def crit1():
    n20 = operator_norm(composition_matrix(AffineSymbol(0, 1), 20))
    err0 = abs(n20 - math.sqrt(math.e))
    phi = AffineSymbol(0.5, 1)
    ladder = [operator_norm(composition_matrix(phi, N)) for N in (16, 32, 64, 128)]
    exact = math.exp(0.5 * 1 / 0.75)
    printed = math.exp(0.25 * 1 / 0.75)
    monotone = all(b >= a - 1e-15 for a, b in zip(ladder, ladder[1:]))
    final = abs(ladder[-1] - exact)
    rel_printed = abs(ladder[-1] - printed) / ladder[-1]
    rep = run(parse_config("kind: norm\nsymbol: {a: 0.5, b: 1}\ncontrols: {N_ladder: [16, 32, 64, 128]}\n"))
    flagged = rep.values["normalization_audit"]["flagged"]
    ok = err0 < 1e-12 and monotone and final < 1e-3 and rel_printed > 0.2 and flagged
    cn = composition_norm_exact(phi)
    ok = ok and abs(cn.value - exact) < 1e-15
    return ok, (
        f"|N=20 - sqrt(e)| = {err0:.2e}; ladder monotone={monotone}, final error {final:.2e}; "
        f"differs from exp(1/4 ...) by {rel_printed:.1%}; audit flagged={flagged}"
    )


def crit2():
    T = composition_matrix(AffineSymbol(0.5, 1), 64)
    rep = power_convergence(T, rank_one_projection(2, 64), 80, 1e-6)
    ok1 = rep.first_below is not None and rep.first_below <= 80 and 0.4 <= rep.rate <= 0.6
    R = composition_matrix(AffineSymbol(1j, 0), 64)
    rot = power_convergence(R, rank_one_projection(0, 64), 80, 1e-6)
    dev = max(abs(x - 1) for x in rot.power_norms)
    # the power report for the rotation must not claim convergence
    rr = run(parse_config("kind: power\nsymbol: {a: [0, 1], b: 0}\ncontrols: {N: 64, n_max: 80}\n"))
    ok2 = dev <= 1e-12 and not rr.values["converged"] and len(rot.power_norms) == 80
    return ok1 and ok2, (
        f"first n below 1e-6: {rep.first_below}, fitted rate {rep.rate:.3f}; "
        f"rotation max |norm - 1| = {dev:.1e}, converged reported={rr.values['converged']}"
    )


def crit3():
    ev = spectrum(weighted_matrix(LogQuadWeight(q=0.1), AffineSymbol(0.5, 1), 80))[:8]
    target = 0.5 ** np.arange(8) * math.exp(0.2)
    rel = np.abs(ev - target) / target
    return bool(rel.max() < 1e-6), f"max relative error over M=0..7: {rel.max():.2e}"


def crit4():
    phi = AffineSymbol(1, 1)
    w0 = LogQuadWeight(-0.5, -1, 0)
    flat = all(sup_M(*iterate_symbol(w0, phi, n)) == 1.0 for n in range(1, 51))
    w1 = LogQuadWeight(-0.4, -1, 0)
    rel = max(abs(sup_M(*iterate_symbol(w1, phi, n)) / math.exp(0.2 * n) - 1) for n in range(1, 51))
    v = classify_power_bounded(w1, phi)
    ok = flat and rel < 1e-10 and v.tag is Power.NOT_POWER_BOUNDED
    return ok, f"sup_M == 1 exactly for n<=50: {flat}; growth e^(0.2n) max rel dev {rel:.1e}; verdict {v.tag.value}"


def _random_compact_pair(rng):
    a = rng.uniform(0.1, 0.9) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    phi = AffineSymbol(a, complex(*rng.normal(scale=0.5, size=2)))
    r = rng.uniform(0, 0.4) * phi.beta / 2 * cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    p, q = (complex(*rng.normal(scale=0.3, size=2)) for _ in range(2))
    return LogQuadWeight(p, q, r), phi


def crit5():
    rng = np.random.default_rng(2024)
    worst_lo = worst_hi = -math.inf
    ok = True
    for _ in range(50):
        w, phi = _random_compact_pair(rng)
        assert classify_weighted_bounded(w, phi).tag is Boundedness.BOUNDED_COMPACT
        m = math.sqrt(sup_M(w, phi))
        nrm = operator_norm(weighted_matrix(w, phi, 128))
        worst_lo = max(worst_lo, m - nrm)
        worst_hi = max(worst_hi, nrm - m / abs(phi.a))
        ok &= m <= nrm + 1e-6 and nrm <= m / abs(phi.a) + 1e-6
    return ok, f"max (sqrt M - norm) = {worst_lo:.2e}, max (norm - sqrt M/|a|) = {worst_hi:.2e}"


def crit6():
    rng = np.random.default_rng(6)
    worst = worst_u = 0.0
    for k in range(1000):
        spec = sample_spec(rng, Variant.WEIGHTED_CONTRACTIVE if k % 2 else Variant.WEIGHTED_UNITARY)
        s, t = rng.uniform(0, 3, size=2)
        worst = max(worst, cocycle_residual(spec, s, t))
        if spec.variant is Variant.WEIGHTED_UNITARY:
            worst_u = max(worst_u, unitary_factorization_residual(spec, s, t))
    return worst < 1e-10 and worst_u < 1e-12, (
        f"max coefficient residual {worst:.1e}; max w_(t+s)(0) factorization residual {worst_u:.1e}"
    )


def crit7():
    rng = np.random.default_rng(7)
    lo, hi = math.inf, -math.inf
    for k in range(10):
        spec = sample_spec(rng, Variant.WEIGHTED_CONTRACTIVE if k % 2 else Variant.WEIGHTED_UNITARY)
        e = generator_fd_errors(spec, [1e-2, 1e-3, 1e-4], N=64, basis=range(6))
        ratios = e[:-1] / e[1:]
        lo, hi = min(lo, ratios.min()), max(hi, ratios.max())
    return 8 <= lo and hi <= 12, f"per-decade error ratios in [{lo:.3f}, {hi:.3f}] (allowed [8, 12])"


def crit8():
    a = cmath.exp(1j * math.pi / 3)
    phi = AffineSymbol(a, 1)
    w = LogQuadWeight(0, -a, 0)  # forced form -conj(b) a with w(0) = 1
    v, psi = invert_weighted(w, phi)
    N = 64
    P = weighted_matrix(v, psi, N).entries @ weighted_matrix(w, phi, N).entries
    inv = max(np.linalg.norm(P[:, n] - np.eye(N)[:, n]) for n in range(17))
    lam = 1j * math.pi / 3
    em1 = cmath.exp(lam) - 1
    C = 1 / em1
    spec = SemigroupSpec(Variant.WEIGHTED_UNITARY, lam, C, mu=-abs(C) ** 2 * em1)
    checks = [group_check(spec, t, N) for t in (0.5, 1.0, 2.0)]
    grp = max(g.residual for g in checks)
    ok = inv < 1e-8 and grp < 1e-8
    return ok, f"max ||W_v,psi W_w,phi e_n - e_n|| (n<=16) = {inv:.1e}; max group residual = {grp:.1e}"


def crit9():
    t1 = analytic_sector([0, cmath.exp(3j * math.pi / 4)]).theta_max
    t2 = analytic_sector([0, -1]).theta_max
    t3 = analytic_sector([0, 1j]).theta_max
    ok = abs(t1 - math.pi / 4) < 1e-12 and abs(t2 - math.pi / 2) < 1e-12 and t3 == 0
    return ok, f"theta_max = {t1:.15f} (pi/4), {t2:.15f} (pi/2), {t3} (0)"


def crit10():
    vals, slope = range_growth([0, 0, 1], [4, 16, 64], 1)
    inc = bool(np.all(np.diff(vals) > 0))
    return inc and abs(slope - 1.5) <= 0.2, (
        f"Re<Af,f>/||f||^2 = {', '.join(f'{x:.4g}' for x in vals)}; strictly increasing={inc}; slope {slope:.3f}"
    )


def crit11():
    rng = np.random.default_rng(11)
    t = rng.normal(size=30) + 1j * rng.normal(size=30)
    rt = np.max(np.abs(fock_to_taylor(taylor_to_fock(t)) - t) / np.abs(t))
    P = rank_one_projection(1.3 - 0.4j, 48).entries
    idem = np.abs(P @ P - P).max()
    s = np.linalg.svd(composition_matrix(AffineSymbol(cmath.exp(0.7j), 0), 64).entries, compute_uv=False)
    unit = np.abs(s - 1).max()
    with tempfile.TemporaryDirectory() as d:
        cfg = Path(d) / "c.yaml"
        cfg.write_text("kind: spectrum\nsymbol: {a: 0.5, b: 1}\nweight: {q: 0.1}\ncontrols: {N: 48}\n")
        outs = []
        for i in range(2):
            out = Path(d) / f"o{i}.json"
            cli_main(["spectrum", "--config", str(cfg), "--out", str(out)])
            outs.append(out.read_bytes())
        det = outs[0] == outs[1] and emit(run(parse_config(cfg.read_text(), cfg))) == outs[0]
    ok = rt < 1e-14 and idem < 1e-12 and unit < 1e-13 and det
    return ok, (
        f"round-trip rel error {rt:.1e}; ||P^2 - P|| = {idem:.1e}; rotation |sigma - 1| <= {unit:.1e}; "
        f"byte-identical reports={det} (full property suites live in the other test modules)"
    )


CRITERIA = {1: crit1, 2: crit2, 3: crit3, 4: crit4, 5: crit5, 6: crit6, 7: crit7, 8: crit8, 9: crit9, 10: crit10, 11: crit11}


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, detail = CRITERIA[k]()
    RESULTS[k] = (bool(ok), detail)
    print(line(k))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]()
        RESULTS[k] = (bool(ok), detail)
        failed += not ok
        print(line(k))
    sys.exit(1 if failed else 0)
