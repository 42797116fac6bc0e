"""Dispatch of one experiment configuration to the numerical modules."""
from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import asdict

import numpy as np

from .config import ConfigError, ExperimentConfig
from .fock import fock_of_logquad, gaussian_norm_logquad
from .matrices import (
    NonConvergence,
    TruncatedOperator,
    operator_norm,
    power_convergence,
    rank_one_projection,
    spectrum,
    trust_floor,
    weighted_matrix,
)
from .report import NumericalFailure, Report
from .semigroup import (
    Variant,
    analytic_sector,
    classify_generator_flow,
    cocycle_residual,
    generator,
    generator_fd_errors,
    group_check,
    operator_at,
    quasicontractivity_estimate,
    range_growth,
    unitary_factorization_residual,
    validate_spec,
    weight_at,
    flow_at,
)
from .symbols import (
    Boundedness,
    LimitKind,
    classify_composition,
    classify_power_bounded,
    classify_weighted_bounded,
    composition_norm_exact,
    eigensystem,
    invert_weighted,
    iterate_limit,
    iterate_symbol,
    log_sup_M,
    _is_unimodular,
)

AUDIT_THRESHOLD = 0.2
PROBE_NOTE = "empirical finite-section power norms; observed growth does not override the verdict"


def echo(cfg: ExperimentConfig) -> dict:
    """Normalised echo of the configuration, independent of input formatting."""
    d = {"kind": cfg.kind, "controls": asdict(cfg.controls)}
    if cfg.symbol is not None:
        d["symbol"] = {"a": cfg.symbol.a, "b": cfg.symbol.b}
        d["weight"] = {"p": cfg.weight.p, "q": cfg.weight.q, "r": cfg.weight.r}
    if cfg.semigroup is not None:
        s = cfg.semigroup
        d["semigroup"] = {
            "variant": s.variant.value, "lambda": s.lam, "C": s.C, "alpha_r": s.alpha_r,
            "gamma": s.gamma, "delta": s.delta, "mu": s.mu,
        }
    if cfg.generator:
        d["generator"] = list(cfg.generator)
    if cfg.source:
        d["source"] = str(cfg.source)
    return d


@contextmanager
def _timed(report: Report, name: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        report.timings[name] = time.perf_counter() - t0


def _finite_or_none(x):
    return x if x is not None and math.isfinite(x) else None


def _bounded_verdicts(report: Report, cfg: ExperimentConfig):
    w, phi = cfg.weight, cfg.symbol
    if w.is_one():
        cv = classify_composition(phi)
        report.verdict("composition", cv.tag, cv.rule, detail=cv.detail)
    bv = classify_weighted_bounded(w, phi)
    report.verdict("boundedness", bv.tag, bv.rule, detail=bv.detail)
    return bv


def _normalization_audit(report: Report, phi):
    cn = composition_norm_exact(phi)
    rel = abs(cn.value - cn.alternate_normalization) / cn.value
    report.values["normalization_audit"] = {
        "exact": cn.value,
        "alternate_normalization": cn.alternate_normalization,
        "relative_difference": rel,
        "flagged": rel > AUDIT_THRESHOLD,
        "note": cn.note,
    }
    report.provenance.append(
        "normalization audit: the norm exp(|b|^2/(2 beta)) belongs to the Gaussian weight "
        "exp(-|z|^2); exp(|b|^2/(4 beta)) is the value under exp(-|z|^2/2)"
        + (f" and differs by {rel:.1%}" if rel > AUDIT_THRESHOLD else "")
    )
    return cn


def _limit_target(w, phi, N):
    """(IterateLimit or None, target matrix or None)."""
    if not 0 < abs(phi.a) < 1 or _is_unimodular(phi.a):
        return None, None
    try:
        lim = iterate_limit(w, phi)
    except ValueError:
        return None, None
    if lim.kind is LimitKind.RANK_ONE:
        vec = fock_of_logquad(lim.fixed_vector, N)
        return lim, rank_one_projection(lim.alpha, N, vec)
    if lim.kind is LimitKind.ZERO:
        return lim, TruncatedOperator(np.zeros((N, N), dtype=complex))
    return lim, None


def _record_limit(report: Report, lim):
    if lim is None:
        return
    report.verdict(
        "iterate_limit", lim.kind, lim.rule,
        alpha=lim.alpha, offending_M=lim.offending_M,
        power_bounded_certified=lim.power_bounded_certified,
        fixed_vector=None if lim.fixed_vector is None else list(lim.fixed_vector.as_tuple()),
    )


def _run_classify(cfg: ExperimentConfig, report: Report):
    w, phi, c = cfg.weight, cfg.symbol, cfg.controls
    bv = _bounded_verdicts(report, cfg)
    lsm = log_sup_M(w, phi)
    report.values["sup_M"] = math.exp(lsm) if math.isfinite(lsm) else math.inf
    report.values["log_sup_M"] = lsm
    if not bv.bounded:
        return
    pv = classify_power_bounded(w, phi)
    report.verdict(
        "power", pv.tag, pv.rule, margin=pv.margin, detail=pv.detail,
        statistic=_finite_or_none(pv.statistic),
    )
    if w.is_one() and abs(phi.a) < 1 and not _is_unimodular(phi.a):
        _normalization_audit(report, phi)
    if bv.tag is Boundedness.BOUNDED_COMPACT and 0 < abs(phi.a) < 1:
        t = report.table("eigenvalues", ["M", "lambda", "in_space"])
        for pair in eigensystem(w, phi, c.M_max):
            t.add(pair.M, pair.lam, pair.in_space)
        lim, _ = _limit_target(w, phi, 4)
        _record_limit(report, lim)
    if _is_unimodular(phi.a):
        v, psi = invert_weighted(w, phi)
        report.values["inverse"] = {
            "weight": {"p": v.p, "q": v.q, "r": v.r},
            "symbol": {"a": psi.a, "b": psi.b},
        }
    if c.probe:
        T = weighted_matrix(w, phi, c.N).entries
        t = report.table("probe_power_norms", ["n", "power_norm"])
        Tn = np.eye(c.N, dtype=complex)
        for n in range(1, c.probe_n + 1):
            Tn = T @ Tn
            nrm = float(np.linalg.norm(Tn, 2))
            t.add(n, nrm)
            if not math.isfinite(nrm) or nrm > 1e100:
                break
        report.provenance.append(PROBE_NOTE)


def _run_norm(cfg: ExperimentConfig, report: Report):
    w, phi, c = cfg.weight, cfg.symbol, cfg.controls
    bv = _bounded_verdicts(report, cfg)
    closed = None
    lower = upper = None
    if bv.bounded:
        if w.is_one() and abs(phi.a) < 1 and not _is_unimodular(phi.a):
            closed = _normalization_audit(report, phi).value
        elif phi.a == 0:
            closed = math.exp(0.5 * abs(phi.b) ** 2) * gaussian_norm_logquad(w)
        else:
            m = math.exp(0.5 * log_sup_M(w, phi))
            lower, upper = m, m / abs(phi.a)
    if closed is not None or not bv.bounded:
        t = report.table("norm_ladder", ["N", "norm", "closed_form", "abs_error"])
    else:
        t = report.table("norm_ladder", ["N", "norm", "sandwich_lower", "sandwich_upper"])
    norms = []
    for N in c.N_ladder:
        try:
            nrm = operator_norm(weighted_matrix(w, phi, N))
        except NonConvergence as exc:
            raise NumericalFailure(f"operator norm at N = {N}: {exc}", report) from None
        norms.append(nrm)
        if closed is not None:
            t.add(N, nrm, closed, abs(nrm - closed))
        elif bv.bounded:
            t.add(N, nrm, lower, upper)
        else:
            t.add(N, nrm, None, None)
    report.values["monotone_nondecreasing"] = bool(
        all(b >= a_ - 1e-12 * max(1.0, a_) for a_, b in zip(norms, norms[1:]))
    )
    if closed is not None:
        report.values["closed_form"] = closed
        report.values["final_abs_error"] = abs(norms[-1] - closed)
    if not all(math.isfinite(x) for x in norms):
        raise NumericalFailure("operator norm overflowed", report)


def _run_power(cfg: ExperimentConfig, report: Report):
    w, phi, c = cfg.weight, cfg.symbol, cfg.controls
    bv = _bounded_verdicts(report, cfg)
    if not bv.bounded:
        raise ConfigError("power experiments need a bounded operator", "symbol", source=cfg.source)
    pv = classify_power_bounded(w, phi)
    report.verdict("power", pv.tag, pv.rule, margin=pv.margin, detail=pv.detail)
    lim, target = _limit_target(w, phi, c.N)
    _record_limit(report, lim)
    T = weighted_matrix(w, phi, c.N)
    P = target if target is not None else TruncatedOperator(np.zeros((c.N, c.N), dtype=complex))
    rep = power_convergence(T, P, c.n_max, c.tol)
    t = report.table("powers", ["n", "power_norm", "error", "closed_form_lower"])
    for i, nrm in enumerate(rep.power_norms):
        n = i + 1
        wn, pn = iterate_symbol(w, phi, n)
        lsm = log_sup_M(wn, pn)
        lower = math.exp(0.5 * lsm) if lsm < 700 else math.inf
        t.add(n, nrm, rep.errors[i] if target is not None else None, lower)
    report.values["has_limit"] = target is not None
    report.values["converged"] = bool(target is not None and rep.converged)
    report.values["first_below_tol"] = rep.first_below if target is not None else None
    report.values["rate"] = rep.rate if target is not None else None
    report.values["overflow"] = rep.overflow
    if target is not None:
        report.values["predicted_rate"] = abs(phi.a)
    if rep.overflow:
        raise NumericalFailure("power norms overflowed", report)
    if target is not None and not rep.converged:
        raise NumericalFailure(
            f"||T^n - P|| did not fall below {c.tol:g} within n <= {c.n_max}", report
        )


def _run_spectrum(cfg: ExperimentConfig, report: Report):
    w, phi, c = cfg.weight, cfg.symbol, cfg.controls
    bv = _bounded_verdicts(report, cfg)
    closed = []
    scale = 1.0
    if bv.tag is Boundedness.BOUNDED_COMPACT and 0 < abs(phi.a) < 1:
        pairs = eigensystem(w, phi, c.M_max)
        closed = [p.lam for p in pairs]
        scale = abs(closed[0])
    ev = spectrum(weighted_matrix(w, phi, c.N))
    floor = trust_floor(phi.a, c.N, scale) if abs(phi.a) < 1 else 0.0
    report.values["trust_floor"] = floor
    t = report.table("eigenvalues", ["index", "eigenvalue", "closed_form", "rel_error", "trusted"])
    worst = 0.0
    for i, lam in enumerate(ev):
        cf = closed[i] if i < len(closed) else None
        rel = abs(lam - cf) / abs(cf) if cf is not None and cf != 0 else None
        if rel is not None:
            worst = max(worst, rel)
        t.add(i, complex(lam), cf, rel, bool(abs(lam) > floor))
    if closed:
        report.values["max_rel_error"] = worst


def _run_semigroup(cfg: ExperimentConfig, report: Report):
    spec, c = cfg.semigroup, cfg.controls
    vr = validate_spec(spec)
    report.verdict(
        "validity", "Valid" if vr.valid else "Invalid", "validate_spec",
        bound=vr.bound, detail=vr.detail, violating_t=vr.violating_t,
    )
    g = generator(spec)
    report.values["generator"] = {"G_linear": list(g.G_linear), "multiplier": list(g.multiplier)}
    t = report.table("flow", ["t", "a_t", "b_t", "p_t", "q_t", "r_t", "boundedness"])
    for tt in c.t_grid:
        ph, wt = flow_at(spec, tt), weight_at(spec, tt)
        bv = classify_weighted_bounded(wt, ph)
        t.add(tt, ph.a, ph.b, wt.p, wt.q, wt.r, bv.tag.value)
    cres = max(cocycle_residual(spec, s, tt) for s in c.t_grid for tt in c.t_grid)
    report.values["cocycle_residual"] = cres
    if spec.variant is Variant.WEIGHTED_UNITARY:
        report.values["factorization_residual"] = max(
            unitary_factorization_residual(spec, s, tt) for s in c.t_grid for tt in c.t_grid
        )
    fd = generator_fd_errors(spec, c.h_ladder, c.N)
    t = report.table("generator_fd", ["h"] + [f"e{n}" for n in range(fd.shape[1])])
    for h, row in zip(c.h_ladder, fd):
        t.add(h, *row.tolist())
    qc = quasicontractivity_estimate(spec, c.t_grid, c.N)
    report.values["omega"] = qc.omega
    t = report.table("quasicontractivity", ["t", "section_norm", "lower_closed_form", "upper_closed_form"])
    for row in zip(qc.t_grid, qc.section_norms, qc.lower_closed_form, qc.upper_closed_form):
        t.add(*row)
    law = 0.0
    k = min(9, c.N)
    for s in c.t_grid:
        for tt in c.t_grid:
            A = operator_at(spec, s, c.N).entries @ operator_at(spec, tt, c.N).entries
            B = operator_at(spec, s + tt, c.N).entries
            law = max(law, float(np.max(np.linalg.norm((A - B)[:, :k], axis=0))))
    report.values["semigroup_law_residual"] = law


def _run_group(cfg: ExperimentConfig, report: Report):
    spec, c = cfg.semigroup, cfg.controls
    t = report.table("group", ["t", "residual", "closed_form_residual"])
    worst = 0.0
    for tt in c.t_grid:
        gc = group_check(spec, tt, c.N)
        t.add(gc.t, gc.residual, gc.closed_form_residual)
        worst = max(worst, gc.residual)
    report.values["max_residual"] = worst


def _run_sector(cfg: ExperimentConfig, report: Report):
    G, c = cfg.generator, cfg.controls
    gv = classify_generator_flow(G)
    report.verdict("admissibility", gv.tag, gv.rule, detail=gv.reason)
    if gv.admissible:
        sec = analytic_sector(G)
        report.verdict(
            "sector", "Analytic" if sec.theta_max > 0 else "NotAnalytic", "analytic_sector",
            theta_max=sec.theta_max, attained=sec.attained,
        )
    vals, slope = range_growth(G, c.probe_ladder, c.probe_m)
    t = report.table("numerical_range", ["n", "re_rayleigh"])
    for n, v in zip(c.probe_ladder, vals):
        t.add(n, float(v))
    report.values["range_slope"] = _finite_or_none(slope)
    g = G[c.probe_m + 1] if c.probe_m + 1 < len(G) else 0
    report.values["predicted_slope"] = c.probe_m / 2 + 1 if g != 0 else None
    report.values["strictly_increasing"] = bool(np.all(np.diff(vals) > 0))


_DISPATCH = {
    "classify": _run_classify,
    "norm": _run_norm,
    "power": _run_power,
    "spectrum": _run_spectrum,
    "semigroup": _run_semigroup,
    "group": _run_group,
    "sector": _run_sector,
}


def run(cfg: ExperimentConfig) -> Report:
    """Run one experiment.

    Raises ConfigError for configurations the numerics reject and
    NumericalFailure (carrying the partial report) when a computation
    does not reach its target.
    """
    report = Report(cfg.kind, echo(cfg))
    if cfg.semigroup is not None and cfg.kind in ("semigroup", "group"):
        vr = validate_spec(cfg.semigroup)
        if not vr.valid:
            raise ConfigError(
                f"invalid semigroup: {vr.detail} (violated at t = {vr.violating_t:.6g})",
                "semigroup.alpha_r", source=cfg.source,
            )
    with _timed(report, "total"):
        _DISPATCH[cfg.kind](cfg, report)
    return report
