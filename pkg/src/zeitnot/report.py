"""Comparison report: published numbers next to what the code computes.

Every section is a plain dict so the whole report serialises to one JSON
document.  Sections never raise on a mismatch; mismatches are data.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import bivariant as bv
from . import duel_simulator as ds
from . import monovariant as mv
from .errors import NoCrossingError

CROSSCHECK_NS = (4, 5, 6)
CROSSCHECK_ALPHA = 0.5
CROSSCHECK_C = 0.25
INVARIANCE_ALPHAS = tuple(np.round(np.linspace(0.05, 0.95, 10), 10))


def _round(x, digits=12):
    return None if x is None else float(f"{x:.{digits}g}")


def mono_roots_section() -> dict:
    out = {"published": mv.PUBLISHED_ROOT, "interpretations": {}}
    for interp in ("A", "B"):
        sol = mv.mono_solve_invariant(interp)
        z = sol.roots[0] if sol.roots else None
        out["interpretations"][interp] = {
            "formula": sol.interpretation.formula,
            "roots": list(sol.roots),
            "residuals": list(sol.residuals),
            "count": sol.count,
            "status": sol.status,
            "deviation": None if z is None else z - mv.PUBLISHED_ROOT,
        }
    roots = []
    for a in INVARIANCE_ALPHAS:
        sol = mv.mono_solve_asymptotic(a / 2, float(a), "A")
        roots.append({"alpha": float(a), "roots": list(sol.roots)})
    firsts = [r["roots"][0] for r in roots if r["roots"]]
    out["alpha_invariance"] = {
        "c_alpha": "alpha/2",
        "runs": roots,
        "spread": max(firsts) - min(firsts) if firsts else None,
    }
    return out


def table1_section() -> dict:
    rows = bv.table1()
    z = [r.z_computed for r in rows]
    increasing = all(z[i] is not None and z[i + 1] is not None and z[i + 1] - z[i] > 1e-9 for i in range(len(z) - 1))
    return {"rows": [r.to_dict() for r in rows], "computed_strictly_increasing": increasing}


def skim_section() -> dict:
    sol = bv.bi_solve_asymptotic(0.5)
    z = sol.roots[0] if sol.roots else None
    return {
        "beta": 0.5,
        "claimed_percent": bv.PUBLISHED_SKIM_PERCENT,
        "computed_root": None if z is None else round(z, 4),
        "computed_percent": None if z is None else round(100 * z, 2),
        "deviation_percent_points": None if z is None else round(100 * z - bv.PUBLISHED_SKIM_PERCENT, 2),
    }


def bi_chain_section(Ns=range(2, 11)) -> dict:
    _, d3 = bv.bi_chain(3, bv.AS_PRINTED)
    ex = d3.excess.get(1, Fraction(0))
    per_n = []
    for N in Ns:
        _, d = bv.bi_chain(N, bv.AS_PRINTED)
        per_n.append(
            {
                "N": N,
                "max_excess": d.max_excess,
                "clamped_states": list(d.clamped_states),
                "row_sums": [float(x) for x in d.row_sums],
            }
        )
    return {
        "N3": {
            "row_sums": [float(x) for x in d3.row_sums],
            "clamped_states": list(d3.clamped_states),
            "row1_offbreak_mass": str(1 + ex),
            "row1_excess": f"{int(ex * 36)}/36" if (ex * 36).denominator == 1 else str(ex),
            "row1_excess_reduced": str(ex),
            "row1_excess_value": float(ex),
        },
        "as_printed_by_N": per_n,
    }


def _analytic_mono(N, alpha, c):
    p = mv.MonoModelParams(N, alpha, c)
    try:
        rep = mv.mono_optimal_threshold(p)
        return {"status": rep.status, "l_star": rep.l_star, "flip": None, "partition_ok": rep.partition_ok}
    except NoCrossingError as e:
        return {"status": "no_crossing", "l_star": None, "flip": e.flip, "partition_ok": None}


def threshold_crosscheck_section(Ns=CROSSCHECK_NS, alpha=CROSSCHECK_ALPHA, c=CROSSCHECK_C) -> dict:
    cases = []
    for N in Ns:
        an = _analytic_mono(N, alpha, c)
        rival = an["l_star"] if an["l_star"] is not None else an["flip"]
        br = ds.best_response(N, ds.MONO, rival, alpha, c) if rival is not None else None
        eq = ds.symmetric_equilibria(N, ds.MONO, alpha, c)
        agree = br is not None and an["l_star"] is not None and an["l_star"] in br.tied
        case = {
            "N": N,
            "alpha": alpha,
            "c_alpha": c,
            "analytic": an,
            "rival_cutoff_used": rival,
            "best_response": br.to_dict() if br else None,
            "symmetric_equilibria": eq,
            "agreement": agree,
        }
        if not agree:
            what = (
                f"analytic scan gives l*={an['l_star']}"
                if an["l_star"] is not None
                else f"analytic scan finds no crossing (first non-positive gap at l={an['flip']})"
            )
            best = br.best_l1 if br else None
            case["discrepancy"] = (
                f"N={N}: {what}; exact best response to l2={rival} is l1={best}; "
                f"self-consistent cutoffs {eq}"
            )
        cases.append(case)
    return {"cases": cases, "all_agree": all(c["agreement"] for c in cases)}


def formula_mode_section(N=4, l=2) -> dict:
    p = mv.MonoModelParams(N, CROSSCHECK_ALPHA, CROSSCHECK_C)
    a = mv.mono_price_sequence(p, l, mv.AS_PRINTED)
    r = mv.mono_price_sequence(p, l, mv.REDERIVED)
    n = np.arange(1, N + 1)
    return {
        "N": N,
        "l": l,
        "as_printed": [float(x) for x in a.sequence],
        "rederived": [float(x) for x in r.sequence],
        "difference": [float(x) for x in a.sequence - r.sequence],
        "reward_ratio": [float(x) for x in a.reward[1:] / r.reward[1:]],
        "expected_reward_ratio": [float(N)] * len(n),
    }


def mono_census_section(alpha=0.5, cs=(0.25, 0.5), Ns=range(10, 201)) -> dict:
    out = []
    for c in cs:
        cen = mv.mono_threshold_census(alpha, c, Ns)
        rows = cen["rows"]
        crossing = [r for r in rows if r["l_star"] is not None]
        out.append(
            {
                "c_alpha": c,
                "N_range": [min(Ns), max(Ns)],
                "crossing_count": len(crossing),
                "no_crossing_N": [r["N"] for r in rows if r["l_star"] is None],
                "partition_failures_N": [r["N"] for r in crossing if not r.get("partition_ok", True)],
                "monotonicity_violations": cen["monotonicity_violations"],
                "rows": rows,
            }
        )
    return {"alpha": alpha, "runs": out}


def mono_large_n_section(N=2000, alpha=0.5) -> dict:
    c = alpha / 2
    p = mv.MonoModelParams(N, alpha, c)
    s = mv.mono_threshold_scan(p)
    root = mv.mono_solve_asymptotic(c, alpha, "A").roots[0]
    l = s.l_star if s.l_star is not None else s.flip
    return {
        "N": N,
        "alpha": alpha,
        "c_alpha": c,
        "l_star": s.l_star,
        "flip": s.flip,
        "ratio": None if l is None else l / N,
        "asymptotic_root_A": root,
        "gap": None if l is None else l / N - root,
        "within_0_05": None if l is None else abs(l / N - root) <= 0.05,
    }


def bi_small_section(N=6, beta=1.0, alpha=0.5) -> dict:
    c = beta * alpha / 4
    out = {"N": N, "beta": beta, "alpha": alpha, "c_alpha": c, "modes": {}}
    for mode in bv.CHAIN_MODES:
        p = bv.BiModelParams(N, alpha, c, mode)
        s = bv.bi_threshold_scan(p)
        rival = s.l_star if s.l_star is not None else s.flip
        entry = {"l_star": s.l_star, "flip": s.flip}
        if rival is not None:
            br = ds.best_response(N, ds.BI, rival, alpha, c)
            entry["best_response_to"] = rival
            entry["oracle_best_l1"] = br.best_l1
            entry["oracle_tied"] = list(br.tied)
            entry["agreement"] = s.l_star is not None and s.l_star in br.tied
        out["modes"][mode] = entry
    return out


def bi_finite_section(Ns=(10, 20, 50, 100), beta=1.0, alpha=0.5) -> dict:
    c = beta * alpha / 4
    rows = []
    for N in Ns:
        p = bv.BiModelParams(N, alpha, c)
        s = bv.bi_threshold_scan(p)
        rows.append(
            {
                "N": N,
                "scan_l_star": s.l_star,
                "scan_flip": s.flip,
                "equation_brackets": [list(b) for b in bv.bi_finite_equation_brackets(p)],
            }
        )
    return {"beta": beta, "alpha": alpha, "rows": rows}


def bi_closed_form_section(ls=range(2, 7), Ns=range(4, 13)) -> dict:
    gaps = []
    for N in Ns:
        for l in ls:
            if l <= N:
                d = bv.bi_stop_distribution(l, N)
                gaps.append({"l": l, "N": N, "max_gap": d.closed_form_gap})
    return {"mode": bv.ROW_NORMALIZED, "gaps": gaps, "largest": max(g["max_gap"] for g in gaps)}


def bi_prefactor_section(N=20, beta=1.0, alpha=0.5) -> dict:
    p = bv.BiModelParams(N, alpha, beta * alpha / 4)
    rows = []
    for l in range(2, N + 1):
        pr = bv.bi_printed_inequalities(p, l, "printed")
        ch = bv.bi_printed_inequalities(p, l, "chain")
        rows.append(
            {
                "l": l,
                "printed_before_lhs": pr["before_lhs"],
                "chain_before_lhs": ch["before_lhs"],
                "printed_at_lhs": pr["at_lhs"],
                "chain_at_lhs": ch["at_lhs"],
                "before_rhs": pr["before_rhs"],
                "at_rhs": pr["at_rhs"],
            }
        )
    hold = lambda r, key: r[f"{key}_before_lhs"] > r["before_rhs"] and r[f"{key}_at_lhs"] <= r["at_rhs"]
    return {
        "N": N,
        "beta": beta,
        "first_l_printed": next((r["l"] for r in rows if hold(r, "printed")), None),
        "first_l_chain": next((r["l"] for r in rows if hold(r, "chain")), None),
        "rows": rows,
    }


def bi_positivity_section(Ns=range(10, 101, 10), alpha=0.5) -> dict:
    c = alpha / 8
    out = []
    for mode in bv.CHAIN_MODES:
        bad = []
        for N in Ns:
            p = bv.BiModelParams(N, alpha, c, mode)
            for l in range(2, N + 1):
                v = bv.bi_price_sequence(p, l).sequence
                if np.any(v <= 0):
                    bad.append({"N": N, "l": l, "min_value": float(v.min()), "first_nonpositive_n": int(np.argmax(v <= 0) + 1)})
                    break
        out.append({"mode": mode, "N_with_nonpositive": [b["N"] for b in bad], "examples": bad[:5]})
    return {"c_alpha": c, "alpha": alpha, "runs": out}


def build_report() -> dict:
    return {
        "mono_roots": mono_roots_section(),
        "table1": table1_section(),
        "skim_fraction": skim_section(),
        "bi_chain": bi_chain_section(),
        "threshold_crosscheck": threshold_crosscheck_section(),
        "formula_modes": formula_mode_section(),
        "mono_census": mono_census_section(),
        "mono_large_n": mono_large_n_section(),
        "bi_small": bi_small_section(),
        "bi_finite_equation": bi_finite_section(),
        "bi_closed_form": bi_closed_form_section(),
        "bi_prefactor": bi_prefactor_section(),
        "bi_positivity": bi_positivity_section(),
    }


REQUIRED_SECTIONS = (
    "mono_roots",
    "table1",
    "skim_fraction",
    "bi_chain",
    "threshold_crosscheck",
)
