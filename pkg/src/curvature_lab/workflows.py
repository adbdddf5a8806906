"""Hypothesis -> pretangent -> conclusion workflows for the infinitesimal theorems.

Each theorem pairs conditions at the base point (midpoint convexity, a liminf
bound, Busemann convexity at ``p``) with a property every separable tangent
space should then have.  The workflow checks the conditions on the oracle,
builds a pretangent approximation from a pool, checks the property on the
quotient, and reports whether the two sides agree.
"""

from __future__ import annotations

from itertools import combinations
from typing import Optional

from .convexity import (EPS_HOOK, EPS_SEARCH, PreconditionError, busemann_defect_profile,
                        check_finite_busemann, search_infinitesimal_midpoint)
from .four_point import scan_finite
from .infinitesimal import ScaleSchedule, estimate_liminf
from .metric_core import InputError, MetricOracle
from .pretangent import CertificateError, PointSequence, build_pretangent

THEOREMS = {
    "T3": {"liminf": "A1", "busemann": False, "conclusion": "quadrilateral",
           "claim": "separable tangent spaces are CAT(0)"},
    "T5": {"liminf": "A2", "busemann": False, "conclusion": "lebedeva_petrunin",
           "claim": "separable tangent spaces have nonnegative curvature"},
    "T8": {"liminf": None, "busemann": True, "conclusion": "busemann",
           "claim": "separable tangent spaces are Busemann convex"},
    "T10": {"liminf": "A3", "busemann": True, "conclusion": "quadrilateral",
            "claim": "tangent spaces are CAT(0)"},
}


def midpoint_checks(oracle: MetricOracle, seqs: list, budget: int, seed: int,
                    use_hook: bool = True) -> dict:
    """Infinitesimal midpoint search for every unordered pair of ``seqs``."""
    rows = []
    midpoints = {}
    for i, j in combinations(range(len(seqs)), 2):
        res = search_infinitesimal_midpoint(oracle, seqs[i], seqs[j], budget, seed,
                                            use_hook=use_hook, stream_label=f"{i}-{j}")
        midpoints[(i, j)] = res
        row = {"pair": [seqs[i].label, seqs[j].label]}
        row.update(res.to_dict())
        rows.append(row)
    passed = all(m.passed for m in midpoints.values())
    return {"pairs": rows, "passed": passed,
            "verdict": "midpoint-convex evidence" if passed else "counterexample found",
            "_midpoints": midpoints}


def busemann_checks(oracle: MetricOracle, seqs: list, midpoints: dict) -> dict:
    """Busemann profiles for every certified midpoint pair against every ``y`` in ``seqs``."""
    rows = []
    worst = 0.0
    skipped = []
    for (i, j), mres in midpoints.items():
        if not mres.passed:
            skipped.append([seqs[i].label, seqs[j].label])
            continue
        for k, y in enumerate(seqs):
            try:
                prof = busemann_defect_profile(oracle, seqs[i], seqs[j], y, mres.midpoint,
                                               eps_mid=mres.eps,
                                               eps_bus=EPS_HOOK if mres.method == "analytic" else EPS_SEARCH)
            except PreconditionError:
                skipped.append([seqs[i].label, seqs[j].label])
                break
            worst = max(worst, prof.tail_max)
            rows.append({"x0": seqs[i].label, "x1": seqs[j].label, "y": y.label,
                         "tail_max": prof.tail_max, "verdict": prof.verdict,
                         "profile": prof.profile, "_passed": prof.passed})
    passed = not skipped and all(r.pop("_passed") for r in rows)
    return {"triples": rows, "worst_tail_max": worst, "uncertified_pairs": skipped,
            "passed": passed,
            "verdict": "Busemann-convex evidence at p" if passed else "counterexample found"}


def theorem_workflow(oracle: MetricOracle, theorem: str, pool: list, r, schedule: ScaleSchedule,
                     seed: int, budget: int = 1000, tol: float = 1e-9, eps: Optional[float] = None,
                     use_hook: bool = True, n_jobs: int = 1) -> dict:
    """Composite hypothesis / conclusion report for ``theorem`` in ``THEOREMS``."""
    key = theorem.upper()
    if key not in THEOREMS:
        raise InputError(f"unknown theorem {theorem!r}; expected one of {sorted(THEOREMS)}")
    spec = THEOREMS[key]
    base = PointSequence.constant(oracle.base_point, len(r), "p")
    seqs = [base] + list(pool)

    hypotheses = {}
    mid = midpoint_checks(oracle, seqs, budget, seed, use_hook)
    midpoints = mid.pop("_midpoints")
    hypotheses["midpoint_convexity"] = mid
    if spec["liminf"]:
        est = estimate_liminf(spec["liminf"], oracle, schedule, seed, eps, n_jobs=n_jobs)
        hypotheses[f"liminf_{spec['liminf']}"] = est.to_dict() | {"passed": est.passed}
    if spec["busemann"]:
        hypotheses["busemann_at_p"] = busemann_checks(oracle, seqs, midpoints)
    hyp_ok = all(h["passed"] for h in hypotheses.values())

    conclusion = {"property": spec["conclusion"]}
    try:
        family, approx = build_pretangent(pool, r, oracle, n_jobs=n_jobs)
        conclusion["pretangent"] = approx.to_dict() | {
            "accepted": [family.sequences[i].label for i in family.accepted],
            "rejected": {family.sequences[j].label: v for j, v in family.rejected.items()},
        }
        if spec["conclusion"] == "busemann":
            rep = check_finite_busemann(approx.quotient, tol)
        else:
            rep = scan_finite(approx.quotient, spec["conclusion"], tol, n_jobs)
        conclusion["report"] = rep.to_dict()
        conclusion["passed"] = rep.passed
    except CertificateError as exc:
        conclusion["certificate_failure"] = {"message": str(exc), "witness": exc.witness}
        conclusion["passed"] = False

    # only "hypotheses hold, conclusion fails" contradicts the implication
    consistent = not (hyp_ok and not conclusion["passed"])
    if hyp_ok:
        agreement = "agree" if conclusion["passed"] else "disagree (counterexample to the implication)"
    elif not conclusion["passed"]:
        agreement = "agree on the negative side"
    else:
        agreement = "hypotheses not met; conclusion reported separately"
    return {"theorem": key, "claim": spec["claim"], "hypotheses": hypotheses,
            "hypotheses_passed": hyp_ok, "conclusion": conclusion, "agreement": agreement,
            "consistent": consistent}
