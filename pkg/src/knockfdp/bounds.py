"""Simultaneous FDP upper bounds for arbitrary query sets.

All bounds here share one shape: an integer numerator capped at |R| over the
denominator max(1, |R|), valid simultaneously over every query set R on the
event that the calibrated sign-path constraint holds.  Three evaluators are
exposed: the single-component bound (JS), the joint multi-component bound
over a calibrated plan (KJI), and the prefix-sweep bound (KR).  Everything
returns exact rationals so equality-of-methods checks are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import ceil

import numpy as np

from .calibration import c_alpha, js_v
from .errors import OracleSizeExceeded, PlanMismatch
from .stats_core import as_index_set

JS = "JS"
KJI = "KJI"
KR = "KR"
KCT = "KCT"


@dataclass(frozen=True)
class BoundReport:
    """One bound evaluation: the query, the rational bound, and its witness.

    ``witness`` identifies what achieved the min: the 0-based plan component
    for JS/KJI, the 1-based prefix position for KR, or None for empty queries.
    """

    query: frozenset
    fdp_upper: Fraction
    true_discoveries_lower: int
    witness: int | None
    method: str

    def __post_init__(self):
        r = len(self.query)
        if not 0 <= self.fdp_upper <= 1:
            raise ValueError("fdp_upper outside [0,1]")
        if self.true_discoveries_lower != r - ceil(self.fdp_upper * r):
            raise ValueError("true_discoveries_lower inconsistent with fdp_upper")

    def as_dict(self):
        return {
            "query": sorted(self.query),
            "fdp_upper": {
                "num": self.fdp_upper.numerator,
                "den": self.fdp_upper.denominator,
                "float": float(self.fdp_upper),
            },
            "true_discoveries_lower": self.true_discoveries_lower,
            "witness": self.witness,
            "method": self.method,
        }


def _report(query, numerator, witness, method):
    query = frozenset(query)
    r = len(query)
    numerator = min(numerator, r)
    return BoundReport(
        query=query,
        fdp_upper=Fraction(numerator, max(1, r)),
        true_discoveries_lower=r - numerator,
        witness=witness if r else None,
        method=method,
    )


def interpolation_bound(R, S, k):
    """min(|R|, k-1 + |R \\ S|) / max(1, |R|) as an exact Fraction."""
    if k < 1:
        raise ValueError("k must be >= 1")
    r = set(R)
    return Fraction(min(len(r), k - 1 + len(r - set(S))), max(1, len(r)))


def _positive_query_positions(stats, R):
    """Sorted query positions carrying a positive sign.

    Queries are sets of 1-based positions in the prepared ordering.  Members
    with negative signs can never enter a reference set, so only the positive
    ones matter for every |R \\ S(v)| computation.
    """
    members = as_index_set(R, stats.p)
    positions = sorted(q for q in members if stats.signs[q - 1] > 0)
    return np.asarray(positions, dtype=np.int64)


def _plan_numerator(stats, v_seq, k_seq, R):
    """Best (numerator, witness) over plan components for query R."""
    r = len(R)
    if r == 0:
        return 0, None
    pos = _positive_query_positions(stats, R)
    neg = stats.negative_positions
    cutoffs = np.asarray(
        [neg[vi - 1] if vi <= len(neg) else stats.p for vi in v_seq], dtype=np.int64
    )
    inside = np.searchsorted(pos, cutoffs, side="right")
    numerators = np.asarray(k_seq, dtype=np.int64) - 1 + (r - inside)
    witness = int(np.argmin(numerators))
    return min(int(numerators[witness]), r), witness


def js_bound(stats, k, alpha, R):
    """Single-component bound at the largest feasible v for this k."""
    v = js_v(k, alpha, stats.p)
    numerator, witness = _plan_numerator(stats, (v,), (k,), R)
    return _report(R, numerator, witness, JS)


def kji_bound(stats, plan, R):
    """Joint bound: best interpolation over the plan's (v_i, k_i) components.

    Raises
    ------
    PlanMismatch
        If the plan was calibrated for a different horizon than stats.p.
    """
    if plan.horizon_p != stats.p:
        raise PlanMismatch(
            f"plan horizon {plan.horizon_p} != {stats.p} scored statistics"
        )
    numerator, witness = _plan_numerator(stats, plan.v, plan.k, R)
    return _report(R, numerator, witness, KJI)


def kr_bound(stats, alpha, R):
    """Prefix-sweep bound: min over ordered prefixes of the running budget."""
    query = frozenset(R)
    r = len(query)
    if r == 0:
        return _report(query, 0, None, KR)
    c = Fraction(c_alpha(alpha))
    pos = set(_positive_query_positions(stats, query).tolist())
    best, witness = r, None
    s_i = 0  # positives among the first i
    in_r = 0  # query members among those positives
    for i in range(1, stats.p + 1):
        if stats.signs[i - 1] > 0:
            s_i += 1
            if i in pos:
                in_r += 1
        term = (r - in_r) + int(c * (1 + i - s_i))
        if term < best:
            best, witness = term, i
            if best == 0:
                break
    return _report(query, best, witness, KR)


def general_interpolation(d, R):
    """max over U of d(U) - |U \\ R| + d(R \\ U), from a tabulated set function.

    Test-support evaluator: the universe (union of the table's keys) must
    have at most 20 members.  Missing entries are read as 0.
    """
    table = {frozenset(key): value for key, value in d.items()}
    universe = sorted(set().union(*table.keys())) if table else []
    if len(universe) > 20:
        raise OracleSizeExceeded(f"universe of size {len(universe)} exceeds 20")
    r = frozenset(R)
    best = None
    for mask in range(1 << len(universe)):
        u = frozenset(universe[j] for j in range(len(universe)) if mask >> j & 1)
        val = table.get(u, 0) - len(u - r) + table.get(frozenset(r - u), 0)
        best = val if best is None else max(best, val)
    return best
