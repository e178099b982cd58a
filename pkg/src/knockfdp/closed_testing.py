"""Closed-testing FDP bounds driven by multi-weighted-sum local tests.

A local test spec assigns each intersection hypothesis (identified only by
its size, plus the signs and magnitude order of its members) a battery of
weighted positive-count statistics with per-size budgets and critical
values.  Closed testing rejects a set when every superset is locally
rejected; the FDP bound for a query R is then the size of the largest subset
of R that survives, divided by |R|.  This module provides the shortcut that
evaluates that bound in polynomial time, a brute-force lattice oracle for
small p, per-size critical-value calibration on a shared sign-path pool, and
the standard spec constructors (plan translation, prefix-sweep translation,
per-size uniformly improved, and rank-weighted).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil

import numpy as np

from .calibration import Certificate, k_raw, two_step_k
from .errors import OracleSizeExceeded
from .stats_core import as_index_set

INDICATOR = "indicator"
RANK = "rank"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class LocalTestSpec:
    """Size-indexed battery of local tests (condition C1 by construction).

    ``budgets`` and ``critical_values`` map a hypothesis size s to equal-length
    tuples; components may be absent at small sizes (shorter tuples).  A
    statistic for component i sums weights of positive-signed members among
    the ``budgets(s)[i]`` largest magnitudes; the hypothesis is locally
    rejected when any statistic reaches its critical value.  ``certificates``
    optionally maps s to the Monte-Carlo Certificate backing that size's
    calibration.  ``size_invariant`` marks specs whose rules ignore s, which
    the shortcut exploits.  ``custom_weight(i, local_rank, size)`` supplies
    weights for the custom family (applied to every positive member, no
    budget gate).
    """

    m: int
    weight_family: str
    budgets: object
    critical_values: object
    certificates: object = None
    size_invariant: bool = False
    custom_weight: object = None

    def certificate(self, size):
        return self.certificates(size) if self.certificates is not None else None


@dataclass(frozen=True)
class CTOutcome:
    """Closed-testing verdict for one query set."""

    query: frozenset
    t_bound: int
    fdp_upper: Fraction
    witness_t: int | None
    witness_r: int | None

    def __post_init__(self):
        if not 0 <= self.t_bound <= len(self.query):
            raise ValueError("t_bound outside [0, |query|]")
        if self.fdp_upper != Fraction(self.t_bound, max(1, len(self.query))):
            raise ValueError("fdp_upper inconsistent with t_bound")

    @property
    def true_discoveries_lower(self):
        return len(self.query) - self.t_bound

    def as_dict(self):
        return {
            "query": sorted(self.query),
            "t_bound": self.t_bound,
            "fdp_upper": {
                "num": self.fdp_upper.numerator,
                "den": self.fdp_upper.denominator,
                "float": float(self.fdp_upper),
            },
            "true_discoveries_lower": self.true_discoveries_lower,
            "witness_t": self.witness_t,
            "witness_r": self.witness_r,
        }


def local_stat(I, stats, spec, i):
    """One weighted-sum statistic, straight from the definition.

    Members are ranked within I by magnitude, smallest = rank 1; component i
    sums the weights of positive-signed members ranked above |I| - budget.
    """
    members = sorted(I)  # ascending position = descending magnitude
    s = len(members)
    if s == 0:
        return 0
    if spec.weight_family == CUSTOM:
        total = 0
        for idx, q in enumerate(members):
            rank = s - idx
            if stats.signs[q - 1] > 0:
                total += spec.custom_weight(i, rank, s)
        return total
    b = spec.budgets(s)[i]
    total = 0
    for idx, q in enumerate(members):
        rank = s - idx
        if rank > s - b and stats.signs[q - 1] > 0:
            total += rank if spec.weight_family == RANK else 1
    return total


def locally_rejected(I, stats, spec):
    """True when any component statistic reaches its critical value."""
    s = len(frozenset(I))
    if s == 0:
        return False
    z = spec.critical_values(s)
    return any(local_stat(I, stats, spec, i) >= z[i] for i in range(len(z)))


def pi_permutation(stats):
    """pi(position) = rank of the signed statistic in ascending order."""
    signed = np.array([s * m for s, m in zip(stats.signs, stats.magnitudes)])
    pi = np.empty(stats.p, dtype=np.int64)
    pi[np.argsort(signed)] = np.arange(1, stats.p + 1)
    return tuple(int(x) for x in pi)


# --------------------------------------------------------------- the shortcut


class _ShortcutEngine:
    """Per-(stats, spec) state for batched candidate evaluation.

    For a fixed candidate core B, the r-th candidate adds the r first
    complement members in pi order; all r are scored in one vectorized pass
    using member-order positive prefix counts.
    """

    def __init__(self, stats, spec):
        self.stats = stats
        self.spec = spec
        self.p = stats.p
        self.pos_bool = np.array([s > 0 for s in stats.signs])
        self.pi = np.asarray(pi_permutation(stats), dtype=np.int64)
        self.by_pi = np.argsort(self.pi) + 1  # positions in ascending-pi order

    def _bz_matrices(self, sizes):
        """Per-row budget/critical matrices, padded with inert components."""
        spec = self.spec
        if spec.size_invariant:
            b = np.asarray(spec.budgets(int(sizes[0])), dtype=np.int64)
            z = np.asarray(spec.critical_values(int(sizes[0])), dtype=np.int64)
            n_r = sizes.shape[0]
            return (
                np.broadcast_to(b, (n_r, b.size)),
                np.broadcast_to(z, (n_r, z.size)),
            )
        b_rows = [spec.budgets(int(s)) for s in sizes]
        z_rows = [spec.critical_values(int(s)) for s in sizes]
        width = max(1, max(len(row) for row in b_rows))
        b_mat = np.zeros((sizes.shape[0], width), dtype=np.int64)
        z_mat = np.ones((sizes.shape[0], width), dtype=np.int64)
        for r, (brow, zrow) in enumerate(zip(b_rows, z_rows)):
            if brow:
                b_mat[r, : len(brow)] = brow
                z_mat[r, : len(zrow)] = zrow
        return b_mat, z_mat

    def accept_rows(self, in_b, comp, t):
        """Acceptance indicator for U_r = B u (first r of comp), r = 0..len(comp)."""
        p = self.p
        n_r = comp.size + 1
        add_rank = np.full(p, p + 2, dtype=np.int64)
        add_rank[comp - 1] = np.arange(1, comp.size + 1)
        rows = np.arange(n_r, dtype=np.int64)
        member = in_b[None, :] | (add_rank[None, :] <= rows[:, None])
        sizes = t + rows
        cum = member.cumsum(axis=1)
        pos_member = member & self.pos_bool[None, :]
        cpos = pos_member.cumsum(axis=1)

        if self.spec.weight_family == CUSTOM:
            return self._accept_rows_custom(member, sizes)

        # C[r, j] = positives among the j largest-magnitude members of U_r
        C = np.zeros((n_r, p + 1), dtype=np.int64)
        rr, qq = np.nonzero(member)
        jj = cum[rr, qq]
        C[rr, jj] = cpos[rr, qq]
        b_mat, z_mat = self._bz_matrices(sizes)
        jb = np.clip(b_mat, 0, sizes[:, None])
        row_idx = rows[:, None]
        if self.spec.weight_family == RANK:
            wcum = (cum * pos_member).cumsum(axis=1)
            D = np.zeros((n_r, p + 1), dtype=np.int64)
            D[rr, jj] = wcum[rr, qq]
            # rank of the j-th largest-magnitude member is s - j + 1
            lhat = (sizes[:, None] + 1) * C[row_idx, jb] - D[row_idx, jb]
        else:
            lhat = C[row_idx, jb]
        return (lhat <= z_mat - 1).all(axis=1)

    def _accept_rows_custom(self, member, sizes):
        out = np.empty(sizes.shape[0], dtype=bool)
        for r in range(sizes.shape[0]):
            positions = np.nonzero(member[r])[0] + 1
            z = self.spec.critical_values(int(sizes[r]))
            out[r] = not any(
                local_stat(positions, self.stats, self.spec, i) >= z[i]
                for i in range(len(z))
            )
        return out


@lru_cache(maxsize=64)
def _engine(stats, spec):
    return _ShortcutEngine(stats, spec)


def shortcut_bound(R, stats, spec):
    """Largest non-rejected subset size of R, via the pi-order shortcut.

    Evaluates, for each candidate size t, only the canonical candidates
    U_{t,r} built from the t smallest-pi members of R plus the r smallest-pi
    outsiders; acceptance in t is monotone, so the largest accepting t is
    located by bisection and reported with its accepting (t, r) witness.
    """
    query = frozenset(R)
    n = len(query)
    if n == 0:
        return CTOutcome(query, 0, Fraction(0, 1), None, None)
    engine = _engine(stats, spec)
    positions = np.asarray(sorted(as_index_set(query, stats.p)), dtype=np.int64)
    by_pi = positions[np.argsort(engine.pi[positions - 1])]

    cache = {}

    def accept(t):
        if t not in cache:
            in_b = np.zeros(engine.p, dtype=bool)
            in_b[by_pi[:t] - 1] = True
            comp = engine.by_pi[~in_b[engine.by_pi - 1]]
            cache[t] = engine.accept_rows(in_b, comp, t)
        return cache[t]

    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if accept(mid).any():
            lo = mid
        else:
            hi = mid - 1
    if lo == 0:
        return CTOutcome(query, 0, Fraction(0, 1), None, None)
    witness_r = int(np.argmax(cache[lo]))
    return CTOutcome(query, lo, Fraction(lo, n), lo, witness_r)


# ------------------------------------------------------- brute-force oracle


@lru_cache(maxsize=4)
def _ct_lattice(stats, spec):
    """best[mask] = size of the largest closed-testing survivor inside mask."""
    p = stats.p
    n = 1 << p
    masks = np.arange(n, dtype=np.int64)
    member = (masks[:, None] >> np.arange(p)[None, :] & 1).astype(bool)
    sizes = member.sum(axis=1)
    pos_bool = np.array([s > 0 for s in stats.signs])
    accept = np.ones(n, dtype=bool)

    if spec.weight_family == CUSTOM:
        for mask in range(1, n):
            positions = [q + 1 for q in range(p) if mask >> q & 1]
            accept[mask] = not locally_rejected(positions, stats, spec)
    else:
        cum = member.cumsum(axis=1)
        cpos = (member & pos_bool[None, :]).cumsum(axis=1)
        C = np.zeros((n, p + 1), dtype=np.int64)
        rr, qq = np.nonzero(member)
        jj = cum[rr, qq]
        C[rr, jj] = cpos[rr, qq]
        if spec.weight_family == RANK:
            wcum = (cum * (member & pos_bool[None, :])).cumsum(axis=1)
            D = np.zeros((n, p + 1), dtype=np.int64)
            D[rr, jj] = wcum[rr, qq]
        for s in range(1, p + 1):
            rows = np.nonzero(sizes == s)[0]
            b = np.asarray(spec.budgets(s), dtype=np.int64)
            z = np.asarray(spec.critical_values(s), dtype=np.int64)
            if b.size == 0:
                continue
            jb = np.clip(b, 0, s)
            lhat = C[rows[:, None], jb[None, :]]
            if spec.weight_family == RANK:
                lhat = (s + 1) * lhat - D[rows[:, None], jb[None, :]]
            accept[rows] = (lhat <= z - 1).all(axis=1)

    # reach[V]: some superset of V is locally accepted (V survives closed testing)
    reach = accept.copy()
    for bit in range(p):
        r3 = reach.reshape(-1, 2, 1 << bit)
        r3[:, 0, :] |= r3[:, 1, :]
    value = np.where(reach, sizes, 0).astype(np.int64)
    best = value.copy()
    for bit in range(p):
        b3 = best.reshape(-1, 2, 1 << bit)
        np.maximum(b3[:, 1, :], b3[:, 0, :], out=b3[:, 1, :])
    return best


def brute_force_ct(R, stats, spec):
    """Exact closed testing by full lattice enumeration (p <= 14 only)."""
    if stats.p > 14:
        raise OracleSizeExceeded(f"p={stats.p} exceeds the enumeration cap of 14")
    query = as_index_set(R, stats.p)
    best = _ct_lattice(stats, spec)
    mask = 0
    for i in query:
        mask |= 1 << (i - 1)
    t = int(best[mask])
    return CTOutcome(query, t, Fraction(t, max(1, len(query))), None, None)


# ----------------------------------------------------- critical-value tuning


def _component_samples(s, spec, pool):
    """Monte-Carlo draws of every component statistic at hypothesis size s.

    Signs over pool paths stand in for the members in descending-magnitude
    order; under the null the statistics' joint law depends only on s.
    """
    positives = pool.sign_matrix(columns=s) > 0
    if spec.weight_family == CUSTOM:
        samples = []
        for i in range(spec.m):
            w = np.array([spec.custom_weight(i, s - j, s) for j in range(s)])
            samples.append(positives @ w)
        return np.array(samples)
    b = np.minimum(np.asarray(spec.budgets(s), dtype=np.int64), s)
    if spec.weight_family == RANK:
        weights = (s - np.arange(s, dtype=np.int64))[None, :]
        prefix = (positives * weights).cumsum(axis=1)
    else:
        prefix = positives.cumsum(axis=1)
    zero = np.zeros((pool.nsim, 1), dtype=prefix.dtype)
    prefix = np.concatenate([zero, prefix], axis=1)
    return prefix[:, b].T.copy()


def calibrate_critical_values(s, spec, alpha, pool):
    """Per-size critical values: marginal quantiles, then greedy tightening.

    Starts each z_i one past its marginal (1-alpha) sample quantile, inflates
    all components uniformly if that joint start is infeasible on the pool,
    then walks i = 1..m shrinking each z_i as far as the joint acceptance
    frequency allows.  Returns (z tuple, Certificate of the final joint
    frequency).
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    samples = _component_samples(s, spec, pool)
    m = samples.shape[0]
    nsim = pool.nsim
    if m == 0:
        return (), Certificate(1.0, nsim=nsim, seed=pool.seed, exact=False)
    need = ceil((1.0 - alpha) * nsim - 1e-9)

    z = []
    for i in range(m):
        counts = np.bincount(samples[i])
        cdf = counts.cumsum()
        z.append(int(np.searchsorted(cdf, need)) + 1)
    z = np.asarray(z, dtype=np.int64)

    def joint_count(zvec):
        return int((samples <= (zvec - 1)[:, None]).all(axis=0).sum())

    if joint_count(z) < need:
        # the marginal start can be jointly infeasible for m > 1; inflate
        # uniformly first so the greedy pass starts from a valid point
        hi = int(samples.max() + 1 - z.min())
        lo = 1
        while lo < hi:
            mid = (lo + hi) // 2
            if joint_count(z + mid) >= need:
                hi = mid
            else:
                lo = mid + 1
        z = z + lo

    suffix = [np.ones(nsim, dtype=bool)]
    for i in range(m - 1, 0, -1):
        suffix.append(suffix[-1] & (samples[i] <= z[i] - 1))
    suffix.reverse()
    prefix = np.ones(nsim, dtype=bool)
    final = []
    for i in range(m):
        base = prefix & suffix[i]

        def feasible(zi):
            return int((base & (samples[i] <= zi - 1)).sum()) >= need

        lo, hi = 1, int(z[i])
        if not feasible(hi):
            final.append(hi)
        else:
            while lo < hi:
                mid = (lo + hi) // 2
                if feasible(mid):
                    hi = mid
                else:
                    lo = mid + 1
            final.append(lo)
        prefix &= samples[i] <= final[i] - 1

    cert = Certificate(
        probability=int(prefix.sum()) / nsim, nsim=nsim, seed=pool.seed, exact=False
    )
    return tuple(final), cert


# ------------------------------------------------------------- constructors


def spec_from_plan(plan):
    """Indicator spec equivalent to the joint-interpolation bound of a plan."""
    b = tuple(k + v - 1 for v, k in zip(plan.v, plan.k))
    z = tuple(plan.k)
    return LocalTestSpec(
        m=plan.m,
        weight_family=INDICATOR,
        budgets=lambda s: b,
        critical_values=lambda s: z,
        certificates=lambda s: plan.certificate,
        size_invariant=True,
    )


def kr_spec(p, alpha):
    """Indicator spec equivalent to the prefix-sweep bound at horizon p."""
    v = tuple(range(1, p + 1))
    k = k_raw(v, alpha)
    b = tuple(ki + vi - 1 for vi, ki in zip(v, k))
    return LocalTestSpec(
        m=p,
        weight_family=INDICATOR,
        budgets=lambda s: b,
        critical_values=lambda s: k,
        size_invariant=True,
    )


def uniformly_improved_spec(v, alpha, pool, delta=0.01):
    """Indicator spec with per-size shrunken allowances (lazily calibrated)."""
    v = tuple(int(x) for x in v)

    @lru_cache(maxsize=None)
    def plan_for(s):
        trunc = tuple(vi for vi in v if vi <= s)
        if not trunc:
            return None
        return two_step_k(trunc, alpha, delta=delta, p=s, pool=pool)

    def budgets(s):
        plan = plan_for(s)
        if plan is None:
            return ()
        return tuple(k + vv - 1 for vv, k in zip(plan.v, plan.k))

    def critical_values(s):
        plan = plan_for(s)
        return () if plan is None else tuple(plan.k)

    def certificates(s):
        plan = plan_for(s)
        return None if plan is None else plan.certificate

    return LocalTestSpec(
        m=len(v),
        weight_family=INDICATOR,
        budgets=budgets,
        critical_values=critical_values,
        certificates=certificates,
        size_invariant=False,
    )


def rank_spec(v, alpha, pool):
    """Rank-weighted spec: fixed budgets, per-size calibrated critical values."""
    v = tuple(int(x) for x in v)
    k = k_raw(v, alpha)
    b = tuple(ki + vi - 1 for vi, ki in zip(v, k))
    skeleton = LocalTestSpec(
        m=len(v),
        weight_family=RANK,
        budgets=lambda s: b,
        critical_values=None,
        size_invariant=False,
    )

    @lru_cache(maxsize=None)
    def calibrated(s):
        return calibrate_critical_values(s, skeleton, alpha, pool)

    return LocalTestSpec(
        m=len(v),
        weight_family=RANK,
        budgets=lambda s: b,
        critical_values=lambda s: calibrated(s)[0],
        certificates=lambda s: calibrated(s)[1],
        size_invariant=False,
    )


@lru_cache(maxsize=16)
def _cached_ui_spec(v, alpha, pool, delta):
    return uniformly_improved_spec(v, alpha, pool, delta=delta)


def kct_bound(R, stats, v, alpha, pool, delta=0.01):
    """Closed-testing bound under the per-size uniformly improved local test."""
    spec = _cached_ui_spec(tuple(int(x) for x in v), alpha, pool, delta)
    return shortcut_bound(R, stats, spec)
