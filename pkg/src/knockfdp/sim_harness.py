"""Synthetic sign-vector experiments: coverage checks and method comparison.

The generator never touches data: it draws the signed statistic vector
directly, with magnitudes p, p-1, ..., 1 and a sign that is +1 off the null
set and a fair coin flip on it.  Experiments then score each method's FDP
bound against the true false-discovery proportion computed from the known
nulls, over the nested candidate sets plus stratified random sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bounds import js_bound, kji_bound, kr_bound
from .calibration import VFamily, two_step_k, v_family
from .closed_testing import kct_bound
from .stats_core import RawStats, nested_sets, prepare, resolve_ids

JS_DEFAULT_K = 10


@dataclass(frozen=True)
class DirectWConfig:
    """Recipe for one synthetic vector: |W_i| = p - i + 1, coin-flip nulls."""

    p: int
    null_set: frozenset
    seed: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        object.__setattr__(self, "null_set", frozenset(int(i) for i in self.null_set))
        for i in self.null_set:
            if not 1 <= i <= self.p:
                raise ValueError(f"null id {i} outside [1, {self.p}]")


def generate_direct_w(config: DirectWConfig) -> RawStats:
    """Draw the signed statistics for one replication.

    Ids are 1..p with |W_i| = p - i + 1 (so ids coincide with prepared
    positions); non-null signs are +1 and null signs are independent fair
    coins from the config seed.  A full sign vector is drawn and then masked,
    so the flip consumed by coordinate i does not depend on the null pattern.
    """
    rng = np.random.default_rng(config.seed)
    flips = rng.integers(0, 2, size=config.p) * 2 - 1
    entries = tuple(
        (i, int(flips[i - 1] if i in config.null_set else 1) * (config.p - i + 1))
        for i in range(1, config.p + 1)
    )
    return RawStats(entries)


def direct_w_generator(p, null_set, seed):
    """Per-replication (stats, null positions) factory for the experiments.

    Replication r draws from an independent stream keyed by (seed, r), so any
    single replication can be reproduced without running the ones before it.
    """
    null_ids = frozenset(int(i) for i in null_set)

    def gen(rep):
        rep_seed = int(np.random.SeedSequence([seed, rep]).generate_state(1)[0])
        stats = prepare(generate_direct_w(DirectWConfig(p, null_ids, rep_seed)))
        return stats, resolve_ids(stats, null_ids)

    return gen


def true_fdp(query, null_positions) -> Fraction:
    """Exact false-discovery proportion of a position set against known nulls."""
    q = frozenset(query)
    return Fraction(len(q & frozenset(null_positions)), max(1, len(q)))


# --------------------------------------------------------------- binomial CI


def _binom_cdf(x, n, q):
    if x >= n or q <= 0.0:
        return 1.0
    if x < 0 or q >= 1.0:
        return 0.0
    lognf = math.lgamma(n + 1)
    total = 0.0
    for k in range(x + 1):
        logpmf = (
            lognf
            - math.lgamma(k + 1)
            - math.lgamma(n - k + 1)
            + k * math.log(q)
            + (n - k) * math.log1p(-q)
        )
        total += math.exp(logpmf)
    return min(total, 1.0)


def binom_ci(successes, trials, confidence=0.95):
    """Exact (Clopper-Pearson) two-sided interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials, trials >= 1")
    tail = (1.0 - confidence) / 2.0

    def bisect(keep_low):
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = (lo + hi) / 2.0
            if keep_low(mid):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2.0

    if successes == 0:
        lower = 0.0
    else:
        lower = bisect(lambda q: 1.0 - _binom_cdf(successes - 1, trials, q) < tail)
    if successes == trials:
        upper = 1.0
    else:
        upper = bisect(lambda q: _binom_cdf(successes, trials, q) >= tail)
    return lower, upper


# -------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregated coverage run for one method."""

    method: str
    reps: int
    alpha: float
    violations: int
    violation_ci: tuple
    mean_bounds: tuple
    mean_true_fdp: tuple
    seeds: tuple

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    @property
    def violation_rate(self):
        return self.violations / self.reps


def _as_fraction(value):
    if hasattr(value, "fdp_upper"):
        value = value.fdp_upper
    return value if isinstance(value, Fraction) else Fraction(value)


def stratified_queries(rng, stats, per_stratum=2, strata=(0.1, 0.25, 0.5, 0.75, 1.0)):
    """Uniform random position sets at several size strata."""
    out = []
    for frac in strata:
        size = max(1, round(frac * stats.p))
        for _ in range(per_stratum):
            picked = rng.choice(np.arange(1, stats.p + 1), size, replace=False)
            out.append(frozenset(int(i) for i in picked))
    return out


def coverage_experiment(
    generator,
    methods,
    reps,
    alpha,
    query_builder=stratified_queries,
    confidence=0.95,
    seed=0,
):
    """Frequency, per method, of some queried set's true FDP exceeding its bound.

    ``generator(rep)`` must return (PreparedStats, null position set);
    ``methods`` maps labels to callables ``(stats, query) -> bound`` where the
    bound is a number or anything with an ``fdp_upper``.  Each replication
    queries every nested set plus whatever ``query_builder(rng, stats)`` adds.

    Returns
    -------
    dict of label -> ExperimentResult
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    labels = list(methods)
    p = None
    bound_sums = {}
    fdp_sums = None
    violations = dict.fromkeys(labels, 0)
    for rep in range(reps):
        stats, nulls = generator(rep)
        if p is None:
            p = stats.p
            fdp_sums = [0.0] * p
            for label in labels:
                bound_sums[label] = [0.0] * p
        elif stats.p != p:
            raise ValueError("generator changed p between replications")
        nested = nested_sets(stats)
        rng = np.random.default_rng([seed, rep])
        extras = list(query_builder(rng, stats)) if query_builder else []
        fdps = {}
        for q in nested:
            if q not in fdps:
                fdps[q] = true_fdp(q, nulls)
        for i, r_i in enumerate(nested):
            fdp_sums[i] += float(fdps[r_i])
        for q in extras:
            if q not in fdps:
                fdps[q] = true_fdp(q, nulls)
        for label in labels:
            fn = methods[label]
            cache = {}

            def score(q):
                if q not in cache:
                    cache[q] = _as_fraction(fn(stats, q))
                return cache[q]

            violated = False
            for i, r_i in enumerate(nested):
                b = score(r_i)
                bound_sums[label][i] += float(b)
                if fdps[r_i] > b:
                    violated = True
            for q in extras:
                if fdps[q] > score(q):
                    violated = True
            violations[label] += violated
    return {
        label: ExperimentResult(
            method=label,
            reps=reps,
            alpha=alpha,
            violations=violations[label],
            violation_ci=binom_ci(violations[label], reps, confidence),
            mean_bounds=tuple(s / reps for s in bound_sums[label]),
            mean_true_fdp=tuple(s / reps for s in fdp_sums),
            seeds=(seed,),
        )
        for label in labels
    }


def comparison_experiment(generator, methods, reps):
    """Mean bound per nested set R_i for each method, plus the true FDP.

    Returns (fieldnames, rows) where each row is a dict with keys
    ``i``, ``set_size``, ``true_fdp`` and one column per method label, all
    averaged over replications; ready for csv.DictWriter.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    labels = list(methods)
    p = None
    size_sums = bound_sums = fdp_sums = None
    for rep in range(reps):
        stats, nulls = generator(rep)
        if p is None:
            p = stats.p
            size_sums = [0.0] * p
            fdp_sums = [0.0] * p
            bound_sums = {label: [0.0] * p for label in labels}
        elif stats.p != p:
            raise ValueError("generator changed p between replications")
        nested = nested_sets(stats)
        for i, r_i in enumerate(nested):
            size_sums[i] += len(r_i)
            fdp_sums[i] += float(true_fdp(r_i, nulls))
        for label in labels:
            fn = methods[label]
            cache = {}
            for i, r_i in enumerate(nested):
                if r_i not in cache:
                    cache[r_i] = float(_as_fraction(fn(stats, r_i)))
                bound_sums[label][i] += cache[r_i]
    fieldnames = ["i", "set_size", "true_fdp"] + labels
    rows = []
    for i in range(p):
        row = {
            "i": i + 1,
            "set_size": size_sums[i] / reps,
            "true_fdp": fdp_sums[i] / reps,
        }
        for label in labels:
            row[label] = bound_sums[label][i] / reps
        rows.append(row)
    return fieldnames, rows


# ----------------------------------------------------------- method registry


def make_methods(labels, alpha, p, pool=None, delta=0.01):
    """Bound evaluators for CLI-style method labels.

    Labels: ``kr``, ``js`` (or ``js-K`` with an explicit allowance K), and
    ``kji-a``..``kji-d`` / ``kct-a``..``kct-d`` for the four growth families.
    The plans behind kji labels are calibrated here, once, against ``pool``.
    """
    methods = {}
    for label in labels:
        head, _, suffix = label.lower().partition("-")
        if head == "kr" and not suffix:
            methods[label] = lambda stats, q, _a=alpha: kr_bound(stats, _a, q)
        elif head == "js":
            k = int(suffix) if suffix else JS_DEFAULT_K
            methods[label] = lambda stats, q, _k=k, _a=alpha: js_bound(stats, _k, _a, q)
        elif head in ("kji", "kct") and suffix in ("a", "b", "c", "d"):
            if pool is None:
                raise ValueError(f"method {label!r} needs a sign-path pool")
            v = v_family(VFamily(kind=suffix.upper(), cap=p))
            if head == "kji":
                plan = two_step_k(
                    v, alpha, delta=delta, p=p, pool=pool, family=suffix.upper()
                )
                methods[label] = lambda stats, q, _plan=plan: kji_bound(stats, _plan, q)
            else:
                methods[label] = (
                    lambda stats, q, _v=v, _a=alpha, _pl=pool, _d=delta: kct_bound(
                        q, stats, _v, _a, _pl, delta=_d
                    )
                )
        else:
            raise ValueError(f"unknown method label {label!r}")
    return methods
