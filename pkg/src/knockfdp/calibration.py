"""Calibration of (v, k) plans for joint sign-path guarantees.

A plan pairs a strictly increasing vector v of negative-arrival counts with a
vector k of allowances such that, for i.i.d. fair signs, the number of
positives arriving before the v_i-th negative stays below k_i for all i
simultaneously with probability at least 1 - alpha.  This module provides the
exact single-component tail, the closed-form k vector matching the
prefix-sweep bound, the four standard v growth families, and the two-step
Monte-Carlo shrink that exhausts the alpha level over a shared pool of
simulated sign paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InfeasibleK, InvalidStepSize

# rows per chunk are fixed (not memory-adaptive) so pools are bit-for-bit
# reproducible from (nsim, path_length, seed) on any machine
_CHUNK_CELLS = 8_000_000


def c_alpha(alpha):
    """Prefix-bound rate constant log(1/alpha) / log(2 - alpha)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    return math.log(1.0 / alpha) / math.log(2.0 - alpha)


def nb_upper_tail(v, k):
    """P(N >= k) where N counts +1s before the v-th -1 in fair coin flips.

    Exact negative-binomial tail, evaluated with the term recurrence
    t_{i+1} = t_i * (i+v) / (2(i+1)) starting from t_0 = 2^{-v}.  Terms are
    carried as (mantissa, base-2 exponent) pairs so the recurrence survives
    far beyond float underflow (v up to ~1e4); absolute error <= 1e-12.

    Parameters
    ----------
    v : int
        Number of negatives to wait for, >= 1.
    k : int
        Tail cutoff, >= 0.
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 1.0
    mant, e2 = 1.0, -v

    def renorm(m, e):
        if m < 1e-150 or m > 1e150:
            frac, de = math.frexp(m)
            return frac, e + de
        return m, e

    if k - 1 < v:
        # lower tail has the fewer terms; return its complement
        total = 0.0
        for i in range(k):
            total += math.ldexp(mant, e2)
            mant *= (i + v) / (2.0 * (i + 1))
            mant, e2 = renorm(mant, e2)
        return min(max(1.0 - total, 0.0), 1.0)
    # advance to t_k, then sum upward; ratios are < 1 and decreasing there,
    # so a geometric bound on the remainder gives a clean stopping rule
    for i in range(k):
        mant *= (i + v) / (2.0 * (i + 1))
        mant, e2 = renorm(mant, e2)
    total = 0.0
    i = k
    while True:
        term = math.ldexp(mant, e2)
        total += term
        ratio = (i + v) / (2.0 * (i + 1))
        if term * ratio / (1.0 - ratio) < 1e-16:
            return min(total, 1.0)
        mant *= ratio
        mant, e2 = renorm(mant, e2)
        i += 1


def js_v(k, alpha, p):
    """Largest v in [p] whose exact tail at k stays within alpha.

    Raises
    ------
    InfeasibleK
        If even v=1 exceeds alpha (k too small for the requested level).
    """
    if k < 1:
        raise InfeasibleK(f"k must be >= 1, got {k}")
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if nb_upper_tail(1, k) > alpha:
        raise InfeasibleK(f"no v in [1, {p}] satisfies the tail constraint for k={k}")
    best = 1
    for v in range(2, p + 1):
        if nb_upper_tail(v, k) > alpha:
            break
        best = v
    return best


def _scan_critical_sequence(v_seq, alpha):
    """k values from the critical-sequence minimum, with achieving indices.

    The sequence c_j = floor(c(1+j)/(1+c)) + 1 has level j - c_j + 1 sweeping
    upward in unit steps, so the first j reaching each target v gives the
    minimal c_j there.  Floors are taken in exact rational arithmetic on the
    float value of c so the closed form and this scan cannot drift apart.
    """
    c = Fraction(c_alpha(alpha))
    beta = c / (1 + c)
    targets = list(v_seq)
    out_k, out_j = [], []
    ti, j = 0, 0
    while ti < len(targets):
        j += 1
        cj = int(beta * (1 + j)) + 1
        if j - cj + 1 == targets[ti]:
            out_k.append(cj)
            out_j.append(j)
            ti += 1
    return tuple(out_k), tuple(out_j)


def _validate_v(v):
    v = tuple(int(x) for x in v)
    if not v:
        raise ValueError("v must be nonempty")
    if v[0] < 1:
        raise ValueError("v entries must be >= 1")
    if any(b <= a for a, b in zip(v, v[1:])):
        raise ValueError("v must be strictly increasing")
    return v


def k_raw(v, alpha):
    """Closed-form allowance vector floor(c(alpha) * v_i) + 1.

    Provably identical to :func:`k_raw_scan`; both are exposed and the test
    suite cross-checks them on a large grid.
    """
    v = _validate_v(v)
    c = Fraction(c_alpha(alpha))
    return tuple(int(c * vi) + 1 for vi in v)


def k_raw_scan(v, alpha):
    """Allowance vector via the critical-sequence minimum (dual formula)."""
    return _scan_critical_sequence(_validate_v(v), alpha)[0]


@dataclass(frozen=True)
class VFamily:
    """Recipe for a v vector: a named growth curve truncated below `cap`.

    kind: "A" linear (1,2,3,...), "B" half-squares (1,2,4,8,12,18,...),
    "C" Fibonacci (1,2,3,5,8,...), "D" doubling (1,2,4,8,...), or "explicit".
    """

    kind: str
    cap: int | None = None
    explicit_values: tuple | None = None


def v_family(spec):
    """Materialize a VFamily into a strictly increasing tuple of v values."""
    if spec.kind == "explicit":
        return _validate_v(spec.explicit_values)
    if spec.cap is None or spec.cap < 2:
        raise ValueError("cap must be >= 2 for generated families")
    gens = {
        "A": lambda i: i,
        "B": lambda i: max(1, i * i // 2),
        "C": None,  # Fibonacci handled below
        "D": lambda i: 2 ** (i - 1),
    }
    if spec.kind not in gens:
        raise ValueError(f"unknown family kind {spec.kind!r}")
    values = []
    if spec.kind == "C":
        a, b = 1, 2
        while a < spec.cap:
            values.append(a)
            a, b = b, a + b
    else:
        fn = gens[spec.kind]
        i = 1
        while True:
            val = fn(i)
            if val >= spec.cap:
                break
            if not values or val > values[-1]:
                values.append(val)
            i += 1
    if not values:
        raise ValueError("cap too small: family is empty")
    return tuple(values)


@dataclass(frozen=True)
class Certificate:
    """Audit record for a plan's joint-probability guarantee."""

    probability: float
    nsim: int | None = None
    seed: int | None = None
    exact: bool = False

    def as_dict(self):
        return {
            "prob": self.probability,
            "nsim": self.nsim,
            "seed": self.seed,
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            probability=d["prob"],
            nsim=d.get("nsim"),
            seed=d.get("seed"),
            exact=bool(d.get("exact", False)),
        )


@dataclass(frozen=True)
class VKPlan:
    """A calibrated (v, k) pair with its level, horizon, and certificate."""

    v: tuple
    k: tuple
    alpha: float | None
    horizon_p: int
    certificate: Certificate | None = None
    family: str | None = None

    def __post_init__(self):
        v = _validate_v(self.v)
        k = tuple(int(x) for x in self.k)
        if len(k) != len(v):
            raise ValueError("v and k must have equal length")
        if k[0] < 1:
            raise ValueError("k entries must be >= 1")
        if any(b < a for a, b in zip(k, k[1:])):
            raise ValueError("k must be nondecreasing")
        if self.horizon_p < v[-1]:
            raise ValueError("horizon_p must be at least max(v)")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "k", k)

    @property
    def m(self):
        return len(self.v)

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "p": self.horizon_p,
            "v": list(self.v),
            "k": list(self.k),
            "family": self.family,
            "certificate": self.certificate.as_dict() if self.certificate else None,
        }

    @classmethod
    def from_dict(cls, d):
        cert = d.get("certificate")
        return cls(
            v=tuple(d["v"]),
            k=tuple(d["k"]),
            alpha=d.get("alpha"),
            horizon_p=int(d["p"]),
            certificate=Certificate.from_dict(cert) if cert else None,
            family=d.get("family"),
        )


def js_plan(k, alpha, p):
    """Single-component plan at the largest feasible v, with an exact certificate."""
    v = js_v(k, alpha, p)
    cert = Certificate(probability=1.0 - nb_upper_tail(v, k), exact=True)
    return VKPlan(v=(v,), k=(int(k),), alpha=alpha, horizon_p=p, certificate=cert)


@dataclass(frozen=True, eq=False)
class SignPathPool:
    """Simulated i.i.d. fair-sign paths with cached negative-arrival positions.

    ``stop_positions[path, v-1]`` holds v + N(v), i.e. the arrival position of
    the v-th negative, virtually extended past the horizon when the path has
    fewer than v negatives.  Any event of the form "at most c positives among
    the first L flips" then reduces to one column comparison, which is what
    every calibration in this package needs.  The raw signs are also kept
    (bit-packed) for weight families that need more than prefix counts.
    """

    nsim: int
    path_length: int
    seed: int
    stop_positions: np.ndarray
    signs_packed: np.ndarray

    def stopped_counts(self, v):
        """N(v) for every path: positives before the v-th negative."""
        return self.stop_positions[:, v - 1].astype(np.int64) - v

    def prefix_event(self, length, max_positives):
        """Boolean mask: at most `max_positives` positives in the first `length` flips."""
        if not 1 <= length <= self.path_length:
            raise ValueError("length outside [1, path_length]")
        if max_positives >= length:
            return np.ones(self.nsim, dtype=bool)
        if max_positives < 0:
            return np.zeros(self.nsim, dtype=bool)
        need_neg = length - int(max_positives)
        return self.stop_positions[:, need_neg - 1] <= length

    def sign_matrix(self, columns=None, rows=None):
        """Unpack signs to a +-1 int8 matrix (columns then rows sliced)."""
        packed = self.signs_packed if rows is None else self.signs_packed[rows]
        bits = np.unpackbits(packed, axis=1, count=self.path_length)
        if columns is not None:
            bits = bits[:, :columns]
        return (bits.astype(np.int8) * 2) - 1


def _stops_from_bits(bits):
    """Arrival position of every v-th negative per row (virtually extended).

    ``bits`` holds 1 for +1 and 0 for -1.  Rows with fewer than v negatives
    get the pad value path_length + v - n_neg, which compares consistently in
    every prefix-event reduction.
    """
    length = bits.shape[1]
    neg = bits == 0
    n_neg = neg.sum(axis=1)
    v_grid = np.arange(1, length + 1, dtype=np.int64)
    stop = (length - n_neg)[:, None] + v_grid[None, :]
    rr, cc = np.nonzero(neg)
    ranks = neg.cumsum(axis=1)[rr, cc]
    stop[rr, ranks - 1] = cc + 1
    return stop


def _stop_dtype(path_length):
    return np.int16 if 2 * path_length + 1 <= np.iinfo(np.int16).max else np.int32


def build_pool(nsim, path_length, seed):
    """Simulate the pool; chunked but deterministic in (nsim, path_length, seed)."""
    if nsim < 1 or path_length < 1:
        raise ValueError("nsim and path_length must be >= 1")
    dtype = _stop_dtype(path_length)
    stop = np.empty((nsim, path_length), dtype=dtype)
    packed = np.empty((nsim, (path_length + 7) // 8), dtype=np.uint8)
    rng = np.random.default_rng(seed)
    chunk = max(1, _CHUNK_CELLS // path_length)
    start = 0
    while start < nsim:
        stop_row = min(nsim, start + chunk)
        bits = rng.integers(0, 2, size=(stop_row - start, path_length), dtype=np.uint8)
        packed[start:stop_row] = np.packbits(bits, axis=1)
        stop[start:stop_row] = _stops_from_bits(bits).astype(dtype)
        start = stop_row
    return SignPathPool(
        nsim=nsim,
        path_length=path_length,
        seed=seed,
        stop_positions=stop,
        signs_packed=packed,
    )


def pool_from_signs(signs, seed=None):
    """Wrap an explicit +-1 matrix (one row per path) as a SignPathPool.

    Mostly for exhaustive tests that need every sign sequence rather than a
    random sample.
    """
    signs = np.asarray(signs)
    if signs.ndim != 2 or signs.shape[0] < 1 or signs.shape[1] < 1:
        raise ValueError("signs must be a nonempty 2-D matrix")
    if not np.isin(signs, (-1, 1)).all():
        raise ValueError("signs must be +-1")
    bits = (signs > 0).astype(np.uint8)
    return SignPathPool(
        nsim=signs.shape[0],
        path_length=signs.shape[1],
        seed=seed,
        stop_positions=_stops_from_bits(bits).astype(_stop_dtype(signs.shape[1])),
        signs_packed=np.packbits(bits, axis=1),
    )


def joint_acceptance_mask(pool, v, k, horizon=None):
    """Per-path indicator of N(v_i) <= k_i - 1 for all i, at the given horizon."""
    horizon = pool.path_length if horizon is None else int(horizon)
    if not 1 <= horizon <= pool.path_length:
        raise ValueError("horizon outside [1, path_length]")
    if len(v) != len(k):
        raise ValueError("v and k must have equal length")
    if max(v) > horizon:
        raise ValueError("max(v) exceeds the horizon")
    mask = np.ones(pool.nsim, dtype=bool)
    for vi, ki in zip(v, k):
        length = min(horizon, vi + ki - 1)
        mask &= pool.prefix_event(length, ki - 1)
    return mask


def estimate_joint_prob(pool, v, k, horizon=None):
    """Fraction of pool paths satisfying the joint constraint."""
    return float(joint_acceptance_mask(pool, v, k, horizon).mean())


def two_step_k(v, alpha, delta=0.01, p=None, pool=None, family=None):
    """Monte-Carlo shrink of the allowance vector, exhausting the alpha level.

    Step 1 lowers the rate constant in `delta` decrements as long as the
    implied k vector keeps the estimated joint probability at or above
    1 - alpha; step 2 then greedily shrinks each k_i in increasing i, holding
    the later components at their step-1 values.  Both searches exploit
    monotonicity on the fixed pool, so binary search reproduces the linear
    scans exactly.

    Parameters
    ----------
    v : strictly increasing positive ints
    alpha : float in (0, 1)
    delta : float
        Step-1 decrement; must be > 0.
    p : int, optional
        Horizon; defaults to the pool's path length (must not exceed it).
    pool : SignPathPool
    family : str, optional
        Label recorded on the returned plan.

    Returns
    -------
    VKPlan
        With a Monte-Carlo certificate (estimate, nsim, pool seed).
    """
    if pool is None:
        raise ValueError("a SignPathPool is required")
    if not (isinstance(delta, (int, float)) and math.isfinite(delta) and delta > 0):
        raise InvalidStepSize(f"delta must be > 0, got {delta!r}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    v = _validate_v(v)
    horizon = pool.path_length if p is None else int(p)
    if not 1 <= horizon <= pool.path_length:
        raise ValueError("p must be within the pool's path length")
    if v[-1] > horizon:
        raise ValueError("max(v) exceeds the horizon")

    nsim = pool.nsim
    # point-estimate adjudication on the shared pool, done in counts
    need = math.ceil((1.0 - alpha) * nsim - 1e-9)
    cfrac = Fraction(c_alpha(alpha))
    dfrac = Fraction(delta)
    _, jstar = _scan_critical_sequence(v, alpha)

    def k_for(cp):
        return [min(int(cp * (1 + j) / (1 + cp)) + 1, horizon + 1) for j in jstar]

    def count_at(kvec):
        return int(joint_acceptance_mask(pool, v, kvec, horizon).sum())

    quot = cfrac / dfrac
    n_max = int(quot) - (1 if quot == int(quot) else 0)
    if count_at(k_for(cfrac)) < need:
        # the untouched closed-form vector carries an exact guarantee; under
        # Monte-Carlo noise this branch is all but unreachable, but never
        # search below it if the pool disagrees
        n_star = 0
    else:
        lo, hi = 0, n_max
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if count_at(k_for(cfrac - mid * dfrac)) >= need:
                lo = mid
            else:
                hi = mid - 1
        n_star = lo
    k1 = k_for(cfrac - n_star * dfrac)

    m = len(v)

    def component(i, ki):
        length = min(horizon, v[i] + ki - 1)
        return pool.prefix_event(length, ki - 1)

    suffix = [np.ones(nsim, dtype=bool)]
    for i in range(m - 1, 0, -1):
        suffix.append(suffix[-1] & component(i, k1[i]))
    suffix.reverse()  # suffix[i] = AND over components j > i at step-1 values

    prefix = np.ones(nsim, dtype=bool)
    k2 = []
    for i in range(m):
        base = prefix & suffix[i]

        def feasible(ki):
            return int((base & component(i, ki)).sum()) >= need

        lo, hi = 1, k1[i]
        if not feasible(hi):
            k2.append(hi)
        else:
            while lo < hi:
                mid = (lo + hi) // 2
                if feasible(mid):
                    hi = mid
                else:
                    lo = mid + 1
            k2.append(lo)
        prefix &= component(i, k2[i])

    k_final = []
    for ki in k2:
        k_final.append(max(ki, k_final[-1]) if k_final else ki)
    final_count = count_at(k_final)
    cert = Certificate(
        probability=final_count / nsim, nsim=nsim, seed=pool.seed, exact=False
    )
    return VKPlan(
        v=v,
        k=tuple(k_final),
        alpha=alpha,
        horizon_p=horizon,
        certificate=cert,
        family=family,
    )
