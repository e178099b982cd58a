"""Ingestion and elementary operations on knockoff statistic vectors.

A raw vector of signed statistics is preprocessed into a canonical form:
zero entries are dropped (and remembered), the rest are sorted by decreasing
magnitude with a recorded tie-break rule, and every later computation refers
to 1-based positions in that ordering.  The sign sequence of the prepared
vector is all downstream methods ever look at, together with the magnitudes
for thresholding.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import DroppedZeroId, EmptyAfterPreprocessing, UnknownOriginalId

STABLE = "stable_by_input_order"
SEEDED = "seeded_random"
_POLICIES = (STABLE, SEEDED)


@dataclass(frozen=True)
class RawStats:
    """Unprepared knockoff statistics keyed by caller-supplied labels.

    Parameters
    ----------
    entries : tuple of (id, w) pairs
        Labels may be any hashable value (strings from CSV, ints from
        simulations); duplicates are rejected.  Values must be finite.
    """

    entries: tuple

    def __post_init__(self):
        seen = set()
        for original_id, w in self.entries:
            if original_id in seen:
                raise ValueError(f"duplicate id {original_id!r}")
            seen.add(original_id)
            if not math.isfinite(w):
                raise ValueError(f"non-finite statistic for id {original_id!r}: {w!r}")


def read_w_csv(source) -> RawStats:
    """Read statistics from a CSV file (path or file object) with header ``id,w``."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames[:2]] != ["id", "w"]:
        raise ValueError("CSV must start with header 'id,w'")
    entries = [(row["id"], float(row["w"])) for row in reader]
    return RawStats(tuple(entries))


def read_w_json(source) -> RawStats:
    """Read statistics from a JSON array of ``{"id": ..., "w": ...}`` objects."""
    if hasattr(source, "read"):
        data = json.load(source)
    elif isinstance(source, (list, tuple)):
        data = source
    else:
        with open(source) as fh:
            data = json.load(fh)
    entries = [(item["id"], float(item["w"])) for item in data]
    return RawStats(tuple(entries))


@dataclass(frozen=True)
class PreparedStats:
    """Statistics sorted by decreasing magnitude, zeros removed.

    Attributes
    ----------
    magnitudes : tuple of float
        Strictly decreasing positive |W| values; position i (1-based) holds
        the i-th largest magnitude.
    signs : tuple of int
        +1/-1 sign of the statistic at each position.
    original_ids : tuple
        Position -> original id mapping (a bijection onto retained ids).
    tie_break_policy : str
        Either ``stable_by_input_order`` or ``seeded_random``.
    dropped_ids : tuple
        Ids whose statistic was exactly zero, in input order.
    seed : int or None
        Seed used by the ``seeded_random`` policy, recorded for replay.
    """

    magnitudes: tuple
    signs: tuple
    original_ids: tuple
    tie_break_policy: str = STABLE
    dropped_ids: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        p = len(self.magnitudes)
        if p == 0:
            raise EmptyAfterPreprocessing("no nonzero statistics")
        if len(self.signs) != p or len(self.original_ids) != p:
            raise ValueError("magnitudes, signs and original_ids must have equal length")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")
        if any(m <= 0 for m in self.magnitudes):
            raise ValueError("magnitudes must be positive")
        if any(a <= b for a, b in zip(self.magnitudes, self.magnitudes[1:])):
            raise ValueError("magnitudes must be strictly decreasing")
        if self.tie_break_policy not in _POLICIES:
            raise ValueError(f"unknown tie-break policy {self.tie_break_policy!r}")

    @property
    def p(self) -> int:
        return len(self.magnitudes)

    @property
    def dropped_zero_count(self) -> int:
        return len(self.dropped_ids)

    @cached_property
    def negative_positions(self) -> tuple:
        """Positions with negative sign, in increasing order."""
        return tuple(i for i, s in enumerate(self.signs, start=1) if s < 0)

    @cached_property
    def positive_positions(self) -> tuple:
        """Positions with positive sign, in increasing order."""
        return tuple(i for i, s in enumerate(self.signs, start=1) if s > 0)

    @cached_property
    def _position_by_id(self) -> dict:
        return {oid: i for i, oid in enumerate(self.original_ids, start=1)}

    def position_of(self, original_id) -> int:
        """1-based position of an original id; distinct error for dropped zeros."""
        try:
            return self._position_by_id[original_id]
        except KeyError:
            if original_id in self.dropped_ids:
                raise DroppedZeroId(
                    f"id {original_id!r} had a zero statistic and was dropped"
                ) from None
            raise UnknownOriginalId(f"unknown id {original_id!r}") from None

    def signed(self, i: int) -> float:
        """Signed statistic W at position i."""
        return self.signs[i - 1] * self.magnitudes[i - 1]


def prepare(raw: RawStats, policy: str = STABLE, seed: int | None = None) -> PreparedStats:
    """Sort by decreasing |W|, drop zeros, break magnitude ties per policy.

    Parameters
    ----------
    raw : RawStats
    policy : str
        ``stable_by_input_order`` keeps earlier input first among equal |W|;
        ``seeded_random`` permutes ties deterministically given `seed`.
    seed : int, optional
        Required only for the seeded policy.

    Returns
    -------
    PreparedStats

    Raises
    ------
    EmptyAfterPreprocessing
        If every statistic is zero (or the input is empty).
    """
    if policy not in _POLICIES:
        raise ValueError(f"unknown tie-break policy {policy!r}")
    dropped = tuple(oid for oid, w in raw.entries if w == 0)
    kept = [(oid, w, idx) for idx, (oid, w) in enumerate(raw.entries) if w != 0]
    if not kept:
        raise EmptyAfterPreprocessing("all statistics are zero")
    if policy == SEEDED:
        rng = random.Random(seed)
        jitter = [rng.random() for _ in kept]
        order = sorted(range(len(kept)), key=lambda j: (-abs(kept[j][1]), jitter[j]))
    else:
        order = sorted(range(len(kept)), key=lambda j: (-abs(kept[j][1]), kept[j][2]))
    magnitudes, signs, ids = [], [], []
    for j in order:
        oid, w, _ = kept[j]
        magnitudes.append(abs(w))
        signs.append(1 if w > 0 else -1)
        ids.append(oid)
    # Equal magnitudes cannot be kept strictly decreasing as-is; nudge each run
    # of ties downward by epsilon steps so the strict ordering invariant holds
    # while the sign sequence (all that matters downstream) is untouched.
    for j in range(1, len(magnitudes)):
        if magnitudes[j] >= magnitudes[j - 1]:
            magnitudes[j] = math.nextafter(magnitudes[j - 1], 0.0)
            if magnitudes[j] <= 0:
                raise ValueError("could not break magnitude ties strictly")
    return PreparedStats(
        magnitudes=tuple(magnitudes),
        signs=tuple(signs),
        original_ids=tuple(ids),
        tie_break_policy=policy,
        dropped_ids=dropped,
        seed=seed if policy == SEEDED else None,
    )


def as_index_set(members, p: int) -> frozenset:
    """Validate and normalize a collection of 1-based positions."""
    out = frozenset(int(i) for i in members)
    for i in out:
        if not 1 <= i <= p:
            raise ValueError(f"position {i} outside [1, {p}]")
    return out


def resolve_ids(stats: PreparedStats, original_ids, coerce: bool = False) -> frozenset:
    """Translate original ids into positions; the inverse of `originals_of`.

    Raises DroppedZeroId for ids removed during preprocessing and
    UnknownOriginalId for ids never seen, so callers at the serialization
    boundary fail loudly instead of silently scoring the wrong set.  With
    ``coerce``, an id that misses as-is is retried under int/str conversion
    (CSV uploads carry string ids while JSON queries usually carry numbers);
    dropped-zero hits are never coerced away.
    """
    positions = []
    for raw in original_ids:
        try:
            positions.append(stats.position_of(raw))
        except DroppedZeroId:
            raise
        except UnknownOriginalId:
            alt = None
            if coerce and isinstance(raw, str):
                try:
                    alt = int(raw)
                except ValueError:
                    pass
            elif coerce and isinstance(raw, int):
                alt = str(raw)
            if alt is None:
                raise
            positions.append(stats.position_of(alt))
    return frozenset(positions)


def originals_of(stats: PreparedStats, positions) -> list:
    """Original ids for a set of positions, ordered by position."""
    return [stats.original_ids[i - 1] for i in sorted(as_index_set(positions, stats.p))]


def threshold(stats: PreparedStats, v: int) -> float:
    """Magnitude of the v-th negative statistic; min |W| when there are fewer.

    This is the largest |W_i| such that exactly v statistics with |W_j| >= |W_i|
    are negative.
    """
    if v < 1:
        raise ValueError("v must be >= 1")
    negs = stats.negative_positions
    if v <= len(negs):
        return stats.magnitudes[negs[v - 1] - 1]
    return stats.magnitudes[-1]


def _cutoff_position(stats: PreparedStats, v: int) -> int:
    """Position of the v-th negative, or p when fewer than v negatives exist."""
    negs = stats.negative_positions
    return negs[v - 1] if v <= len(negs) else stats.p


def reference_set(stats: PreparedStats, v: int) -> frozenset:
    """Positions with W_i >= threshold(v): the positives above the v-th negative."""
    if v < 1:
        raise ValueError("v must be >= 1")
    cut = _cutoff_position(stats, v)
    return frozenset(i for i in stats.positive_positions if i <= cut)


def nested_set(stats: PreparedStats, i: int) -> frozenset:
    """R_i = positions of positive statistics among the i largest magnitudes."""
    if not 1 <= i <= stats.p:
        raise ValueError(f"i must be in [1, {stats.p}]")
    return frozenset(j for j in stats.positive_positions if j <= i)


def nested_sets(stats: PreparedStats) -> list:
    """All nested candidate sets R_1 ... R_p (nondecreasing under inclusion)."""
    out = []
    current = []
    pos = set(stats.positive_positions)
    for i in range(1, stats.p + 1):
        if i in pos:
            current.append(i)
        out.append(frozenset(current))
    return out


def fdp_hat(stats: PreparedStats, i: int) -> Fraction:
    """Knockoff FDP estimate (1 + #negatives up to i) / max(|R_i|, 1)."""
    if not 1 <= i <= stats.p:
        raise ValueError(f"i must be in [1, {stats.p}]")
    neg = sum(1 for s in stats.signs[:i] if s < 0)
    r = i - neg
    return Fraction(1 + neg, max(r, 1))


def knockoff_filter_select(stats: PreparedStats, q: float) -> frozenset:
    """Largest nested set with fdp_hat <= q (the knockoff filter's selection)."""
    best = frozenset()
    neg = 0
    for i in range(1, stats.p + 1):
        if stats.signs[i - 1] < 0:
            neg += 1
        if Fraction(1 + neg, max(i - neg, 1)) <= q:
            best = nested_set(stats, i)
    return best
