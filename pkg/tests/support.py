"""Tiny shared helpers for building statistics objects inside tests."""

import numpy as np

from knockfdp.stats_core import RawStats, prepare


def from_values(*values):
    """PreparedStats from signed scores assigned to ids 1..n in order."""
    return prepare(RawStats(tuple((i, w) for i, w in enumerate(values, start=1))))


def random_stats(rng, p):
    """Distinct integer magnitudes 1..p in shuffled id order with random signs."""
    magnitudes = rng.permutation(np.arange(1, p + 1))
    signs = rng.choice((-1, 1), size=p)
    return from_values(*(magnitudes * signs).tolist())


def signal_stats(rng, p, pos_rate=0.85):
    """Like random_stats but with mostly-positive signs, so top-of-list runs of
    positives (and hence large reference sets) actually occur."""
    magnitudes = rng.permutation(np.arange(1, p + 1))
    signs = np.where(rng.random(p) < pos_rate, 1, -1)
    return from_values(*(magnitudes * signs).tolist())


def random_query(rng, p, size=None):
    """A random set of 1-based positions (possibly empty)."""
    if size is None:
        size = int(rng.integers(0, p + 1))
    return frozenset(int(i) for i in rng.choice(np.arange(1, p + 1), size, replace=False))


def early_query(rng, p, size=None):
    """A random position set biased toward small positions (large magnitudes),
    which is where query/reference-set overlap happens."""
    if size is None:
        size = int(rng.integers(1, p + 1))
    weights = 1.0 / (np.arange(1, p + 1) + 1.0)
    weights /= weights.sum()
    picked = rng.choice(np.arange(1, p + 1), size, replace=False, p=weights)
    return frozenset(int(i) for i in picked)
