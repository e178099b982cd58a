from fractions import Fraction

import mpmath
import numpy as np
import pytest

import support
from knockfdp import sim_harness as sh
from knockfdp.calibration import build_pool
from knockfdp.stats_core import nested_sets, prepare


# ---------------------------------------------------------------- generator


def test_direct_w_no_nulls_is_all_positive():
    raw = sh.generate_direct_w(sh.DirectWConfig(6, frozenset(), seed=1))
    assert raw.entries == tuple((i, 6 - i + 1) for i in range(1, 7))


def test_direct_w_magnitudes_and_nonnull_signs():
    cfg = sh.DirectWConfig(15, frozenset({2, 3, 11}), seed=9)
    raw = sh.generate_direct_w(cfg)
    for i, w in raw.entries:
        assert abs(w) == 15 - i + 1
        if i not in cfg.null_set:
            assert w > 0


def test_direct_w_ids_equal_positions_after_prepare():
    stats = prepare(sh.generate_direct_w(sh.DirectWConfig(10, frozenset({1, 5}), 3)))
    assert stats.original_ids == tuple(range(1, 11))


def test_direct_w_determinism_and_null_validation():
    cfg = sh.DirectWConfig(8, frozenset({4}), seed=42)
    assert sh.generate_direct_w(cfg) == sh.generate_direct_w(cfg)
    with pytest.raises(ValueError):
        sh.DirectWConfig(8, frozenset({0}), seed=1)
    with pytest.raises(ValueError):
        sh.DirectWConfig(8, frozenset({9}), seed=1)


def test_null_sign_frequencies_pass_chi_square():
    # coin-flip validity: per null coordinate, signs across replications are
    # fair; chi-square over the null coordinates must not reject at 0.001
    nulls = frozenset(range(3, 9))
    gen = sh.direct_w_generator(12, nulls, seed=77)
    reps = 400
    pos_counts = dict.fromkeys(nulls, 0)
    for rep in range(reps):
        stats, null_positions = gen(rep)
        assert null_positions == nulls  # ids == positions in this scenario
        for i in nulls:
            if stats.signs[i - 1] > 0:
                pos_counts[i] += 1
        for i in set(range(1, 13)) - nulls:
            assert stats.signs[i - 1] > 0
    chi2 = sum(4.0 * (c - reps / 2.0) ** 2 / reps for c in pos_counts.values())
    df = len(nulls)
    p_value = float(mpmath.gammainc(df / 2.0, chi2 / 2.0, mpmath.inf, regularized=True))
    assert p_value > 0.001


def test_generator_streams_are_rep_addressable():
    gen = sh.direct_w_generator(20, frozenset(range(1, 21)), seed=5)
    a1, _ = gen(7)
    gen2 = sh.direct_w_generator(20, frozenset(range(1, 21)), seed=5)
    a2, _ = gen2(7)
    assert a1.signs == a2.signs
    b, _ = gen(8)
    assert a1.signs != b.signs  # overwhelmingly likely at p=20


# ----------------------------------------------------------------- true FDP


def test_true_fdp_hand_cases():
    assert sh.true_fdp(frozenset(), {1, 2}) == 0
    assert sh.true_fdp({1, 2, 3}, {2}) == Fraction(1, 3)
    assert sh.true_fdp({4, 5}, {1, 2, 3}) == 0
    assert sh.true_fdp({1, 2}, {1, 2, 9}) == 1


# -------------------------------------------------------------- binomial CI


def test_binom_ci_closed_forms_at_the_edges():
    n = 20
    lo, hi = sh.binom_ci(0, n)
    assert lo == 0.0
    assert hi == pytest.approx(1.0 - 0.025 ** (1.0 / n), abs=1e-9)
    lo, hi = sh.binom_ci(n, n)
    assert hi == 1.0
    assert lo == pytest.approx(0.025 ** (1.0 / n), abs=1e-9)


def test_binom_ci_endpoints_satisfy_beta_identities():
    # Clopper-Pearson endpoints solve exact binomial tail equations; verify
    # against mpmath's regularized incomplete beta, an independent route.
    x, n = 7, 50
    lo, hi = sh.binom_ci(x, n, confidence=0.9)
    upper_tail_at_lo = float(mpmath.betainc(x, n - x + 1, 0, lo, regularized=True))
    lower_tail_at_hi = float(
        mpmath.betainc(n - x, x + 1, 0, 1 - hi, regularized=True)
    )
    assert upper_tail_at_lo == pytest.approx(0.05, abs=1e-9)
    assert lower_tail_at_hi == pytest.approx(0.05, abs=1e-9)
    assert lo < x / n < hi


def test_binom_ci_validation():
    with pytest.raises(ValueError):
        sh.binom_ci(3, 2)
    with pytest.raises(ValueError):
        sh.binom_ci(-1, 5)


# ---------------------------------------------------------- coverage runner


def oracle_one(stats, query):
    return Fraction(1)


def oracle_zero(stats, query):
    return Fraction(0)


def test_coverage_trivial_oracles_under_global_null():
    gen = sh.direct_w_generator(12, frozenset(range(1, 13)), seed=3)
    out = sh.coverage_experiment(
        gen, {"one": oracle_one, "zero": oracle_zero}, reps=30, alpha=0.05, seed=1
    )
    assert out["one"].violations == 0
    # every nonempty query has FDP 1 > 0 under the global null, and the
    # stratified extras are always nonempty
    assert out["zero"].violations == 30
    assert out["zero"].violation_rate == 1.0
    lo, hi = out["one"].violation_ci
    assert lo == 0.0 and hi < 0.2


def test_coverage_no_nulls_means_zero_fdp():
    gen = sh.direct_w_generator(10, frozenset(), seed=4)
    out = sh.coverage_experiment(gen, {"zero": oracle_zero}, reps=5, alpha=0.05)
    assert out["zero"].violations == 0
    assert out["zero"].mean_true_fdp == tuple([0.0] * 10)


def test_coverage_is_reproducible():
    gen = sh.direct_w_generator(10, frozenset({1, 2, 3}), seed=6)
    methods = sh.make_methods(["kr"], alpha=0.05, p=10)
    a = sh.coverage_experiment(gen, methods, reps=10, alpha=0.05, seed=2)
    b = sh.coverage_experiment(gen, methods, reps=10, alpha=0.05, seed=2)
    assert a["kr"].mean_bounds == b["kr"].mean_bounds
    assert a["kr"].violations == b["kr"].violations


def test_coverage_kr_smoke_level():
    gen = sh.direct_w_generator(12, frozenset(range(1, 13)), seed=8)
    methods = sh.make_methods(["kr"], alpha=0.05, p=12)
    out = sh.coverage_experiment(gen, methods, reps=80, alpha=0.05, seed=3)
    slack = 0.05 + 3 * (0.05 * 0.95 / 80) ** 0.5
    assert out["kr"].violation_rate <= slack


# -------------------------------------------------------- comparison runner


def test_comparison_rows_shape_and_determinism():
    gen = sh.direct_w_generator(9, frozenset({2, 5}), seed=11)
    methods = {"one": oracle_one, "kr": sh.make_methods(["kr"], 0.05, 9)["kr"]}
    fields, rows = sh.comparison_experiment(gen, methods, reps=3)
    assert fields == ["i", "set_size", "true_fdp", "one", "kr"]
    assert [row["i"] for row in rows] == list(range(1, 10))
    assert all(row["one"] == 1.0 for row in rows)
    assert all(0.0 <= row["kr"] <= 1.0 for row in rows)
    _, rows_again = sh.comparison_experiment(gen, methods, reps=3)
    assert rows == rows_again


def test_comparison_set_sizes_track_positives():
    gen = sh.direct_w_generator(8, frozenset(), seed=12)  # all positive signs
    _, rows = sh.comparison_experiment(gen, {"one": oracle_one}, reps=2)
    assert [row["set_size"] for row in rows] == [float(i) for i in range(1, 9)]
    assert all(row["true_fdp"] == 0.0 for row in rows)


# ----------------------------------------------------------- method registry


def test_make_methods_labels_and_validation():
    with pytest.raises(ValueError):
        sh.make_methods(["nope"], 0.05, 10)
    with pytest.raises(ValueError):
        sh.make_methods(["kji-b"], 0.05, 10)  # pool required
    methods = sh.make_methods(["kr", "js", "js-5"], 0.05, 30)
    stats = support.from_values(*range(30, 0, -1))
    full = frozenset(range(1, 31))
    for label in methods:
        b = methods[label](stats, full)
        assert 0 <= b.fdp_upper <= 1


def test_make_methods_kji_and_kct_orderings():
    pool = build_pool(nsim=4000, path_length=20, seed=21)
    methods = sh.make_methods(["kji-b", "kct-b", "kr"], 0.05, 20, pool=pool)
    rng = np.random.default_rng(14)
    nontrivial = 0
    for _ in range(5):
        stats = support.signal_stats(rng, 20)
        for r in nested_sets(stats):
            kji = sh._as_fraction(methods["kji-b"](stats, r))
            kct = sh._as_fraction(methods["kct-b"](stats, r))
            assert kct <= kji
            nontrivial += kct < 1
    assert nontrivial > 0
