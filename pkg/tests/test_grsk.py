from __future__ import annotations

import itertools
import math
import re

import numpy as np
import pytest

from lgpolymer.env import Window, reverse_environment, sample_environment, stream
from lgpolymer.grsk import (
    CurveFamily,
    EnsembleQuery,
    build_curves,
    ensemble_free_energy,
    ensemble_reverse_energy,
    random_endpoint_pair,
    strict_tuple_count,
    tuple_count,
    verify_affine,
    verify_greene,
    verify_key1,
    verify_monotonicity,
    verify_product,
)
from lgpolymer.logspace import lse
from lgpolymer.polymer import EndpointPair, brute_force_multipath, log_Z_point
from lgpolymer.reports import PASS
from tests.conftest import rng_for


def _synthetic_family(l_max: int = 3, col_max: int = 9, seed: int = 0) -> CurveFamily:
    rng = np.random.default_rng(seed)
    vals = np.full((l_max + 1, col_max + 1), np.nan)
    for i in range(1, l_max + 1):
        vals[i, i:] = rng.normal(scale=1.5, size=col_max - i + 1)
    return CurveFamily(
        theta=1.0,
        n_lines=l_max,
        l_max=l_max,
        col_max=col_max,
        env_fingerprint="synthetic",
        log_values=vals,
    )


def _enumerate_ensemble(value, x: int, l: int, y: int, m: int, beta: float) -> float:
    """Direct sum over weakly increasing column tuples ending at y."""
    free = l - m
    sums = []
    for tup in itertools.combinations_with_replacement(range(x, y + 1), free):
        t = list(tup) + [y]
        total = 0.0
        for a in range(free + 1):
            j = l - a
            prev = x if a == 0 else t[a - 1]
            total += value(j, t[a]) - value(j, prev - 1)
        sums.append(total)
    if math.isinf(beta):
        return max(sums)
    return lse([beta * s for s in sums]) / beta


def _enumerate_reverse(value, z: int, w: int, k: int, beta: float) -> float:
    if k == 0:
        return value(1, w) - value(1, z)
    sums = []
    for tup in itertools.combinations(range(z + 1, w + 1), k):
        total = sum(value(i + 1, tup[i - 1]) - value(i, tup[i - 1] - 1) for i in range(1, k + 1))
        sums.append(total)
    big = max(sums) if math.isinf(beta) else lse([beta * s for s in sums]) / beta
    return value(k + 1, w) - value(1, z) - big


def test_tuple_count_matches_enumeration():
    for x, l, y, m in ((2, 3, 6, 1), (1, 1, 5, 1), (3, 4, 3, 2), (2, 2, 7, 2)):
        free = l - m
        n = sum(1 for _ in itertools.combinations_with_replacement(range(x, y + 1), free))
        assert tuple_count(x, l, y, m) == n


def test_strict_tuple_count_matches_enumeration():
    for z, w, k in ((2, 8, 3), (1, 5, 1), (3, 9, 4), (2, 6, 0)):
        n = sum(1 for _ in itertools.combinations(range(z + 1, w + 1), k))
        assert strict_tuple_count(z, w, k) == n


def test_ensemble_query_validation():
    EnsembleQuery((3, 2), (5, 1))
    EnsembleQuery((3, 2), (5, 2), beta=math.inf)
    with pytest.raises(ValueError):
        EnsembleQuery((3, 1), (5, 2))
    with pytest.raises(ValueError):
        EnsembleQuery((6, 2), (5, 1))
    with pytest.raises(ValueError):
        EnsembleQuery((3, 2), (5, 1), beta=0.0)


def test_ensemble_dp_matches_enumeration_at_several_betas():
    fam = _synthetic_family(seed=3)
    cases = ((3, 3, 7, 1), (2, 2, 8, 1), (4, 3, 9, 2), (3, 2, 3, 1))
    for x, l, y, m in cases:
        for beta in (0.5, 1.0, 2.0):
            got = ensemble_free_energy(fam, EnsembleQuery((x, l), (y, m), beta))
            want = _enumerate_ensemble(fam.log_value, x, l, y, m, beta)
            assert got == pytest.approx(want, abs=1e-11)
        got_inf = ensemble_free_energy(fam, EnsembleQuery((x, l), (y, m), math.inf))
        want_inf = _enumerate_ensemble(fam.log_value, x, l, y, m, math.inf)
        assert got_inf == pytest.approx(want_inf, abs=1e-11)


def test_ensemble_single_level_closed_form():
    fam = _synthetic_family(seed=5)
    for m, x, y in ((1, 2, 8), (2, 4, 7), (3, 3, 9)):
        got = ensemble_free_energy(fam, EnsembleQuery((x, m), (y, m)))
        assert got == pytest.approx(fam.log_value(m, y) - fam.log_value(m, x - 1), abs=1e-12)


def test_ensemble_beta_limit_brackets_max_plus():
    fam = _synthetic_family(seed=9)
    x, l, y, m = 3, 3, 9, 1
    top = ensemble_free_energy(fam, EnsembleQuery((x, l), (y, m), math.inf))
    n_tuples = tuple_count(x, l, y, m)
    for beta in (1.0, 10.0, 1e3, 1e6):
        fb = ensemble_free_energy(fam, EnsembleQuery((x, l), (y, m), beta))
        gap = fb - top
        assert -1e-9 <= gap <= math.log(n_tuples) / beta + 1e-9


def test_ensemble_domain_errors():
    fam = _synthetic_family()
    with pytest.raises(ValueError):
        ensemble_free_energy(fam, EnsembleQuery((3, 4), (5, 1)))  # level too deep
    with pytest.raises(ValueError):
        ensemble_free_energy(fam, EnsembleQuery((3, 3), (10, 1)))  # beyond width
    with pytest.raises(ValueError):
        ensemble_free_energy(fam, EnsembleQuery((2, 3), (5, 1)))  # x below floor


def test_reverse_energy_matches_enumeration():
    fam = _synthetic_family(seed=13)
    for z, w, k in ((2, 9, 1), (1, 8, 2), (3, 9, 0)):
        for beta in (0.5, 1.0, 3.0):
            got = ensemble_reverse_energy(fam, z, w, k, beta)
            want = _enumerate_reverse(fam.log_value, z, w, k, beta)
            assert got == pytest.approx(want, abs=1e-11)


def test_reverse_energy_k0_closed_form():
    fam = _synthetic_family(seed=21)
    got = ensemble_reverse_energy(fam, 2, 7, 0)
    assert got == fam.log_value(1, 7) - fam.log_value(1, 2)


def test_reverse_energy_invariant_under_common_shift():
    base = _synthetic_family(seed=2)
    shifted_vals = base.log_values + 0.75
    shifted = CurveFamily(
        theta=base.theta,
        n_lines=base.n_lines,
        l_max=base.l_max,
        col_max=base.col_max,
        env_fingerprint="shifted",
        log_values=shifted_vals,
    )
    for z, w, k in ((2, 8, 1), (1, 9, 2)):
        a = ensemble_reverse_energy(base, z, w, k)
        b = ensemble_reverse_energy(shifted, z, w, k)
        assert a == pytest.approx(b, abs=1e-11)


def test_reverse_energy_validation():
    fam = _synthetic_family()
    with pytest.raises(ValueError):
        ensemble_reverse_energy(fam, 2, 8, -1)
    with pytest.raises(ValueError):
        ensemble_reverse_energy(fam, 2, 8, 3)  # k+1 exceeds depth
    with pytest.raises(ValueError):
        ensemble_reverse_energy(fam, 8, 2, 1)
    with pytest.raises(ValueError):
        ensemble_reverse_energy(fam, 7, 8, 2)  # no strict pair fits


# ---------------------------------------------------------------------------
# curve construction
# ---------------------------------------------------------------------------


def test_first_curve_is_point_partition_value():
    n, N = 5, 7
    env = sample_environment(1.0, Window(1, N, 1, n), 41)
    fam = build_curves(env, n, 1, N)
    for j in range(1, N + 1):
        assert fam.log_value(1, j) == pytest.approx(
            log_Z_point(env, (1, n), (j, 1)), abs=1e-10
        )


def test_curve_family_boundary_and_domain():
    env = sample_environment(1.0, Window(1, 6, 1, 4), 2)
    fam = build_curves(env, 4, 3, 6)
    assert fam.log_value(2, 1) == 0.0
    assert fam.exact_value(3, 2) == 1
    assert fam.exact_increment(1, 3) == fam.exact_value(1, 3) / fam.exact_value(1, 2)
    assert fam.log_increment(2, 4) == fam.log_value(2, 4) - fam.log_value(2, 3)
    with pytest.raises(ValueError):
        fam.log_value(4, 5)
    with pytest.raises(ValueError):
        fam.log_value(0, 2)
    with pytest.raises(ValueError):
        fam.log_value(2, 0)
    with pytest.raises(ValueError):
        fam.log_value(1, 7)


def test_build_curves_float_and_exact_agree():
    env = sample_environment(1.0, Window(1, 7, 1, 5), 15)
    exact_fam = build_curves(env, 5, 2, 7)
    float_fam = build_curves(env, 5, 2, 7, method="float")
    assert float_fam.exact_values is None
    for i in (1, 2):
        for j in range(i, 8):
            assert float_fam.log_value(i, j) == pytest.approx(
                exact_fam.log_value(i, j), rel=1e-9
            )


def test_build_curves_validation():
    env = sample_environment(1.0, Window(1, 6, 1, 4), 2)
    with pytest.raises(ValueError):
        build_curves(env, 4, 0, 6)
    with pytest.raises(ValueError):
        build_curves(env, 4, 5, 6)
    with pytest.raises(ValueError):
        build_curves(env, 4, 2, 9)  # window too narrow
    with pytest.raises(ValueError):
        build_curves(env, 4, 2, 6, method="fancy")


def test_partial_products_match_brute_force_frozen_case():
    # Frozen configuration: 6 lines, 8 columns, depth 2, seed 7.
    n, N = 6, 8
    env = sample_environment(1.0, Window(1, N, 1, n), 7)
    fam = build_curves(env, n, 2, N)
    for l in (1, 2):
        for j in range(l, N + 1):
            pair = EndpointPair(
                tuple((i, n) for i in range(1, l + 1)),
                tuple((j - l + 1 + b, 1) for b in range(l)),
            )
            want = brute_force_multipath(env, pair)
            got = sum(fam.log_value(i, j) for i in range(1, l + 1))
            assert got == pytest.approx(want, abs=1e-10)


def test_verify_product_passes_at_all_depths():
    n, N = 6, 9
    env = sample_environment(1.3, Window(1, N, 1, n), 77)
    fam = build_curves(env, n, 3, N)
    for l in (1, 2, 3):
        for j in range(l, N + 1):
            rep = verify_product(env, fam, l, j)
            assert rep.status == PASS, rep.to_json()
            assert rep.rel_gap <= 1e-9


def test_verify_product_defers_to_exact_under_heavy_cancellation():
    # Frozen borderline case: the depth-3 float determinant keeps enough
    # digits to evade the hard conditioning guard yet too few for the 1e-9
    # check; auto mode must switch engines rather than report noise.
    n, N = 6, 9
    env = sample_environment(1.3, Window(1, N, 1, n), 77)
    fam = build_curves(env, n, 3, N)
    rep = verify_product(env, fam, 3, 9)
    assert rep.status == PASS, rep.to_json()
    assert rep.notes["engine"].startswith("exact")
    assert 1.0 - rep.notes["cancellation"] < 1e-3


def test_verify_product_exact_engine_option():
    n, N = 5, 7
    env = sample_environment(1.0, Window(1, N, 1, n), 31)
    fam = build_curves(env, n, 2, N)
    rep = verify_product(env, fam, 2, 6, method="exact")
    assert rep.status == PASS
    assert rep.notes["engine"] == "exact"


# ---------------------------------------------------------------------------
# endpoint-transform identity
# ---------------------------------------------------------------------------


def test_greene_single_pair_frozen_case():
    n = 4
    env = sample_environment(1.0, Window(1, 8, 1, n), 11)
    rep = verify_greene(env, [(2, n)], [(5, 1)])
    assert rep.status == PASS, rep.to_json()
    assert rep.rel_gap <= 1e-9


def test_greene_two_path_frozen_case():
    n = 4
    env = sample_environment(1.0, Window(1, 8, 1, n), 11)
    rep = verify_greene(env, [(1, n), (3, n)], [(6, 1), (7, 1)])
    assert rep.status == PASS, rep.to_json()


def test_greene_random_pairs_across_thetas():
    for theta, seed in ((0.7, 0), (1.0, 1), (2.0, 2)):
        n, cols = 5, 9
        env = sample_environment(theta, Window(1, cols, 1, n), seed)
        rng = rng_for(100 + seed)
        for _ in range(5):
            U, V = random_endpoint_pair(rng, n, cols)
            rep = verify_greene(env, U, V)
            assert rep.status == PASS, rep.to_json()


def test_greene_sources_beyond_line_count():
    # Transformed start level is clamped at the line count: u > n exercises it.
    n = 3
    env = sample_environment(1.0, Window(1, 9, 1, n), 6)
    rep = verify_greene(env, [(5, n)], [(8, 1)])
    assert rep.status == PASS, rep.to_json()


def test_greene_input_validation():
    env = sample_environment(1.0, Window(1, 6, 1, 3), 1)
    with pytest.raises(ValueError):
        verify_greene(env, [], [])
    with pytest.raises(ValueError):
        verify_greene(env, [(1, 3), (2, 2)], [(4, 1), (5, 1)])
    with pytest.raises(ValueError):
        verify_greene(env, [(1, 3)], [(4, 2)])


def test_random_endpoint_pair_is_feasible_and_bounded():
    rng = rng_for(55)
    for _ in range(50):
        U, V = random_endpoint_pair(rng, 6, 10)
        assert 1 <= len(U) == len(V) <= 3
        assert all(u[1] == 6 for u in U) and all(v[1] == 1 for v in V)
        assert all(a[0] <= b[0] for a, b in zip(U, V))
        assert len({c for c, _ in U}) == len(U)


# ---------------------------------------------------------------------------
# reverse-link identity
# ---------------------------------------------------------------------------


def test_key1_frozen_small_case():
    n = 4
    env = sample_environment(1.0, Window(1, 4, 1, n), 11)
    rep = verify_key1(env, x=2, y=4, k=1)
    assert rep.status == PASS, rep.to_json()
    assert rep.notes["concentration"]["status"] == PASS
    assert rep.notes["searrow"]["status"] == PASS


def test_key1_frozen_deeper_case():
    n = 6
    env = sample_environment(1.0, Window(1, 8, 1, n), 3)
    rep = verify_key1(env, x=3, y=8, k=2)
    assert rep.status == PASS, rep.to_json()
    assert rep.rel_gap <= 1e-9


def test_key1_random_draws():
    rng = rng_for(505)
    for _ in range(6):
        n = int(rng.integers(4, 7))
        cols = int(rng.integers(n + 1, 10))
        env = sample_environment(1.2, Window(1, cols, 1, n), int(rng.integers(0, 1 << 30)))
        k = int(rng.integers(1, 3))
        x = int(rng.integers(k + 1, cols - k))
        y = int(rng.integers(x + k, cols + 1))
        rep = verify_key1(env, x=x, y=y, k=k)
        assert rep.status == PASS, rep.to_json()


def test_key1_hypothesis_errors_are_named():
    env = sample_environment(1.0, Window(1, 8, 1, 5), 2)
    with pytest.raises(ValueError, match="k < x"):
        verify_key1(env, x=2, y=7, k=2)
    with pytest.raises(ValueError, match="k >= 1"):
        verify_key1(env, x=3, y=7, k=0)
    with pytest.raises(ValueError, match=re.escape("x < y-k+1")):
        verify_key1(env, x=5, y=5, k=1)
    narrow = sample_environment(1.0, Window(2, 8, 1, 5), 2)
    with pytest.raises(ValueError, match="window"):
        verify_key1(narrow, x=3, y=7, k=1)


# ---------------------------------------------------------------------------
# affine covariance and monotonicity
# ---------------------------------------------------------------------------


def test_affine_identity_parameters_gap_zero():
    fam = _synthetic_family(seed=31)
    q = EnsembleQuery((3, 3), (8, 1))
    rep = verify_affine(fam, 1.0, 1.0, 0.0, 0.0, [0.0, 0.0, 0.0], q)
    assert rep.status == PASS
    assert rep.abs_gap == 0.0


def test_affine_random_draws():
    fam = _synthetic_family(l_max=3, col_max=10, seed=8)
    rng = rng_for(808)
    for _ in range(12):
        a1 = float(rng.uniform(0.4, 2.5))
        a2 = float(rng.choice([1.0, 2.0]))
        a3 = float(rng.integers(-2, 3))
        a4 = float(rng.normal())
        a5 = [float(v) for v in rng.normal(size=3)]
        l = int(rng.integers(1, 4))
        m = int(rng.integers(1, l + 1))
        zx = int(rng.integers(l, 8))
        zy = int(rng.integers(zx, 11))
        beta = float(rng.uniform(0.5, 2.0))
        q = EnsembleQuery(((zx - a3) / a2, l), ((zy - a3) / a2, m), beta)
        rep = verify_affine(fam, a1, a2, a3, a4, a5, q)
        assert rep.status == PASS, rep.to_json()
        assert rep.rel_gap <= 1e-10


def test_affine_reverse_branch_runs():
    fam = _synthetic_family(l_max=3, col_max=10, seed=14)
    q = EnsembleQuery((3, 3), (9, 1))
    rep = verify_affine(fam, 1.3, 1.0, 0.0, 0.4, [0.1, -0.2, 0.3], q)
    assert rep.status == PASS
    assert isinstance(rep.notes["reverse"], dict)
    assert rep.notes["reverse"]["status"] == PASS


def test_affine_misaligned_lattice_raises():
    fam = _synthetic_family()
    q = EnsembleQuery((2.3, 2), (7.0, 1))
    with pytest.raises(ValueError, match="misaligned"):
        verify_affine(fam, 1.0, 1.0, 0.0, 0.0, [0.0, 0.0], q)
    with pytest.raises(ValueError, match="a1 > 0"):
        verify_affine(fam, -1.0, 1.0, 0.0, 0.0, [0.0, 0.0], EnsembleQuery((2, 2), (7, 1)))


def test_monotonicity_degenerate_margins_are_zero():
    env = sample_environment(1.0, Window(1, 9, 1, 5), 3)
    fam = build_curves(env, 5, 3, 9)

    def f(a, b, l, m):
        return ensemble_free_energy(fam, EnsembleQuery((a, l), (b, m)))

    l, m = 3, 1
    x, y1, y2 = 4, 6, 8
    assert (f(x, y2, l, m) - f(x, y2, l, m)) - (f(x, y1, l, m) - f(x, y1, l, m)) == 0.0
    x1, x2, y = 3, 5, 7
    assert (f(x2, y, l, m) - f(x1, y, l, m)) - (f(x2, y, l, m) - f(x1, y, l, m)) == 0.0


def test_monotonicity_bulk_sample_has_no_violations():
    env = sample_environment(1.0, Window(1, 9, 1, 5), 5)
    fam = build_curves(env, 5, 3, 9)
    rep = verify_monotonicity(fam, {"n_samples": 1000, "seed": 5})
    assert rep.status == PASS, rep.to_json()
    assert rep.notes["violations"] == 0
    assert rep.lhs >= -1e-11  # worst margin


# ---------------------------------------------------------------------------
# reversal link between the two curve families
# ---------------------------------------------------------------------------


def test_reversed_family_first_curve_matches_rotated_point_values():
    n, cols = 4, 7
    env = sample_environment(1.0, Window(1, cols, 1, n), 23)
    renv = reverse_environment(env, cols, n)
    rfam = build_curves(renv, n, 1, cols)
    for j in range(1, cols + 1):
        assert rfam.log_value(1, j) == pytest.approx(
            log_Z_point(renv, (1, n), (j, 1)), abs=1e-10
        )
