"""Thin-domain Korn pencil: spectrum structure, sweep, and probe."""
import math

import numpy as np
import pytest

from thinlayer.korn import (
    SIGMA_LINE,
    ConditioningError,
    QuadratureError,
    default_m_grid,
    korn_basis_eval,
    korn_gram,
    korn_pencil,
    korn_probe,
    korn_spectrum,
    korn_sweep,
    sigma_circle,
)

# High-precision references for Lambda(M, sigma), frozen from a 50-digit
# reimplementation of the same pencil (Cholesky + symmetric eigensolve).
LAMBDA_REF = [
    (0.01, (1.0, 0.0), 0.999983333833),
    (0.05, (1.0, 0.0), 0.999583645656),
    (2.0, (1.0, 0.0), 0.733151279472),
    (2.0, (math.cos(0.7), math.sin(0.7)), 0.7288927443122456),
    (5.0, (math.cos(0.7), math.sin(0.7)), 0.6684603488857739),
    (50.0, (math.cos(0.7), math.sin(0.7)), 0.669915606583),
]


# -- basis evaluation ---------------------------------------------------------


def test_basis_eval_first_member():
    # coefficient a1 alone gives (-c, s) * z
    U, dU, ddU = korn_basis_eval(1.0, (1.0, 0.0), (1, 0, 0, 0, 0, 0), 1.0)
    assert np.allclose(U, [-1.0, 0.0], atol=0.0)
    assert np.allclose(dU, [-1.0, 0.0], atol=0.0)
    assert np.allclose(ddU, [0.0, 0.0], atol=0.0)


def test_basis_eval_vanishes_at_bottom():
    rng = np.random.default_rng(7)
    for _ in range(5):
        coeffs = rng.standard_normal(6)
        th = rng.uniform(0.0, 2.0 * np.pi)
        U, _, _ = korn_basis_eval(3.0, (np.cos(th), np.sin(th)), coeffs, 0.0)
        assert np.abs(U).max() <= 1e-14


def test_basis_eval_second_family_direction():
    # a2 alone gives (s, c) * sinh z
    c, s = math.cos(0.3), math.sin(0.3)
    U, dU, _ = korn_basis_eval(2.0, (c, s), (0, 0, 0, 1, 0, 0), 1.5)
    assert abs(U[0] - s * math.sinh(1.5)) <= 1e-14
    assert abs(U[1] - c * math.sinh(1.5)) <= 1e-14
    assert abs(dU[0] - s * math.cosh(1.5)) <= 1e-14


def test_basis_eval_validation():
    with pytest.raises(ValueError):
        korn_basis_eval(-1.0, (1.0, 0.0), (1, 0, 0, 0, 0, 0), 0.5)
    with pytest.raises(ValueError):
        korn_basis_eval(1.0, (0.5, 0.5), (1, 0, 0, 0, 0, 0), 0.5)
    with pytest.raises(ValueError):
        korn_basis_eval(1.0, (1.0, 0.0), (1, 0, 0), 0.5)
    with pytest.raises(ValueError):
        korn_basis_eval(1.0, (1.0, 0.0), (1, 0, 0, 0, 0, 0), 2.0)


# -- gram assembly ------------------------------------------------------------


def test_gram_symmetry_and_rank_two_difference():
    for M, sig in ((0.5, (1.0, 0.0)), (2.0, (0.6, 0.8)), (8.0, (0.0, 1.0))):
        q1, q2 = korn_gram(M, sig)
        assert np.abs(q1 - q1.T).max() == 0.0
        assert np.abs(q2 - q2.T).max() == 0.0
        sv = np.linalg.svd(q2 - q1, compute_uv=False)
        assert sv[2] <= 1e-10 * sv[0]


def test_gram_boundary_form_oracle():
    # q2 - q1 must equal the rank-2 boundary form v1 v2^T + v2 v1^T built
    # from the trace values at z = M, an independent assembly route.
    M, sig = 1.7, (math.cos(1.1), math.sin(1.1))
    c, s = sig
    q1, q2 = korn_gram(M, sig)
    coeffs = np.eye(6)
    v1 = np.empty(6)
    v2 = np.empty(6)
    for i in range(6):
        U, dU, _ = korn_basis_eval(M, sig, coeffs[i], M)
        v1[i] = c * U[0] + s * U[1]
        v2[i] = c * dU[0] + s * dU[1]
    boundary = np.outer(v1, v2) + np.outer(v2, v1)
    scale = np.abs(q2 - q1).max()
    assert np.abs((q2 - q1) - boundary).max() <= 1e-10 * scale


def test_gram_positive_definite_q1():
    for M in (0.1, 1.0, 10.0):
        q1, _ = korn_gram(M, (1.0, 0.0))
        assert np.linalg.eigvalsh(q1).min() > 0.0


def test_gram_validation():
    with pytest.raises(ValueError):
        korn_gram(0.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        korn_gram(1.0, (0.3, 0.4))
    with pytest.raises(ValueError):
        korn_gram(1.0, (1.0, 0.0), quad_nodes=32)


# -- pencil spectrum ----------------------------------------------------------


def test_lambda_reference_values():
    for M, sig, want in LAMBDA_REF:
        p = korn_pencil(M, sig)
        assert abs(p.Lambda - want) <= 1e-9, (M, sig, p.Lambda)


def test_spectrum_cluster_structure():
    # {1 x4, 2 x1, Lambda x1} for every cell away from the small-M merge
    for M in (0.1, 0.5, 2.0, 10.0):
        for sig in sigma_circle(4):
            p = korn_pencil(M, sig)
            spec, clusters = korn_spectrum(p)
            assert spec.shape == (6,)
            ones = [cl for cl in clusters if abs(cl[0] - 1.0) <= 1e-6]
            twos = [cl for cl in clusters if abs(cl[0] - 2.0) <= 2e-6]
            assert len(ones) == 1 and ones[0][1] == 4
            assert len(twos) == 1 and twos[0][1] == 1
            assert 0.0 < p.Lambda <= 1.0


def test_lambda_small_m_expansion():
    # Lambda -> 1 like 1 - M^2/6 + O(M^4); at M = 0.05 it sits within 5e-2
    p = korn_pencil(0.05, (1.0, 0.0))
    assert abs(p.Lambda - 1.0) <= 0.05
    assert abs((1.0 - p.Lambda) - 0.05**2 / 6.0) <= 1e-6


def test_small_m_cluster_merges_at_loose_tolerance():
    # at M = 0.01 Lambda is within 1e-4 of 1, so the default (loosened)
    # clustering reports a 5-fold cluster plus the eigenvalue 2
    p = korn_pencil(0.01, (1.0, 0.0))
    _, clusters = korn_spectrum(p)
    assert [m for _, m in clusters] == [5, 1]
    assert abs(clusters[1][0] - 2.0) <= 1e-6


def test_spectrum_sigma_symmetry():
    # the forms depend on sigma quadratically: flipping sigma changes nothing
    for M in (0.3, 4.0):
        a = korn_pencil(M, (0.6, 0.8)).spectrum
        b = korn_pencil(M, (-0.6, -0.8)).spectrum
        assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


def test_pencil_validation():
    with pytest.raises(ValueError):
        korn_pencil(float("nan"), (1.0, 0.0))
    with pytest.raises(ValueError):
        korn_pencil(1.0, (2.0, 0.0))


# -- sweep --------------------------------------------------------------------


def test_sweep_infimum_stable_under_doubling():
    s40 = korn_sweep(default_m_grid(40), SIGMA_LINE)
    s80 = korn_sweep(default_m_grid(80), SIGMA_LINE)
    assert s40.failures == 0 and s80.failures == 0
    assert abs(s40.inf_lambda - 0.699239854) <= 1e-8
    assert abs(s80.inf_lambda - 0.698936596) <= 1e-8
    assert abs(s80.inf_lambda - s40.inf_lambda) < 1e-3
    assert s40.inf_lambda > 0.0
    # the line minimum sits in the interior, near M = 3.09
    assert 2.0 < s40.argmin["M"] < 4.0


def test_sweep_default_grid_floor():
    sweep = korn_sweep(default_m_grid(24), sigma_circle(8))
    assert sweep.failures == 0
    # large-M diagonal directions approach the 2/3 floor from above
    assert 0.66 < sweep.inf_lambda <= 0.68
    assert sweep.max_jump < 0.1
    rows = sweep.rows
    assert len(rows) == 24 * 8
    assert set(rows[0]) == {
        "M", "c", "s", "lam", "cond_flag",
        "eig1", "eig2", "eig3", "eig4", "eig5", "eig6",
    }
    summary = sweep.summary()
    assert summary["cells"] == 192 and summary["inf_lambda"] == sweep.inf_lambda


def test_sweep_lambda_monotone_near_zero():
    # on the smallest decade Lambda increases toward 1 as M shrinks
    ms = np.geomspace(0.01, 0.1, 8)
    lams = [korn_pencil(M, (1.0, 0.0)).Lambda for M in ms]
    assert all(a > b - 1e-12 for a, b in zip(lams, lams[1:]))
    assert lams[0] > 1.0 - 1e-2


def test_sweep_parallel_matches_serial():
    serial = korn_sweep(default_m_grid(12), sigma_circle(2))
    threaded = korn_sweep(default_m_grid(12), sigma_circle(2), workers=4)
    assert serial.rows == threaded.rows
    assert serial.inf_lambda == threaded.inf_lambda


def test_sweep_validation():
    with pytest.raises(ValueError):
        korn_sweep(np.array([0.5, 0.2]), SIGMA_LINE)
    with pytest.raises(ValueError):
        korn_sweep(np.array([0.5]), SIGMA_LINE)
    with pytest.raises(ValueError):
        korn_sweep(default_m_grid(4), [(0.2, 0.2)])


# -- inequality probe ---------------------------------------------------------


def test_probe_translation_floor_and_uniformity():
    gamma = 0.7
    rep = korn_probe([0.1, 0.01, 0.001], gamma_bar=gamma, samples=56, seed=3)
    assert rep.tag == "korn"
    mins = [r["min_ratio"] for r in rep.rows]
    # the rigid translation realizes the ratio gamma_bar exactly
    for m in mins:
        assert abs(m - gamma) <= 1e-12
    assert max(mins) / min(mins) < 3.0
    assert rep.verdict == "bounded"
    for r in rep.rows:
        assert r["n_samples"] >= 50


def test_probe_sample_floor_enforced():
    with pytest.raises(ValueError):
        korn_probe([0.1], gamma_bar=1.0, samples=10)
    with pytest.raises(ValueError):
        korn_probe([1.5], gamma_bar=1.0, samples=64)


def test_probe_deterministic_across_calls():
    a = korn_probe([0.05], gamma_bar=1.0, samples=52, seed=11)
    b = korn_probe([0.05], gamma_bar=1.0, samples=52, seed=11)
    assert a.rows == b.rows
