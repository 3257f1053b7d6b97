import math

import numpy as np
import pytest

import freqattack as fa
from freqattack.metrics import ExampleOutcome, NdvConfig, aggregate


# --- cosine similarity -------------------------------------------------------

def test_cosine_identical_vectors():
    f = np.array([1.0, 2.0, -3.0])
    assert fa.cosine_similarity(f, f) == pytest.approx(1.0, abs=1e-15)


def test_cosine_orthogonal():
    assert fa.cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_hand_value():
    assert fa.cosine_similarity(np.array([1.0, 2.0]), np.array([2.0, 1.0])) == pytest.approx(
        0.8, abs=1e-15
    )


def test_cosine_zero_conventions():
    z = np.zeros(4)
    f = np.ones(4)
    assert fa.cosine_similarity(z, z) == 1.0
    assert fa.cosine_similarity(z, f) == 0.0
    assert fa.cosine_similarity(f, z) == 0.0


def test_cosine_scale_invariance():
    rng = fa.make_rng(0)
    f = rng.standard_normal(50)
    g = rng.standard_normal(50)
    base = fa.cosine_similarity(f, g)
    for lam in (3.0, -2.5, 1e-6):
        assert fa.cosine_similarity(f, lam * g) == pytest.approx(base, abs=1e-12)


def test_cosine_shape_mismatch():
    with pytest.raises(ValueError):
        fa.cosine_similarity(np.zeros((2, 2)), np.zeros(4))


def test_cosine_absolute_numerator():
    f = np.array([1.0, 1.0])
    assert fa.cosine_similarity(f, -f) == pytest.approx(1.0, abs=1e-15)


# --- lp metrics --------------------------------------------------------------

def test_lp_identical():
    x = fa.make_rng(1).random((8, 8, 3))
    assert fa.lp_metrics(x, x) == (0.0, 0.0, 0)


def test_lp_single_element():
    x = np.zeros((4, 4, 1))
    y = x.copy()
    y[1, 2, 0] = 0.3
    l2, linf, l0 = fa.lp_metrics(x, y)
    assert l2 == pytest.approx(0.3, abs=1e-15)
    assert linf == pytest.approx(0.3, abs=1e-15)
    assert l0 == 1


def test_lp_two_elements():
    x = np.zeros((4, 4, 1))
    y = x.copy()
    y[0, 0, 0] = 0.3
    y[3, 3, 0] = -0.3
    l2, linf, l0 = fa.lp_metrics(x, y)
    assert l2 == pytest.approx(0.3 * math.sqrt(2), rel=1e-14)
    assert linf == pytest.approx(0.3, abs=1e-15)
    assert l0 == 2


def test_lp_threshold_ignores_reconstruction_dust():
    x = np.zeros((4, 4, 1))
    y = np.full((4, 4, 1), 1e-12)
    assert fa.lp_metrics(x, y)[2] == 0


def test_lp_permutation_invariant():
    rng = fa.make_rng(2)
    x = rng.random(64)
    y = rng.random(64)
    perm = rng.permutation(64)
    assert fa.lp_metrics(x, y) == fa.lp_metrics(x[perm], y[perm])


# --- ndv ---------------------------------------------------------------------

def test_ndv_identical_is_zero():
    x = fa.make_rng(3).random((8, 8, 3))
    assert fa.ndv(x, x) == 0.0


def test_ndv_single_element():
    x = np.zeros((10, 10, 1))
    y = x.copy()
    y[0, 0, 0] = 0.5
    assert fa.ndv(x, y) == pytest.approx(1000 * 0.5 / (1 + 1e-8), rel=1e-12)


def test_ndv_spread_elements_closed_form():
    # N elements each differing by delta: C * delta * sqrt(N) / (N + eps)
    x = np.zeros((10, 10, 1))
    y = x.copy()
    y.flat[:100] = 0.05
    expected = 1000 * 0.05 * 10 / (100 + 1e-8)
    assert fa.ndv(x, y) == pytest.approx(expected, rel=1e-12)
    assert fa.ndv(x, y) == pytest.approx(5.0, rel=1e-6)


def test_ndv_discrimination_at_fixed_l2():
    # equal L2, fewer touched elements -> strictly larger NDV
    x = np.zeros((10, 10, 1))
    few = x.copy()
    few[0, 0, 0] = 0.5
    many = x.copy()
    many.flat[:25] = 0.5 / 5.0  # L2 = 0.5 as well
    assert fa.ndv(x, few) > fa.ndv(x, many)


def test_ndv_config_validation():
    with pytest.raises(ValueError):
        NdvConfig(c=-1)
    with pytest.raises(ValueError):
        NdvConfig(eps=0)


# --- ssim --------------------------------------------------------------------

def test_ssim_identical_is_one():
    x = fa.make_rng(4).random((16, 16, 3))
    assert fa.ssim(x, x) == 1.0


def test_ssim_constant_images_closed_form():
    # mu_a=0, mu_b=1, all variances 0: SSIM = C1 / (1 + C1) per window
    x = np.zeros((16, 16, 1))
    y = np.ones((16, 16, 1))
    c1 = 0.01 ** 2
    assert fa.ssim(x, y) == pytest.approx(c1 / (1 + c1), rel=1e-12)


def test_ssim_tiny_noise_stays_high():
    rng = fa.make_rng(5)
    x = rng.random((32, 32, 3))
    y = np.clip(x + rng.normal(0, 1e-6, x.shape), 0, 1)
    assert fa.ssim(x, y) >= 0.999


def test_ssim_matches_skimage_reference():
    sk = pytest.importorskip("skimage.metrics")
    rng = fa.make_rng(6)
    for _ in range(5):
        x = rng.random((32, 32, 3))
        y = np.clip(x + rng.normal(0, 0.08, x.shape), 0, 1)
        ref = sk.structural_similarity(
            x,
            y,
            channel_axis=2,
            data_range=1.0,
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
        )
        assert fa.ssim(x, y) == pytest.approx(ref, abs=1e-10)


def test_ssim_symmetric():
    rng = fa.make_rng(7)
    x = rng.random((16, 16, 3))
    y = rng.random((16, 16, 3))
    assert fa.ssim(x, y) == pytest.approx(fa.ssim(y, x), abs=1e-14)


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError, match="window"):
        fa.ssim(np.zeros((8, 8, 1)), np.zeros((8, 8, 1)))


def test_ssim_range_on_unrelated_images():
    rng = fa.make_rng(8)
    x = rng.random((16, 16, 3))
    y = rng.random((16, 16, 3))
    v = fa.ssim(x, y)
    assert -1.0 <= v <= 1.0


# --- aggregation -------------------------------------------------------------

def _o(success, queries):
    return ExampleOutcome(success, queries, None)


def test_aggregate_all_successes():
    r = aggregate([_o(True, 10), _o(True, 30)])
    assert r.asr == 1.0
    assert r.anq == 20.0
    assert r.mnq == 20.0


def test_aggregate_successes_only_mode():
    r = aggregate([_o(True, 10), _o(False, 100)])
    assert r.asr == 0.5
    assert r.anq == 10.0
    assert r.anq_all == 55.0


def test_aggregate_median():
    r = aggregate([_o(True, 1), _o(True, 2), _o(True, 100)])
    assert r.mnq == 2.0


def test_aggregate_all_attempted_mode():
    r = aggregate([_o(True, 10), _o(False, 100)], mode="all-attempted")
    assert r.anq == 55.0
    assert r.mnq == 55.0
    assert r.anq_successes == 10.0


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        aggregate([])


def test_aggregate_mean_metrics_over_successes():
    pm1 = fa.PairMetrics(l2=1.0, linf=0.5, l0=3, ssim=0.9, ndv=2.0)
    pm2 = fa.PairMetrics(l2=3.0, linf=0.7, l0=5, ssim=0.7, ndv=4.0)
    r = aggregate(
        [
            ExampleOutcome(True, 5, pm1),
            ExampleOutcome(True, 7, pm2),
            ExampleOutcome(False, 100, fa.PairMetrics(9, 9, 9, 9, 9)),
        ]
    )
    assert r.mean_l2 == 2.0
    assert r.mean_ssim == pytest.approx(0.8)
    assert r.mean_ndv == 3.0


def test_pair_metrics_consistency():
    rng = fa.make_rng(9)
    x = rng.random((16, 16, 3))
    y = np.clip(x + rng.normal(0, 0.03, x.shape), 0, 1)
    pm = fa.compute_pair_metrics(x, y)
    l2, linf, l0 = fa.lp_metrics(x, y)
    assert pm.l2 == l2 and pm.linf == linf and pm.l0 == l0
    assert pm.ssim == fa.ssim(x, y)
    assert pm.ndv == fa.ndv(x, y)
