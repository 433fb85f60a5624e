import numpy as np
import pytest

import adnn


def normalized(width=201, seed=0):
    rng = np.random.default_rng(seed)
    h = rng.random(width)
    return h / h.sum()


def delta(bin_index, width=201):
    h = np.zeros(width)
    h[bin_index] = 1.0
    return h


def test_bin_geometry():
    assert adnn.BINS == 201
    assert adnn.bin_center(100) == 0.0
    assert adnn.nearest_bin(0.004) == 100  # ties toward the lower bin
    assert adnn.nearest_bin(1.5) == -1


def test_product_identity_and_reflection():
    x = normalized(seed=1)
    np.testing.assert_array_equal(adnn.product_forward(x, delta(200)), x)
    np.testing.assert_array_equal(adnn.product_forward(x, delta(0)), x[::-1])


def test_sum_matches_numpy_correlation():
    x = normalized(seed=2)
    b = normalized(seed=3)
    z = adnn.sum_forward(x, b)
    # discrete correlation in centered index space, against numpy
    expect = np.correlate(np.concatenate([np.zeros(100), x, np.zeros(100)]), b, mode="valid")
    np.testing.assert_allclose(z, expect, atol=1e-12)


def test_backward_shapes_and_identity_kernel():
    x, b = normalized(seed=4), delta(100)
    dz = np.sin(np.arange(201))
    kernel_grad, input_grad = adnn.sum_backward(x, b, dz)
    assert kernel_grad.shape == (201,)
    np.testing.assert_array_equal(input_grad, dz)
    pk, px = adnn.product_backward(x, delta(200), dz)
    np.testing.assert_array_equal(px, dz)
    assert pk.shape == (201,)


def test_subtraction_histogram():
    history = np.array([[0.3, 0.3, 0.3], [0.5, 0.5, 0.5]])
    hist = adnn.subtraction_histogram(history, np.array([0.4, 0.4, 0.4]))
    assert hist.shape == (3, 201)
    for c in range(3):
        assert hist[c, 90] == pytest.approx(0.5)
        assert hist[c, 110] == pytest.approx(0.5)


def test_lab_white_point():
    l, a, b = adnn.rgb_to_lab(1.0, 1.0, 1.0)
    assert l == pytest.approx(100.0, abs=0.01)
    assert a == pytest.approx(0.0, abs=0.01)
    assert b == pytest.approx(0.0, abs=0.01)


def test_refine_removes_an_isolated_pixel():
    frame = np.full((11, 11, 3), 0.4, dtype=np.float32)
    mask = np.zeros((11, 11), dtype=np.uint8)
    mask[5, 5] = 1
    out = adnn.refine(frame, mask, iterations=1)
    assert out.sum() == 0


def test_metrics():
    tp, fp, fn, tn = adnn.confusion(np.array([[1, 0]], dtype=np.uint8),
                                    np.array([[1, 1]], dtype=np.uint8))
    assert (tp, fp, fn, tn) == (1, 0, 1, 0)
    re, pr, fm = adnn.re_pr_fm(8, 2, 2)
    assert (re, pr, fm) == (pytest.approx(0.8),) * 3


def test_train_and_model_roundtrip(tmp_path):
    frames, masks = adnn.generate_synthetic(width=16, height=16, count=8, square=6, noise=0.05, seed=5)
    assert frames.shape == (8, 16, 16, 3)
    assert masks.shape == (8, 16, 16)
    # separable toy: deltas at two distinct bins
    n = 40
    feats = np.zeros((n, 3, 201), dtype=np.float32)
    labels = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        bin_index = 60 if i % 2 else 140
        feats[i, :, bin_index] = 1.0
        labels[i] = 1 if i % 2 else 0
    model, losses = adnn.train(feats, labels, hidden=32, lr=0.01, epochs=40, batch=8, seed=7)
    assert losses[-1] < 0.05
    pred = model.classify(feats)
    np.testing.assert_array_equal(pred, labels)

    path = str(tmp_path / "model.adnn")
    model.save(path)
    back = adnn.load_model(path)
    np.testing.assert_array_equal(back.classify(feats), labels)
    assert back.param_count() == model.param_count()
