import numpy as np
import pytest

from sigclass import dnn
from sigclass.dnn import AdamState, DnnParams, LayerParams, UNCLASSIFIED
from sigclass.errors import NumericalError, ValidationError

LN2 = 0.6931471805599453


def zero_net(d, c):
    layers = [
        LayerParams(np.zeros((d, d)), np.zeros(d)),
        LayerParams(np.zeros((d, d)), np.zeros(d)),
        LayerParams(np.zeros((c, d)), np.zeros(c)),
    ]
    return DnnParams(layers=layers, layer_sizes=(d, d, c))


# ---------------------------------------------------------------------------
# init

def test_init_shapes_small_task():
    p = dnn.init_network(23, 4, seed=0)
    assert [l.weight.shape for l in p.layers] == [(23, 23), (23, 23), (4, 23)]
    assert [l.bias.shape for l in p.layers] == [(23,), (23,), (4,)]


def test_init_shapes_large_task():
    p = dnn.init_network(115, 7, seed=0)
    assert [l.weight.shape for l in p.layers] == [(115, 115), (115, 115), (7, 115)]
    assert [l.bias.shape for l in p.layers] == [(115,), (115,), (7,)]


def test_init_deterministic_and_bounded():
    a = dnn.init_network(10, 3, seed=99)
    b = dnn.init_network(10, 3, seed=99)
    for la, lb in zip(a.layers, b.layers):
        assert np.array_equal(la.weight, lb.weight)
        assert np.array_equal(la.bias, lb.bias)
        assert np.all(la.bias == 0)
    r1 = np.sqrt(6.0 / (10 + 10))
    r3 = np.sqrt(6.0 / (10 + 3))
    assert np.all(np.abs(a.layers[0].weight) <= r1)
    assert np.all(np.abs(a.layers[2].weight) <= r3)
    c = dnn.init_network(10, 3, seed=100)
    assert not np.array_equal(a.layers[0].weight, c.layers[0].weight)


def test_init_rejects_degenerate_sizes():
    with pytest.raises(ValidationError):
        dnn.init_network(0, 3, seed=1)
    with pytest.raises(ValidationError):
        dnn.init_network(4, 1, seed=1)


# ---------------------------------------------------------------------------
# forward

def test_forward_zero_net_gives_half_activations():
    p = zero_net(4, 3)
    logits, trace = dnn.forward(p, np.zeros((2, 4)))
    assert np.all(trace.a1 == 0.5)
    assert np.all(trace.a2 == 0.5)
    assert np.all(logits == 0.0)


def test_forward_hand_evaluated_chain():
    # 1-wide net: W1=2, W2=1, W3=1, b3=1 applied to x=0
    layers = [
        LayerParams(np.array([[2.0]]), np.array([0.0])),
        LayerParams(np.array([[1.0]]), np.array([0.0])),
        LayerParams(np.array([[1.0]]), np.array([1.0])),
    ]
    p = DnnParams(layers=layers, layer_sizes=(1, 1, 1))
    logits, trace = dnn.forward(p, np.array([[0.0]]))
    assert trace.a1[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert trace.a2[0, 0] == pytest.approx(0.6224593312018546, abs=1e-12)
    assert logits[0, 0] == pytest.approx(1.6224593312018546, abs=1e-12)


def test_forward_batch_shape():
    p = dnn.init_network(23, 4, seed=3)
    x = np.random.default_rng(0).normal(size=(150, 23))
    logits, trace = dnn.forward(p, x)
    assert logits.shape == (150, 4)
    assert trace.a1.shape == (150, 23)


def test_forward_rejects_wrong_width():
    p = dnn.init_network(5, 3, seed=0)
    with pytest.raises(ValidationError):
        dnn.forward(p, np.zeros((2, 4)))


def test_forward_batch_order_equivariant():
    p = dnn.init_network(8, 3, seed=5)
    x = np.random.default_rng(1).normal(size=(20, 8))
    perm = np.random.default_rng(2).permutation(20)
    logits, _ = dnn.forward(p, x)
    logits_perm, _ = dnn.forward(p, x[perm])
    assert np.array_equal(logits[perm], logits_perm)


# ---------------------------------------------------------------------------
# loss

def test_loss_reference_values():
    assert dnn.loss(np.array([[0.0]]), np.array([[1.0]])) == pytest.approx(LN2, abs=1e-12)
    assert dnn.loss(np.array([[0.0]]), np.array([[0.0]])) == pytest.approx(LN2, abs=1e-12)


def test_loss_saturation_no_overflow():
    assert dnn.loss(np.array([[1000.0]]), np.array([[1.0]])) <= 1e-6
    assert dnn.loss(np.array([[1000.0]]), np.array([[0.0]])) == pytest.approx(1000.0, abs=1e-6)
    assert dnn.loss(np.array([[-1000.0]]), np.array([[0.0]])) <= 1e-6


def test_loss_stable_form_matches_naive():
    # the naive formula cancels catastrophically in float64 past |z| ~ 13,
    # so evaluate it at 50 digits to get a trustworthy reference
    import mpmath

    mpmath.mp.dps = 50
    for zz in np.linspace(-20, 20, 401):
        sig = 1 / (1 + mpmath.exp(-mpmath.mpf(float(zz))))
        for y in (0.0, 1.0):
            naive = float(-(y * mpmath.log(sig) + (1 - y) * mpmath.log(1 - sig)))
            stable = dnn.loss(np.array([[zz]]), np.array([[y]]))
            assert abs(stable - naive) < 1e-10


def test_loss_is_mean_over_all_elements():
    logits = np.array([[0.0, 1000.0], [0.0, 0.0]])
    targets = np.array([[1.0, 0.0], [0.0, 1.0]])
    expected = (LN2 + 1000.0 + LN2 + LN2) / 4.0
    assert dnn.loss(logits, targets) == pytest.approx(expected, rel=1e-12)


def test_loss_nonnegative():
    rng = np.random.default_rng(7)
    logits = rng.normal(scale=3.0, size=(30, 5))
    targets = (rng.random((30, 5)) > 0.5).astype(float)
    assert dnn.loss(logits, targets) >= 0.0


def test_loss_rejects_nonfinite_logits():
    with pytest.raises(NumericalError):
        dnn.loss(np.array([[np.nan]]), np.array([[1.0]]))
    with pytest.raises(NumericalError):
        dnn.loss(np.array([[np.inf]]), np.array([[0.0]]))


# ---------------------------------------------------------------------------
# backward

def finite_difference_grads(params, x, y, h=1e-5):
    """Central-difference loss gradients; independent of backward()."""
    grads = []
    for layer in params.layers:
        parts = []
        for arr in (layer.weight, layer.bias):
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                saved = arr[i]
                arr[i] = saved + h
                up = dnn.loss(dnn.forward(params, x)[0], y)
                arr[i] = saved - h
                down = dnn.loss(dnn.forward(params, x)[0], y)
                arr[i] = saved
                g[i] = (up - down) / (2.0 * h)
            parts.append(g)
        grads.append(LayerParams(*parts))
    return grads


def test_backward_output_delta_zero_net():
    p = zero_net(2, 3)
    batch = 4
    x = np.zeros((batch, 2))
    y = np.ones((batch, 3))
    _, trace = dnn.forward(p, x)
    grads = dnn.backward(p, trace, y)
    # delta = (0.5 - 1) / (batch * c) at every output; bias grad sums over the batch
    expected_b3 = batch * (0.5 - 1.0) / (batch * 3)
    assert np.allclose(grads[2].bias, expected_b3, atol=1e-15)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(12)
    p = dnn.init_network(4, 3, seed=42)
    x = rng.normal(size=(5, 4))
    y = np.zeros((5, 3))
    y[np.arange(5), rng.integers(0, 3, size=5)] = 1.0
    _, trace = dnn.forward(p, x)
    analytic = dnn.backward(p, trace, y)
    numeric = finite_difference_grads(p, x, y)
    for a, n in zip(analytic, numeric):
        for ga, gn in ((a.weight, n.weight), (a.bias, n.bias)):
            rel = np.abs(ga - gn) / np.maximum(1.0, np.abs(ga))
            assert np.max(rel) < 1e-5


def test_backward_zero_input_batch():
    p = dnn.init_network(6, 3, seed=8)
    x = np.zeros((5, 6))
    y = np.zeros((5, 3))
    y[:, 0] = 1.0
    _, trace = dnn.forward(p, x)
    grads = dnn.backward(p, trace, y)
    assert np.all(grads[0].weight == 0.0)  # delta1 x^T with x = 0
    assert np.any(grads[0].bias != 0.0)


# ---------------------------------------------------------------------------
# adam

def test_adam_first_step_moves_alpha_per_element():
    p = dnn.init_network(3, 2, seed=1)
    state = AdamState.for_layers(p.layers, alpha=0.005)
    rng = np.random.default_rng(3)
    grads = [
        LayerParams(
            rng.uniform(1e-3, 2.0, l.weight.shape) * rng.choice([-1, 1], l.weight.shape),
            rng.uniform(1e-3, 2.0, l.bias.shape) * rng.choice([-1, 1], l.bias.shape),
        )
        for l in p.layers
    ]
    new_p, new_state = dnn.adam_step(p, grads, state)
    assert new_state.t == 1
    for before, after, g in zip(p.layers, new_p.layers, grads):
        for b, a, gg in ((before.weight, after.weight, g.weight),
                         (before.bias, after.bias, g.bias)):
            step = np.abs(a - b)
            expected = 0.005 * np.abs(gg) / (np.abs(gg) + state.epsilon)
            assert np.max(np.abs(step - expected)) < 1e-12
            assert np.max(np.abs(step - 0.005)) < 1e-6  # |g| >= 1e-3 everywhere
            # moves against the gradient
            assert np.all(np.sign(a - b) == -np.sign(gg))


def test_adam_zero_gradient_keeps_params():
    p = dnn.init_network(4, 2, seed=2)
    state = AdamState.for_layers(p.layers)
    grads = [LayerParams(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in p.layers]
    new_p, new_state = dnn.adam_step(p, grads, state)
    for before, after in zip(p.layers, new_p.layers):
        assert np.array_equal(before.weight, after.weight)
        assert np.array_equal(before.bias, after.bias)
    assert new_state.t == 1


def test_adam_two_steps_match_scalar_recurrence():
    # hand recurrence for one scalar parameter and a constant gradient
    alpha, b1, b2, eps = 0.005, 0.9, 0.999, 1e-8
    theta, g = 0.7, 0.3
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    theta1 = theta - alpha * (m / (1 - b1)) / (np.sqrt(v / (1 - b2)) + eps)
    m2 = b1 * m + (1 - b1) * g
    v2 = b2 * v + (1 - b2) * g * g
    theta2 = theta1 - alpha * (m2 / (1 - b1**2)) / (np.sqrt(v2 / (1 - b2**2)) + eps)

    layer = [LayerParams(np.array([[theta]]), np.zeros(1))]
    grads = [LayerParams(np.array([[g]]), np.zeros(1))]
    state = AdamState.for_layers(layer, alpha=alpha)
    layer, state = dnn.adam_update(layer, grads, state)
    assert layer[0].weight[0, 0] == pytest.approx(theta1, abs=1e-12)
    layer, state = dnn.adam_update(layer, grads, state)
    assert layer[0].weight[0, 0] == pytest.approx(theta2, abs=1e-12)
    assert state.t == 2


def test_adam_descends_on_convex_toy():
    # full-batch single affine layer + the sigmoid cross-entropy loss
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 3))
    y = (x @ np.array([[1.0, -2.0, 0.5], [-1.0, 1.0, 2.0]]).T > 0).astype(float)
    layers = [LayerParams(np.zeros((2, 3)), np.zeros(2))]
    state = AdamState.for_layers(layers, alpha=0.005)
    losses = []
    for _ in range(50):
        z = x @ layers[0].weight.T + layers[0].bias
        losses.append(dnn.loss(z, y))
        delta = (dnn.sigmoid(z) - y) / z.size
        grads = [LayerParams(delta.T @ x, delta.sum(axis=0))]
        layers, state = dnn.adam_update(layers, grads, state)
    z = x @ layers[0].weight.T + layers[0].bias
    losses.append(dnn.loss(z, y))
    assert all(b < a for a, b in zip(losses, losses[1:]))


# ---------------------------------------------------------------------------
# predict

def test_predict_single_hot_output():
    p = zero_net(2, 3)
    p.layers[2].bias[:] = [-5.0, 5.0, -5.0]
    assert dnn.predict(p, np.zeros(2)) == 1


def test_predict_no_hot_output_is_unclassified():
    p = zero_net(2, 3)
    p.layers[2].bias[:] = [-5.0, -5.0, -5.0]
    assert dnn.predict(p, np.zeros(2)) == UNCLASSIFIED


def test_predict_two_hot_outputs_is_unclassified():
    p = zero_net(2, 3)
    p.layers[2].bias[:] = [5.0, 5.0, -5.0]
    assert dnn.predict(p, np.zeros(2)) == UNCLASSIFIED


def test_predict_matches_rounded_one_hot():
    rng = np.random.default_rng(11)
    p = dnn.init_network(6, 4, seed=11)
    x = rng.normal(size=(50, 6))
    logits, _ = dnn.forward(p, x)
    rounded = (dnn.sigmoid(logits) >= 0.5).astype(int)
    preds = dnn.predict_batch(p, x)
    for row, pred in zip(rounded, preds):
        if pred == UNCLASSIFIED:
            assert row.sum() != 1
        else:
            expected = np.zeros(4, dtype=int)
            expected[pred] = 1
            assert np.array_equal(row, expected)


# ---------------------------------------------------------------------------
# checkpoint

def test_checkpoint_roundtrip(tmp_path):
    p = dnn.init_network(12, 4, seed=21)
    path = tmp_path / "model.bin"
    dnn.save_checkpoint(path, p, [3, 17, 120], ["AllQuiet", "TruckA", "CarB", "Gen"], True)
    loaded, mask, vocab, normalize = dnn.load_checkpoint(path)
    assert mask == [3, 17, 120]
    assert vocab == ["AllQuiet", "TruckA", "CarB", "Gen"]
    assert normalize is True
    for a, b in zip(p.layers, loaded.layers):
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.bias, b.bias)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "weird.bin"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValidationError):
        dnn.load_checkpoint(path)


def test_checkpoint_bytes_deterministic(tmp_path):
    p = dnn.init_network(9, 3, seed=5)
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    dnn.save_checkpoint(a, p, [1, 2], ["x", "y", "z"], False)
    dnn.save_checkpoint(b, p, [1, 2], ["x", "y", "z"], False)
    assert a.read_bytes() == b.read_bytes()
