import math

import numpy as np
import pytest

from stocknews.model import (
    BIAS_NAMES,
    WEIGHT_NAMES,
    RnnDims,
    RnnParams,
    TrainConfig,
    TrainingDiverged,
    backward,
    cross_entropy,
    forward,
    init_params,
    load_checkpoint,
    loss,
    predict,
    save_checkpoint,
    softmax,
    train,
)

SMALL = RnnDims(L=3, H_r=2, H_f=3, H=3)


def random_params(dims, rng, scale=0.8):
    p = init_params(dims, int(rng.integers(1 << 30)))
    for _, a in p.items():
        a[...] = rng.normal(scale=scale, size=a.shape)
    return p


def random_inputs(rng, T=4, L=3):
    return rng.normal(scale=0.5, size=T), rng.random((T, L)), rng.integers(0, 2, size=T)


def fd_check(params, r, f, c, lam, h=1e-5):
    """Largest relative FD error over coordinates whose ReLU pattern is stable under +-h."""
    g = backward(params, forward(params, r, f), c, lam)
    worst, checked = 0.0, 0
    for name, arr in params.items():
        ga = getattr(g, name)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            tp = forward(params, r, f)
            lp = loss(params, tp, c, lam)
            arr[idx] = old - h
            tm = forward(params, r, f)
            lm = loss(params, tm, c, lam)
            arr[idx] = old
            kink = any(np.any((getattr(tp, k) > 0) != (getattr(tm, k) > 0)) for k in ("a_r", "a_f", "a_h"))
            near = any(np.any(np.abs(getattr(tp, k)) < 1e-7) for k in ("a_r", "a_f", "a_h"))
            if kink or near:
                continue
            num = (lp - lm) / (2 * h)
            rel = abs(num - ga[idx]) / max(abs(num), abs(ga[idx]), 1e-12)
            worst = max(worst, rel)
            checked += 1
    return worst, checked


class TestInit:
    def test_deterministic(self):
        a, b = init_params(SMALL, 7), init_params(SMALL, 7)
        for (n, x), (_, y) in zip(a.items(), b.items()):
            assert np.array_equal(x, y), n

    def test_biases_zero_and_bounds(self):
        p = init_params(RnnDims(L=5, H_r=4, H_f=6, H=7), 1)
        for n in BIAS_NAMES:
            assert not getattr(p, n).any()
        for n in WEIGHT_NAMES:
            a = getattr(p, n)
            bound = math.sqrt(6 / sum(a.shape))
            assert np.all(np.abs(a) <= bound)
        p.validate()

    def test_mean_within_three_standard_errors(self):
        p = init_params(RnnDims(L=1000, H_r=1, H_f=1, H=1), 3)
        w = p.W_f.ravel()
        assert w.size == 1000
        bound = math.sqrt(6 / 1001)
        se = bound / math.sqrt(3) / math.sqrt(w.size)  # sd of U(-b, b) is b / sqrt(3)
        assert abs(w.mean()) < 3 * se


class TestForward:
    def test_zero_params_give_half(self):
        p = RnnParams.zeros(SMALL)
        rng = np.random.default_rng(0)
        r, f, _ = random_inputs(rng, T=6)
        tr = forward(p, r, f)
        assert np.array_equal(tr.y, np.full((6, 2), 0.5))

    def test_scalar_hand_case(self):
        p = RnnParams.zeros(RnnDims(L=1, H_r=1, H_f=1, H=1))
        p.W_r[:] = 2.0
        p.b_hr[:] = 0.1
        p.V_hf[:] = 0.5
        p.b_hf[:] = 0.3
        p.W_hr[:] = 1.0
        p.W_hf[:] = -1.0
        p.b_h[:] = 0.2
        p.W_h[:] = [[0.0], [1.0]]
        tr = forward(p, [0.5], [[0.0]])
        # hr = 1.1, hf = 0.3, h = 1.1 - 0.3 + 0.2 = 1.0, logits (0, 1)
        assert tr.hr[0, 0] == pytest.approx(1.1)
        assert tr.hf[0, 0] == pytest.approx(0.3)
        assert tr.h[0, 0] == pytest.approx(1.0)
        assert tr.y[0, 1] == pytest.approx(math.e / (1 + math.e), rel=1e-14)

    def test_recurrent_carry(self):
        dims = RnnDims(L=2, H_r=1, H_f=2, H=1)
        p = RnnParams.zeros(dims)
        p.V_hf[...] = np.eye(2)
        p.W_f[...] = [[1.0, 0.0], [0.0, 2.0]]
        f = np.zeros((5, 2))
        f[0] = [0.7, 0.4]
        tr = forward(p, np.zeros(5), f)
        for i in range(5):
            assert tr.hf[i].tolist() == [0.7, 0.8]

    def test_simplex_and_shift_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = random_params(SMALL, rng, scale=3.0)
            r, f, _ = random_inputs(rng, T=8)
            tr = forward(p, r, f)
            assert np.all(tr.y >= 0)
            assert np.allclose(tr.y.sum(axis=1), 1.0, rtol=0, atol=1e-12)
            shifted = softmax(tr.logits + rng.normal(size=(8, 1)) * 50)
            assert np.allclose(shifted, tr.y, rtol=0, atol=1e-12)

    def test_shape_errors(self):
        p = init_params(SMALL)
        with pytest.raises(ValueError):
            forward(p, [0.1, 0.2], np.zeros((3, 3)))
        with pytest.raises(ValueError):
            forward(p, [0.1], np.zeros((1, 4)))
        with pytest.raises(ValueError):
            forward(p, [], np.zeros((0, 3)))


class TestLoss:
    def test_half_gives_T_ln2(self):
        p = RnnParams.zeros(SMALL)
        rng = np.random.default_rng(2)
        r, f, c = random_inputs(rng, T=7)
        assert loss(p, forward(p, r, f), c, 0.0) == pytest.approx(7 * math.log(2), abs=1e-12)

    def test_confident_correct_near_zero(self):
        p = RnnParams.zeros(RnnDims(L=1, H_r=1, H_f=1, H=1))
        p.b_h[:] = 1.0
        p.W_h[:] = [[-100.0], [100.0]]
        tr = forward(p, np.zeros(3), np.zeros((3, 1)))
        assert cross_entropy(tr, [1, 1, 1]) <= 3 * math.log(1 / (1 - 1e-12)) + 1e-15
        # wrong labels hit the clamp and stay finite
        assert cross_entropy(tr, [0, 0, 0]) == pytest.approx(-3 * math.log(1e-12))

    def test_l2_term(self):
        rng = np.random.default_rng(5)
        p = random_params(SMALL, rng)
        r, f, c = random_inputs(rng)
        tr = forward(p, r, f)
        norm = sum(float(np.sum(getattr(p, n) ** 2)) for n in WEIGHT_NAMES)
        assert loss(p, tr, c, 0.3) - loss(p, tr, c, 0.0) == pytest.approx(0.3 * norm, rel=1e-12)


class TestBackward:
    def test_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            p = random_params(SMALL, rng)
            r, f, c = random_inputs(rng)
            worst, checked = fd_check(p, r, f, c, lam=0.05)
            assert checked > 20
            assert worst < 1e-4

    def test_l2_gradient_alone(self):
        rng = np.random.default_rng(11)
        p = random_params(SMALL, rng)
        r, f, c = random_inputs(rng)
        tr = forward(p, r, f)
        g0 = backward(p, tr, c, 0.0)
        g1 = backward(p, tr, c, 0.25)
        for n in WEIGHT_NAMES:
            assert np.allclose(getattr(g1, n) - getattr(g0, n), 0.5 * getattr(p, n), rtol=1e-12, atol=1e-14)
        for n in BIAS_NAMES:
            assert np.array_equal(getattr(g1, n), getattr(g0, n))

    def test_l2_biases_switch(self):
        rng = np.random.default_rng(12)
        p = random_params(SMALL, rng)
        r, f, c = random_inputs(rng)
        tr = forward(p, r, f)
        g0 = backward(p, tr, c, 0.0, include_biases=True)
        g1 = backward(p, tr, c, 0.25, include_biases=True)
        assert np.allclose(g1.b_h - g0.b_h, 0.5 * p.b_h)

    def test_clamped_region_finite(self):
        p = RnnParams.zeros(RnnDims(L=1, H_r=1, H_f=1, H=1))
        p.b_h[:] = 1.0
        p.W_h[:] = [[-1000.0], [1000.0]]
        tr = forward(p, np.zeros(3), np.zeros((3, 1)))
        g = backward(p, tr, [0, 1, 0], 0.0)
        assert all(np.all(np.isfinite(a)) for _, a in g.items())


class TestPredict:
    def _params_with_output(self, up):
        p = RnnParams.zeros(RnnDims(L=1, H_r=1, H_f=1, H=1))
        p.b_h[:] = 1.0
        p.W_h[:] = [[0.0], [math.log(up / (1 - up))]]
        return p

    def test_up(self):
        cls, prob = predict(self._params_with_output(0.7), [0.0], [[0.0]])
        assert cls == 1 and prob == pytest.approx(0.7)

    def test_tie_is_down(self):
        assert predict(RnnParams.zeros(SMALL), [0.1, 0.2], np.zeros((2, 3))) == (0, 0.5)

    def test_down_still_returns_up_probability(self):
        cls, prob = predict(self._params_with_output(0.3), [0.0], [[0.0]])
        assert cls == 0 and prob == pytest.approx(0.3)

    def test_class_coherent_with_probability(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = random_params(SMALL, rng, scale=2.0)
            r, f, _ = random_inputs(rng, T=5)
            cls, prob = predict(p, r, f)
            assert (cls == 1) == (prob > 0.5)


class TestTrain:
    def test_zero_learning_rate(self):
        rng = np.random.default_rng(0)
        r, f, c = random_inputs(rng, T=40)
        p0 = init_params(SMALL, 1)
        p, hist = train([(r, f, c), (r[:10], f[:10], c[:10])], TrainConfig(lr=0.0, epochs=5, bptt=16), params=p0)
        for (n, a), (_, b) in zip(p.items(), p0.items()):
            assert np.array_equal(a, b), n
        assert len(set(hist)) == 1

    def test_small_lr_loss_non_increasing(self):
        rng = np.random.default_rng(3)
        r, f, c = random_inputs(rng, T=12)
        _, hist = train([(r, f, c)], TrainConfig(lr=0.005, lr_decay=1.0, epochs=10, bptt=None, clip=None), dims=SMALL)
        assert all(b <= a for a, b in zip(hist, hist[1:]))

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        data = [random_inputs(rng, T=30) for _ in range(3)]
        cfg = TrainConfig(epochs=4, seed=5, bptt=8)
        a, ha = train(data, cfg, dims=SMALL)
        b, hb = train(data, cfg, dims=SMALL)
        assert ha == hb
        for (n, x), (_, y) in zip(a.items(), b.items()):
            assert x.tobytes() == y.tobytes(), n

    def test_divergence_guard(self):
        rng = np.random.default_rng(1)
        r, f, c = random_inputs(rng, T=10)
        p = init_params(SMALL, 0)
        p.W_h[...] = np.inf
        with pytest.raises((TrainingDiverged, ValueError, FloatingPointError)):
            with np.errstate(all="ignore"):
                train([(r, f, c)], TrainConfig(epochs=1), params=p)

    def test_empty(self):
        with pytest.raises(ValueError):
            train([], TrainConfig())

    def test_planted_task_fits(self):
        """Label follows yesterday's news with no noise: training accuracy must reach 0.9."""
        rng = np.random.default_rng(0)
        T = 300
        f = np.zeros((T, 2))
        c = np.zeros(T, dtype=int)
        for t in range(T):
            d = rng.integers(0, 2)
            f[t, d] = 1.0
            c[t] = d
        r = rng.normal(scale=0.01, size=T)
        cfg = TrainConfig(lr=0.02, epochs=40, seed=1, bptt=32)
        p, _ = train([(r, f, c)], cfg, dims=RnnDims(L=2, H_r=4, H_f=8, H=8))
        pred = forward(p, r, f).y.argmax(axis=1)
        assert np.mean(pred == c) >= 0.9


def test_causality_bit_exact():
    rng = np.random.default_rng(13)
    for _ in range(10):
        p = random_params(SMALL, rng)
        r, f, _ = random_inputs(rng, T=9)
        base = forward(p, r, f).y
        j = int(rng.integers(1, 9))
        r2, f2 = r.copy(), f.copy()
        r2[j:] += rng.normal(size=9 - j)
        f2[j:] = rng.random((9 - j, 3))
        assert forward(p, r2, f2).y[:j].tobytes() == base[:j].tobytes()


def test_checkpoint_round_trip(tmp_path):
    p = init_params(SMALL, 4)
    save_checkpoint(tmp_path / "m.ckpt", p, TrainConfig(seed=4), seed=4)
    q, header = load_checkpoint(tmp_path / "m.ckpt")
    for (n, a), (_, b) in zip(p.items(), q.items()):
        assert a.tobytes() == b.tobytes(), n
    assert header["dims"] == {"L": 3, "H_r": 2, "H_f": 3, "H": 3}
    assert header["seed"] == 4 and header["config"]["seed"] == 4
    raw = (tmp_path / "m.ckpt").read_bytes()
    assert raw[:8] == b"SNRNNCKP"
    # last tensor is W_h (2 x 3), stored little-endian row-major at the end
    assert np.frombuffer(raw[-48:], dtype="<f8").tolist() == p.W_h.ravel().tolist()
