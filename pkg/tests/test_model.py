import numpy as np
import pytest

from difflink import (Adam, LinkRecord, ModelParams, Pooling,
                      SamplingOperatorSet, TrainConfig, auc, build_graph,
                      build_link_record, forward, init_params, load_params,
                      loss_and_gradients, predict, save_params, train,
                      write_records)
from difflink.metrics import ScoredPairs
from difflink.model import stack_records

from oracles import scalar_forward


def _random_record(rng, r1=3, p=4, w=5, label=1):
    blocks = rng.normal(size=(r1, p, w)).astype(np.float32)
    ids = np.arange(p, dtype=np.uint32)
    return LinkRecord(0, 1, label, ids, blocks)


def _random_params(rng, in_dim, d_prime, pooling, dtype=np.float32):
    params = init_params(rng, in_dim, d_prime, pooling, dtype=dtype)
    # nonzero biases exercise every gradient path
    params.hidden_b = rng.normal(size=d_prime).astype(dtype) * 0.1
    params.out_b = np.asarray(rng.normal() * 0.1, dtype=dtype)
    return params


def test_init_param_shapes():
    rng = np.random.default_rng(0)
    params = init_params(rng, 20, 8, Pooling.CENTER)
    assert params.W.shape == (20, 8)
    assert params.hidden_w.shape == (8, 8)
    assert params.out_w.shape == (8,)
    assert params.out_b.shape == ()
    assert params.pooling is Pooling.CENTER
    ccn = init_params(rng, 20, 8, Pooling.CCN)
    assert ccn.hidden_w.shape == (16, 8)
    assert ccn.pooling is Pooling.CCN
    assert ccn.pool_dim == 16


def test_zero_params_give_half():
    rng = np.random.default_rng(1)
    rec = _random_record(rng)
    params = init_params(rng, 15, 6, Pooling.CCN)
    for k, t in params.tensors().items():
        t[...] = 0.0
    prob, _ = forward(rec, params)
    assert prob == 0.5


def test_forward_symmetric_in_target_order():
    rng = np.random.default_rng(2)
    rec = _random_record(rng, p=2)
    params = _random_params(rng, 15, 6, Pooling.CENTER)
    swapped = LinkRecord(rec.v, rec.u, rec.label, rec.pooled_ids[[1, 0]],
                         rec.blocks[:, [1, 0], :])
    p1, _ = forward(rec, params)
    p2, _ = forward(swapped, params)
    assert p1 == pytest.approx(p2, rel=1e-6)


@pytest.mark.parametrize("pooling,p,agg", [
    (Pooling.CENTER, 2, "mean"),
    (Pooling.CCN, 2, "mean"),
    (Pooling.CCN, 5, "mean"),
    (Pooling.CCN, 5, "sum"),
    (Pooling.CCN, 5, "max"),
])
def test_forward_matches_scalar_oracle(pooling, p, agg):
    rng = np.random.default_rng(3)
    for trial in range(5):
        rec = _random_record(rng, r1=2, p=p, w=4)
        params = _random_params(rng, 8, 5, pooling)
        prob, _ = forward(rec, params, agg=agg)
        assert prob == pytest.approx(scalar_forward(rec, params, agg), abs=1e-6)


def test_forward_rejects_width_mismatch():
    rng = np.random.default_rng(4)
    rec = _random_record(rng, r1=2, p=2, w=4)
    params = init_params(rng, 9, 5, Pooling.CENTER)
    with pytest.raises(ValueError, match="width"):
        forward(rec, params)
    with pytest.raises(ValueError, match="mode"):
        forward(rec, init_params(rng, 8, 5, Pooling.CENTER), mode="test")


def test_eval_equals_train_without_dropout():
    rng = np.random.default_rng(5)
    rec = _random_record(rng)
    params = _random_params(rng, 15, 6, Pooling.CCN)
    p_eval, _ = forward(rec, params, mode="eval")
    p_train, _ = forward(rec, params, mode="train", dropout=0.0)
    assert p_eval == p_train


def test_loss_is_ln2_at_zero_params():
    rng = np.random.default_rng(6)
    batch = [_random_record(rng, label=i % 2) for i in range(4)]
    params = init_params(rng, 15, 6, Pooling.CCN)
    for k, t in params.tensors().items():
        t[...] = 0.0
    cfg = TrainConfig(d_prime=6, dropout=0.0, epochs=1)
    loss, grads = loss_and_gradients(batch, params, cfg)
    assert loss == pytest.approx(np.log(2.0), abs=1e-7)


def test_duplicated_batch_keeps_mean_loss_and_grads():
    rng = np.random.default_rng(7)
    batch = [_random_record(rng, label=i % 2) for i in range(3)]
    params = _random_params(rng, 15, 6, Pooling.CCN)
    cfg = TrainConfig(d_prime=6, dropout=0.0, epochs=1)
    loss1, g1 = loss_and_gradients(batch, params, cfg)
    loss2, g2 = loss_and_gradients(batch + batch, params, cfg)
    assert loss1 == pytest.approx(loss2, rel=1e-6)
    for k, t in g1.tensors().items():
        assert np.allclose(t, g2.tensors()[k], rtol=1e-5, atol=1e-7)


def _relative_grad_error(batch, params, cfg, seed, samples=10):
    """Max relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    _, grads = loss_and_gradients(batch, params, cfg,
                                  np.random.default_rng(seed))
    eps = 1e-6
    worst = 0.0
    check_rng = np.random.default_rng(99)
    for k, tensor in params.tensors().items():
        flat = tensor.reshape(-1)
        gflat = grads.tensors()[k].reshape(-1)
        idxs = check_rng.choice(flat.size, size=min(samples, flat.size),
                                replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            lo_plus, _ = loss_and_gradients(batch, params, cfg,
                                            np.random.default_rng(seed))
            flat[i] = orig - eps
            lo_minus, _ = loss_and_gradients(batch, params, cfg,
                                             np.random.default_rng(seed))
            flat[i] = orig
            fd = (lo_plus - lo_minus) / (2 * eps)
            denom = max(abs(fd), abs(gflat[i]), 1e-8)
            worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst


@pytest.mark.parametrize("pooling,agg,dropout", [
    (Pooling.CENTER, "mean", 0.0),
    (Pooling.CCN, "mean", 0.0),
    (Pooling.CCN, "sum", 0.0),
    (Pooling.CCN, "max", 0.0),
    (Pooling.CCN, "mean", 0.4),
])
def test_gradients_match_finite_differences(pooling, agg, dropout):
    rng = np.random.default_rng(8)
    p = 2 if pooling is Pooling.CENTER else 5
    batch = [_random_record(rng, r1=2, p=p, w=4, label=i % 2)
             for i in range(3)]
    params = _random_params(rng, 8, 5, pooling, dtype=np.float64)
    cfg = TrainConfig(d_prime=5, dropout=dropout, epochs=1, agg=agg)
    assert _relative_grad_error(batch, params, cfg, seed=13) < 1e-6


def test_adam_hand_trace():
    # constant unit gradient, lr 0.1, eps 0.5: bias correction makes
    # m_hat = v_hat = 1 every step, so each step subtracts 0.1 / 1.5
    tensors = {
        "W": np.ones((2, 2), dtype=np.float32),
        "hidden_w": np.ones((2, 2), dtype=np.float32),
        "hidden_b": np.ones(2, dtype=np.float32),
        "out_w": np.ones(2, dtype=np.float32),
        "out_b": np.asarray(1.0, dtype=np.float32),
    }
    params = ModelParams(**tensors)
    grads = ModelParams(**{k: np.ones_like(v) for k, v in tensors.items()})
    opt = Adam(params, lr=0.1, eps=0.5)
    for _ in range(3):
        opt.step(params, grads)
    expected = 1.0 - 3 * (0.1 / 1.5)
    for k, t in params.tensors().items():
        assert np.allclose(t, expected, atol=1e-6), k


def _toy_dataset(n_links, seed, separation=3.0):
    """Records whose block values carry the label directly."""
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n_links):
        label = i % 2
        blocks = rng.normal(size=(2, 2, 3)).astype(np.float32)
        blocks += np.float32(separation * label)
        recs.append(LinkRecord(2 * i, 2 * i + 1, label,
                               np.arange(2, dtype=np.uint32), blocks))
    return recs


def test_train_separates_toy_data():
    recs = _toy_dataset(40, seed=9)
    cfg = TrainConfig(d_prime=8, dropout=0.0, epochs=30, batch_size=8,
                      lr=0.01, seed=0, pooling="center")
    params, history = train(recs[:30], recs[30:], cfg)
    scores = predict(recs[30:], params)
    labels = np.array([r.label for r in recs[30:]])
    final = auc(ScoredPairs(scores[labels == 1], scores[labels == 0]))
    assert final == 1.0
    assert history[-1]["train_loss"] < history[0]["train_loss"]


def test_train_same_seed_same_history():
    recs = _toy_dataset(24, seed=10)
    cfg = TrainConfig(d_prime=6, dropout=0.5, epochs=4, batch_size=8,
                      lr=0.01, seed=7, pooling="center")
    p1, h1 = train(recs[:16], recs[16:], cfg)
    p2, h2 = train(recs[:16], recs[16:], cfg)
    assert h1 == h2
    for k, t in p1.tensors().items():
        assert np.array_equal(t, p2.tensors()[k])
    p3, h3 = train(recs[:16], recs[16:],
                   TrainConfig(d_prime=6, dropout=0.5, epochs=4, batch_size=8,
                               lr=0.01, seed=8, pooling="center"))
    assert h3 != h1


def test_train_zero_lr_keeps_init():
    recs = _toy_dataset(16, seed=11)
    cfg = TrainConfig(d_prime=6, dropout=0.0, epochs=3, batch_size=8,
                      lr=0.0, seed=3, pooling="center")
    params, history = train(recs[:12], recs[12:], cfg)
    rng = np.random.default_rng(3)
    fresh = init_params(rng, recs[0].num_operators * recs[0].block_width,
                        6, Pooling.CENTER)
    for k, t in params.tensors().items():
        assert np.array_equal(t, fresh.tensors()[k])
    aucs = [h["valid_auc"] for h in history]
    assert len(set(aucs)) == 1


def test_train_returns_best_epoch_params():
    recs = _toy_dataset(30, seed=12)
    cfg = TrainConfig(d_prime=6, dropout=0.3, epochs=6, batch_size=8,
                      lr=0.05, seed=1, pooling="center")
    params, history = train(recs[:20], recs[20:], cfg)
    scores = predict(recs[20:], params)
    labels = np.array([r.label for r in recs[20:]])
    got = auc(ScoredPairs(scores[labels == 1], scores[labels == 0]))
    assert got == pytest.approx(max(h["valid_auc"] for h in history))


def test_train_epoch_times_out_param():
    recs = _toy_dataset(16, seed=13)
    cfg = TrainConfig(d_prime=4, dropout=0.0, epochs=3, batch_size=8,
                      lr=0.01, seed=0, pooling="center")
    times = []
    _, history = train(recs[:12], recs[12:], cfg, epoch_times=times)
    assert len(times) == 3 and all(t >= 0 for t in times)
    assert all("time" not in h for h in history)


def test_predict_from_file_matches_records(tmp_path):
    g = build_graph(8, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6),
                        (6, 7), (0, 7)])
    cfg = SamplingOperatorSet(variant="PoS", r=2, h=2)
    links = [(0, 1, 1), (2, 5, 0), (3, 4, 1)]
    recs = [build_link_record(g, ln, cfg) for ln in links]
    path = tmp_path / "d.rec"
    write_records(path, recs)
    rng = np.random.default_rng(14)
    params = _random_params(rng, recs[0].num_operators * recs[0].block_width,
                            5, Pooling.CENTER)
    from_file = predict(path, params)
    from_list = predict(recs, params)
    assert np.array_equal(from_file, from_list)
    assert np.all((from_file > 0) & (from_file < 1))
    assert from_file[0] == pytest.approx(forward(recs[0], params)[0])


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    params = _random_params(rng, 12, 6, Pooling.CCN)
    path = tmp_path / "model.ckpt"
    save_params(path, params, extra={"best_epoch": 4})
    loaded, extra = load_params(path)
    assert extra == {"best_epoch": 4}
    for k, t in params.tensors().items():
        assert np.array_equal(t, loaded.tensors()[k])
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_params(path)


def test_stack_records_rejects_width_mismatch():
    rng = np.random.default_rng(16)
    a = _random_record(rng, r1=2, p=2, w=4)
    b = _random_record(rng, r1=2, p=2, w=5)
    with pytest.raises(ValueError, match="width"):
        stack_records([a, b])
    c = _random_record(rng, r1=3, p=2, w=4)
    with pytest.raises(ValueError, match="operator"):
        stack_records([a, c])


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(agg="median")
    cfg = TrainConfig(pooling="ccn")
    assert cfg.pooling is Pooling.CCN
