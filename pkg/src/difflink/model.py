"""Shallow trainable head over precomputed link records.

Per pooled node the r+1 operator blocks are concatenated and reduced by one
learned matrix with ReLU; pooling collapses node rows to a single vector
(Hadamard of the two target rows, optionally concatenated with an aggregate
over common-neighbor rows); a one-hidden-layer MLP with sigmoid output maps
that vector to a link probability. Gradients are exact reverse-mode,
written out by hand; the optimizer is Adam. All training math is float32,
float64 parameters are supported for gradient checking only.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import ScoredPairs, auc
from .records import LinkRecord, Pooling, RecordFile, manifest_path


@dataclass
class ModelParams:
    """Learnable tensors. pool_dim = d' (Center) or 2 d' (CCN)."""

    W: np.ndarray          # ((r+1)*w, d') reduction matrix
    hidden_w: np.ndarray   # (pool_dim, d')
    hidden_b: np.ndarray   # (d',)
    out_w: np.ndarray      # (d',)
    out_b: np.ndarray      # scalar, shape ()

    @property
    def d_prime(self) -> int:
        return self.W.shape[1]

    @property
    def pool_dim(self) -> int:
        return self.hidden_w.shape[0]

    @property
    def pooling(self) -> Pooling:
        return Pooling.CCN if self.pool_dim == 2 * self.d_prime else Pooling.CENTER

    def tensors(self) -> dict:
        return {"W": self.W, "hidden_w": self.hidden_w, "hidden_b": self.hidden_b,
                "out_w": self.out_w, "out_b": self.out_b}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.tensors().items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(**{k: v.astype(dtype) for k, v in self.tensors().items()})


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the benchmark setup."""

    d_prime: int = 256
    dropout: float = 0.5
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    agg: str = "mean"
    pooling: Pooling | None = None

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.agg not in ("mean", "sum", "max"):
            raise ValueError(f"unknown aggregation {self.agg!r}")
        if self.pooling is not None:
            object.__setattr__(self, "pooling", Pooling(self.pooling))


def init_params(rng: np.random.Generator, in_dim: int, d_prime: int,
                pooling: Pooling, dtype=np.float32) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    pool_dim = 2 * d_prime if Pooling(pooling) is Pooling.CCN else d_prime

    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out)).astype(dtype)

    return ModelParams(
        W=glorot(in_dim, d_prime),
        hidden_w=glorot(pool_dim, d_prime),
        hidden_b=np.zeros(d_prime, dtype=dtype),
        out_w=glorot(d_prime, 1)[:, 0],
        out_b=np.zeros((), dtype=dtype),
    )


def stack_records(records, dtype=np.float32):
    """Pad records to a common pooled count.

    Returns (z, mask, labels): z is (B, p_max, (r+1)*w) with each pooled
    node's blocks concatenated operator-major; mask flags real (unpadded)
    rows; labels is float (B,).
    """
    p_max = max(rec.pooled_count for rec in records)
    r1, _, w = records[0].blocks.shape
    b = len(records)
    z = np.zeros((b, p_max, r1 * w), dtype=dtype)
    mask = np.zeros((b, p_max), dtype=bool)
    labels = np.zeros(b, dtype=dtype)
    for i, rec in enumerate(records):
        if rec.blocks.shape[0] != r1 or rec.blocks.shape[2] != w:
            raise ValueError("records disagree on operator count or block width")
        p = rec.pooled_count
        z[i, :p] = rec.blocks.transpose(1, 0, 2).reshape(p, r1 * w)
        mask[i, :p] = True
        labels[i] = rec.label
    return z, mask, labels


def _forward_batch(z, mask, params: ModelParams, dropout_mask, agg: str):
    """Logits plus every intermediate needed for the backward pass."""
    ccn = params.pooling is Pooling.CCN
    h = np.maximum(z @ params.W, 0.0)          # (B, p, d')
    qc = h[:, 0] * h[:, 1]                     # Hadamard of target rows
    cn_idx = None
    if ccn:
        hn = h[:, 2:]
        if hn.shape[1] == 0:
            qn = np.zeros_like(qc)
            cnt = np.zeros(z.shape[0], dtype=z.dtype)
        else:
            cnt = mask[:, 2:].sum(axis=1).astype(z.dtype)
            if agg == "mean":
                qn = hn.sum(axis=1) / np.maximum(cnt, 1.0)[:, None]
            elif agg == "sum":
                qn = hn.sum(axis=1)
            else:
                qn = hn.max(axis=1)
                cn_idx = hn.argmax(axis=1)     # (B, d'), routes max gradient
        q = np.concatenate([qc, qn], axis=1)
    else:
        q = qc
        cnt = None
    hid_pre = q @ params.hidden_w + params.hidden_b
    hid = np.maximum(hid_pre, 0.0)
    hid_d = hid if dropout_mask is None else hid * dropout_mask
    logit = hid_d @ params.out_w + params.out_b
    cache = {"z": z, "mask": mask, "h": h, "q": q, "hid": hid, "hid_d": hid_d,
             "dropout_mask": dropout_mask, "cnt": cnt, "cn_idx": cn_idx,
             "agg": agg, "ccn": ccn, "logit": logit}
    return logit, cache


def _backward_batch(dlogit, cache, params: ModelParams) -> ModelParams:
    z, mask, h = cache["z"], cache["mask"], cache["h"]
    d_prime = params.d_prime
    grads = ModelParams(**{k: np.zeros_like(v) for k, v in params.tensors().items()})
    grads.out_b = np.asarray(dlogit.sum(), dtype=z.dtype)
    grads.out_w = cache["hid_d"].T @ dlogit
    dhid_d = dlogit[:, None] * params.out_w[None, :]
    dhid = dhid_d if cache["dropout_mask"] is None else dhid_d * cache["dropout_mask"]
    dhid_pre = dhid * (cache["hid"] > 0)
    grads.hidden_b = dhid_pre.sum(axis=0)
    grads.hidden_w = cache["q"].T @ dhid_pre
    dq = dhid_pre @ params.hidden_w.T
    dh = np.zeros_like(h)
    dqc = dq[:, :d_prime]
    dh[:, 0] = dqc * h[:, 1]
    dh[:, 1] = dqc * h[:, 0]
    if cache["ccn"] and h.shape[1] > 2:
        dqn = dq[:, d_prime:]
        agg, cnt = cache["agg"], cache["cnt"]
        if agg == "mean":
            share = dqn / np.maximum(cnt, 1.0)[:, None]
            dh[:, 2:] += share[:, None, :] * mask[:, 2:, None]
        elif agg == "sum":
            dh[:, 2:] += dqn[:, None, :] * mask[:, 2:, None]
        else:
            b_idx = np.arange(z.shape[0])[:, None]
            f_idx = np.arange(d_prime)[None, :]
            np.add.at(dh, (b_idx, 2 + cache["cn_idx"], f_idx), dqn)
    dh_pre = dh * (h > 0)
    bp = z.shape[0] * z.shape[1]
    grads.W = z.reshape(bp, -1).T @ dh_pre.reshape(bp, d_prime)
    return grads


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def forward(record: LinkRecord, params: ModelParams, mode: str = "eval",
            rng: np.random.Generator | None = None, dropout: float = 0.5,
            agg: str = "mean"):
    """Probability for one record plus the intermediate cache.

    Train mode with dropout > 0 draws an inverted-scaling mask from ``rng``;
    eval mode (or dropout 0) applies none.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    dtype = params.W.dtype
    z, mask, _ = stack_records([record], dtype=dtype)
    if z.shape[2] != params.W.shape[0]:
        raise ValueError(
            f"record width {z.shape[2]} does not match W rows {params.W.shape[0]}")
    dmask = None
    if mode == "train" and dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout needs an rng")
        dmask = ((rng.random((1, params.d_prime)) >= dropout)
                 .astype(dtype) / (1.0 - dropout)).astype(dtype)
    logit, cache = _forward_batch(z, mask, params, dmask, agg)
    return float(_sigmoid(logit)[0]), cache


def loss_and_gradients(batch, params: ModelParams, config: TrainConfig,
                       rng: np.random.Generator | None = None):
    """Mean binary cross-entropy over a batch and exact gradients.

    The sigmoid and BCE are fused in log space (softplus form), so extreme
    logits cannot overflow. The dropout mask is drawn once and shared
    between forward and backward.
    """
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    dtype = params.W.dtype
    z, mask, y = stack_records(batch, dtype=dtype)
    dmask = None
    if config.dropout > 0.0:
        if rng is None:
            raise ValueError("dropout > 0 needs an rng")
        dmask = ((rng.random((z.shape[0], params.d_prime)) >= config.dropout)
                 .astype(dtype) / (1.0 - config.dropout)).astype(dtype)
    logit, cache = _forward_batch(z, mask, params, dmask, config.agg)
    # loss_i = softplus(logit) - y * logit;  dloss/dlogit = sigmoid(logit) - y
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    dlogit = (_sigmoid(logit) - y) / len(batch)
    grads = _backward_batch(dlogit, cache, params)
    return loss, grads


class Adam:
    """Adam with bias correction: theta -= lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, params: ModelParams, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors().items()}

    def step(self, params: ModelParams, grads: ModelParams) -> None:
        self.t += 1
        gt = grads.tensors()
        pt = params.tensors()
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in gt.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            update = self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            pt[k] -= update.astype(pt[k].dtype)


def _load_records(dataset):
    if isinstance(dataset, (str, Path)):
        return list(RecordFile(dataset))
    return list(dataset)


def _pooling_hint(dataset, config: TrainConfig, records) -> Pooling:
    if config.pooling is not None:
        return config.pooling
    if isinstance(dataset, (str, Path)):
        mpath = manifest_path(dataset)
        if mpath.exists():
            with open(mpath) as fh:
                return Pooling(json.load(fh)["config"]["pooling"])
    if any(rec.pooled_count > 2 for rec in records):
        return Pooling.CCN
    return Pooling.CENTER


def train(dataset, valid, config: TrainConfig, epoch_times: list | None = None):
    """Fit the head; returns (best params, per-epoch history).

    ``dataset`` and ``valid`` are record file paths or record sequences.
    One seeded rng drives init, shuffling and dropout, so runs are exactly
    repeatable. The returned parameters are those of the epoch with the
    highest validation AUC (earliest epoch on ties). ``epoch_times``, when
    given, collects per-epoch wall seconds without touching the history.
    """
    records = _load_records(dataset)
    valid_records = _load_records(valid)
    if not records or not valid_records:
        raise ValueError("train and valid record sets must be nonempty")
    pooling = _pooling_hint(dataset, config, records)
    in_dim = records[0].num_operators * records[0].block_width
    rng = np.random.default_rng(config.seed)
    params = init_params(rng, in_dim, config.d_prime, pooling, dtype=np.float32)
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.eps)
    n = len(records)
    best_auc = -1.0
    best_params = params.copy()
    history = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.monotonic()
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = [records[i] for i in perm[start:start + config.batch_size]]
            loss, grads = loss_and_gradients(batch, params, config, rng)
            opt.step(params, grads)
            total += loss * len(batch)
        if epoch_times is not None:
            epoch_times.append(time.monotonic() - t0)
        scores = predict(valid_records, params, agg=config.agg)
        labels = np.array([rec.label for rec in valid_records])
        val_auc = auc(ScoredPairs(scores[labels == 1], scores[labels == 0]))
        history.append({"epoch": epoch, "train_loss": total / n,
                        "valid_auc": val_auc})
        if val_auc > best_auc:
            best_auc = val_auc
            best_params = params.copy()
    return best_params, history


def predict(dataset, params: ModelParams, agg: str = "mean",
            batch_size: int = 256) -> np.ndarray:
    """Eval-mode probabilities for every record, in file order."""
    records = _load_records(dataset)
    scores = np.zeros(len(records), dtype=np.float64)
    dtype = params.W.dtype
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        if not chunk:
            break
        z, mask, _ = stack_records(chunk, dtype=dtype)
        if z.shape[2] != params.W.shape[0]:
            raise ValueError(
                f"record width {z.shape[2]} does not match W rows {params.W.shape[0]}")
        logit, _ = _forward_batch(z, mask, params, None, agg)
        scores[start:start + len(chunk)] = _sigmoid(logit.astype(np.float64))
    return scores


_CKPT_ORDER = ("W", "hidden_w", "hidden_b", "out_w", "out_b")


def save_params(path, params: ModelParams, extra: dict | None = None) -> None:
    """Checkpoint: one JSON header line, then little-endian float32 tensors."""
    tensors = params.tensors()
    header = {
        "tensors": {k: list(tensors[k].shape) for k in _CKPT_ORDER},
        "dtype": "float32",
        "d_prime": params.d_prime,
        "pool_dim": params.pool_dim,
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for k in _CKPT_ORDER:
            fh.write(np.ascontiguousarray(tensors[k], dtype="<f4").tobytes())


def load_params(path):
    """Read a checkpoint; returns (ModelParams, extra dict)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        loaded = {}
        for k in _CKPT_ORDER:
            shape = tuple(header["tensors"][k])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError(f"{path}: truncated checkpoint tensor {k}")
            loaded[k] = np.frombuffer(buf, dtype="<f4").reshape(shape).astype(np.float32)
    return ModelParams(**loaded), header.get("extra", {})
