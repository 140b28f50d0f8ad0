"""Mask-prediction networks: dense ReLU stacks and gated recurrent layers.

Forward passes and gradients are written out by hand in numpy; training is
plain SGD on the squared mask error with an exponentially decaying learning
rate, returning the parameters of the epoch with the lowest validation loss.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import FormatError, NumericError
from .features import KIND_IDS, KINDS_BY_ID, FeatureKind, FeatureMatrix

_MODEL_MAGIC = b"SNRM"
_MODEL_VERSION = 1


class Activation(Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    RECURRENT_GATED = "recurrent"


_ACT_IDS = {Activation.RELU: 0, Activation.SIGMOID: 1, Activation.RECURRENT_GATED: 2}
_ACTS_BY_ID = {v: k for k, v in _ACT_IDS.items()}

# parameter arrays per layer, in file order
_DENSE_KEYS = ("w", "b")
_RECURRENT_KEYS = ("wx", "wh", "b")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: Activation

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be >= 1")

    def param_keys(self):
        if self.activation is Activation.RECURRENT_GATED:
            return _RECURRENT_KEYS
        return _DENSE_KEYS

    def param_shape(self, key: str):
        h = self.out_dim
        shapes = {
            "w": (self.in_dim, h),
            "b": (4 * h,) if self.activation is Activation.RECURRENT_GATED else (h,),
            "wx": (self.in_dim, 4 * h),
            "wh": (h, 4 * h),
        }
        return shapes[key]


@dataclass
class NetworkParams:
    """Layer table plus parameter arrays (float64 in memory, f32 on disk)."""

    layers: tuple
    weights: list
    seed: int = 0
    feature_kind: FeatureKind | None = None
    context: int = 1

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if prev.out_dim != cur.in_dim:
                raise ValueError("adjacent layer dimensions must chain")
        if self.layers[-1].activation is not Activation.SIGMOID:
            raise ValueError("the output layer must be sigmoid to produce a mask")
        if len(self.weights) != len(self.layers):
            raise ValueError("one parameter block per layer expected")
        for spec, block in zip(self.layers, self.weights):
            for key in spec.param_keys():
                arr = block[key]
                if arr.shape != spec.param_shape(key):
                    raise ValueError(f"parameter {key} has shape {arr.shape}")
                if not np.all(np.isfinite(arr)):
                    raise ValueError("parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def is_recurrent(self) -> bool:
        return any(s.activation is Activation.RECURRENT_GATED for s in self.layers)

    def num_params(self) -> int:
        return sum(
            block[key].size for spec, block in zip(self.layers, self.weights) for key in spec.param_keys()
        )

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.layers,
            copy.deepcopy(self.weights),
            self.seed,
            self.feature_kind,
            self.context,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    lr0: float = 0.4
    lr_decay: float = 0.95
    lr_floor: float = 0.1
    batch_size: int = 128
    val_fraction: float = 0.15
    chunk_len: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lr_floor <= self.lr0:
            raise ValueError("need 0 <= lr_floor <= lr0")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.chunk_len < 1:
            raise ValueError("epochs, batch_size and chunk_len must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


def lr_at(epoch: int, lr0: float = 0.4, decay: float = 0.95, floor: float = 0.1) -> float:
    """Exponentially decaying learning rate with a floor, epochs counted from 1."""
    if epoch < 1:
        raise ValueError("epochs are counted from 1")
    return max(lr0 * decay ** (epoch - 1), floor)


def _glorot(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    draw = rng.uniform(-limit, limit, size=shape)
    # quantize to the f32 grid so the on-disk format round-trips bitwise
    return draw.astype(np.float32).astype(np.float64)


def glorot_init(
    layers,
    seed: int = 0,
    feature_kind: FeatureKind | None = None,
    context: int = 1,
) -> NetworkParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights and zero biases."""
    rng = np.random.default_rng(seed)
    weights = []
    for spec in layers:
        h = spec.out_dim
        if spec.activation is Activation.RECURRENT_GATED:
            wx = np.concatenate(
                [_glorot(rng, spec.in_dim, h, (spec.in_dim, h)) for _ in range(4)], axis=1
            )
            wh = np.concatenate([_glorot(rng, h, h, (h, h)) for _ in range(4)], axis=1)
            weights.append({"wx": wx, "wh": wh, "b": np.zeros(4 * h)})
        else:
            weights.append({"w": _glorot(rng, spec.in_dim, h, (spec.in_dim, h)), "b": np.zeros(h)})
    return NetworkParams(tuple(layers), weights, seed, feature_kind, context)


PAPER_HIDDEN = {"ff": (1024, 1024, 1024), "rec": (512, 512, 512)}
DESK_HIDDEN = {"ff": (64, 64), "rec": (32, 32)}


def preset_layers(arch: str, scale: str, in_dim: int, out_dim: int = 129):
    """Layer table for the two standard architectures at paper or desk size."""
    table = {"paper": PAPER_HIDDEN, "desk": DESK_HIDDEN}
    if scale not in table:
        raise ValueError(f"unknown preset scale {scale!r}")
    if arch not in table[scale]:
        raise ValueError(f"unknown architecture {arch!r}")
    hidden = Activation.RELU if arch == "ff" else Activation.RECURRENT_GATED
    dims = (in_dim,) + table[scale][arch]
    layers = [LayerSpec(a, b, hidden) for a, b in zip(dims, dims[1:])]
    layers.append(LayerSpec(dims[-1], out_dim, Activation.SIGMOID))
    return tuple(layers)


# ---------------------------------------------------------------------------
# forward / backward


def _dense_apply(spec, block, x):
    z = x @ block["w"] + block["b"]
    if spec.activation is Activation.RELU:
        return np.maximum(z, 0.0)
    return expit(z)


def _dense_backward(spec, block, x, out, dout):
    if spec.activation is Activation.RELU:
        dz = dout * (out > 0.0)
    else:
        dz = dout * out * (1.0 - out)
    grads = {"w": x.T @ dz, "b": dz.sum(axis=0)}
    return grads, dz @ block["w"].T


def _lstm_forward(block, x, h0, c0):
    """Gated recurrent layer over x (B, T, in); returns outputs, final state, cache."""
    b_sz, t_len, _ = x.shape
    h_dim = block["wh"].shape[0]
    gates = np.empty((b_sz, t_len, 4 * h_dim))
    cells = np.empty((b_sz, t_len, h_dim))
    outs = np.empty((b_sz, t_len, h_dim))
    h, c = h0, c0
    # one matmul over all steps for the input contribution
    zx = x @ block["wx"] + block["b"]
    for t in range(t_len):
        z = zx[:, t] + h @ block["wh"]
        i = expit(z[:, :h_dim])
        f = expit(z[:, h_dim : 2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
        o = expit(z[:, 3 * h_dim :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[:, t, :h_dim] = i
        gates[:, t, h_dim : 2 * h_dim] = f
        gates[:, t, 2 * h_dim : 3 * h_dim] = g
        gates[:, t, 3 * h_dim :] = o
        cells[:, t] = c
        outs[:, t] = h
    return outs, (h, c), (gates, cells)


def _lstm_backward(block, x, h0, c0, outs, cache, douts):
    """Gradients of a recurrent layer; the chunk-initial state is a constant."""
    gates, cells = cache
    b_sz, t_len, h_dim = outs.shape
    grads = {k: np.zeros_like(block[k]) for k in _RECURRENT_KEYS}
    dx = np.empty_like(x)
    dh_next = np.zeros((b_sz, h_dim))
    dc_next = np.zeros((b_sz, h_dim))
    for t in range(t_len - 1, -1, -1):
        i = gates[:, t, :h_dim]
        f = gates[:, t, h_dim : 2 * h_dim]
        g = gates[:, t, 2 * h_dim : 3 * h_dim]
        o = gates[:, t, 3 * h_dim :]
        c_prev = cells[:, t - 1] if t > 0 else c0
        h_prev = outs[:, t - 1] if t > 0 else h0
        tanh_c = np.tanh(cells[:, t])
        dh = douts[:, t] + dh_next
        dc = dh * o * (1.0 - tanh_c**2) + dc_next
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g**2),
                dh * tanh_c * o * (1.0 - o),
            ],
            axis=1,
        )
        grads["wx"] += x[:, t].T @ dz
        grads["wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dx[:, t] = dz @ block["wx"].T
        dh_next = dz @ block["wh"].T
        dc_next = dc * f
    return grads, dx


def _forward_seq(params, x, states=None):
    """All layer activations for x (B, T, in); dense layers apply frame-wise."""
    acts = [x]
    caches = []
    new_states = []
    for li, (spec, block) in enumerate(zip(params.layers, params.weights)):
        a = acts[-1]
        if spec.activation is Activation.RECURRENT_GATED:
            b_sz = a.shape[0]
            if states is not None and states[li] is not None:
                h0, c0 = states[li]
            else:
                h0 = np.zeros((b_sz, spec.out_dim))
                c0 = np.zeros((b_sz, spec.out_dim))
            outs, state, cache = _lstm_forward(block, a, h0, c0)
            acts.append(outs)
            caches.append((h0, c0, cache))
            new_states.append(state)
        else:
            b_sz, t_len, d = a.shape
            out = _dense_apply(spec, block, a.reshape(b_sz * t_len, d))
            acts.append(out.reshape(b_sz, t_len, spec.out_dim))
            caches.append(None)
            new_states.append(None)
    return acts, caches, new_states


def _backward_seq(params, acts, caches, dout):
    grads = [None] * len(params.layers)
    d = dout
    for li in range(len(params.layers) - 1, -1, -1):
        spec, block = params.layers[li], params.weights[li]
        a_in, a_out = acts[li], acts[li + 1]
        if spec.activation is Activation.RECURRENT_GATED:
            h0, c0, cache = caches[li]
            grads[li], d = _lstm_backward(block, a_in, h0, c0, a_out, cache, d)
        else:
            b_sz, t_len, _ = a_in.shape
            g, dx = _dense_backward(
                spec,
                block,
                a_in.reshape(b_sz * t_len, -1),
                a_out.reshape(b_sz * t_len, -1),
                d.reshape(b_sz * t_len, -1),
            )
            grads[li] = g
            d = dx.reshape(b_sz, t_len, -1)
    return grads


def _forward_dense(params, x):
    acts = [x]
    for spec, block in zip(params.layers, params.weights):
        acts.append(_dense_apply(spec, block, acts[-1]))
    return acts


def _backward_dense(params, acts, dout):
    grads = [None] * len(params.layers)
    d = dout
    for li in range(len(params.layers) - 1, -1, -1):
        grads[li], d = _dense_backward(
            params.layers[li], params.weights[li], acts[li], acts[li + 1], d
        )
    return grads


def _as_rows(features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.rows
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must form an L x D matrix")
    return x


def forward(params: NetworkParams, features):
    """Mask and second-last-layer activations for one utterance.

    Recurrent layers consume the frames in time order with state carried
    across the whole utterance.
    """
    x = _as_rows(features)
    if x.shape[1] != params.in_dim:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match network input {params.in_dim}"
        )
    if params.is_recurrent:
        acts, _, _ = _forward_seq(params, x[None])
        return acts[-1][0], acts[-2][0]
    acts = _forward_dense(params, x)
    return acts[-1], acts[-2]


def loss(pred, target) -> float:
    """Total squared mask error, summed over frames and bins."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("prediction and target shapes differ")
    return float(np.sum((p - t) ** 2))


def gradients(params: NetworkParams, features, target):
    """Per-layer gradients of the summed squared error over one utterance."""
    x = _as_rows(features)
    t = np.asarray(target, dtype=np.float64)
    if params.is_recurrent:
        acts, caches, _ = _forward_seq(params, x[None])
        dout = 2.0 * (acts[-1] - t[None])
        return _backward_seq(params, acts, caches, dout)
    acts = _forward_dense(params, x)
    dout = 2.0 * (acts[-1] - t)
    return _backward_dense(params, acts, dout)


# ---------------------------------------------------------------------------
# training


def _sgd_step(params, grads, lr):
    for block, grad in zip(params.weights, grads):
        for key, g in grad.items():
            block[key] -= lr * g


def _epoch_dense(params, x_all, y_all, lr, batch_size, rng):
    order = rng.permutation(x_all.shape[0])
    total_sq = 0.0
    for start in range(0, order.size, batch_size):
        idx = order[start : start + batch_size]
        x, y = x_all[idx], y_all[idx]
        acts = _forward_dense(params, x)
        err = acts[-1] - y
        total_sq += float(np.sum(err**2))
        grads = _backward_dense(params, acts, 2.0 * err / err.size)
        _sgd_step(params, grads, lr)
    return total_sq / x_all.size


def _epoch_recurrent(params, records, lr, batch_size, chunk_len, rng):
    order = rng.permutation(len(records))
    total_sq = 0.0
    total_elems = 0
    for start in range(0, order.size, batch_size):
        group = [records[i] for i in order[start : start + batch_size]]
        lengths = [r[0].shape[0] for r in group]
        states = None
        for chunk_start in range(0, max(lengths), chunk_len):
            t_len = min(chunk_len, max(lengths) - chunk_start)
            x = np.zeros((len(group), t_len, params.in_dim))
            y = np.zeros((len(group), t_len, params.out_dim))
            mask = np.zeros((len(group), t_len, 1))
            for bi, (feats, targets) in enumerate(group):
                stop = min(chunk_start + t_len, lengths[bi])
                n = stop - chunk_start
                if n > 0:
                    x[bi, :n] = feats[chunk_start:stop]
                    y[bi, :n] = targets[chunk_start:stop]
                    mask[bi, :n] = 1.0
            n_real = int(mask.sum()) * params.out_dim
            if n_real == 0:
                continue
            acts, caches, states = _forward_seq(params, x, states)
            err = (acts[-1] - y) * mask
            total_sq += float(np.sum(err**2))
            total_elems += n_real
            grads = _backward_seq(params, acts, caches, 2.0 * err / n_real)
            _sgd_step(params, grads, lr)
    return total_sq / total_elems


def _mean_loss(params, records) -> float:
    """Per-element mean squared error over whole utterances."""
    total_sq = 0.0
    total = 0
    for feats, targets in records:
        pred, _ = forward(params, feats)
        total_sq += float(np.sum((pred - targets) ** 2))
        total += targets.size
    return total_sq / total


def _check_records(params, dataset):
    records = []
    for feats, targets in dataset:
        x = _as_rows(feats)
        y = np.asarray(targets, dtype=np.float64)
        if x.shape[1] != params.in_dim:
            raise ValueError("feature dimension does not match the network input")
        if y.ndim != 2 or y.shape != (x.shape[0], params.out_dim):
            raise ValueError("target shape does not match the network output")
        records.append((x, y))
    if not records:
        raise ValueError("training dataset is empty")
    return records


def train(params: NetworkParams, dataset, config: TrainConfig | None = None):
    """SGD over (features, mask) utterance records.

    Returns (best_params, history) where best_params is the snapshot with
    the lowest validation loss and history holds per-epoch statistics.
    Aborts with NumericError if the loss stops being finite.
    """
    cfg = config or TrainConfig()
    records = _check_records(params, dataset)
    if len(records) < 2:
        raise ValueError("need at least two records to split off a validation set")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(records))
    n_val = min(max(1, round(cfg.val_fraction * len(records))), len(records) - 1)
    val_records = [records[i] for i in perm[:n_val]]
    train_records = [records[i] for i in perm[n_val:]]

    work = params.copy()
    history = []
    best_loss = np.inf
    best_params = work.copy()
    if not work.is_recurrent:
        x_all = np.concatenate([r[0] for r in train_records])
        y_all = np.concatenate([r[1] for r in train_records])
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_floor)
        if work.is_recurrent:
            train_loss = _epoch_recurrent(
                work, train_records, lr, cfg.batch_size, cfg.chunk_len, rng
            )
        else:
            train_loss = _epoch_dense(work, x_all, y_all, lr, cfg.batch_size, rng)
        val_loss = _mean_loss(work, val_records)
        if not np.isfinite(train_loss) or not np.isfinite(val_loss):
            raise NumericError(
                f"loss diverged at epoch {epoch} (train={train_loss}, val={val_loss})"
            )
        history.append(EpochStats(epoch, lr, train_loss, val_loss))
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = work.copy()
    return best_params, history


# ---------------------------------------------------------------------------
# model file


def save(params: NetworkParams, path) -> None:
    """Write a model file: magic, version, layer table, f32 parameter blob."""
    head = struct.pack(
        "<4sIBBHQI",
        _MODEL_MAGIC,
        _MODEL_VERSION,
        KIND_IDS[params.feature_kind],
        params.context,
        0,
        params.seed,
        len(params.layers),
    )
    rows = [head]
    for spec in params.layers:
        rows.append(struct.pack("<BxxxII", _ACT_IDS[spec.activation], spec.in_dim, spec.out_dim))
    for spec, block in zip(params.layers, params.weights):
        for key in spec.param_keys():
            rows.append(np.ascontiguousarray(block[key], dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(rows))


def load(path) -> NetworkParams:
    """Read a model file back into float64 parameters."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head_size = struct.calcsize("<4sIBBHQI")
    if len(raw) < head_size:
        raise FormatError("model file is truncated")
    magic, version, kind_id, context, _, seed, n_layers = struct.unpack(
        "<4sIBBHQI", raw[:head_size]
    )
    if magic != _MODEL_MAGIC:
        raise FormatError("not a model file (bad magic)")
    if version != _MODEL_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    if kind_id not in KINDS_BY_ID:
        raise FormatError(f"unknown feature kind id {kind_id}")
    offset = head_size
    entry_size = struct.calcsize("<BxxxII")
    layers = []
    for _ in range(n_layers):
        if len(raw) < offset + entry_size:
            raise FormatError("model file is truncated")
        act_id, in_dim, out_dim = struct.unpack("<BxxxII", raw[offset : offset + entry_size])
        if act_id not in _ACTS_BY_ID:
            raise FormatError(f"unknown activation id {act_id}")
        layers.append(LayerSpec(in_dim, out_dim, _ACTS_BY_ID[act_id]))
        offset += entry_size
    weights = []
    for spec in layers:
        block = {}
        for key in spec.param_keys():
            shape = spec.param_shape(key)
            count = int(np.prod(shape))
            end = offset + 4 * count
            if len(raw) < end:
                raise FormatError("model file is truncated")
            block[key] = (
                np.frombuffer(raw[offset:end], dtype="<f4").astype(np.float64).reshape(shape)
            )
            offset += 4 * count
        weights.append(block)
    if offset != len(raw):
        raise FormatError("model file has trailing bytes")
    return NetworkParams(tuple(layers), weights, seed, KINDS_BY_ID[kind_id], context)
