"""Dilated causal temporal convolutional network with multitask heads.

Stacked causal 1-D convolutions (dilation doubling per layer, left padding
only) encode a window into per-timestep features. The latent vector is a
linear projection of the features mean-pooled over timesteps with a full
receptive field; class logits are computed from the latent alone, and a
per-timestep linear head reconstructs the input for the unsupervised task.

Everything is plain float64 numpy with hand-written backpropagation so the
gradients stay finite-difference checkable. Training is single-threaded
momentum SGD, deterministic per seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TCNConfig:
    input_window: int
    in_channels: int
    n_layers: int
    hidden_channels: int
    kernel_size: int
    latent_dim: int
    n_classes: int

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * ((1 << self.n_layers) - 1)

    def dilation(self, layer: int) -> int:
        return 1 << layer

    def validate(self) -> None:
        if min(
            self.input_window,
            self.in_channels,
            self.n_layers,
            self.hidden_channels,
            self.kernel_size,
            self.latent_dim,
            self.n_classes,
        ) < 1:
            raise ValueError("all TCN dimensions must be >= 1")
        if self.receptive_field > self.input_window:
            raise ValueError(
                f"receptive field {self.receptive_field} exceeds "
                f"input window {self.input_window}"
            )


@dataclass
class ModelWeights:
    conv_w: List[np.ndarray]  # per layer: (out_ch, in_ch, kernel)
    conv_b: List[np.ndarray]  # per layer: (out_ch,)
    latent_w: np.ndarray      # (latent_dim, hidden)
    latent_b: np.ndarray      # (latent_dim,)
    cls_w: np.ndarray         # (n_classes, latent_dim)
    cls_b: np.ndarray         # (n_classes,)
    rec_w: np.ndarray         # (in_channels, hidden)
    rec_b: np.ndarray         # (in_channels,)

    def tensors(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            out[f"conv{i}.w"] = w
            out[f"conv{i}.b"] = b
        out["latent.w"] = self.latent_w
        out["latent.b"] = self.latent_b
        out["cls.w"] = self.cls_w
        out["cls.b"] = self.cls_b
        out["rec.w"] = self.rec_w
        out["rec.b"] = self.rec_b
        return out

    def copy(self) -> "ModelWeights":
        return ModelWeights(
            [w.copy() for w in self.conv_w],
            [b.copy() for b in self.conv_b],
            self.latent_w.copy(),
            self.latent_b.copy(),
            self.cls_w.copy(),
            self.cls_b.copy(),
            self.rec_w.copy(),
            self.rec_b.copy(),
        )

    def zeros_like(self) -> "ModelWeights":
        return ModelWeights(
            [np.zeros_like(w) for w in self.conv_w],
            [np.zeros_like(b) for b in self.conv_b],
            np.zeros_like(self.latent_w),
            np.zeros_like(self.latent_b),
            np.zeros_like(self.cls_w),
            np.zeros_like(self.cls_b),
            np.zeros_like(self.rec_w),
            np.zeros_like(self.rec_b),
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors().values())


def init_weights(config: TCNConfig, seed: int = 0) -> ModelWeights:
    config.validate()
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c_prev = config.in_channels
    for _ in range(config.n_layers):
        fan_in = c_prev * config.kernel_size
        conv_w.append(rng.normal(0, np.sqrt(2.0 / fan_in), (config.hidden_channels, c_prev, config.kernel_size)))
        conv_b.append(np.zeros(config.hidden_channels))
        c_prev = config.hidden_channels
    h = config.hidden_channels
    return ModelWeights(
        conv_w=conv_w,
        conv_b=conv_b,
        latent_w=rng.normal(0, np.sqrt(1.0 / h), (config.latent_dim, h)),
        latent_b=np.zeros(config.latent_dim),
        cls_w=rng.normal(0, np.sqrt(1.0 / config.latent_dim), (config.n_classes, config.latent_dim)),
        cls_b=np.zeros(config.n_classes),
        rec_w=rng.normal(0, np.sqrt(1.0 / h), (config.in_channels, h)),
        rec_b=np.zeros(config.in_channels),
    )


# -- forward / backward -------------------------------------------------------


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int) -> np.ndarray:
    _, _, t = x.shape
    k = w.shape[2]
    pad = (k - 1) * dilation
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    out = np.tile(b[None, :, None], (x.shape[0], 1, t)).astype(np.float64)
    for tap in range(k):
        out += np.einsum("oc,bct->bot", w[:, :, tap], x_pad[:, :, tap * dilation : tap * dilation + t])
    return out


def _conv_backward(
    x: np.ndarray, w: np.ndarray, dilation: int, grad_out: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, _, t = x.shape
    k = w.shape[2]
    pad = (k - 1) * dilation
    x_pad = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    dw = np.empty_like(w)
    dx_pad = np.zeros_like(x_pad)
    for tap in range(k):
        sl = slice(tap * dilation, tap * dilation + t)
        dw[:, :, tap] = np.einsum("bot,bct->oc", grad_out, x_pad[:, :, sl])
        dx_pad[:, :, sl] += np.einsum("oc,bot->bct", w[:, :, tap], grad_out)
    db = grad_out.sum(axis=(0, 2))
    return dw, db, dx_pad[:, :, pad:]


@dataclass
class _ForwardCache:
    layer_inputs: List[np.ndarray]   # input of each layer (post-ReLU of previous)
    pre_acts: List[np.ndarray]       # pre-ReLU conv outputs
    features: np.ndarray             # final layer post-ReLU (B, H, T)
    pooled: np.ndarray               # (B, H)
    latent: np.ndarray               # (B, D)
    logits: np.ndarray               # (B, M)
    recon: np.ndarray                # (B, C_in, T)


def _forward(config: TCNConfig, weights: ModelWeights, x: np.ndarray) -> _ForwardCache:
    if x.ndim != 3 or x.shape[1] != config.in_channels or x.shape[2] != config.input_window:
        raise ValueError(
            f"expected input shape (B, {config.in_channels}, {config.input_window}), got {x.shape}"
        )
    h = x
    layer_inputs, pre_acts = [], []
    for layer in range(config.n_layers):
        layer_inputs.append(h)
        pre = _conv_forward(h, weights.conv_w[layer], weights.conv_b[layer], config.dilation(layer))
        pre_acts.append(pre)
        h = np.maximum(pre, 0.0)
    rf = config.receptive_field
    pooled = h[:, :, rf - 1 :].mean(axis=2)
    latent = pooled @ weights.latent_w.T + weights.latent_b
    logits = latent @ weights.cls_w.T + weights.cls_b
    recon = np.einsum("oh,bht->bot", weights.rec_w, h) + weights.rec_b[None, :, None]
    return _ForwardCache(layer_inputs, pre_acts, h, pooled, latent, logits, recon)


def tcn_forward(
    config: TCNConfig, weights: ModelWeights, window: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode one window -> (latent, class logits, reconstruction)."""
    cache = _forward(config, weights, np.asarray(window, dtype=np.float64)[None])
    return cache.latent[0], cache.logits[0], cache.recon[0]


def classify_latent(weights: ModelWeights, latent: np.ndarray) -> np.ndarray:
    """Class logits from the latent encoding alone."""
    return np.asarray(latent, dtype=np.float64) @ weights.cls_w.T + weights.cls_b


def layer_activations(config: TCNConfig, weights: ModelWeights, x: np.ndarray) -> List[np.ndarray]:
    """Post-ReLU activations of every layer (for causality probing)."""
    cache = _forward(config, weights, np.asarray(x, dtype=np.float64))
    return [np.maximum(p, 0.0) for p in cache.pre_acts]


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_grads(
    config: TCNConfig,
    weights: ModelWeights,
    x: np.ndarray,
    y: np.ndarray,
    recon_weight: float,
) -> Tuple[float, float, float, ModelWeights, np.ndarray]:
    """Multitask loss (CE + recon_weight * MSE) and its gradients.

    Returns (total, ce, mse, grads, logits).
    """
    cache = _forward(config, weights, x)
    b, _, t = x.shape
    log_p = _log_softmax(cache.logits)
    ce = float(-log_p[np.arange(b), y].mean())
    diff = cache.recon - x
    mse = float((diff ** 2).mean())
    total = ce + recon_weight * mse

    grads = weights.zeros_like()

    # classification path
    dlogits = np.exp(log_p)
    dlogits[np.arange(b), y] -= 1.0
    dlogits /= b
    grads.cls_w[:] = dlogits.T @ cache.latent
    grads.cls_b[:] = dlogits.sum(axis=0)
    dlatent = dlogits @ weights.cls_w
    grads.latent_w[:] = dlatent.T @ cache.pooled
    grads.latent_b[:] = dlatent.sum(axis=0)
    dpooled = dlatent @ weights.latent_w

    # reconstruction path
    drecon = (2.0 * recon_weight / diff.size) * diff
    grads.rec_w[:] = np.einsum("bot,bht->oh", drecon, cache.features)
    grads.rec_b[:] = drecon.sum(axis=(0, 2))
    dfeat = np.einsum("oh,bot->bht", weights.rec_w, drecon)

    rf = config.receptive_field
    dfeat[:, :, rf - 1 :] += dpooled[:, :, None] / (t - rf + 1)

    dh = dfeat
    for layer in reversed(range(config.n_layers)):
        dpre = dh * (cache.pre_acts[layer] > 0)
        dw, db, dx = _conv_backward(
            cache.layer_inputs[layer], weights.conv_w[layer], config.dilation(layer), dpre
        )
        grads.conv_w[layer][:] = dw
        grads.conv_b[layer][:] = db
        dh = dx
    return total, ce, mse, grads, cache.logits


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 16
    learning_rate: float = 0.05
    momentum: float = 0.9
    recon_weight: float = 0.1
    seed: int = 0
    stop_at_accuracy: Optional[float] = None


def train(
    x: np.ndarray,
    y: np.ndarray,
    config: TCNConfig,
    train_config: Optional[TrainConfig] = None,
) -> Tuple[ModelWeights, List[dict]]:
    """Mini-batch momentum SGD on CE + recon_weight * MSE.

    Returns trained weights and a per-epoch loss trace.
    """
    tc = train_config or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("training needs at least 2 classes present")
    config.validate()
    weights = init_weights(config, tc.seed)
    velocity = weights.zeros_like()
    rng = np.random.default_rng(np.random.SeedSequence((tc.seed, 0x7C)))
    n = len(x)
    trace: List[dict] = []
    for epoch in range(tc.epochs):
        order = rng.permutation(n)
        ep_loss = ep_ce = ep_mse = 0.0
        correct = 0
        for start in range(0, n, tc.batch_size):
            idx = order[start : start + tc.batch_size]
            total, ce, mse, grads, logits = loss_and_grads(
                config, weights, x[idx], y[idx], tc.recon_weight
            )
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}: total={total}, ce={ce}, mse={mse}"
                )
            grad_t, vel_t = grads.tensors(), velocity.tensors()
            for name, tensor in weights.tensors().items():
                v = vel_t[name]
                v *= tc.momentum
                v -= tc.learning_rate * grad_t[name]
                tensor += v
            ep_loss += total * len(idx)
            ep_ce += ce * len(idx)
            ep_mse += mse * len(idx)
            correct += int((logits.argmax(axis=1) == y[idx]).sum())
        if not weights.all_finite():
            raise TrainingDiverged(f"non-finite weights after epoch {epoch}")
        acc = correct / n
        trace.append(
            {
                "epoch": epoch,
                "loss": ep_loss / n,
                "ce": ep_ce / n,
                "mse": ep_mse / n,
                "train_accuracy": acc,
            }
        )
        if tc.stop_at_accuracy is not None and acc >= tc.stop_at_accuracy:
            break
    return weights, trace


# -- weights file -------------------------------------------------------------

_WEIGHTS_MAGIC = b"VTCW"
_WEIGHTS_VERSION = 1
_CONFIG_STRUCT = struct.Struct("<7I")


def save_weights(path: "Path | str", config: TCNConfig, weights: ModelWeights) -> None:
    """Versioned little-endian binary: config block then shape-prefixed tensors."""
    tensors = weights.tensors()
    with open(path, "wb") as fh:
        fh.write(_WEIGHTS_MAGIC)
        fh.write(bytes([_WEIGHTS_VERSION]))
        fh.write(
            _CONFIG_STRUCT.pack(
                config.input_window,
                config.in_channels,
                config.n_layers,
                config.hidden_channels,
                config.kernel_size,
                config.latent_dim,
                config.n_classes,
            )
        )
        fh.write(struct.pack("<H", len(tensors)))
        for name, tensor in tensors.items():
            encoded = name.encode("ascii")
            fh.write(struct.pack("<B", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(tensor.astype("<f8").tobytes())


def load_weights(path: "Path | str") -> Tuple[TCNConfig, ModelWeights]:
    data = Path(path).read_bytes()
    if data[:4] != _WEIGHTS_MAGIC:
        raise ValueError("not a TCN weights file")
    if data[4] != _WEIGHTS_VERSION:
        raise ValueError(f"unsupported weights version {data[4]}")
    off = 5
    cfg = TCNConfig(*_CONFIG_STRUCT.unpack_from(data, off))
    off += _CONFIG_STRUCT.size
    (n_tensors,) = struct.unpack_from("<H", data, off)
    off += 2
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        name_len = data[off]
        off += 1
        name = data[off : off + name_len].decode("ascii")
        off += name_len
        ndim = data[off]
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
        tensors[name] = arr
    weights = ModelWeights(
        conv_w=[tensors[f"conv{i}.w"] for i in range(cfg.n_layers)],
        conv_b=[tensors[f"conv{i}.b"] for i in range(cfg.n_layers)],
        latent_w=tensors["latent.w"],
        latent_b=tensors["latent.b"],
        cls_w=tensors["cls.w"],
        cls_b=tensors["cls.b"],
        rec_w=tensors["rec.w"],
        rec_b=tensors["rec.b"],
    )
    return cfg, weights
