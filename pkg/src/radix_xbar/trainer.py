"""Quantization-aware training of a small CNN with radix-X, binary or real weights.

The forward pass runs on quantized weights while ADAM updates the real-valued
shadow copies; gradients cross the quantizers with a clipped straight-through
estimator.
"""

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from tqdm import tqdm

from .config import RadixConfig
from .errors import ConstantTensor, EmptyDataset, FormatError, InvalidSetting, ShapeMismatch, StaleCache
from .models import TraceRow
from .quantizer import binarize, dequantize_weights, quantize_weights, radix_relu
from .tensor_io import decode_tensor, encode_tensor

CHECKPOINT_MAGIC = b"QAT1"

MODE_SETTINGS = {
    "real": ("none", "real-relu"),
    "bnn": ("binarize", "bnn-sign"),
    "radix": ("radix-x", "radix-relu"),
}
QUANTIZERS = ("none", "binarize", "radix-x")
ACTIVATIONS = ("real-relu", "bnn-sign", "radix-relu")


@dataclass(frozen=True)
class TinyNet:
    """conv(k x k) -> activation -> fully-connected -> softmax.

    ``conv_filters=0`` drops the convolution and leaves one fully-connected
    layer on the flattened input.
    """
    input_shape: Tuple[int, int] = (8, 8)
    n_classes: int = 10
    conv_filters: int = 8
    kernel_size: int = 3
    quantizer: str = "radix-x"
    activation: str = "radix-relu"
    cfg: RadixConfig = field(default_factory=RadixConfig)
    quantize_inputs: bool = True
    weight_clip: Optional[float] = None

    def __post_init__(self):
        if self.quantizer not in QUANTIZERS:
            raise ValueError(f"unknown quantizer {self.quantizer!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        h, w = self.input_shape
        if self.conv_filters and (self.kernel_size > h or self.kernel_size > w):
            raise ShapeMismatch(f"{self.kernel_size}x{self.kernel_size} kernel on {h}x{w} input")
        if self.n_classes < 1 or self.conv_filters < 0:
            raise ShapeMismatch("layer sizes must be positive")

    @classmethod
    def for_mode(cls, mode: str, quantize_activations: bool = True, **kwargs) -> "TinyNet":
        """Net preset for "real", "bnn" or "radix".

        With ``quantize_activations=False`` the hidden activation stays a real
        ReLU and only the weights are quantized.
        """
        if mode not in MODE_SETTINGS:
            raise ValueError(f"unknown mode {mode!r}")
        quantizer, activation = MODE_SETTINGS[mode]
        if not quantize_activations:
            activation = "real-relu"
        return cls(quantizer=quantizer, activation=activation,
                   quantize_inputs=quantize_activations and mode == "radix", **kwargs)

    @property
    def mode(self) -> str:
        return {"none": "real", "binarize": "bnn", "radix-x": "radix"}[self.quantizer]

    @property
    def conv_out(self) -> Tuple[int, int]:
        h, w = self.input_shape
        return h - self.kernel_size + 1, w - self.kernel_size + 1

    def layer_shapes(self) -> List[Tuple[int, int]]:
        h, w = self.input_shape
        if not self.conv_filters:
            return [(h * w, self.n_classes)]
        oh, ow = self.conv_out
        k = self.kernel_size
        return [(self.conv_filters, k * k), (oh * ow * self.conv_filters, self.n_classes)]


@dataclass
class QatState:
    """Shadow weights and ADAM moments for every layer."""
    w_real: List[np.ndarray]
    adam_m: List[np.ndarray]
    adam_v: List[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not len(self.w_real) == len(self.adam_m) == len(self.adam_v):
            raise ShapeMismatch("layer counts of weights and moments differ")
        for w, m, v in zip(self.w_real, self.adam_m, self.adam_v):
            if not w.shape == m.shape == v.shape:
                raise ShapeMismatch(f"weight {w.shape} and moments {m.shape}/{v.shape} disagree")
        if self.step < 0:
            raise ValueError("step must be non-negative")

    @property
    def hyper(self) -> Tuple[float, float, float, float]:
        return (self.lr, self.beta1, self.beta2, self.eps)

    def to_bytes(self) -> bytes:
        """QAT1 checkpoint: per-layer RXT1 tensors, then step and hyperparameters."""
        out = [CHECKPOINT_MAGIC, struct.pack("<I", len(self.w_real))]
        for w, m, v in zip(self.w_real, self.adam_m, self.adam_v):
            out += [encode_tensor(w), encode_tensor(m), encode_tensor(v)]
        out.append(struct.pack("<I4d", self.step, *self.hyper))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "QatState":
        if data[:4] != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {data[:4]!r}")
        try:
            (layers,) = struct.unpack_from("<I", data, 4)
            offset = 8
            tensors: List[List[np.ndarray]] = [[], [], []]
            for _ in range(layers):
                for slot in tensors:
                    array, offset = decode_tensor(data, offset)
                    slot.append(array)
            step, lr, beta1, beta2, eps = struct.unpack_from("<I4d", data, offset)
        except struct.error as e:
            raise FormatError(f"truncated checkpoint: {e}") from e
        if offset + struct.calcsize("<I4d") != len(data):
            raise FormatError("trailing bytes after checkpoint")
        return cls(tensors[0], tensors[1], tensors[2], step, lr, beta1, beta2, eps)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "QatState":
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class ForwardCache:
    """Everything backward_ste needs from one forward pass."""
    step: int
    inputs: np.ndarray
    patches: Optional[np.ndarray] = None
    hidden: Optional[np.ndarray] = None
    act_mask: Optional[np.ndarray] = None
    pre_act_max: Optional[float] = None
    w_eff: List[np.ndarray] = field(default_factory=list)
    w_mask: List[np.ndarray] = field(default_factory=list)
    w_scale: List[float] = field(default_factory=list)


def init_state(net: TinyNet, rng: np.random.Generator, lr: float = 1e-3) -> QatState:
    """He-normal weights and zero moments."""
    weights = []
    for shape in net.layer_shapes():
        fan_in = shape[1] if len(weights) == 0 and net.conv_filters else shape[0]
        weights.append(rng.standard_normal(shape) * np.sqrt(2.0 / fan_in))
    zeros = [np.zeros_like(w) for w in weights]
    return QatState(weights, zeros, [z.copy() for z in zeros], lr=lr)


def _calibration(net: TinyNet, w: np.ndarray) -> Tuple[float, float]:
    if net.weight_clip is not None:
        return -net.weight_clip, net.weight_clip
    return float(w.min()), float(w.max())


def effective_weights(net: TinyNet, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """Forward weights, STE pass-through mask and the dequantization scale."""
    if net.quantizer == "none":
        return w, np.ones_like(w), 1.0
    if net.quantizer == "binarize":
        alpha = float(np.mean(np.abs(w)))
        return binarize(w).values * alpha, (np.abs(w) <= 1.0).astype(np.float64), alpha
    lo, hi = _calibration(net, w)
    scale = (hi - lo) / net.cfg.x
    try:
        q = quantize_weights(w, net.cfg, w_range=(lo, hi)).values
    except ConstantTensor:
        q = np.zeros(w.shape, dtype=np.int64)
    mask = ((w >= lo) & (w <= hi)).astype(np.float64)
    return q * scale, mask, scale


def _normalize_batch(net: TinyNet, batch) -> np.ndarray:
    x = np.asarray(batch)
    if np.issubdtype(x.dtype, np.integer):
        x = x / 255.0
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.shape[1:] != tuple(net.input_shape):
        raise ShapeMismatch(f"batch of shape {x.shape[1:]}, net expects {net.input_shape}")
    if net.quantizer == "radix-x" and net.quantize_inputs:
        a_max = net.cfg.a_max
        x = np.rint(np.clip(x, 0.0, 1.0) * a_max) / a_max
    return x


def _activate(net: TinyNet, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Optional[float]]:
    if net.activation == "real-relu":
        return np.maximum(z, 0.0), (z > 0).astype(np.float64), None
    if net.activation == "bnn-sign":
        return binarize(z).values.astype(np.float64), (np.abs(z) <= 1.0).astype(np.float64), None
    pre_act_max = float(z.max(initial=0.0))
    if pre_act_max <= 0:
        pre_act_max = 1.0
    levels = radix_relu(z, pre_act_max, net.cfg).values
    mask = ((z > 0) & (z < pre_act_max)).astype(np.float64)
    return levels * (pre_act_max / net.cfg.a_max), mask, pre_act_max


def forward(net: TinyNet, state: QatState, batch) -> Tuple[np.ndarray, ForwardCache]:
    """Logits for a batch ``(B, h, w)`` and the cache for backward_ste."""
    x = _normalize_batch(net, batch)
    shapes = net.layer_shapes()
    if [w.shape for w in state.w_real] != shapes:
        raise ShapeMismatch(f"state holds {[w.shape for w in state.w_real]}, net needs {shapes}")
    cache = ForwardCache(step=state.step, inputs=x)
    for w in state.w_real:
        w_eff, mask, scale = effective_weights(net, w)
        cache.w_eff.append(w_eff)
        cache.w_mask.append(mask)
        cache.w_scale.append(scale)

    batch_size = x.shape[0]
    if not net.conv_filters:
        return x.reshape(batch_size, -1) @ cache.w_eff[0], cache

    k = net.kernel_size
    patches = sliding_window_view(x, (k, k), axis=(1, 2)).reshape(batch_size, -1, k * k)
    z = patches @ cache.w_eff[0].T
    hidden, act_mask, pre_act_max = _activate(net, z)
    cache.patches = patches
    cache.hidden = hidden
    cache.act_mask = act_mask
    cache.pre_act_max = pre_act_max
    return hidden.reshape(batch_size, -1) @ cache.w_eff[1], cache


def backward_ste(net: TinyNet, state: QatState, cache: ForwardCache, loss_grad: np.ndarray) -> List[np.ndarray]:
    """Gradients on the shadow weights given dLoss/dLogits.

    Weight quantizers pass the gradient where the shadow weight lies inside
    the calibration range; activations pass it in their linear region.
    """
    if cache.step != state.step:
        raise StaleCache(f"cache from step {cache.step} used at step {state.step}")
    batch_size = cache.inputs.shape[0]
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != (batch_size, net.n_classes):
        raise ShapeMismatch(f"loss gradient {loss_grad.shape}, expected {(batch_size, net.n_classes)}")

    if not net.conv_filters:
        grad = cache.inputs.reshape(batch_size, -1).T @ loss_grad
        return [grad * cache.w_mask[0]]

    flat = cache.hidden.reshape(batch_size, -1)
    grad_fc = flat.T @ loss_grad
    d_hidden = (loss_grad @ cache.w_eff[1].T).reshape(cache.hidden.shape)
    d_z = d_hidden * cache.act_mask
    grad_conv = np.einsum("blf,blk->fk", d_z, cache.patches)
    return [grad_conv * cache.w_mask[0], grad_fc * cache.w_mask[1]]


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(len(labels))
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / len(labels)


def adam_step(state: QatState, grads: List[np.ndarray]) -> QatState:
    """One bias-corrected ADAM update; returns a new state."""
    if len(grads) != len(state.w_real) or any(g.shape != w.shape for g, w in zip(grads, state.w_real)):
        raise ShapeMismatch("gradient shapes do not match the weights")
    t = state.step + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    w_new, m_new, v_new = [], [], []
    for w, m, v, g in zip(state.w_real, state.adam_m, state.adam_v, grads):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        w_new.append(w - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        m_new.append(m)
        v_new.append(v)
    return replace(state, w_real=w_new, adam_m=m_new, adam_v=v_new, step=t)


def snap_to_levels(net: TinyNet, w: np.ndarray) -> np.ndarray:
    """Replace a shadow weight with the value its quantized level stands for."""
    if net.quantizer == "none":
        return w
    if net.quantizer == "binarize":
        return binarize(w).values * float(np.mean(np.abs(w)))
    lo, hi = _calibration(net, w)
    try:
        q = quantize_weights(w, net.cfg, w_range=(lo, hi))
    except ConstantTensor:
        return w
    return dequantize_weights(q, lo, hi, net.cfg)


def predict(net: TinyNet, state: QatState, images, batch_size: int = 256) -> np.ndarray:
    preds = []
    for start in range(0, len(images), batch_size):
        logits, _ = forward(net, state, images[start:start + batch_size])
        preds.append(np.argmax(logits, axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def accuracy(net: TinyNet, state: QatState, images, labels) -> float:
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(predict(net, state, images) == np.asarray(labels)))


def loss_on(net: TinyNet, state: QatState, images, labels) -> float:
    logits, _ = forward(net, state, images)
    return softmax_cross_entropy(logits, np.asarray(labels))[0]


def numerical_gradient(net: TinyNet, state: QatState, images, labels, eps: float = 1e-6) -> List[np.ndarray]:
    """Central finite differences of the mean cross-entropy."""
    grads = []
    for layer, w in enumerate(state.w_real):
        grad = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            perturbed = [x.copy() for x in state.w_real]
            perturbed[layer][idx] = w[idx] + eps
            up = loss_on(net, replace(state, w_real=perturbed), images, labels)
            perturbed[layer][idx] = w[idx] - eps
            down = loss_on(net, replace(state, w_real=perturbed), images, labels)
            grad[idx] = (up - down) / (2 * eps)
        grads.append(grad)
    return grads


def train(
    net: TinyNet,
    dataset: Tuple[np.ndarray, np.ndarray],
    epochs: int,
    seed: int = 0,
    batch_size: int = 32,
    val_fraction: float = 0.2,
    lr: float = 1e-3,
    keep_shadow: bool = True,
    progress: bool = False,
) -> Tuple[QatState, List[TraceRow]]:
    """Train on ``(images, labels)`` and return the state plus per-epoch accuracy.

    The split, initialization and batch order all come from one generator
    seeded with ``seed``. Row 0 of the trace is the untrained network. With
    ``keep_shadow=False`` the shadow weights are overwritten by their
    quantized values after every update.
    """
    images, labels = dataset
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0 or len(images) != len(labels):
        raise EmptyDataset("dataset is empty or images and labels differ in length")
    if epochs < 0:
        raise InvalidSetting(f"epochs must be non-negative, got {epochs}")
    if batch_size < 1:
        raise InvalidSetting(f"batch_size must be positive, got {batch_size}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(images))
    n_val = int(round(len(images) * val_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise EmptyDataset("no training samples left after the validation split")

    state = init_state(net, rng, lr=lr)

    def row(epoch: int) -> TraceRow:
        return TraceRow(
            epoch=epoch,
            mode=net.mode,
            train_acc=accuracy(net, state, images[train_idx], labels[train_idx]),
            val_acc=accuracy(net, state, images[val_idx], labels[val_idx]),
        )

    trace = [row(0)]
    for epoch in tqdm(range(1, epochs + 1), desc=f"train {net.mode}", disable=not progress):
        shuffled = rng.permutation(train_idx)
        for start in range(0, len(shuffled), batch_size):
            idx = shuffled[start:start + batch_size]
            logits, cache = forward(net, state, images[idx])
            _, loss_grad = softmax_cross_entropy(logits, labels[idx])
            state = adam_step(state, backward_ste(net, state, cache, loss_grad))
            if not keep_shadow:
                state = replace(state, w_real=[snap_to_levels(net, w) for w in state.w_real])
        trace.append(row(epoch))
    return state, trace


def compare_modes(
    dataset: Tuple[np.ndarray, np.ndarray],
    epochs: int,
    seed: int = 0,
    modes: Tuple[str, ...] = ("real", "bnn", "radix"),
    net_kwargs: Optional[Dict] = None,
    **train_kwargs,
) -> Dict[str, Tuple[QatState, List[TraceRow]]]:
    """Train every mode on the same data, split and seed."""
    results = {}
    for mode in modes:
        net = TinyNet.for_mode(mode, **(net_kwargs or {}))
        results[mode] = train(net, dataset, epochs, seed, **train_kwargs)
    return results
