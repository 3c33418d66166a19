"""A small convolutional classifier written directly in numpy.

Layout is NHWC throughout. The network is

    conv3x3(f1) -> relu -> maxpool2 -> conv3x3(f2) -> relu -> maxpool2
    -> conv3x3(f3) -> relu -> flatten -> dense(h) -> relu -> dense(k) -> softmax

with valid convolutions and floor pooling. All math is float64 so the
finite-difference gradient check is meaningful and training is
bit-reproducible for a given seed.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import CamidError

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class CnnError(CamidError):
    pass


@dataclass(frozen=True)
class CnnArchitecture:
    input_size: int = 128
    in_channels: int = 3
    filters: tuple[int, int, int] = (32, 64, 128)
    hidden: int = 64
    n_classes: int = 4

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))
        if len(self.filters) != 3:
            raise CnnError("exactly three convolution widths are required")
        if self.shapes()[-3][0] < 1:
            raise CnnError(f"input size {self.input_size} too small for this network")

    def shapes(self) -> list[tuple[int, ...]]:
        """Activation shapes (without batch axis) after each stage."""
        s = self.input_size
        f1, f2, f3 = self.filters
        out = []
        s -= 2
        out.append((s, s, f1))
        s //= 2
        out.append((s, s, f1))
        s -= 2
        out.append((s, s, f2))
        s //= 2
        out.append((s, s, f2))
        s -= 2
        out.append((s, s, f3))
        flat = max(s, 0) ** 2 * f3
        out.append((flat,))
        out.append((self.hidden,))
        out.append((self.n_classes,))
        return out

    @property
    def flat_dim(self) -> int:
        return self.shapes()[5][0]

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        f1, f2, f3 = self.filters
        return {
            "conv1_w": (3, 3, self.in_channels, f1),
            "conv1_b": (f1,),
            "conv2_w": (3, 3, f1, f2),
            "conv2_b": (f2,),
            "conv3_w": (3, 3, f2, f3),
            "conv3_b": (f3,),
            "dense1_w": (self.flat_dim, self.hidden),
            "dense1_b": (self.hidden,),
            "dense2_w": (self.hidden, self.n_classes),
            "dense2_b": (self.n_classes,),
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["filters"] = list(self.filters)
        return d


def init_params(arch: CnnArchitecture, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
            continue
        if len(shape) == 4:
            rf = shape[0] * shape[1]
            fan_in, fan_out = rf * shape[2], rf * shape[3]
        else:
            fan_in, fan_out = shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-limit, limit, size=shape)
    return params


# -- layers ---------------------------------------------------------------

def _conv_forward(x, w, b):
    n, h, wd, c = x.shape
    kh, kw, _, f = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (n, ho, wo, c, kh, kw)
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * ho * wo, kh * kw * c)
    out = cols @ w.reshape(kh * kw * c, f) + b
    return out.reshape(n, ho, wo, f), cols


def _conv_backward(dout, cols, x_shape, w):
    n, h, wd, c = x_shape
    kh, kw, _, f = w.shape
    ho, wo = h - kh + 1, wd - kw + 1
    d2 = dout.reshape(n * ho * wo, f)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(kh * kw * c, f).T).reshape(n, ho, wo, kh, kw, c)
    dx = np.zeros(x_shape)
    for i in range(kh):
        for j in range(kw):
            dx[:, i : i + ho, j : j + wo, :] += dcols[:, :, :, i, j, :]
    return dx, dw, db


def _pool_forward(x):
    n, h, w, c = x.shape
    ho, wo = h // 2, w // 2
    xc = x[:, : 2 * ho, : 2 * wo, :]
    win = xc.reshape(n, ho, 2, wo, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, 4)
    arg = np.argmax(win, axis=-1)  # first maximum wins ties
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_backward(dout, arg, x_shape):
    n, h, w, c = x_shape
    ho, wo = h // 2, w // 2
    dwin = np.zeros((n, ho, wo, c, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, : 2 * ho, : 2 * wo, :] = (
        dwin.reshape(n, ho, wo, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(n, 2 * ho, 2 * wo, c)
    )
    return dx


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, y) -> float:
    """Mean categorical cross-entropy; probabilities are floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise CnnError(f"shape mismatch: {p.shape} vs {y.shape}")
    return float(-(y * np.log(np.maximum(p, PROB_FLOOR))).sum() / p.shape[0])


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class ForwardCache:
    x_shape: tuple
    tensors: dict = field(default_factory=dict)
    logits: np.ndarray | None = None
    probs: np.ndarray | None = None
    consumed: bool = False


def forward(params, x, arch: CnnArchitecture, keep_cache: bool = True):
    """Return ``(probs, cache)`` for a batch of shape (N, S, S, C)."""
    x = np.asarray(x, dtype=np.float64)
    want = (arch.input_size, arch.input_size, arch.in_channels)
    if x.ndim != 4 or x.shape[1:] != want:
        raise CnnError(f"expected input shape (N, {want[0]}, {want[1]}, {want[2]}), got {x.shape}")
    t = {}
    a1, t["cols1"] = _conv_forward(x, params["conv1_w"], params["conv1_b"])
    r1 = np.maximum(a1, 0)
    p1, t["arg1"] = _pool_forward(r1)
    a2, t["cols2"] = _conv_forward(p1, params["conv2_w"], params["conv2_b"])
    r2 = np.maximum(a2, 0)
    p2, t["arg2"] = _pool_forward(r2)
    a3, t["cols3"] = _conv_forward(p2, params["conv3_w"], params["conv3_b"])
    r3 = np.maximum(a3, 0)
    flat = r3.reshape(len(x), -1)
    h = flat @ params["dense1_w"] + params["dense1_b"]
    hr = np.maximum(h, 0)
    z = hr @ params["dense2_w"] + params["dense2_b"]
    p = softmax(z)
    cache = None
    if keep_cache:
        t.update(a1=a1, r1=r1, p1=p1, a2=a2, r2=r2, p2=p2, a3=a3, flat=flat, h=h, hr=hr)
        cache = ForwardCache(x.shape, t, z, p)
    return p, cache


def backward(params, cache: ForwardCache | None, y) -> dict[str, np.ndarray]:
    """Analytic gradients of the mean cross-entropy for the cached batch.

    A cache can be consumed once; reusing it raises.
    """
    if cache is None or cache.probs is None:
        raise CnnError("backward needs the cache of a forward pass")
    if cache.consumed:
        raise CnnError("forward cache already consumed; run forward again")
    t = cache.tensors
    y = np.asarray(y, dtype=np.float64)
    n = cache.x_shape[0]
    if y.shape != cache.probs.shape:
        raise CnnError(f"label shape {y.shape} does not match batch {cache.probs.shape}")
    g = {}
    dz = (cache.probs - y) / n
    g["dense2_w"] = t["hr"].T @ dz
    g["dense2_b"] = dz.sum(axis=0)
    dh = (dz @ params["dense2_w"].T) * (t["h"] > 0)
    g["dense1_w"] = t["flat"].T @ dh
    g["dense1_b"] = dh.sum(axis=0)
    dr3 = (dh @ params["dense1_w"].T).reshape(t["a3"].shape)
    da3 = dr3 * (t["a3"] > 0)
    dp2, g["conv3_w"], g["conv3_b"] = _conv_backward(da3, t["cols3"], t["p2"].shape, params["conv3_w"])
    dr2 = _pool_backward(dp2, t["arg2"], t["r2"].shape)
    da2 = dr2 * (t["a2"] > 0)
    dp1, g["conv2_w"], g["conv2_b"] = _conv_backward(da2, t["cols2"], t["p1"].shape, params["conv2_w"])
    dr1 = _pool_backward(dp1, t["arg1"], t["r1"].shape)
    da1 = dr1 * (t["a1"] > 0)
    _, g["conv1_w"], g["conv1_b"] = _conv_backward(da1, t["cols1"], cache.x_shape, params["conv1_w"])
    cache.consumed = True
    return g


# -- optimizer --------------------------------------------------------------

@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params, grads, state: AdamState, cfg: AdamConfig = AdamConfig()):
    """In-place Adam update with bias-corrected moments."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise CnnError(f"non-finite gradient for {k} at step {state.t + 1}")
    state.t += 1
    c1 = 1 - cfg.beta1**state.t
    c2 = 1 - cfg.beta2**state.t
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        params[k] -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params


# -- training / inference -----------------------------------------------------

@dataclass(eq=False)
class CnnModel:
    arch: CnnArchitecture
    params: dict
    seed: int = 0
    loss_history: list = field(default_factory=list)

    def predict_proba(self, x, batch_size: int = 16) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4:
            raise CnnError(f"expected a 4-D batch, got shape {x.shape}")
        if len(x) == 0:
            return np.zeros((0, self.arch.n_classes))
        out = [forward(self.params, x[i : i + batch_size], self.arch, keep_cache=False)[0]
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out)

    def predict(self, x, batch_size: int = 16) -> np.ndarray:
        return predict_from_probs(self.predict_proba(x, batch_size))


def predict_from_probs(p) -> np.ndarray:
    """Row argmax; ties resolve to the lowest class index."""
    return np.argmax(np.asarray(p), axis=1).astype(np.int64)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    batch_size: int = 8
    adam: AdamConfig = AdamConfig()


def train_cnn(x, labels, arch: CnnArchitecture, seed: int = 42,
              cfg: TrainConfig = TrainConfig(), on_step=None) -> CnnModel:
    """Mini-batch Adam training with a seeded reshuffle every epoch.

    The last partial batch of an epoch is trained on, not dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(x) == 0:
        raise CnnError("empty training split")
    if len(labels) != len(x):
        raise CnnError("one label per image required")
    y = one_hot(labels, arch.n_classes)
    init_seed, shuffle_seed = np.random.SeedSequence(seed).spawn(2)
    params = init_params(arch, int(init_seed.generate_state(1)[0]))
    rng = np.random.default_rng(shuffle_seed)
    state = AdamState.zeros_like(params)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            p, cache = forward(params, x[idx], arch)
            loss = cross_entropy(p, y[idx])
            grads = backward(params, cache, y[idx])
            adam_step(params, grads, state, cfg.adam)
            history.append((epoch, state.t, loss))
            if on_step is not None:
                on_step(epoch, state.t, loss, params)
        log.info("epoch %d done, last batch loss %.4f", epoch + 1, history[-1][2])
    return CnnModel(arch, params, seed, history)


def predict_cnn(model: CnnModel, x) -> np.ndarray:
    return model.predict(x)
