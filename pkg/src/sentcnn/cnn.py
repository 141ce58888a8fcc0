"""The one-layer sentence CNN: convolution, activation, pooling, dropout,
softmax -- with a cached forward trace and an exact manual backward pass.

No autograd: every gradient below is derived by hand and validated against
central finite differences in the test suite.  Filters of equal height share
an im2col block per forward pass but remain independently parameterised
slots (duplicate region sizes get independent initialisation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from sentcnn.ndmath import Mat, Rng, constrain_l2, softmax

ACTIVATIONS = ("relu", "tanh", "sigmoid", "softplus", "iden", "cube", "tanh_cube")
EMBEDDING_MODES = ("static", "non_static")
CONV_DROPOUT_EVAL = ("retention", "rate")


@dataclass(frozen=True)
class Pooling:
    """Pooling strategy: ``one_max``, ``k_max`` (k), ``local_max`` / ``local_avg``
    (window size, final shorter remainder window pooled as-is)."""

    kind: str
    size: int = 0

    def __post_init__(self):
        if self.kind not in ("one_max", "k_max", "local_max", "local_avg"):
            raise ValueError(f"unknown pooling kind {self.kind!r}")
        if self.kind != "one_max" and self.size < 1:
            raise ValueError(f"{self.kind} pooling needs a positive size")

    @staticmethod
    def one_max() -> "Pooling":
        return Pooling("one_max")

    @staticmethod
    def k_max(k: int) -> "Pooling":
        return Pooling("k_max", k)

    @staticmethod
    def local_max(region: int) -> "Pooling":
        return Pooling("local_max", region)

    @staticmethod
    def local_avg(region: int) -> "Pooling":
        return Pooling("local_avg", region)

    def pooled_length(self, map_len: int) -> int:
        if self.kind == "one_max":
            return 1
        if self.kind == "k_max":
            if self.size > map_len:
                raise ValueError(
                    f"k_max k={self.size} exceeds feature map length {map_len}"
                )
            return self.size
        return -(-map_len // self.size)  # ceil division; remainder window kept

    def canonical(self) -> str:
        return self.kind if self.kind == "one_max" else f"{self.kind}:{self.size}"

    @staticmethod
    def parse(text: str) -> "Pooling":
        name, _, arg = text.strip().partition(":")
        aliases = {"1max": "one_max", "1-max": "one_max", "kmax": "k_max",
                   "localmax": "local_max", "localavg": "local_avg"}
        name = aliases.get(name, name)
        if name == "one_max":
            return Pooling.one_max()
        if not arg:
            raise ValueError(f"pooling {name!r} needs a size, e.g. '{name}:3'")
        return Pooling(name, int(arg))


@dataclass
class ModelConfig:
    """All architecture hyperparameters.  Defaults are the baseline
    configuration the sweeps vary one axis of."""

    num_classes: int
    region_sizes: tuple[int, ...] = (3, 4, 5)
    maps_per_region: int = 100
    activation: str = "relu"
    pooling: Pooling = field(default_factory=Pooling.one_max)
    dropout_penult: float = 0.5
    dropout_conv: float = 0.0
    l2_constraint: float | None = 3.0
    embedding_mode: str = "non_static"
    # Test-time rescaling of the sentence matrix under conv-layer dropout:
    # "retention" multiplies by (1-p); "rate" multiplies by p, for emulating
    # implementations that scale by the drop rate itself.
    conv_dropout_eval: str = "retention"

    def __post_init__(self):
        self.region_sizes = tuple(int(h) for h in self.region_sizes)
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if not self.region_sizes or any(h < 1 for h in self.region_sizes):
            raise ValueError(f"region sizes must be >= 1, got {self.region_sizes}")
        if self.maps_per_region < 1:
            raise ValueError("maps_per_region must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_penult < 1.0 or not 0.0 <= self.dropout_conv < 1.0:
            raise ValueError("dropout rates must be in [0, 1)")
        if self.l2_constraint is not None and not self.l2_constraint > 0:
            raise ValueError("l2 constraint must be positive or None")
        if self.embedding_mode not in EMBEDDING_MODES:
            raise ValueError(f"unknown embedding mode {self.embedding_mode!r}")
        if self.conv_dropout_eval not in CONV_DROPOUT_EVAL:
            raise ValueError(f"unknown conv_dropout_eval {self.conv_dropout_eval!r}")

    def feature_length(self, pad_to: int) -> int:
        """Length of the penultimate vector for sentences padded to ``pad_to``."""
        total = 0
        for h in self.region_sizes:
            if pad_to < h:
                raise ValueError(f"pad_to={pad_to} shorter than region size {h}")
            total += self.maps_per_region * self.pooling.pooled_length(pad_to - h + 1)
        return total


@dataclass
class FilterBank:
    """All filters for one entry of ``region_sizes`` (independent slots)."""

    h: int
    w: Mat  # (n_maps, h, d)
    b: np.ndarray  # (n_maps,)

    @property
    def n_maps(self) -> int:
        return self.w.shape[0]


@dataclass
class CnnParams:
    """Every trainable parameter.  ``embedding``/``vocab`` are populated by
    the trainer in non-static mode and stay None otherwise."""

    banks: list[FilterBank]
    u: Mat  # (num_classes, F)
    b_softmax: np.ndarray  # (num_classes,)
    d: int
    pad_to: int
    embedding: Mat | None = None
    vocab: dict[str, int] | None = None

    @property
    def num_classes(self) -> int:
        return self.u.shape[0]

    @property
    def feature_length(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "CnnParams":
        return CnnParams(
            banks=[FilterBank(b.h, b.w.copy(), b.b.copy()) for b in self.banks],
            u=self.u.copy(),
            b_softmax=self.b_softmax.copy(),
            d=self.d,
            pad_to=self.pad_to,
            embedding=None if self.embedding is None else self.embedding.copy(),
            vocab=None if self.vocab is None else dict(self.vocab),
        )


FILTER_INIT_RANGE = (-0.01, 0.01)


def init_params(config: ModelConfig, d: int, pad_to: int, rng: Rng) -> CnnParams:
    """Fresh parameters: filters uniform on [-0.01, 0.01) drawn bank by bank
    in row-major order, all biases and softmax weights zero."""
    f_len = config.feature_length(pad_to)  # validates pad_to versus regions
    banks = []
    lo, hi = FILTER_INIT_RANGE
    for h in config.region_sizes:
        n = config.maps_per_region
        w = rng.uniform_array(n * h * d, lo, hi).reshape(n, h, d)
        banks.append(FilterBank(h=h, w=w, b=np.zeros(n)))
    return CnnParams(
        banks=banks,
        u=np.zeros((config.num_classes, f_len)),
        b_softmax=np.zeros(config.num_classes),
        d=d,
        pad_to=pad_to,
    )


def convolve(a: Mat, w: Mat) -> np.ndarray:
    """Valid 1-D convolution of filter ``w`` (h x d) down sentence matrix ``a``
    (s x d): ``out[i] = sum(a[i:i+h] * w)`` for i = 0..s-h."""
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    s, d = a.shape
    h, wd = w.shape
    if wd != d:
        raise ValueError(f"filter width {wd} does not match matrix width {d}")
    if s < h:
        raise ValueError(f"sentence of {s} rows shorter than region size {h}")
    windows = np.lib.stride_tricks.sliding_window_view(a, (h, d))[:, 0]
    return np.einsum("lhd,hd->l", windows, w)


def _im2col(a: Mat, h: int) -> Mat:
    s, d = a.shape
    windows = np.lib.stride_tricks.sliding_window_view(a, (h, d))[:, 0]
    # materialise: the reshape would otherwise be an overlapping strided view
    # that pushes the conv matmuls off the fast BLAS path
    return np.ascontiguousarray(windows.reshape(s - h + 1, h * d))


def activate(x, f: str):
    """Apply activation ``f`` elementwise (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    if f == "relu":
        return np.maximum(x, 0.0)
    if f == "tanh":
        return np.tanh(x)
    if f == "sigmoid":
        return _sigmoid(x)
    if f == "softplus":
        # log(1 + e^x) without overflow for large |x|
        return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    if f == "iden":
        return x.copy()
    if f == "cube":
        return x**3
    if f == "tanh_cube":
        return np.tanh(x**3 + x)
    raise ValueError(f"unknown activation {f!r}")


def activate_grad(x, f: str):
    """Derivative of :func:`activate` evaluated at pre-activation ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if f == "relu":
        return (x > 0.0).astype(np.float64)
    if f == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if f == "sigmoid":
        s = _sigmoid(x)
        return s * (1.0 - s)
    if f == "softplus":
        return _sigmoid(x)
    if f == "iden":
        return np.ones_like(x)
    if f == "cube":
        return 3.0 * x * x
    if f == "tanh_cube":
        t = np.tanh(x**3 + x)
        return (1.0 - t * t) * (3.0 * x * x + 1.0)
    raise ValueError(f"unknown activation {f!r}")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class PoolTrace:
    """Where each pooled value came from, enough to route gradients back."""

    length: int  # feature map length
    indices: np.ndarray | None = None  # max variants: source index per output
    bounds: np.ndarray | None = None  # avg variant: (start, end) per output


def pool(c, strategy: Pooling) -> tuple[np.ndarray, PoolTrace]:
    """Reduce one feature map to its pooled vector plus a gradient trace.

    Ties in the max variants resolve to the earliest index; k-max keeps the
    k largest values in their original order.
    """
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    if n == 0:
        raise ValueError("cannot pool an empty feature map")
    if strategy.kind == "one_max":
        i = int(np.argmax(c))
        return c[i : i + 1].copy(), PoolTrace(n, indices=np.array([i]))
    if strategy.kind == "k_max":
        k = strategy.size
        if k > n:
            raise ValueError(f"k_max k={k} exceeds feature map length {n}")
        top = np.sort(np.argsort(-c, kind="stable")[:k])
        return c[top].copy(), PoolTrace(n, indices=top)
    r = strategy.size
    starts = np.arange(0, n, r)
    if strategy.kind == "local_max":
        idx = np.array([s + int(np.argmax(c[s : s + r])) for s in starts])
        return c[idx].copy(), PoolTrace(n, indices=idx)
    # local_avg
    bounds = np.array([[s, min(s + r, n)] for s in starts])
    pooled = np.array([c[s:e].mean() for s, e in bounds])
    return pooled, PoolTrace(n, bounds=bounds)


def pool_backward(grad_pooled: np.ndarray, trace: PoolTrace) -> np.ndarray:
    """Scatter pooled-output gradients back onto the feature map."""
    dc = np.zeros(trace.length)
    if trace.indices is not None:
        np.add.at(dc, trace.indices, grad_pooled)
    else:
        for g, (s, e) in zip(grad_pooled, trace.bounds):
            dc[s:e] += g / (e - s)
    return dc


@dataclass
class BankPoolTrace:
    """Pooling trace for a whole filter bank at once (all maps share the
    window structure, so indices stack into one array)."""

    length: int
    indices: np.ndarray | None = None  # (n_maps, per_map) for the max variants
    bounds: np.ndarray | None = None  # (per_map, 2) shared windows for local_avg

    @property
    def per_map(self) -> int:
        return self.indices.shape[1] if self.indices is not None else self.bounds.shape[0]


def pool_bank(act: Mat, strategy: Pooling) -> tuple[Mat, BankPoolTrace]:
    """Pool every column of an (L, n_maps) activation block.

    Column m produces exactly ``pool(act[:, m], strategy)``; ties resolve to
    the earliest index, matching the scalar operator.  Returns the pooled
    values as (n_maps, per_map).
    """
    length, n_maps = act.shape
    if length == 0:
        raise ValueError("cannot pool an empty feature map")
    kind = strategy.kind
    if kind == "one_max":
        idx = act.argmax(axis=0)[:, None]  # (n_maps, 1)
    elif kind == "k_max":
        k = strategy.size
        if k > length:
            raise ValueError(f"k_max k={k} exceeds feature map length {length}")
        top = np.argsort(-act, axis=0, kind="stable")[:k]
        idx = np.sort(top, axis=0).T  # (n_maps, k), original order preserved
    elif kind == "local_max":
        starts = np.arange(0, length, strategy.size)
        cols = [s + act[s : s + strategy.size].argmax(axis=0) for s in starts]
        idx = np.stack(cols, axis=1)  # (n_maps, n_windows)
    else:  # local_avg
        starts = np.arange(0, length, strategy.size)
        ends = np.minimum(starts + strategy.size, length)
        sums = np.add.reduceat(act, starts, axis=0)  # (n_windows, n_maps)
        pooled = (sums / (ends - starts)[:, None]).T
        bounds = np.stack([starts, ends], axis=1)
        return pooled, BankPoolTrace(length, bounds=bounds)
    pooled = act[idx, np.arange(n_maps)[:, None]]
    return pooled, BankPoolTrace(length, indices=idx)


def pool_bank_backward(grad_pooled: Mat, trace: BankPoolTrace, n_maps: int) -> Mat:
    """Scatter (n_maps, per_map) pooled gradients back to (L, n_maps)."""
    dact = np.zeros((trace.length, n_maps))
    if trace.indices is not None:
        cols = np.broadcast_to(np.arange(n_maps)[:, None], trace.indices.shape)
        np.add.at(dact, (trace.indices, cols), grad_pooled)
    else:
        for w, (s, e) in enumerate(trace.bounds):
            dact[s:e] += grad_pooled[:, w] / (e - s)
    return dact


@dataclass
class ForwardTrace:
    """Everything the backward pass needs to replay one forward exactly."""

    a_input: Mat
    conv_mask: Mat | None
    conv_scale: float
    cols: list[Mat]  # per bank: im2col block (L, h*d)
    preact: list[Mat]  # per bank: conv output + bias (L, n_maps)
    pool_traces: list[BankPoolTrace]
    z: np.ndarray
    z_used: np.ndarray
    z_mask: np.ndarray | None
    z_scale: float
    probs: np.ndarray
    token_rows: np.ndarray | None
    train_mode: bool


def forward(
    a: Mat,
    params: CnnParams,
    config: ModelConfig,
    rng: Rng | None,
    train_mode: bool,
    token_rows: Sequence[int] | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Full pipeline: conv dropout -> convolve+bias -> activation -> pooling
    -> concatenate -> penultimate dropout -> softmax.

    Dropout zeroes entries with the configured probability in train mode and
    rescales deterministically in eval mode; with both rates at zero no rng
    is consumed at all.  ``token_rows`` maps sentence rows to embedding rows
    so the backward pass can emit embedding gradients in non-static mode.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (params.pad_to, params.d):
        raise ValueError(f"input {a.shape} does not match model {(params.pad_to, params.d)}")

    conv_mask = None
    conv_scale = 1.0
    p_conv = config.dropout_conv
    if p_conv > 0.0:
        if train_mode:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng")
            conv_mask = (rng.random_array(a.size) >= p_conv).astype(np.float64).reshape(a.shape)
            a_used = a * conv_mask
        else:
            conv_scale = p_conv if config.conv_dropout_eval == "rate" else 1.0 - p_conv
            a_used = a * conv_scale
    else:
        a_used = a

    cols: list[Mat] = []
    preact: list[Mat] = []
    pool_traces: list[BankPoolTrace] = []
    blocks: list[np.ndarray] = []
    for bank in params.banks:
        x = _im2col(a_used, bank.h)
        o = x @ bank.w.reshape(bank.n_maps, -1).T + bank.b  # (L, n_maps)
        act = activate(o, config.activation)
        pooled, tr = pool_bank(act, config.pooling)  # (n_maps, per_map)
        cols.append(x)
        preact.append(o)
        pool_traces.append(tr)
        blocks.append(pooled.reshape(-1))
    z = np.concatenate(blocks)

    z_mask = None
    z_scale = 1.0
    p_pen = config.dropout_penult
    if p_pen > 0.0:
        if train_mode:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng")
            z_mask = (rng.random_array(z.size) >= p_pen).astype(np.float64)
            z_used = z * z_mask
        else:
            z_scale = 1.0 - p_pen
            z_used = z * z_scale
    else:
        z_used = z

    probs = softmax(params.u @ z_used + params.b_softmax)
    trace = ForwardTrace(
        a_input=a,
        conv_mask=conv_mask,
        conv_scale=conv_scale,
        cols=cols,
        preact=preact,
        pool_traces=pool_traces,
        z=z,
        z_used=z_used,
        z_mask=z_mask,
        z_scale=z_scale,
        probs=probs,
        token_rows=None if token_rows is None else np.asarray(token_rows, dtype=np.int64),
        train_mode=train_mode,
    )
    return probs, trace


@dataclass
class BankGrads:
    w: Mat
    b: np.ndarray


@dataclass
class CnnGrads:
    """Cross-entropy gradients for one recorded forward pass.

    ``emb_rows``/``emb_vecs`` list the embedding rows touched by the sentence
    (one entry per token occurrence) and are None in static mode.
    """

    banks: list[BankGrads]
    u: Mat
    b_softmax: np.ndarray
    emb_rows: np.ndarray | None = None
    emb_vecs: Mat | None = None


def backward(
    trace: ForwardTrace, params: CnnParams, config: ModelConfig, label: int
) -> CnnGrads:
    """Exact gradients of the cross-entropy loss at the recorded forward.

    Gradient flows only through the pooled indices/windows and dropout masks
    captured in the trace.
    """
    probs = trace.probs
    if not 0 <= label < probs.size:
        raise ValueError(f"label {label} out of range")
    if trace.z_used.size != params.feature_length or len(trace.cols) != len(params.banks):
        raise ValueError("trace does not match parameters")

    dlogits = probs.copy()
    dlogits[label] -= 1.0
    g_u = np.outer(dlogits, trace.z_used)
    g_bs = dlogits.copy()

    dz = params.u.T @ dlogits
    if trace.z_mask is not None:
        dz = dz * trace.z_mask
    elif trace.z_scale != 1.0:
        dz = dz * trace.z_scale

    want_input_grad = config.embedding_mode == "non_static" and trace.token_rows is not None
    da_used = np.zeros_like(trace.a_input) if want_input_grad else None

    bank_grads = []
    offset = 0
    for bi, bank in enumerate(params.banks):
        o = trace.preact[bi]
        length, n_maps = o.shape
        per_map = trace.pool_traces[bi].per_map
        dz_block = dz[offset : offset + n_maps * per_map].reshape(n_maps, per_map)
        offset += n_maps * per_map

        dact = pool_bank_backward(dz_block, trace.pool_traces[bi], n_maps)
        do = dact * activate_grad(o, config.activation)

        x = trace.cols[bi]
        g_w = (do.T @ x).reshape(n_maps, bank.h, params.d)
        g_b = do.sum(axis=0)
        bank_grads.append(BankGrads(w=g_w, b=g_b))

        if want_input_grad:
            dx = do @ bank.w.reshape(n_maps, -1)  # (L, h*d)
            for i in range(length):
                da_used[i : i + bank.h] += dx[i].reshape(bank.h, params.d)

    emb_rows = emb_vecs = None
    if want_input_grad:
        if trace.conv_mask is not None:
            da = da_used * trace.conv_mask
        elif trace.conv_scale != 1.0:
            da = da_used * trace.conv_scale
        else:
            da = da_used
        n_tokens = trace.token_rows.size
        emb_rows = trace.token_rows
        emb_vecs = da[:n_tokens].copy()

    return CnnGrads(banks=bank_grads, u=g_u, b_softmax=g_bs, emb_rows=emb_rows, emb_vecs=emb_vecs)


def apply_constraint(params: CnnParams, c: float) -> CnnParams:
    """Rescale each class row of the softmax weights onto the l2 ball of
    radius ``c`` (in place); biases are untouched."""
    for i in range(params.u.shape[0]):
        row = params.u[i]
        norm = float(np.linalg.norm(row))
        if norm > c:
            params.u[i] = constrain_l2(row, c)
    return params
