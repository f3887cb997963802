"""From-scratch GRU stack with exact-gradient training support.

A single layer follows the single-bias gate equations

    r_t  = sigmoid(W_r [h_{t-1}; x_t] + b_r)
    z_t  = sigmoid(W_z [h_{t-1}; x_t] + b_z)
    hc_t = tanh(W_h [r_t * h_{t-1}; x_t] + b_h)
    h_t  = (1 - z_t) * h_{t-1} + z_t * hc_t

with the hidden state listed first in every concatenation and the update
gate weighting the *candidate* (a fresh ``z_t`` rewrites more of the state).
Layers are stacked by feeding layer ``l``'s hidden sequence to layer
``l+1``; a linear head maps the top layer's final hidden state to a
``t_dec x d_out`` forecast block.

Everything here is plain float64 numpy: training is dominated by the
concatenated-gate matrix products, which BLAS already handles well.  The
single-precision streaming kernels used for inference rollouts live in
``_gru_kernels``.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFile, ShapeMismatch, StaleCache, VersionMismatch

CHECKPOINT_FORMAT = "gru-checkpoint"
CHECKPOINT_VERSION = 1

#: Hidden widths the training pipeline exposes; other widths still load
#: from checkpoints (with a warning) so experiments remain readable.
HIDDEN_WIDTHS = (128, 256, 512, 1024)
LAYER_COUNTS = (1, 2, 3)


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class GruLayerParams:
    """One layer's gate parameters.

    Storage is a single ``(3*d_h, d_h+d_x)`` matrix with the reset, update,
    and candidate rows stacked in that order (same for the bias), so the two
    sigmoid gates can be evaluated with one matrix product.  ``W_r``/``W_z``/
    ``W_h`` and ``b_r``/``b_z``/``b_h`` are writable views into it.
    """

    W: np.ndarray
    b: np.ndarray
    d_x: int
    d_h: int

    @classmethod
    def zeros(cls, *, d_x: int, d_h: int) -> "GruLayerParams":
        return cls(W=np.zeros((3 * d_h, d_h + d_x)), b=np.zeros(3 * d_h),
                   d_x=d_x, d_h=d_h)

    @classmethod
    def random(cls, *, d_x: int, d_h: int, rng) -> "GruLayerParams":
        bound = 1.0 / np.sqrt(d_h)
        return cls(W=rng.uniform(-bound, bound, (3 * d_h, d_h + d_x)),
                   b=rng.uniform(-bound, bound, 3 * d_h), d_x=d_x, d_h=d_h)

    # named views -----------------------------------------------------------
    @property
    def W_r(self): return self.W[: self.d_h]

    @property
    def W_z(self): return self.W[self.d_h: 2 * self.d_h]

    @property
    def W_h(self): return self.W[2 * self.d_h:]

    @property
    def b_r(self): return self.b[: self.d_h]

    @property
    def b_z(self): return self.b[self.d_h: 2 * self.d_h]

    @property
    def b_h(self): return self.b[2 * self.d_h:]

    @property
    def W_rz(self): return self.W[: 2 * self.d_h]

    @property
    def b_rz(self): return self.b[: 2 * self.d_h]


@dataclass
class GateActivations:
    """Per-step gate values kept for backpropagation.

    ``r`` and ``z`` are strictly inside (0, 1) and ``h_candidate`` inside
    (-1, 1); consequently ``h`` lies componentwise between the previous
    hidden state and the candidate.
    """

    r: np.ndarray
    z: np.ndarray
    h_candidate: np.ndarray
    h: np.ndarray


@dataclass
class GruModel:
    """Stacked GRU with a linear forecast head.

    ``head_w`` has shape ``(t_dec*d_out, d_h)``; predictions are reshaped to
    ``(t_dec, d_out)``.  ``norm_stats`` (optional) carries the z-score
    statistics the model was trained with so checkpoints are self-contained.
    """

    layers: list
    head_w: np.ndarray
    head_b: np.ndarray
    d_x: int
    d_h: int
    t_enc: int
    t_dec: int
    d_out: int
    norm_stats: object = None

    @classmethod
    def new(cls, *, d_x=26, d_h=256, layers=2, t_enc=30, t_dec=10, d_out=29,
            seed=0) -> "GruModel":
        rng = np.random.default_rng(seed)
        lps = []
        d_in = d_x
        for _ in range(layers):
            lps.append(GruLayerParams.random(d_x=d_in, d_h=d_h, rng=rng))
            d_in = d_h
        bound = 1.0 / np.sqrt(d_h)
        head_w = rng.uniform(-bound, bound, (t_dec * d_out, d_h))
        head_b = np.zeros(t_dec * d_out)
        return cls(layers=lps, head_w=head_w, head_b=head_b, d_x=d_x, d_h=d_h,
                   t_enc=t_enc, t_dec=t_dec, d_out=d_out)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def param_arrays(self) -> list:
        """All trainable tensors in a fixed order (layer W/b pairs, head)."""
        out = []
        for p in self.layers:
            out.extend((p.W, p.b))
        out.extend((self.head_w, self.head_b))
        return out


def param_count(model: GruModel) -> int:
    """Trainable-parameter total under the single-bias gate convention."""
    return sum(a.size for a in model.param_arrays())


# ---------------------------------------------------------------------------
# forward


def cell_forward(x_t, h_prev, p: GruLayerParams):
    """One GRU cell step; returns the new hidden state and gate activations."""
    x_t = np.asarray(x_t, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    if x_t.shape != (p.d_x,):
        raise ShapeMismatch(f"input has shape {x_t.shape}, layer expects ({p.d_x},)")
    if h_prev.shape != (p.d_h,):
        raise ShapeMismatch(f"hidden has shape {h_prev.shape}, layer expects ({p.d_h},)")
    hx = np.concatenate([h_prev, x_t])
    rz = _sigmoid(p.W_rz @ hx + p.b_rz)
    r, z = rz[: p.d_h], rz[p.d_h:]
    h_cand = np.tanh(p.W_h @ np.concatenate([r * h_prev, x_t]) + p.b_h)
    h = (1.0 - z) * h_prev + z * h_cand
    return h, GateActivations(r=r, z=z, h_candidate=h_cand, h=h)


@dataclass
class _LayerCache:
    inp: np.ndarray        # (B, T, d_in) this layer consumed
    R: np.ndarray          # (T, B, d_h)
    Z: np.ndarray
    Hc: np.ndarray
    Hs: np.ndarray         # (T+1, B, d_h) hidden states, Hs[0] = 0


@dataclass
class _ForwardCache:
    X: np.ndarray          # the batch the caches belong to
    layers: list           # per-layer _LayerCache
    H_top: np.ndarray      # (B, d_h) final hidden of the top layer


def _forward_layers(model: GruModel, X: np.ndarray) -> _ForwardCache:
    B, T, _ = X.shape
    inp = X
    layer_caches = []
    h = None
    for p in model.layers:
        d_h = p.d_h
        h = np.zeros((B, d_h))
        R = np.empty((T, B, d_h))
        Z = np.empty((T, B, d_h))
        Hc = np.empty((T, B, d_h))
        Hs = np.empty((T + 1, B, d_h))
        Hs[0] = 0.0
        for t in range(T):
            x_t = inp[:, t]
            hx = np.concatenate([h, x_t], axis=1)
            rz = _sigmoid(hx @ p.W_rz.T + p.b_rz)
            r, z = rz[:, :d_h], rz[:, d_h:]
            rhx = np.concatenate([r * h, x_t], axis=1)
            hc = np.tanh(rhx @ p.W_h.T + p.b_h)
            h = (1.0 - z) * h + z * hc
            R[t], Z[t], Hc[t], Hs[t + 1] = r, z, hc, h
        layer_caches.append(_LayerCache(inp=inp, R=R, Z=Z, Hc=Hc, Hs=Hs))
        inp = np.ascontiguousarray(np.transpose(Hs[1:], (1, 0, 2)))
    return _ForwardCache(X=X, layers=layer_caches, H_top=h)


def forward_batch(model: GruModel, X: np.ndarray):
    """Run a batch ``(B, t_enc, d_x)`` through stack and head.

    Returns flat predictions ``(B, t_dec*d_out)`` plus the activation caches
    ``backward`` needs.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[1] != model.t_enc or X.shape[2] != model.d_x:
        raise ShapeMismatch(
            f"batch has shape {X.shape}, expected (B, {model.t_enc}, {model.d_x})")
    cache = _forward_layers(model, X)
    preds = cache.H_top @ model.head_w.T + model.head_b
    return preds, cache


def stack_forward(seq, model: GruModel):
    """Push one ``(t_enc, d_x)`` sequence through the stack.

    Returns the final hidden state of every layer plus the cached
    activations for backpropagation.
    """
    seq = np.asarray(seq, dtype=float)
    if seq.shape != (model.t_enc, model.d_x):
        raise ShapeMismatch(
            f"sequence has shape {seq.shape}, expected ({model.t_enc}, {model.d_x})")
    cache = _forward_layers(model, seq[None])
    finals = [lc.Hs[-1][0] for lc in cache.layers]
    return finals, cache


def predict(seq, model: GruModel) -> np.ndarray:
    """Forecast a ``(t_dec, d_out)`` block from a normalized input window."""
    seq = np.asarray(seq, dtype=float)
    if seq.shape != (model.t_enc, model.d_x):
        raise ShapeMismatch(
            f"sequence has shape {seq.shape}, expected ({model.t_enc}, {model.d_x})")
    cache = _forward_layers(model, seq[None])
    flat = model.head_w @ cache.H_top[0] + model.head_b
    return flat.reshape(model.t_dec, model.d_out)


def loss_mse(pred, target) -> float:
    """Mean squared error over every element of the forecast block."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    d = pred - target
    return float(np.mean(d * d))


# ---------------------------------------------------------------------------
# backward


@dataclass
class Grads:
    """Parameter gradients in ``param_arrays`` order, plus input gradients."""

    layer_grads: list      # [(dW, db), ...]
    head_w: np.ndarray
    head_b: np.ndarray
    d_input: np.ndarray    # (B, t_enc, d_x)

    def arrays(self) -> list:
        out = []
        for dW, db in self.layer_grads:
            out.extend((dW, db))
        out.extend((self.head_w, self.head_b))
        return out


def _backward_layer(p: GruLayerParams, lc: _LayerCache, g_seq: np.ndarray):
    """Backpropagate one layer given per-step output gradients (T, B, d_h)."""
    T, B, d_h = lc.R.shape
    dW = np.zeros_like(p.W)
    db = np.zeros_like(p.b)
    dInp = np.empty_like(lc.inp)
    Wh_h, Wh_x = p.W_h[:, :d_h], p.W_h[:, d_h:]
    Wr_h, Wr_x = p.W_r[:, :d_h], p.W_r[:, d_h:]
    Wz_h, Wz_x = p.W_z[:, :d_h], p.W_z[:, d_h:]
    dW_r, dW_z, dW_h = dW[:d_h], dW[d_h:2 * d_h], dW[2 * d_h:]
    db_r, db_z, db_h = db[:d_h], db[d_h:2 * d_h], db[2 * d_h:]

    gh = np.zeros((B, d_h))
    for t in range(T - 1, -1, -1):
        gh = gh + g_seq[t]
        r, z, hc = lc.R[t], lc.Z[t], lc.Hc[t]
        h_prev = lc.Hs[t]
        x_t = lc.inp[:, t]

        da_z = gh * (hc - h_prev) * z * (1.0 - z)
        da_h = gh * z * (1.0 - hc * hc)
        d_rh = da_h @ Wh_h
        da_r = d_rh * h_prev * r * (1.0 - r)

        dW_r += np.concatenate([da_r.T @ h_prev, da_r.T @ x_t], axis=1)
        dW_z += np.concatenate([da_z.T @ h_prev, da_z.T @ x_t], axis=1)
        dW_h += np.concatenate([da_h.T @ (r * h_prev), da_h.T @ x_t], axis=1)
        db_r += da_r.sum(axis=0)
        db_z += da_z.sum(axis=0)
        db_h += da_h.sum(axis=0)

        dInp[:, t] = da_r @ Wr_x + da_z @ Wz_x + da_h @ Wh_x
        gh = (gh * (1.0 - z) + d_rh * r + da_r @ Wr_h + da_z @ Wz_h)
    return dW, db, dInp


def backward(batch, model: GruModel, caches: _ForwardCache) -> Grads:
    """Exact gradients of batch-mean MSE for every trainable tensor.

    ``batch`` is ``(X, Y)`` with ``X`` matching the forward pass that
    produced ``caches`` (checked; a mismatch raises :class:`StaleCache`).
    """
    X, Y = batch
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if not isinstance(caches, _ForwardCache):
        raise StaleCache("caches must come from forward_batch")
    if caches.X.shape != X.shape or not np.array_equal(caches.X, X):
        raise StaleCache("activation caches do not match this batch")
    B = X.shape[0]
    n_out = model.t_dec * model.d_out
    if Y.ndim == 3:
        Y = Y.reshape(B, n_out)
    if Y.shape != (B, n_out):
        raise ShapeMismatch(f"targets {Y.shape}, expected ({B}, {n_out})")

    preds = caches.H_top @ model.head_w.T + model.head_b
    dP = (2.0 / (B * n_out)) * (preds - Y)
    d_head_w = dP.T @ caches.H_top
    d_head_b = dP.sum(axis=0)
    gH = dP @ model.head_w          # gradient w.r.t. top layer's final hidden

    T = model.t_enc
    layer_grads = [None] * model.n_layers
    g_seq = np.zeros((T, B, model.d_h))
    g_seq[-1] = gH
    d_above = g_seq
    for li in range(model.n_layers - 1, -1, -1):
        dW, db, dInp = _backward_layer(model.layers[li], caches.layers[li], d_above)
        layer_grads[li] = (dW, db)
        d_above = np.transpose(dInp, (1, 0, 2)) if li > 0 else dInp
    return Grads(layer_grads=layer_grads, head_w=d_head_w, head_b=d_head_b,
                 d_input=d_above)


def input_gradient(seq, model: GruModel, cotangent) -> np.ndarray:
    """Vector-Jacobian product of ``predict`` w.r.t. its input window."""
    seq = np.asarray(seq, dtype=float)
    cot = np.asarray(cotangent, dtype=float)
    if cot.shape != (model.t_dec, model.d_out):
        raise ShapeMismatch(
            f"cotangent {cot.shape}, expected ({model.t_dec}, {model.d_out})")
    cache = _forward_layers(model, seq[None])
    gH = cot.reshape(1, -1) @ model.head_w
    T = model.t_enc
    g_seq = np.zeros((T, 1, model.d_h))
    g_seq[-1] = gH
    d_above = g_seq
    for li in range(model.n_layers - 1, -1, -1):
        _, _, dInp = _backward_layer(model.layers[li], cache.layers[li], d_above)
        d_above = np.transpose(dInp, (1, 0, 2)) if li > 0 else dInp
    return d_above[0]


# ---------------------------------------------------------------------------
# optimizer & scheduler


@dataclass
class AdamState:
    """Adam moments plus the decoupled weight-decay setting."""

    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, *, lr=1e-3, weight_decay=1e-5) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params],
                   lr=lr, weight_decay=weight_decay)

    @classmethod
    def for_model(cls, model: GruModel, *, lr=1e-3, weight_decay=1e-5) -> "AdamState":
        return cls.for_params(model.param_arrays(), lr=lr, weight_decay=weight_decay)


def adam_step(model_or_params, grads, state: AdamState) -> AdamState:
    """One in-place Adam update with decoupled multiplicative weight decay."""
    if hasattr(model_or_params, "param_arrays"):
        params = model_or_params.param_arrays()
    else:
        params = list(model_or_params)
    if hasattr(grads, "arrays"):
        grads = grads.arrays()
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if state.weight_decay:
            p *= 1.0 - state.lr * state.weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class PlateauState:
    """Validation-plateau learning-rate schedule (halve after 20 flat epochs)."""

    lr: float = 1e-3
    factor: float = 0.5
    patience: int = 20
    threshold: float = 1e-6
    floor: float = 1e-6
    best: float = float("inf")
    num_bad: int = 0
    seen: int = 0


def lr_on_plateau(val_losses, state: PlateauState) -> float:
    """Consume newly appended validation losses; return the current lr.

    An epoch counts as improving only when it beats the best loss by at
    least ``threshold``; ``patience`` consecutive non-improving epochs halve
    the rate (never below ``floor``).
    """
    for loss in list(val_losses)[state.seen:]:
        state.seen += 1
        if loss < state.best - state.threshold:
            state.best = loss
            state.num_bad = 0
        else:
            state.num_bad += 1
            if state.num_bad >= state.patience:
                state.lr = max(state.lr * state.factor, state.floor)
                state.num_bad = 0
    return state.lr


# ---------------------------------------------------------------------------
# checkpoints


def _norm_to_doc(ns):
    if ns is None:
        return None
    return {
        "in_mean": np.asarray(ns.in_mean, dtype=float).tolist(),
        "in_std": np.asarray(ns.in_std, dtype=float).tolist(),
        "out_mean": np.asarray(ns.out_mean, dtype=float).tolist(),
        "out_std": np.asarray(ns.out_std, dtype=float).tolist(),
    }


def save_checkpoint(model: GruModel, path) -> None:
    """Write a versioned JSON checkpoint (flat row-major tensors)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dims": {
            "d_x": model.d_x, "d_h": model.d_h, "layers": model.n_layers,
            "t_enc": model.t_enc, "t_dec": model.t_dec, "d_out": model.d_out,
        },
        "norm": _norm_to_doc(model.norm_stats),
        "params": {
            "layers": [
                {
                    "W_r": p.W_r.ravel().tolist(),
                    "W_z": p.W_z.ravel().tolist(),
                    "W_h": p.W_h.ravel().tolist(),
                    "b_r": p.b_r.tolist(),
                    "b_z": p.b_z.tolist(),
                    "b_h": p.b_h.tolist(),
                }
                for p in model.layers
            ],
            "head_w": model.head_w.ravel().tolist(),
            "head_b": model.head_b.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _take(doc, key, shape):
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"checkpoint field {key!r} unreadable: {exc}") from exc
    if arr.size != int(np.prod(shape)):
        raise CorruptFile(
            f"checkpoint field {key!r} has {arr.size} values, expected {np.prod(shape)}")
    if not np.all(np.isfinite(arr)):
        raise CorruptFile(f"checkpoint field {key!r} contains non-finite values")
    return arr.reshape(shape)


def load_checkpoint(path) -> GruModel:
    """Read a checkpoint back into a model; see the design notes on widths."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CorruptFile(f"{path} is not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {doc.get('version')!r}, supported {CHECKPOINT_VERSION}")
    try:
        dims = doc["dims"]
        d_x, d_h = int(dims["d_x"]), int(dims["d_h"])
        n_layers = int(dims["layers"])
        t_enc, t_dec, d_out = int(dims["t_enc"]), int(dims["t_dec"]), int(dims["d_out"])
        layer_docs = doc["params"]["layers"]
        if len(layer_docs) != n_layers:
            raise CorruptFile(
                f"checkpoint lists {len(layer_docs)} layers, dims say {n_layers}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"checkpoint structure invalid: {exc}") from exc

    if d_h not in HIDDEN_WIDTHS:
        warnings.warn(
            f"checkpoint hidden width {d_h} is outside the supported sweep "
            f"grid {HIDDEN_WIDTHS}; loading anyway", UserWarning, stacklevel=2)

    layers = []
    d_in = d_x
    for ld in layer_docs:
        p = GruLayerParams.zeros(d_x=d_in, d_h=d_h)
        p.W_r[:] = _take(ld, "W_r", (d_h, d_h + d_in))
        p.W_z[:] = _take(ld, "W_z", (d_h, d_h + d_in))
        p.W_h[:] = _take(ld, "W_h", (d_h, d_h + d_in))
        p.b_r[:] = _take(ld, "b_r", (d_h,))
        p.b_z[:] = _take(ld, "b_z", (d_h,))
        p.b_h[:] = _take(ld, "b_h", (d_h,))
        layers.append(p)
        d_in = d_h
    head_w = _take(doc["params"], "head_w", (t_dec * d_out, d_h))
    head_b = _take(doc["params"], "head_b", (t_dec * d_out,))

    norm = doc.get("norm")
    norm_stats = None
    if norm is not None:
        from .pipeline import NormStats
        norm_stats = NormStats(
            in_mean=_take(norm, "in_mean", (d_x,)),
            in_std=_take(norm, "in_std", (d_x,)),
            out_mean=_take(norm, "out_mean", (d_out,)),
            out_std=_take(norm, "out_std", (d_out,)),
        )
    return GruModel(layers=layers, head_w=head_w, head_b=head_b, d_x=d_x,
                    d_h=d_h, t_enc=t_enc, t_dec=t_dec, d_out=d_out,
                    norm_stats=norm_stats)


def checkpoint_io(model, path, mode: str):
    """Dispatch to :func:`save_checkpoint` or :func:`load_checkpoint`."""
    if mode == "save":
        save_checkpoint(model, path)
        return None
    if mode == "load":
        return load_checkpoint(path)
    raise ValueError(f"mode must be 'save' or 'load', got {mode!r}")
