"""Dataset preparation, training orchestration, metrics, and the size sweep.

A recorded trajectory (rows of the 31-column dataset layout) becomes
training material in four moves: sequential 70/10/20 splitting, z-score
normalization fitted on the training rows only, sliding-window extraction
(30 input steps, 10 target steps), and seeded mini-batch shuffling.  The
training loop is plain gradient descent over the exact BPTT gradients from
:mod:`triloop.gru` with Adam, a validation-plateau learning-rate schedule,
and best-snapshot early stopping.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import gru
from .channels import CSV_COLUMNS, INPUT_ORDER, OUTPUT_ORDER, canonical_catalog
from .errors import Diverged, OutOfRange, ShapeMismatch, TooShort

#: Column indices of the model input/output channels within a dataset row.
INPUT_COLUMN_IDX = tuple(CSV_COLUMNS.index(ch) for ch in INPUT_ORDER)
OUTPUT_COLUMN_IDX = tuple(CSV_COLUMNS.index(ch) for ch in OUTPUT_ORDER)

T_ENC = 30
T_DEC = 10
D_IN = len(INPUT_ORDER)
D_OUT = len(OUTPUT_ORDER)

#: The configuration adopted as the package default after the size study.
ADOPTED_DEFAULT = (256, 2)


# ---------------------------------------------------------------------------
# types


@dataclass
class NormStats:
    """Z-score statistics, fitted on the training split only."""

    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray


@dataclass
class WindowSample:
    """One training sample: 30 input rows paired with the next 10 rows."""

    input: np.ndarray        # (30, 26) physical units
    target: np.ndarray       # (10, 29) physical units
    origin_index: int        # trajectory row of input row 0


@dataclass
class TrainConfig:
    hidden: int = 256
    layers: int = 2
    batch: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-5
    early_stop_patience: int = 100
    max_epochs: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.hidden not in gru.HIDDEN_WIDTHS:
            raise OutOfRange(
                f"hidden width {self.hidden} not in {gru.HIDDEN_WIDTHS}")
        if self.layers not in gru.LAYER_COUNTS:
            raise OutOfRange(f"layer count {self.layers} not in {gru.LAYER_COUNTS}")
        if self.batch < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise OutOfRange("batch, max_epochs, early_stop_patience must be >= 1")
        if self.lr <= 0:
            raise OutOfRange("learning rate must be positive")


@dataclass
class Splits:
    """Normalized window tensors for each split, plus the fitted statistics."""

    X_train: np.ndarray
    Y_train: np.ndarray
    X_val: np.ndarray
    Y_val: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray
    stats: NormStats


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    lr: float


@dataclass
class GroupMetrics:
    """MAE/RMSE per channel group, physical units (actuators: % of range)."""

    mae: dict
    rmse: dict

    GROUPS = ("temperature", "pressure", "flow", "power", "actuator")


@dataclass
class SweepRow:
    hidden: int
    layers: int
    train_loss: float
    valid_loss: float
    param_count: int
    diverged: bool = False
    best: bool = False


@dataclass
class SweepResult:
    rows: list
    best: tuple          # (hidden, layers) with the lowest validation loss
    adopted_default: tuple = ADOPTED_DEFAULT


# ---------------------------------------------------------------------------
# splitting / windowing / normalization


def split_sequential(n_steps: int):
    """Contiguous 70/10/20 split (floor rule, remainder to test)."""
    if n_steps < 50:
        raise TooShort(f"need at least 50 rows to split, got {n_steps}")
    n_train = int(0.7 * n_steps)
    n_val = int(0.1 * n_steps)
    return (range(0, n_train),
            range(n_train, n_train + n_val),
            range(n_train + n_val, n_steps))


def make_windows(index_range, trajectory) -> list:
    """Sliding 30-in/10-out windows fully inside one split's row range."""
    trajectory = np.asarray(trajectory, dtype=float)
    rows = list(index_range)
    if len(rows) < T_ENC + T_DEC:
        raise TooShort(
            f"split of {len(rows)} rows cannot fit a {T_ENC}+{T_DEC} window")
    in_cols = np.array(INPUT_COLUMN_IDX)
    out_cols = np.array(OUTPUT_COLUMN_IDX)
    lo, hi = rows[0], rows[-1] + 1
    samples = []
    for k in range(lo, hi - (T_ENC + T_DEC) + 1):
        samples.append(WindowSample(
            input=trajectory[k: k + T_ENC][:, in_cols],
            target=trajectory[k + T_ENC: k + T_ENC + T_DEC][:, out_cols],
            origin_index=k,
        ))
    return samples


def fit_norm_stats(train_rows) -> NormStats:
    """Per-channel mean/std from training rows; constant channels get std 1."""
    train_rows = np.asarray(train_rows, dtype=float)
    in_block = train_rows[:, np.array(INPUT_COLUMN_IDX)]
    out_block = train_rows[:, np.array(OUTPUT_COLUMN_IDX)]

    def _stats(block):
        mean = block.mean(axis=0)
        std = block.std(axis=0)
        std[std == 0.0] = 1.0
        return mean, std

    im, istd = _stats(in_block)
    om, ostd = _stats(out_block)
    return NormStats(in_mean=im, in_std=istd, out_mean=om, out_std=ostd)


def zscore(stats: NormStats, block, direction: str = "forward"):
    """Normalize or denormalize a block; width selects input vs output stats."""
    block = np.asarray(block, dtype=float)
    width = block.shape[-1]
    if width == D_IN:
        mean, std = stats.in_mean, stats.in_std
    elif width == D_OUT:
        mean, std = stats.out_mean, stats.out_std
    else:
        raise ShapeMismatch(
            f"block width {width} matches neither inputs ({D_IN}) nor outputs ({D_OUT})")
    if direction == "forward":
        return (block - mean) / std
    if direction == "inverse":
        return block * std + mean
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _stack(samples, stats):
    X = np.stack([s.input for s in samples])
    Y = np.stack([s.target for s in samples])
    return zscore(stats, X), zscore(stats, Y)


def prepare_dataset(trajectory) -> Splits:
    """Split, fit statistics on the training rows, window, and normalize."""
    trajectory = np.asarray(trajectory, dtype=float)
    tr, va, te = split_sequential(trajectory.shape[0])
    stats = fit_norm_stats(trajectory[list(tr)])
    Xt, Yt = _stack(make_windows(tr, trajectory), stats)
    Xv, Yv = _stack(make_windows(va, trajectory), stats)
    Xs, Ys = _stack(make_windows(te, trajectory), stats)
    return Splits(X_train=Xt, Y_train=Yt, X_val=Xv, Y_val=Yv,
                  X_test=Xs, Y_test=Ys, stats=stats)


# ---------------------------------------------------------------------------
# training


def _batched_loss(model, X, Y, batch):
    """Mean MSE over a whole split, evaluated in mini-batches."""
    total = 0.0
    n = X.shape[0]
    for lo in range(0, n, batch):
        preds, _ = gru.forward_batch(model, X[lo: lo + batch])
        d = preds - Y[lo: lo + batch].reshape(preds.shape)
        total += float(np.sum(d * d))
    return total / (n * Y.shape[1] * Y.shape[2])


def train(splits: Splits, cfg: TrainConfig):
    """Train a model on prepared splits; returns (best model, history).

    Epochs shuffle the window order under the configured seed and keep the
    final partial batch.  After each epoch the validation loss drives both
    the plateau schedule and best-snapshot early stopping (patience
    ``early_stop_patience`` epochs without strict improvement).
    """
    if splits.X_train.size == 0 or splits.X_val.size == 0:
        raise TooShort("training and validation splits must be non-empty")
    model = gru.GruModel.new(d_x=D_IN, d_h=cfg.hidden, layers=cfg.layers,
                             t_enc=T_ENC, t_dec=T_DEC, d_out=D_OUT,
                             seed=cfg.seed)
    model.norm_stats = splits.stats
    adam = gru.AdamState.for_model(model, lr=cfg.lr, weight_decay=cfg.weight_decay)
    sched = gru.PlateauState(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    n = splits.X_train.shape[0]
    n_el = T_DEC * D_OUT
    history = []
    val_losses = []
    best_val = float("inf")
    best_params = None
    bad_epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        sq_sum = 0.0
        for lo in range(0, n, cfg.batch):
            idx = order[lo: lo + cfg.batch]
            Xb = np.ascontiguousarray(splits.X_train[idx])
            Yb = splits.Y_train[idx]
            preds, caches = gru.forward_batch(model, Xb)
            d = preds - Yb.reshape(preds.shape)
            sq_sum += float(np.sum(d * d))
            grads = gru.backward((Xb, Yb), model, caches)
            gru.adam_step(model, grads, adam)
        train_loss = sq_sum / (n * n_el)
        valid_loss = _batched_loss(model, splits.X_val, splits.Y_val, cfg.batch)
        if not (np.isfinite(train_loss) and np.isfinite(valid_loss)):
            raise Diverged(
                f"non-finite loss at epoch {epoch} "
                f"(train {train_loss}, valid {valid_loss})")

        val_losses.append(valid_loss)
        adam.lr = gru.lr_on_plateau(val_losses, sched)
        history.append(EpochRecord(epoch=epoch, train_loss=train_loss,
                                   valid_loss=valid_loss, lr=adam.lr))

        if valid_loss < best_val:
            best_val = valid_loss
            best_params = [a.copy() for a in model.param_arrays()]
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.early_stop_patience:
                break

    if best_params is not None:
        for a, b in zip(model.param_arrays(), best_params):
            a[:] = b
    return model, history


def save_history(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "valid_loss", "lr"])
        for rec in history:
            w.writerow([rec.epoch, f"{rec.train_loss:.12g}",
                        f"{rec.valid_loss:.12g}", f"{rec.lr:.12g}"])


# ---------------------------------------------------------------------------
# evaluation


def _group_channel_info():
    cat = canonical_catalog()
    groups = {g: [] for g in GroupMetrics.GROUPS}
    scale = np.ones(D_OUT)
    for j, ch in enumerate(OUTPUT_ORDER):
        spec = cat.spec(ch)
        if spec.group in ("temperature",):
            groups["temperature"].append(j)
        elif spec.group == "pressure":
            groups["pressure"].append(j)
        elif spec.group == "flow":
            groups["flow"].append(j)
        elif spec.group == "power":
            groups["power"].append(j)
        elif spec.group == "actuator":
            groups["actuator"].append(j)
            scale[j] = 100.0 / spec.max_value   # report as percent of range
    return groups, scale


_GROUP_IDX, _ACT_SCALE = _group_channel_info()


def group_metrics(pred_phys, target_phys) -> GroupMetrics:
    """MAE/RMSE per channel group from physical-unit blocks (N, 10, 29)."""
    pred = np.asarray(pred_phys, dtype=float).reshape(-1, D_OUT)
    target = np.asarray(target_phys, dtype=float).reshape(-1, D_OUT)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target {target.shape}")
    err = (pred - target) * _ACT_SCALE
    mae, rmse = {}, {}
    for g, idx in _GROUP_IDX.items():
        e = err[:, idx]
        mae[g] = float(np.mean(np.abs(e)))
        rmse[g] = float(np.sqrt(np.mean(e * e)))
    return GroupMetrics(mae=mae, rmse=rmse)


def evaluate(model, X, Y, batch: int = 128) -> GroupMetrics:
    """Group metrics on normalized window tensors, reported in physical units."""
    stats = model.norm_stats
    preds = []
    for lo in range(0, X.shape[0], batch):
        p, _ = gru.forward_batch(model, X[lo: lo + batch])
        preds.append(p)
    pred_n = np.concatenate(preds).reshape(-1, T_DEC, D_OUT)
    pred_phys = zscore(stats, pred_n, "inverse")
    target_phys = zscore(stats, np.asarray(Y), "inverse")
    return group_metrics(pred_phys, target_phys)


# ---------------------------------------------------------------------------
# size sweep


def sweep_cell(splits: Splits, cfg: TrainConfig, hidden: int,
               layers: int) -> SweepRow:
    """Train one grid cell; a diverged cell yields NaN losses, not an error."""
    cell_cfg = replace(cfg, hidden=hidden, layers=layers)
    pc = _param_count_for(hidden, layers)
    try:
        model, history = train(splits, cell_cfg)
        return SweepRow(hidden=hidden, layers=layers,
                        train_loss=history[-1].train_loss,
                        valid_loss=min(r.valid_loss for r in history),
                        param_count=pc)
    except Diverged:
        return SweepRow(hidden=hidden, layers=layers, train_loss=float("nan"),
                        valid_loss=float("nan"), param_count=pc, diverged=True)


def assemble_sweep(rows) -> SweepResult:
    """Flag the lowest-validation cell and build the result table."""
    rows = list(rows)
    finite = [r for r in rows if not r.diverged]
    best = min(finite, key=lambda r: r.valid_loss) if finite else None
    for r in rows:
        r.best = best is not None and (r.hidden, r.layers) == (best.hidden, best.layers)
    return SweepResult(rows=rows,
                       best=(best.hidden, best.layers) if best else (None, None))


def sweep_grid(hidden_grid=gru.HIDDEN_WIDTHS,
               layer_grid=gru.LAYER_COUNTS) -> list:
    return [(h, l) for h in sorted(hidden_grid) for l in sorted(layer_grid)]


def sweep(splits: Splits, cfg: TrainConfig, *, hidden_grid=gru.HIDDEN_WIDTHS,
          layer_grid=gru.LAYER_COUNTS) -> SweepResult:
    """Train every (hidden, layers) cell; collect losses and parameter counts.

    Cells that diverge are kept in the table with NaN losses rather than
    aborting the sweep.  The numerically best validation cell is flagged;
    the package's adopted default is reported alongside because the two need
    not coincide.
    """
    return assemble_sweep(sweep_cell(splits, cfg, h, l)
                          for h, l in sweep_grid(hidden_grid, layer_grid))


def _param_count_for(hidden: int, layers: int) -> int:
    total = 0
    d_in = D_IN
    for _ in range(layers):
        total += 3 * (hidden * (hidden + d_in) + hidden)
        d_in = hidden
    total += (T_DEC * D_OUT) * hidden + T_DEC * D_OUT
    return total


def save_sweep(result: SweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hidden", "layers", "train_loss", "valid_loss", "param_count"])
        for r in result.rows:
            w.writerow([r.hidden, r.layers, f"{r.train_loss:.12g}",
                        f"{r.valid_loss:.12g}", r.param_count])
