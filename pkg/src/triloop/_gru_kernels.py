"""Single-precision streaming kernels for autoregressive surrogate rollout.

A receding-horizon rollout needs, at every simulated second, the GRU stack's
final hidden state over the *latest 30 rows*.  Recomputing the whole window
each step costs 30 forward passes per emitted step.  Instead we keep 30
staggered hidden-state "streams", one per window phase: stream ``s`` was
zero-initialized at row ``t == s (mod 30)`` and has consumed every row
since.  Feeding one new row then advances all 30 streams with a single
batched cell update (two ``(30, d_h+d_in)`` matrix products per layer), and
exactly one stream — the one reset 30 rows ago — currently holds a complete
30-row window.  That stream feeds the head; the stream reset on *this* row
restarts the cycle.

Work per emitted step drops 30-fold and lands in gemm-friendly shapes.
Everything here runs in float32 (inference only; training stays float64).
"""

import numpy as np

from ._accel import HAS_NUMBA, USE_NUMBA


def _build(jit):
    def stream_step(H, Xin, Wrz_T, brz, Wh_T, bh, k):
        """Advance all streams one row; stream ``k`` is re-zeroed first.

        H: (S, d_h) hidden streams, updated in place.
        Xin: (S, d_in) this row's input per stream.
        Wrz_T: (d_h+d_in, 2*d_h); Wh_T: (d_h+d_in, d_h); transposed weights.
        """
        S, d_h = H.shape
        d_in = Xin.shape[1]
        one = np.float32(1.0)
        H[k, :] = np.float32(0.0)

        hx = np.empty((S, d_h + d_in), dtype=np.float32)
        hx[:, :d_h] = H
        hx[:, d_h:] = Xin
        G = one / (one + np.exp(-(np.dot(hx, Wrz_T) + brz)))
        r = G[:, :d_h]
        z = G[:, d_h:]
        hx[:, :d_h] = r * H          # candidate sees the reset-gated hidden
        hc = np.tanh(np.dot(hx, Wh_T) + bh)
        H[:] = (one - z) * H + z * hc

    if jit is None:
        return stream_step
    return jit(stream_step)


_stream_step_numpy = _build(None)

if HAS_NUMBA:
    from numba import njit

    _stream_step_numba = _build(njit(cache=True))
else:
    _stream_step_numba = None

stream_step = _stream_step_numba if USE_NUMBA else _stream_step_numpy


class StreamedStack:
    """Staggered-stream evaluator for a trained stack, float32.

    Feed rows one at a time with :meth:`feed`; once ``ready`` is true,
    :meth:`head_output` returns the forecast for the stream holding the
    latest complete window.
    """

    def __init__(self, model, *, n_streams: int = None, step_fn=None):
        n = model.t_enc if n_streams is None else int(n_streams)
        self.n = n
        self._step = step_fn if step_fn is not None else stream_step
        self.Wrz_T = []
        self.brz = []
        self.Wh_T = []
        self.bh = []
        self.H = []
        for p in model.layers:
            d_h = p.d_h
            self.Wrz_T.append(np.ascontiguousarray(p.W[: 2 * d_h].T, dtype=np.float32))
            self.brz.append(np.ascontiguousarray(p.b[: 2 * d_h], dtype=np.float32))
            self.Wh_T.append(np.ascontiguousarray(p.W[2 * d_h:].T, dtype=np.float32))
            self.bh.append(np.ascontiguousarray(p.b[2 * d_h:], dtype=np.float32))
            self.H.append(np.zeros((n, d_h), dtype=np.float32))
        self.head_w = np.ascontiguousarray(model.head_w, dtype=np.float32)
        self.head_b = np.ascontiguousarray(model.head_b, dtype=np.float32)
        self.t_dec = model.t_dec
        self.d_out = model.d_out
        self.d_x = model.d_x
        self.t = -1
        self._x_buf = np.empty((n, model.d_x), dtype=np.float32)

    @property
    def ready(self) -> bool:
        return self.t >= self.n - 1

    @property
    def ready_index(self) -> int:
        return (self.t + 1) % self.n

    def feed(self, x_row) -> None:
        """Consume one normalized input row (d_x,)."""
        self.t += 1
        k = self.t % self.n
        self._x_buf[:] = np.asarray(x_row, dtype=np.float32)
        inp = self._x_buf
        for li in range(len(self.H)):
            self._step(self.H[li], inp, self.Wrz_T[li], self.brz[li],
                       self.Wh_T[li], self.bh[li], k)
            inp = self.H[li]

    def head_output(self) -> np.ndarray:
        """Forecast block (t_dec, d_out) from the complete-window stream."""
        h = self.H[-1][self.ready_index]
        flat = self.head_w @ h + self.head_b
        return flat.reshape(self.t_dec, self.d_out)
