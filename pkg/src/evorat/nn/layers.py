"""Forward/backward building blocks in float64 numpy.

Every layer records what its backward pass needs during ``forward`` and
refuses ``backward`` until a forward has happened. Inputs are batched:
sequences are ``(batch, time, features)``.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from ..exceptions import ConfigurationError, InvalidInputError, UsageError
from ._kernels import gru_backward_loop, gru_forward_loop
from .params import ParamLayout


def sigmoid(x) -> np.ndarray:
    return expit(np.asarray(x, dtype=np.float64))


class Dense:
    """Affine map ``y = x W^T + b`` applied over the last axis."""

    def __init__(self, in_features: int, out_features: int):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        self._x: Optional[np.ndarray] = None

    def layout(self, prefix: str = "") -> ParamLayout:
        return ParamLayout([
            (prefix + "W", (self.out_features, self.in_features)),
            (prefix + "b", (self.out_features,)),
        ])

    def forward(self, params: Dict[str, np.ndarray], x: np.ndarray, prefix: str = "") -> np.ndarray:
        W, b = params[prefix + "W"], params[prefix + "b"]
        if x.shape[-1] != self.in_features:
            raise ConfigurationError(
                f"Dense expects {self.in_features} input features, got {x.shape[-1]}"
            )
        self._x = x
        return x @ W.T + b

    def backward(self, params: Dict[str, np.ndarray], dy: np.ndarray, prefix: str = ""):
        """Return ``(grads, dx)`` for upstream gradient ``dy``."""
        if self._x is None:
            raise UsageError("Dense.backward called before forward")
        x2 = self._x.reshape(-1, self.in_features)
        dy2 = dy.reshape(-1, self.out_features)
        grads = {prefix + "W": dy2.T @ x2, prefix + "b": dy2.sum(axis=0)}
        dx = dy @ params[prefix + "W"]
        return grads, dx


class GRU:
    """Single-direction GRU.

    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
    c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t
    """

    GATES = ("z", "r", "h")

    def __init__(self, input_size: int, hidden_size: int):
        self.input_size = int(input_size)
        self.hidden_size = int(hidden_size)
        self._cache: Optional[Tuple[np.ndarray, ...]] = None

    def layout(self, prefix: str = "") -> ParamLayout:
        H, D = self.hidden_size, self.input_size
        segs = [(f"{prefix}W_{g}", (H, D)) for g in self.GATES]
        segs += [(f"{prefix}U_{g}", (H, H)) for g in self.GATES]
        segs += [(f"{prefix}b_{g}", (H,)) for g in self.GATES]
        return ParamLayout(segs)

    def _stack(self, params, prefix):
        W = np.concatenate([params[f"{prefix}W_{g}"] for g in self.GATES], axis=0)
        U = np.concatenate([params[f"{prefix}U_{g}"] for g in self.GATES], axis=0)
        b = np.concatenate([params[f"{prefix}b_{g}"] for g in self.GATES], axis=0)
        H, D = self.hidden_size, self.input_size
        if W.shape != (3 * H, D) or U.shape != (3 * H, H) or b.shape != (3 * H,):
            raise ConfigurationError("GRU parameter shapes do not match declared sizes")
        return W, U, b

    def forward(
        self,
        params: Dict[str, np.ndarray],
        x: np.ndarray,
        h0: Optional[np.ndarray] = None,
        prefix: str = "",
        record: bool = True,
    ) -> np.ndarray:
        """Run the recurrence over ``x`` of shape (B, T, D); returns (B, T, H)."""
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ConfigurationError(
                f"GRU expects input (batch, time, {self.input_size}), got {x.shape}"
            )
        W, U, b = self._stack(params, prefix)
        B, T, _ = x.shape
        H = self.hidden_size
        if h0 is None:
            h = np.zeros((B, H))
        else:
            h0 = np.asarray(h0, dtype=np.float64)
            if h0.shape[-1] != H:
                raise ConfigurationError("h0 does not match hidden size")
            h = np.broadcast_to(h0, (B, H)).copy()
        # time-major buffers keep each step's slice contiguous
        xp = np.ascontiguousarray((x @ W.T + b).transpose(1, 0, 2))
        U_zrT = np.ascontiguousarray(U[:2 * H].T)
        U_hT = np.ascontiguousarray(U[2 * H:].T)
        hs = np.empty((T + 1, B, H))
        hs[0] = h
        zr_all = np.empty((T, B, 2 * H))
        cs = np.empty((T, B, H))
        gru_forward_loop(xp, U_zrT, U_hT, hs, zr_all, cs, record)
        if record:
            self._cache = (x, hs, zr_all, cs, W, U)
        return hs[1:].transpose(1, 0, 2)

    def backward(self, params: Dict[str, np.ndarray], dhs: np.ndarray, prefix: str = "",
                 need_dx: bool = True):
        """Backprop through time for upstream ``dhs`` (B, T, H).

        Returns ``(grads, dx)``; the gradient w.r.t. ``h0`` is dropped and
        ``dx`` is None when ``need_dx`` is false.
        """
        if self._cache is None:
            raise UsageError("GRU.backward called before forward")
        x, hs, zr_all, cs, W, U = self._cache
        B, T, H = dhs.shape
        U_zr, U_h = U[:2 * H], U[2 * H:]
        dhs_t = np.ascontiguousarray(dhs.transpose(1, 0, 2), dtype=np.float64)
        da = np.empty((T, B, 3 * H))
        gru_backward_loop(dhs_t, hs, zr_all, cs, np.ascontiguousarray(U_zr), np.ascontiguousarray(U_h), da)
        da = da.transpose(1, 0, 2)
        da2 = da.reshape(-1, 3 * H)
        hp2 = hs[:-1].transpose(1, 0, 2).reshape(-1, H)
        r2 = zr_all[:, :, H:].transpose(1, 0, 2).reshape(-1, H)
        dW = da2.T @ x.reshape(-1, self.input_size)
        dU_zr = da2[:, :2 * H].T @ hp2
        dU_h = da2[:, 2 * H:].T @ (r2 * hp2)
        db = da2.sum(axis=0)
        grads = {}
        for k, g in enumerate(self.GATES):
            grads[f"{prefix}W_{g}"] = dW[k * H:(k + 1) * H]
            grads[f"{prefix}b_{g}"] = db[k * H:(k + 1) * H]
        grads[f"{prefix}U_z"] = dU_zr[:H]
        grads[f"{prefix}U_r"] = dU_zr[H:]
        grads[f"{prefix}U_h"] = dU_h
        dx = da @ W if need_dx else None
        return grads, dx


def gru_forward(params: Dict[str, np.ndarray], inputs: np.ndarray, h0: Optional[np.ndarray] = None) -> np.ndarray:
    """Hidden states for a single unbatched sequence ``inputs`` (T, D)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    W_z = np.asarray(params["W_z"])
    layer = GRU(W_z.shape[1], W_z.shape[0])
    if inputs.ndim != 2:
        raise ConfigurationError("gru_forward expects a (time, features) array")
    return layer.forward(params, inputs[None], None if h0 is None else np.asarray(h0)[None], record=False)[0]


class MaxPoolTime:
    """Elementwise max over time, restricted to each sequence's valid prefix.

    Ties route the gradient to the earliest timestep.
    """

    def __init__(self):
        self._idx: Optional[np.ndarray] = None
        self._shape: Optional[Tuple[int, int, int]] = None

    def forward(self, states: np.ndarray, lengths: Optional[np.ndarray] = None) -> np.ndarray:
        if states.ndim != 3 or states.shape[1] == 0:
            raise InvalidInputError("max_pool_time needs a non-empty (batch, time, features) array")
        B, T, H = states.shape
        if lengths is not None:
            lengths = np.asarray(lengths)
            if np.any(lengths < 1) or np.any(lengths > T):
                raise InvalidInputError("sequence lengths must lie in [1, time]")
            valid = np.arange(T)[None, :] < lengths[:, None]
            states = np.where(valid[:, :, None], states, -np.inf)
        idx = np.argmax(states, axis=1)
        self._idx = idx
        self._shape = (B, T, H)
        return np.take_along_axis(states, idx[:, None, :], axis=1)[:, 0, :]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._idx is None:
            raise UsageError("MaxPoolTime.backward called before forward")
        B, T, H = self._shape
        dx = np.zeros((B, T, H))
        np.put_along_axis(dx, self._idx[:, None, :], dy[:, None, :], axis=1)
        return dx


def max_pool_time(states) -> np.ndarray:
    """Elementwise max of a single sequence of vectors (T, H)."""
    states = np.asarray(states, dtype=np.float64)
    if states.ndim != 2 or states.shape[0] == 0:
        raise InvalidInputError("max_pool_time needs a non-empty sequence")
    return states.max(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. ``logits``.

    Accepts a single logit vector with an integer label, or a (B, C)
    batch with B labels; the batch loss is the mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    if single:
        logits = logits[None]
    labels = np.atleast_1d(np.asarray(labels))
    B, C = logits.shape
    if labels.shape != (B,):
        raise InvalidInputError("one label per logit row required")
    if not np.issubdtype(labels.dtype, np.integer) or np.any(labels < 0) or np.any(labels >= C):
        raise InvalidInputError(f"labels must be class indices in [0, {C})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(B)
    losses = logsum - shifted[rows, labels]
    grad = np.exp(shifted - logsum[:, None])
    grad[rows, labels] -= 1.0
    grad /= B
    if single:
        return float(losses[0]), grad[0]
    return float(losses.mean()), grad
