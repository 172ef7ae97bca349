"""Dilated causal temporal convolutional network with hand-written gradients.

The network maps a time-major sequence of input vectors to a sequence of
output vectors of the same length.  Convolutions are causally padded on the
left, so the output at time t depends on inputs at times <= t only; this is
what makes multi-step forecasting a single forward pass.

Architecture: a stack of residual blocks, each holding two dilated causal
convolutions with the same dilation (activation after each and after the
residual add), plus a 1x1 projection on the skip path when the channel
count changes, followed by a per-time-step linear output layer.  All
arithmetic is float64 numpy; training is single-threaded and bit-for-bit
reproducible from the seed.

Input and output normalization (per-coordinate shift/scale, estimated from
the training range by :func:`train`) is carried inside the model and
applied by :func:`forward`, so a freshly initialized model computes the raw
network function (identity normalization) and a trained model consumes and
emits data in its original units.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    NumericalError,
    PayloadSizeError,
    HeaderInconsistencyError,
    UnsupportedVersionError,
)

CHECKPOINT_MAGIC = b"FTCN"
CHECKPOINT_VERSION = 1

# Scale floor: coordinates with (near-)zero variance are left unscaled.
SCALE_FLOOR = 1e-12


@dataclass(frozen=True)
class TcnConfig:
    """Hyperparameters of the forecaster.

    ``input_width`` counts the flattened covariate entries per time step
    (plus the flattened response width when ``use_lagged_response`` is on).
    ``channels`` and ``dilations`` must have equal length: one residual
    block per entry, two convolutions per block.
    """

    input_width: int
    output_width: int
    channels: tuple = (16, 16, 16)
    kernel_size: int = 3
    dilations: tuple = (1, 2, 4)
    activation: str = "relu"
    dropout_rate: float = 0.0
    learning_rate: float = 3e-3
    epochs: int = 2000
    batch_len: int | None = None
    seed: int = 0
    use_lagged_response: bool = False
    output_shape: tuple | None = None
    early_stop_frac: float = 0.1
    patience: int | None = 20
    min_history: int = 1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        if self.output_shape is not None:
            object.__setattr__(
                self, "output_shape", tuple(int(p) for p in self.output_shape)
            )
        if self.input_width < 1 or self.output_width < 1:
            raise ConfigError("input_width and output_width must be positive")
        if len(self.channels) != len(self.dilations) or not self.channels:
            raise ConfigError("channels and dilations must be nonempty, equal-length")
        if any(c < 1 for c in self.channels) or any(d < 1 for d in self.dilations):
            raise ConfigError("channels and dilations must be positive")
        if self.kernel_size < 2:
            raise ConfigError(f"kernel_size must be >= 2, got {self.kernel_size}")
        if self.activation not in ("relu", "linear"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.batch_len is not None and self.batch_len < 1:
            raise ConfigError("batch_len must be positive when set")
        if self.output_shape is not None and int(np.prod(self.output_shape)) != self.output_width:
            raise ConfigError(
                f"output_shape {self.output_shape} does not flatten to width "
                f"{self.output_width}"
            )
        if not 0.0 < self.early_stop_frac < 1.0:
            raise ConfigError("early_stop_frac must lie in (0, 1)")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience must be positive or None")
        if self.receptive_field < self.min_history:
            raise ConfigError(
                f"receptive field {self.receptive_field} shorter than the "
                f"requested minimum history {self.min_history}"
            )

    @property
    def receptive_field(self) -> int:
        return 1 + sum((self.kernel_size - 1) * d * 2 for d in self.dilations)

    @property
    def resolved_output_shape(self) -> tuple:
        return self.output_shape if self.output_shape is not None else (self.output_width,)


def _layer_specs(config: TcnConfig):
    """Yield (name, shape) for every parameter tensor, in storage order."""
    c_in = config.input_width
    k = config.kernel_size
    for i, c_out in enumerate(config.channels):
        yield f"block{i}.conv1.w", (k, c_in, c_out)
        yield f"block{i}.conv1.b", (c_out,)
        yield f"block{i}.conv2.w", (k, c_out, c_out)
        yield f"block{i}.conv2.b", (c_out,)
        if c_in != c_out:
            yield f"block{i}.proj.w", (c_in, c_out)
        c_in = c_out
    yield "out.w", (c_in, config.output_width)
    yield "out.b", (config.output_width,)


def parameter_count(config: TcnConfig) -> int:
    """Closed-form parameter count (kernels + biases + projections + output)."""
    return sum(int(np.prod(shape)) for _, shape in _layer_specs(config))


class TcnModel:
    """Weights (one flat vector with a per-layer index map) plus config and
    the input/output normalization carried over from training."""

    def __init__(self, config: TcnConfig, params: np.ndarray | None = None):
        self.config = config
        self.layout = {}
        offset = 0
        for name, shape in _layer_specs(config):
            size = int(np.prod(shape))
            self.layout[name] = (slice(offset, offset + size), shape)
            offset += size
        self.n_params = offset
        if params is None:
            params = np.zeros(offset)
        if params.shape != (offset,):
            raise ConfigError(f"expected {offset} parameters, got {params.shape}")
        self.params = np.asarray(params, dtype=np.float64)
        w_in, w_out = config.input_width, config.output_width
        self.in_mean = np.zeros(w_in)
        self.in_scale = np.ones(w_in)
        self.out_mean = np.zeros(w_out)
        self.out_scale = np.ones(w_out)

    def view(self, name: str, params: np.ndarray | None = None) -> np.ndarray:
        sl, shape = self.layout[name]
        return (self.params if params is None else params)[sl].reshape(shape)

    def copy(self) -> "TcnModel":
        other = TcnModel(self.config, self.params.copy())
        other.in_mean = self.in_mean.copy()
        other.in_scale = self.in_scale.copy()
        other.out_mean = self.out_mean.copy()
        other.out_scale = self.out_scale.copy()
        return other


def init_model(config: TcnConfig, seed: int | None = None) -> TcnModel:
    """Deterministic fan-in-scaled uniform initialization."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    model = TcnModel(config)
    for name, (sl, shape) in model.layout.items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[:-1]))
        else:
            # Bias bound follows its layer's fan-in (kernel taps x channels).
            wname = name[:-2] + ".w"
            wshape = model.layout[wname][1]
            fan_in = int(np.prod(wshape[:-1]))
        bound = 1.0 / np.sqrt(fan_in)
        model.params[sl] = rng.uniform(-bound, bound, sl.stop - sl.start)
    return model


def _conv_columns(x: np.ndarray, k: int, dilation: int) -> np.ndarray:
    """Gather the k causal taps of every time step into one (T, k*c) block;
    tap j reads the input j*dilation steps in the past (zeros before t=0)."""
    T, c = x.shape
    pad = (k - 1) * dilation
    xp = np.zeros((T + pad, c))
    xp[pad:] = x
    cols = np.empty((T, k * c))
    for j in range(k):
        start = pad - j * dilation
        cols[:, j * c : (j + 1) * c] = xp[start : start + T]
    return cols


def _causal_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation: int):
    """Left-padded dilated convolution as a single matrix product.

    Returns (output, tap columns); the columns are reused by the backward
    pass."""
    k, c_in, c_out = w.shape
    cols = _conv_columns(x, k, dilation)
    return cols @ w.reshape(k * c_in, c_out) + b, cols


def _causal_conv_backward(grad, cols, w, dilation):
    k, c_in, c_out = w.shape
    T = grad.shape[0]
    pad = (k - 1) * dilation
    dw = (cols.T @ grad).reshape(k, c_in, c_out)
    dcols = grad @ w.reshape(k * c_in, c_out).T
    dxp = np.zeros((T + pad, c_in))
    for j in range(k):
        start = pad - j * dilation
        dxp[start : start + T] += dcols[:, j * c_in : (j + 1) * c_in]
    return dw, grad.sum(axis=0), dxp[pad:]


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(grad: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    return grad * (z > 0) if kind == "relu" else grad


def _forward_core(model, xn, params, train_mode=False, dropout_rng=None):
    """Network body on normalized inputs; returns normalized-space outputs
    and the cache needed for the backward pass."""
    cfg = model.config
    rate = cfg.dropout_rate if train_mode else 0.0
    h = xn
    blocks = []
    for i, (c_out, dil) in enumerate(zip(cfg.channels, cfg.dilations)):
        rec = {"input": h, "dilation": dil, "index": i}
        z1, cols1 = _causal_conv(h, model.view(f"block{i}.conv1.w", params),
                                 model.view(f"block{i}.conv1.b", params), dil)
        rec["cols1"] = cols1
        a1 = _act(z1, cfg.activation)
        if rate > 0.0:
            mask1 = (dropout_rng.random(a1.shape) >= rate) / (1.0 - rate)
            a1 = a1 * mask1
            rec["mask1"] = mask1
        z2, cols2 = _causal_conv(a1, model.view(f"block{i}.conv2.w", params),
                                 model.view(f"block{i}.conv2.b", params), dil)
        rec["cols2"] = cols2
        a2 = _act(z2, cfg.activation)
        if rate > 0.0:
            mask2 = (dropout_rng.random(a2.shape) >= rate) / (1.0 - rate)
            a2 = a2 * mask2
            rec["mask2"] = mask2
        if f"block{i}.proj.w" in model.layout:
            res = h @ model.view(f"block{i}.proj.w", params)
        else:
            res = h
        s = a2 + res
        h = _act(s, cfg.activation)
        rec.update(z1=z1, z2=z2, s=s)
        blocks.append(rec)
    y = h @ model.view("out.w", params) + model.view("out.b", params)
    return y, {"xn": xn, "blocks": blocks, "h_last": h}


def _backward_core(model, params, cache, dy):
    """Gradient of the network body w.r.t. every parameter, given the
    gradient at the normalized-space output."""
    cfg = model.config
    grads = np.zeros_like(params)

    def gview(name):
        sl, shape = model.layout[name]
        return grads[sl].reshape(shape)

    gview("out.w")[...] = cache["h_last"].T @ dy
    gview("out.b")[...] = dy.sum(axis=0)
    dh = dy @ model.view("out.w", params).T

    for rec in reversed(cache["blocks"]):
        i, dil = rec["index"], rec["dilation"]
        ds = _act_grad(dh, rec["s"], cfg.activation)
        da2 = ds
        if "mask2" in rec:
            da2 = da2 * rec["mask2"]
        dz2 = _act_grad(da2, rec["z2"], cfg.activation)
        dw2, db2, da1 = _causal_conv_backward(
            dz2, rec["cols2"], model.view(f"block{i}.conv2.w", params), dil
        )
        gview(f"block{i}.conv2.w")[...] = dw2
        gview(f"block{i}.conv2.b")[...] = db2
        if "mask1" in rec:
            da1 = da1 * rec["mask1"]
        dz1 = _act_grad(da1, rec["z1"], cfg.activation)
        dw1, db1, dinput = _causal_conv_backward(
            dz1, rec["cols1"], model.view(f"block{i}.conv1.w", params), dil
        )
        gview(f"block{i}.conv1.w")[...] = dw1
        gview(f"block{i}.conv1.b")[...] = db1
        if f"block{i}.proj.w" in model.layout:
            gview(f"block{i}.proj.w")[...] = rec["input"].T @ ds
            dinput += ds @ model.view(f"block{i}.proj.w", params).T
        else:
            dinput += ds
        dh = dinput
    return grads


def _check_input_width(model, x):
    if x.ndim != 2 or x.shape[1] != model.config.input_width:
        raise ValueError(
            f"expected inputs of shape (T, {model.config.input_width}), got {x.shape}"
        )


def forward(model: TcnModel, inputs: np.ndarray) -> np.ndarray:
    """Run the network over a time-major sequence of raw input vectors.

    Output at time t depends only on inputs at times <= t.  Normalization
    (identity on an untrained model) is applied on the way in and inverted
    on the way out.
    """
    x = np.asarray(inputs, dtype=np.float64)
    _check_input_width(model, x)
    xn = (x - model.in_mean) / model.in_scale
    y_std, _ = _forward_core(model, xn, model.params)
    return y_std * model.out_scale + model.out_mean


def _flatten_series(series: np.ndarray) -> np.ndarray:
    """Per-time-step flattening of a (n, d_1, ..., d_K) series, using the
    same index-0-fastest convention as tensor_ops.vectorize."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        return series.reshape(-1, 1)
    if series.ndim == 2:
        return series
    n = series.shape[0]
    perm = (0,) + tuple(range(series.ndim - 1, 0, -1))
    return np.transpose(series, perm).reshape(n, -1)


def _unflatten_series(flat: np.ndarray, shape: tuple) -> np.ndarray:
    """Inverse of :func:`_flatten_series` for a (n, width) array."""
    flat = np.asarray(flat)
    n = flat.shape[0]
    if len(shape) <= 1:
        return flat.reshape((n,) + tuple(shape))
    ndim = len(shape)
    rev = tuple(reversed(shape))
    out = flat.reshape((n,) + rev).transpose((0,) + tuple(range(ndim, 0, -1)))
    return np.ascontiguousarray(out)


def _assemble_inputs(model, factors, responses):
    """Stack flattened factors with lag-1 flattened responses when the
    config asks for it (zeros at t=0)."""
    f = _flatten_series(factors)
    if not model.config.use_lagged_response:
        return f
    if responses is None:
        raise ValueError("use_lagged_response requires a response history")
    r = _flatten_series(responses)
    lagged = np.vstack([np.zeros((1, r.shape[1])), r[:-1]])
    if len(lagged) != len(f):
        raise ValueError(f"factor/response length mismatch: {len(f)} vs {len(r)}")
    return np.hstack([f, lagged])


def _loss_and_grads(model, params, xn, tn, dropout_rng=None):
    train_mode = model.config.dropout_rate > 0.0 and dropout_rng is not None
    y, cache = _forward_core(model, xn, params, train_mode=train_mode,
                             dropout_rng=dropout_rng)
    diff = y - tn
    loss = float(np.mean(diff * diff))
    dy = 2.0 * diff / diff.size
    return loss, _backward_core(model, params, cache, dy)


def _normalized_loss(model, params, xn, tn):
    y, _ = _forward_core(model, xn, params)
    diff = y - tn
    return float(np.mean(diff * diff))


def train(model: TcnModel, factors: np.ndarray, responses: np.ndarray):
    """Fit the network to (input sequence, response sequence) pairs.

    Inputs and targets are standardized per coordinate with statistics from
    the training range (stored in the returned model and inverted by
    :func:`forward`/:func:`predict`).  Optimization is Adam on the mean
    squared error in standardized space; with ``batch_len`` unset each
    epoch takes one full-sequence gradient step.  When ``patience`` is set,
    the tail ``early_stop_frac`` of the range is held out for early
    stopping and the best weights are restored.

    Returns ``(trained_model, trace)`` where ``trace[0]`` is the
    pre-training loss and ``trace[i]`` the loss after epoch i.  The input
    model is left untouched.  Raises NumericalError if the loss goes
    non-finite.
    """
    cfg = model.config
    inputs = _assemble_inputs(model, factors, responses)
    targets = _flatten_series(responses)
    if len(inputs) != len(targets):
        raise ValueError(f"length mismatch: {len(inputs)} inputs vs {len(targets)} targets")
    if len(inputs) == 0:
        raise ValueError("empty training series")
    _check_input_width(model, inputs)
    if targets.shape[1] != cfg.output_width:
        raise ValueError(
            f"expected targets of width {cfg.output_width}, got {targets.shape[1]}"
        )

    out = model.copy()
    out.in_mean = inputs.mean(axis=0)
    in_std = inputs.std(axis=0)
    out.in_scale = np.where(in_std > SCALE_FLOOR, in_std, 1.0)
    out.out_mean = targets.mean(axis=0)
    t_std = targets.std(axis=0)
    out.out_scale = np.where(t_std > SCALE_FLOOR, t_std, 1.0)

    xn = (inputs - out.in_mean) / out.in_scale
    tn = (targets - out.out_mean) / out.out_scale

    n = len(xn)
    n_val = 0
    if cfg.patience is not None:
        n_val = int(round(cfg.early_stop_frac * n))
        n_val = min(max(n_val, 1), n - 1) if n >= 2 else 0
    n_fit = n - n_val
    xf, tf = xn[:n_fit], tn[:n_fit]

    rng = np.random.default_rng([cfg.seed, 1])
    params = out.params
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    step = 0

    # With one full-sequence batch and no dropout, the gradient-step loss
    # *is* the fit-range loss before that step, so the per-epoch trace comes
    # for free (the loss after the final step is appended at the end).
    full_batch = cfg.batch_len is None or cfg.batch_len >= n_fit
    step_loss_is_trace = full_batch and cfg.dropout_rate == 0.0

    trace = [] if step_loss_is_trace else [_normalized_loss(out, params, xf, tf)]
    best_val = np.inf
    best_params = params.copy()
    best_stall = 0

    for epoch in range(cfg.epochs):
        if full_batch:
            batches = [(0, n_fit)]
        else:
            starts = np.arange(0, n_fit, cfg.batch_len)
            rng.shuffle(starts)
            batches = [(s, min(s + cfg.batch_len, n_fit)) for s in starts]
        for s, e in batches:
            loss, grads = _loss_and_grads(out, params, xf[s:e], tf[s:e],
                                          dropout_rng=rng)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, window [{s},{e}); "
                    f"max |param| = {np.max(np.abs(params)):.3e}"
                )
            if step_loss_is_trace:
                trace.append(loss)
            step += 1
            m = beta1 * m + (1 - beta1) * grads
            v = beta2 * v + (1 - beta2) * grads * grads
            mhat = m / (1 - beta1**step)
            vhat = v / (1 - beta2**step)
            params -= cfg.learning_rate * mhat / (np.sqrt(vhat) + adam_eps)
        if not step_loss_is_trace:
            trace.append(_normalized_loss(out, params, xf, tf))
        if n_val > 0:
            val = _normalized_loss(out, params, xn[n_fit:], tn[n_fit:])
            if val < best_val:
                best_val = val
                best_params = params.copy()
                best_stall = 0
            else:
                best_stall += 1
                if best_stall >= cfg.patience:
                    break

    if step_loss_is_trace:
        trace.append(_normalized_loss(out, params, xf, tf))
    if n_val > 0 and np.isfinite(best_val):
        out.params = best_params
    return out, np.asarray(trace)


def predict(model: TcnModel, factors: np.ndarray, responses: np.ndarray | None = None) -> np.ndarray:
    """One-step prediction from the full input history: run the network
    over all time steps and return the last output reshaped to the
    configured response shape.

    With lagged responses enabled, ``responses`` supplies the known history
    and any missing tail (history longer than the responses) is filled in
    recursively with the model's own predictions.
    """
    factors = np.asarray(factors, dtype=np.float64)
    if len(factors) < 1:
        raise ValueError("need at least one time step of history")
    if model.config.use_lagged_response:
        known = 0 if responses is None else len(responses)
        missing = len(factors) - known
        if missing < 0:
            raise ValueError("more responses than factor history")
        if missing > 1:
            resp = None if responses is None else np.asarray(responses, dtype=np.float64)
            horizon = missing - 1
            preds = forecast(model, factors[:-1], horizon, known_responses=resp)
            flat = _flatten_series(preds) if horizon else np.zeros((0, model.config.output_width))
            base = _flatten_series(resp) if resp is not None else np.zeros((0, flat.shape[1]))
            responses = np.vstack([base, flat])
        inputs = _assemble_inputs(model, factors, _pad_responses(model, factors, responses))
    else:
        inputs = _assemble_inputs(model, factors, None)
    y = forward(model, inputs)[-1]
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite prediction (inputs contained NaN/Inf?)")
    return _unflatten_series(y[None], model.config.resolved_output_shape)[0]


def _pad_responses(model, factors, responses):
    """Right-pad the response history with zeros up to len(factors); only
    the lag-1 entries up to the prediction time are ever read."""
    width = model.config.output_width
    flat = (
        np.zeros((0, width))
        if responses is None
        else _flatten_series(np.asarray(responses, dtype=np.float64))
    )
    missing = len(factors) - len(flat)
    return np.vstack([flat, np.zeros((missing, width))]) if missing > 0 else flat


def forecast(
    model: TcnModel,
    factors: np.ndarray,
    horizon: int,
    known_responses: np.ndarray | None = None,
) -> np.ndarray:
    """Predict the last ``horizon`` time steps of the factor history.

    ``factors`` covers the whole range (history plus forecast span).  With
    lagged responses enabled the forecast-range lag inputs are the model's
    own earlier predictions (recursive forecasting); ``known_responses``
    must then cover exactly the history part.
    """
    factors = np.asarray(factors, dtype=np.float64)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    shape = model.config.resolved_output_shape
    if horizon == 0:
        return np.zeros((0,) + shape)
    if horizon > len(factors):
        raise ValueError(f"horizon {horizon} exceeds history length {len(factors)}")
    n_known = len(factors) - horizon

    if not model.config.use_lagged_response:
        inputs = _assemble_inputs(model, factors, None)
        y = forward(model, inputs)[n_known:]
        if not np.all(np.isfinite(y)):
            raise NumericalError("non-finite forecast (inputs contained NaN/Inf?)")
        return _unflatten_series(y, shape)

    resp = _pad_responses(model, factors[:n_known], known_responses)
    if len(resp) != n_known:
        raise ValueError(
            f"known_responses length {len(resp)} does not match history length {n_known}"
        )
    preds = []
    for h in range(1, horizon + 1):
        hist = factors[: n_known + h]
        inputs = _assemble_inputs(model, hist, _pad_responses(model, hist, resp))
        y = forward(model, inputs)[-1]
        if not np.all(np.isfinite(y)):
            raise NumericalError("non-finite forecast (inputs contained NaN/Inf?)")
        preds.append(y)
        resp = np.vstack([resp, y.reshape(1, -1)])
    return _unflatten_series(np.asarray(preds), shape)


def grad_check(
    model: TcnModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    epsilon: float = 1e-5,
    n_params: int = 200,
    seed: int = 0,
) -> float:
    """Compare analytic gradients with central finite differences on a
    random subset of parameters; returns the maximum relative error."""
    x = np.asarray(inputs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    _check_input_width(model, x)
    xn = (x - model.in_mean) / model.in_scale
    tn = (t - model.out_mean) / model.out_scale

    _, grads = _loss_and_grads(model, model.params, xn, tn)
    rng = np.random.default_rng(seed)
    count = min(n_params, model.n_params)
    idx = rng.choice(model.n_params, size=count, replace=False)
    worst = 0.0
    params = model.params.copy()
    for i in idx:
        orig = params[i]
        params[i] = orig + epsilon
        up = _normalized_loss(model, params, xn, tn)
        params[i] = orig - epsilon
        down = _normalized_loss(model, params, xn, tn)
        params[i] = orig
        fd = (up - down) / (2 * epsilon)
        denom = max(abs(grads[i]) + abs(fd), 1e-10)
        worst = max(worst, abs(grads[i] - fd) / denom)
    return worst


# -- checkpoint serialization -------------------------------------------------

def _config_to_json(config: TcnConfig) -> bytes:
    d = asdict(config)
    for key in ("channels", "dilations", "output_shape"):
        if d[key] is not None:
            d[key] = list(d[key])
    return json.dumps(d, sort_keys=True, separators=(",", ":")).encode()


def model_to_bytes(model: TcnModel) -> bytes:
    """Serialize: magic, version, config block (JSON), normalization
    vectors, then the little-endian float64 weight vector."""
    header = _config_to_json(model.config)
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<II", CHECKPOINT_VERSION, len(header)),
        header,
    ]
    for arr in (model.in_mean, model.in_scale, model.out_mean, model.out_scale):
        parts.append(np.asarray(arr, dtype="<f8").tobytes())
    parts.append(struct.pack("<Q", model.n_params))
    parts.append(np.asarray(model.params, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> TcnModel:
    if len(data) < 12:
        raise PayloadSizeError(f"checkpoint too short ({len(data)} bytes)")
    if data[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(f"bad checkpoint magic {data[:4]!r}")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
    pos = 12
    if len(data) < pos + header_len:
        raise PayloadSizeError("checkpoint header truncated")
    try:
        fields = json.loads(data[pos : pos + header_len].decode())
        for key in ("channels", "dilations", "output_shape"):
            if fields.get(key) is not None:
                fields[key] = tuple(fields[key])
        config = TcnConfig(**fields)
    except (ValueError, TypeError, KeyError) as exc:
        raise HeaderInconsistencyError(f"invalid checkpoint config block: {exc}") from exc
    pos += header_len

    model = TcnModel(config)
    stats = []
    for width in (config.input_width, config.input_width, config.output_width, config.output_width):
        nbytes = width * 8
        if len(data) < pos + nbytes:
            raise PayloadSizeError("checkpoint stats truncated")
        stats.append(np.frombuffer(data[pos : pos + nbytes], dtype="<f8").copy())
        pos += nbytes
    model.in_mean, model.in_scale, model.out_mean, model.out_scale = stats

    if len(data) < pos + 8:
        raise PayloadSizeError("checkpoint weight count missing")
    (n_params,) = struct.unpack("<Q", data[pos : pos + 8])
    pos += 8
    if n_params != model.n_params:
        raise HeaderInconsistencyError(
            f"checkpoint declares {n_params} weights but the config implies {model.n_params}"
        )
    nbytes = n_params * 8
    if len(data) != pos + nbytes:
        raise PayloadSizeError(
            f"checkpoint payload length mismatch: have {len(data) - pos} bytes, "
            f"want {nbytes}"
        )
    model.params = np.frombuffer(data[pos:], dtype="<f8").copy()
    return model


def save_checkpoint(path, model: TcnModel) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_checkpoint(path) -> TcnModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
