"""Frame-level quality regressor: per-frame scores pooled to an utterance score.

The model maps each feature frame x_t to a scalar q_t, either affinely or
through one tanh hidden layer, and predicts the utterance score as the
mean of the frame scores. Training minimizes

    (y_hat - y)^2 + (alpha / T) * sum_t (q_t - y)^2

so every frame is pulled toward the utterance target while the pooled
prediction matches it. Gradients are analytic; the finite-difference
check lives in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import SqaLabError
from .ioutil import atomic_write_text, open_text

MODEL_HEADER = "sqalab-model v1"


@dataclass
class ModelParams:
    """Weights of the regressor. hidden arrays are None for the affine model."""

    w_hid: np.ndarray | None  # (D, H)
    b_hid: np.ndarray | None  # (H,)
    w_out: np.ndarray  # (H,) with a hidden layer, else (D,)
    b_out: np.ndarray  # (1,)

    @property
    def feature_dim(self) -> int:
        if self.w_hid is not None:
            return self.w_hid.shape[0]
        return self.w_out.shape[0]

    @property
    def hidden_width(self) -> int:
        return 0 if self.w_hid is None else self.w_hid.shape[1]

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        if self.w_hid is not None:
            yield "w_hid", self.w_hid
            yield "b_hid", self.b_hid
        yield "w_out", self.w_out
        yield "b_out", self.b_out

    def copy(self) -> "ModelParams":
        return ModelParams(
            w_hid=None if self.w_hid is None else self.w_hid.copy(),
            b_hid=None if self.b_hid is None else self.b_hid.copy(),
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
        )

    def validate(self) -> None:
        arrays = dict(self.named_arrays())
        for name, a in arrays.items():
            if not np.all(np.isfinite(a)):
                raise SqaLabError(f"model array {name} has non-finite entries",
                                  code="model_format")
        if (self.w_hid is None) != (self.b_hid is None):
            raise SqaLabError("hidden weights and biases must both be present or absent",
                              code="model_format")
        if self.w_hid is not None:
            d, h = self.w_hid.shape
            if self.b_hid.shape != (h,) or self.w_out.shape != (h,):
                raise SqaLabError("hidden layer shapes inconsistent", code="model_format")
        if self.b_out.shape != (1,):
            raise SqaLabError("b_out must have shape (1,)", code="model_format")


def init_params(feature_dim: int, hidden_width: int, rng: np.random.Generator) -> ModelParams:
    """Draw every parameter from the standard normal, in a fixed order."""
    if feature_dim < 1 or hidden_width < 0:
        raise SqaLabError("feature_dim must be >= 1 and hidden_width >= 0",
                          code="model_format")
    if hidden_width > 0:
        w_hid = rng.standard_normal((feature_dim, hidden_width))
        b_hid = rng.standard_normal(hidden_width)
        w_out = rng.standard_normal(hidden_width)
    else:
        w_hid = None
        b_hid = None
        w_out = rng.standard_normal(feature_dim)
    b_out = rng.standard_normal(1)
    return ModelParams(w_hid=w_hid, b_hid=b_hid, w_out=w_out, b_out=b_out)


def _check_frames(params: ModelParams, frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise SqaLabError("frames must be a 2-D array with at least one row",
                          code="features_format")
    if frames.shape[1] != params.feature_dim:
        raise SqaLabError(
            f"feature width {frames.shape[1]} does not match model input "
            f"{params.feature_dim}",
            code="dim_mismatch",
        )
    return frames


def forward(
    params: ModelParams,
    frames: np.ndarray,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Frame scores and their mean. dropout_mask, if given, scales hidden units."""
    frames = _check_frames(params, frames)
    if params.w_hid is not None:
        h = np.tanh(frames @ params.w_hid + params.b_hid)
        if dropout_mask is not None:
            h = h * dropout_mask
        q = h @ params.w_out + params.b_out[0]
    else:
        if dropout_mask is not None:
            raise SqaLabError("dropout requires a hidden layer", code="model_format")
        q = frames @ params.w_out + params.b_out[0]
    return q, float(q.mean())


@dataclass(frozen=True)
class LossBreakdown:
    utterance_term: float
    frame_term: float
    alpha: float

    @property
    def total(self) -> float:
        return self.utterance_term + self.alpha * self.frame_term


def loss_terms(y_hat: float, y: float, frame_scores: np.ndarray, alpha: float) -> LossBreakdown:
    q = np.asarray(frame_scores, dtype=np.float64)
    if q.ndim != 1 or q.size < 1:
        raise SqaLabError("frame_scores must be a nonempty 1-D array",
                          code="features_format")
    return LossBreakdown(
        utterance_term=float((y_hat - y) ** 2),
        frame_term=float(np.mean((q - y) ** 2)),
        alpha=float(alpha),
    )


def zero_gradients(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(a) for name, a in params.named_arrays()}


def sample_gradient(
    params: ModelParams,
    frames: np.ndarray,
    y: float,
    alpha: float,
    dropout_mask: np.ndarray | None = None,
) -> tuple[dict[str, np.ndarray], float]:
    """Gradient of the single-sample loss w.r.t. every parameter array."""
    frames = _check_frames(params, frames)
    t = frames.shape[0]
    if params.w_hid is not None:
        a = frames @ params.w_hid + params.b_hid
        h = np.tanh(a)
        h_used = h if dropout_mask is None else h * dropout_mask
        q = h_used @ params.w_out + params.b_out[0]
    else:
        if dropout_mask is not None:
            raise SqaLabError("dropout requires a hidden layer", code="model_format")
        q = frames @ params.w_out + params.b_out[0]
    y_hat = float(q.mean())
    loss = loss_terms(y_hat, y, q, alpha).total
    # d total / d q_t: the pooled term spreads 2(y_hat-y)/T to every frame,
    # the frame term adds 2*alpha*(q_t-y)/T.
    dq = (2.0 / t) * ((y_hat - y) + alpha * (q - y))
    grads: dict[str, np.ndarray] = {}
    if params.w_hid is not None:
        grads["w_out"] = h_used.T @ dq
        grads["b_out"] = np.array([dq.sum()])
        dh = np.outer(dq, params.w_out)
        if dropout_mask is not None:
            dh = dh * dropout_mask
        da = dh * (1.0 - h * h)
        grads["w_hid"] = frames.T @ da
        grads["b_hid"] = da.sum(axis=0)
    else:
        grads["w_out"] = frames.T @ dq
        grads["b_out"] = np.array([dq.sum()])
    return grads, loss


def batch_gradient(
    params: ModelParams,
    batch: Sequence[np.ndarray],
    targets: Sequence[float],
    alpha: float,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[dict[str, np.ndarray], float]:
    """Gradient of the mean loss over a batch of (frames, target) pairs.

    Equivalent to averaging sample_gradient over the batch, but computed
    in one pass over the concatenated frames. With dropout_rate > 0 an
    inverted-dropout mask is drawn from rng over all frames at once (row
    order = batch order); evaluation code calls with the default rate 0.
    """
    if len(batch) != len(targets) or len(batch) == 0:
        raise SqaLabError("batch and targets must be nonempty and equal length",
                          code="dim_mismatch")
    if dropout_rate and rng is None:
        raise SqaLabError("dropout needs an RNG for its masks", code="model_format")
    mats = [_check_frames(params, m) for m in batch]
    counts = np.array([m.shape[0] for m in mats])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    x = np.concatenate(mats, axis=0)
    y = np.asarray(targets, dtype=np.float64)
    y_rows = np.repeat(y, counts)  # each frame's utterance target

    if params.w_hid is not None:
        a = x @ params.w_hid + params.b_hid
        h = np.tanh(a)
        if dropout_rate:
            mask = (rng.random(h.shape) >= dropout_rate) / (1.0 - dropout_rate)
            h_used = h * mask
        else:
            mask = None
            h_used = h
        q = h_used @ params.w_out + params.b_out[0]
    else:
        q = x @ params.w_out + params.b_out[0]
    y_hat = np.add.reduceat(q, starts) / counts
    resid = q - y_rows
    frame_terms = np.add.reduceat(resid * resid, starts) / counts
    losses = (y_hat - y) ** 2 + alpha * frame_terms
    # per-frame loss gradient, including the 1/batch factor of the mean
    rows_scale = np.repeat(2.0 / counts * ((y_hat - y)), counts)
    dq = (rows_scale + (2.0 * alpha) * resid / np.repeat(counts, counts)) / len(batch)

    grads: dict[str, np.ndarray] = {}
    if params.w_hid is not None:
        grads["w_out"] = h_used.T @ dq
        grads["b_out"] = np.array([dq.sum()])
        dh = np.outer(dq, params.w_out)
        if mask is not None:
            dh = dh * mask
        da = dh * (1.0 - h * h)
        grads["w_hid"] = x.T @ da
        grads["b_hid"] = da.sum(axis=0)
    else:
        grads["w_out"] = x.T @ dq
        grads["b_out"] = np.array([dq.sum()])
    return grads, float(losses.mean())


def pooled_scores(params: ModelParams, batch: Sequence[np.ndarray]) -> np.ndarray:
    """Utterance score for each matrix in the batch, in one pass."""
    if len(batch) == 0:
        raise SqaLabError("empty batch", code="dim_mismatch")
    mats = [_check_frames(params, m) for m in batch]
    counts = np.array([m.shape[0] for m in mats])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    x = np.concatenate(mats, axis=0)
    if params.w_hid is not None:
        h = np.tanh(x @ params.w_hid + params.b_hid)
        q = h @ params.w_out + params.b_out[0]
    else:
        q = x @ params.w_out + params.b_out[0]
    return np.add.reduceat(q, starts) / counts


def mean_objective(params: ModelParams, batch: Sequence[np.ndarray],
                   targets: Sequence[float], alpha: float) -> float:
    """Mean training-objective loss over (frames, target) pairs, no dropout."""
    if len(batch) != len(targets) or len(batch) == 0:
        raise SqaLabError("batch and targets must be nonempty and equal length",
                          code="dim_mismatch")
    mats = [_check_frames(params, m) for m in batch]
    counts = np.array([m.shape[0] for m in mats])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    x = np.concatenate(mats, axis=0)
    y = np.asarray(targets, dtype=np.float64)
    if params.w_hid is not None:
        h = np.tanh(x @ params.w_hid + params.b_hid)
        q = h @ params.w_out + params.b_out[0]
    else:
        q = x @ params.w_out + params.b_out[0]
    y_hat = np.add.reduceat(q, starts) / counts
    resid = q - np.repeat(y, counts)
    frame_terms = np.add.reduceat(resid * resid, starts) / counts
    return float(np.mean((y_hat - y) ** 2 + alpha * frame_terms))


class Adam:
    """Standard Adam with bias correction; moment state starts at zero."""

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        if learning_rate <= 0:
            raise SqaLabError("learning_rate must be positive", code="train_config")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        t = self.step_count
        for name, array in params.named_arrays():
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(array)
                self._v[name] = np.zeros_like(array)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            array -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def render_model_text(params: ModelParams) -> str:
    """Versioned plain-text form: header, dims, then one array per section."""
    params.validate()
    lines = [MODEL_HEADER,
             f"feature_dim {params.feature_dim}",
             f"hidden_width {params.hidden_width}"]
    for name, a in params.named_arrays():
        mat = np.atleast_2d(a)
        lines.append(f"{name} {' '.join(str(s) for s in a.shape)}")
        for row in mat:
            lines.append(" ".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def parse_model_text(source) -> ModelParams:
    with open_text(source) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0].strip() != MODEL_HEADER:
        raise SqaLabError(f"expected header {MODEL_HEADER!r}", code="model_format")

    def _dim(idx: int, key: str) -> int:
        if idx >= len(lines):
            raise SqaLabError("model file truncated", code="model_format")
        parts = lines[idx].split()
        if len(parts) != 2 or parts[0] != key:
            raise SqaLabError(f"line {idx + 1}: expected '{key} <int>'",
                              code="model_format")
        try:
            return int(parts[1])
        except ValueError:
            raise SqaLabError(f"line {idx + 1}: {key} is not an integer",
                              code="model_format") from None

    d = _dim(1, "feature_dim")
    h = _dim(2, "hidden_width")
    expected = ([("w_hid", (d, h)), ("b_hid", (h,))] if h > 0 else [])
    expected += [("w_out", (h if h > 0 else d,)), ("b_out", (1,))]
    arrays: dict[str, np.ndarray] = {}
    idx = 3
    for name, shape in expected:
        if idx >= len(lines):
            raise SqaLabError(f"model file truncated before section {name}",
                              code="model_format")
        header = lines[idx].split()
        if header[:1] != [name] or tuple(int(x) for x in header[1:]) != shape:
            raise SqaLabError(
                f"line {idx + 1}: expected section '{name} "
                f"{' '.join(str(s) for s in shape)}'",
                code="model_format",
            )
        idx += 1
        n_rows = shape[0] if len(shape) == 2 else 1
        n_cols = shape[1] if len(shape) == 2 else shape[0]
        rows = []
        for r in range(n_rows):
            if idx >= len(lines):
                raise SqaLabError(f"model file truncated inside section {name}",
                                  code="model_format")
            values = lines[idx].split()
            if len(values) != n_cols:
                raise SqaLabError(
                    f"line {idx + 1}: expected {n_cols} values, got {len(values)}",
                    code="model_format",
                )
            try:
                rows.append([float(v) for v in values])
            except ValueError:
                raise SqaLabError(f"line {idx + 1}: non-numeric weight",
                                  code="model_format") from None
            idx += 1
        arrays[name] = np.array(rows, dtype=np.float64).reshape(shape)
    trailing = [ln for ln in lines[idx:] if ln.strip()]
    if trailing:
        raise SqaLabError("unexpected trailing content in model file",
                          code="model_format")
    params = ModelParams(
        w_hid=arrays.get("w_hid"),
        b_hid=arrays.get("b_hid"),
        w_out=arrays["w_out"],
        b_out=arrays["b_out"],
    )
    params.validate()
    return params


def save_model(path, params: ModelParams) -> None:
    atomic_write_text(path, render_model_text(params))


def load_model(path) -> ModelParams:
    return parse_model_text(path)
