"""Comparison models: bottom-up, conditional least-squares AR(p), and feed-forward networks."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .debug import log
from .errors import DomainError, FitError, NumericError, ShapeError
from .model import ACTIVATION, FNN_VARIANT
from .seqnet import DenseParams, dense_backward, dense_forward
from .training import TrainHyperparams, fit_blocks

RIDGE_LAMBDA = 1e-8


def bottom_up_forecast(prev_peak: float, large_customer_net_change: float) -> float:
    """Previous-year peak plus the reported large-customer change."""
    if not prev_peak > 0:
        raise DomainError(f"prev_peak must be > 0, got {prev_peak}")
    result = float(prev_peak) + float(large_customer_net_change)
    if result <= 0:
        log("WARN", f"bottom-up forecast {result:.3f} A is not positive; "
                    f"large-customer change {large_customer_net_change} looks implausible")
    return result


# ---------------------------------------------------------------------------
# AR(p)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArModel:
    """y_t = intercept + sum_i coefficients[i] * y_{t-1-i}"""
    coefficients: Tuple[float, ...]
    intercept: float

    def __post_init__(self) -> None:
        coefs = tuple(float(c) for c in self.coefficients)
        if not coefs:
            raise DomainError("an AR model needs at least one coefficient")
        if not all(np.isfinite(coefs)) or not np.isfinite(self.intercept):
            raise FitError("AR coefficients must be finite")
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def phi1(self) -> float:
        return self.coefficients[0]

    @property
    def phi2(self) -> float:
        return self.coefficients[1] if self.order > 1 else 0.0


def ar_design(series: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = [np.concatenate(([1.0], series[t - order:t][::-1])) for t in range(order, series.size)]
    return np.array(rows), series[order:]


def fit_ar(series: Sequence[float], order: int = 2) -> ArModel:
    """Conditional least squares over rows t >= order.

    A rank-deficient design (constant or collinear history) is solved with a
    ridge penalty of ``RIDGE_LAMBDA`` instead.
    """
    if order < 1:
        raise DomainError(f"AR order must be >= 1, got {order}")
    y = np.asarray(list(series), dtype=np.float64)
    minimum = 2 * order + 1
    if y.size < minimum:
        raise DomainError(f"AR({order}) needs at least {minimum} points, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise FitError("series contains non-finite values")
    D, target = ar_design(y, order)
    try:
        if np.linalg.matrix_rank(D) < D.shape[1]:
            log("INFO", f"AR({order}) design is rank deficient; using ridge lambda={RIDGE_LAMBDA:g}")
            beta = np.linalg.solve(D.T @ D + RIDGE_LAMBDA * np.eye(D.shape[1]), D.T @ target)
        else:
            beta = np.linalg.lstsq(D, target, rcond=None)[0]
    except np.linalg.LinAlgError as exc:
        raise FitError(f"AR({order}) fit failed: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise FitError(f"AR({order}) fit produced non-finite coefficients")
    return ArModel(tuple(beta[1:]), float(beta[0]))


def fit_ar2(series: Sequence[float]) -> ArModel:
    return fit_ar(series, 2)


def forecast_ar(model: ArModel, last_values: Sequence[float], horizon: int) -> List[float]:
    """Iterated one-step forecasts; *last_values* are oldest first."""
    if horizon < 1:
        raise DomainError(f"horizon must be >= 1, got {horizon}")
    window = [float(v) for v in last_values]
    if len(window) < model.order:
        raise ShapeError(f"AR({model.order}) needs {model.order} trailing values, got {len(window)}")
    out = []
    for _ in range(horizon):
        nxt = model.intercept + sum(c * window[-1 - i] for i, c in enumerate(model.coefficients))
        out.append(nxt)
        window.append(nxt)
    return out


def forecast_ar2(model: ArModel, last_two: Sequence[float], horizon: int) -> List[float]:
    return forecast_ar(model, list(last_two)[-2:], horizon)


# ---------------------------------------------------------------------------
# Feed-forward networks
# ---------------------------------------------------------------------------

FNN_DEFAULTS = {
    FNN_VARIANT.ONE_YEAR: (8, (6, 6)),
    FNN_VARIANT.THREE_YEAR: (24, (12, 12)),
}


@dataclass(frozen=True, eq=False)
class FnnModel:
    variant: FNN_VARIANT
    layers: Tuple[DenseParams, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", FNN_VARIANT(self.variant))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ShapeError("an FNN needs at least an output layer")
        for idx in range(1, len(self.layers)):
            if self.layers[idx].in_width != self.layers[idx - 1].out_width:
                raise ShapeError(
                    f"layer {idx} expects {self.layers[idx].in_width} inputs, "
                    f"layer {idx - 1} emits {self.layers[idx - 1].out_width}"
                )
        if self.layers[-1].out_width != 1:
            raise ShapeError("the FNN output layer must have one unit")

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return tuple(layer.out_width for layer in self.layers[:-1])

    def blocks(self):
        out = {}
        for idx, layer in enumerate(self.layers):
            out[f"layers.{idx}.weight"] = layer.weight
            out[f"layers.{idx}.bias"] = layer.bias
        return out

    def with_blocks(self, blocks) -> "FnnModel":
        layers = tuple(
            DenseParams(blocks[f"layers.{i}.weight"], blocks[f"layers.{i}.bias"], layer.activation)
            for i, layer in enumerate(self.layers)
        )
        return replace(self, layers=layers)


def init_fnn(variant: FNN_VARIANT | str = FNN_VARIANT.ONE_YEAR, *, input_width: Optional[int] = None,
             hidden_widths: Optional[Sequence[int]] = None, seed: int = 0,
             output_bias: float = 0.5) -> FnnModel:
    """ReLU layers with Glorot-uniform weights; widths default to 8-6-6-1 / 24-12-12-1."""
    variant = FNN_VARIANT(variant)
    default_in, default_hidden = FNN_DEFAULTS[variant]
    width = default_in if input_width is None else int(input_width)
    widths = default_hidden if hidden_widths is None else tuple(hidden_widths)
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for out in (*widths, 1):
        limit = np.sqrt(6.0 / (width + out))
        bias = np.full(out, float(output_bias)) if out == 1 and len(layers) == len(widths) else np.zeros(out)
        layers.append(DenseParams(rng.uniform(-limit, limit, size=(out, width)), bias, ACTIVATION.RELU))
        width = out
    return FnnModel(variant, tuple(layers))


def _check_input(model: FnnModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise ShapeError(f"{model.variant.value} FNN expects {model.input_width} inputs, got shape {X.shape}")
    return X


def fnn_forward_batch(model: FnnModel, X) -> np.ndarray:
    y = _check_input(model, X)
    for layer in model.layers:
        y, _ = dense_forward(layer, y)
    return y[:, 0]


def fnn_loss_and_gradients(model: FnnModel, X, Y):
    X = _check_input(model, X)
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)
    if Y.size != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} inputs but {Y.size} targets")
    grads = {k: np.zeros_like(v) for k, v in model.blocks().items()}
    inputs, pre = [], []
    y = X
    with np.errstate(over="ignore", invalid="ignore"):
        for layer in model.layers:
            inputs.append(y)
            y, a = dense_forward(layer, y)
            pre.append(a)
        F = y[:, 0]
        loss = float(np.mean(np.abs(F - Y)))
        dy = (np.sign(F - Y) / F.size)[:, None]
        for idx in range(len(model.layers) - 1, -1, -1):
            dy = dense_backward(model.layers[idx], inputs[idx], pre[idx], dy, f"layers.{idx}", grads)
    if not np.isfinite(loss):
        bad = [i for i, a in enumerate(pre) if not np.all(np.isfinite(a))]
        block = f"layers.{bad[0]}" if bad else "loss"
        raise NumericError(f"FNN forward pass produced a non-finite value in {block}", block=block)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {name!r}", block=name)
    return loss, grads


def fnn_train(model: FnnModel, X, Y, hyper: TrainHyperparams) -> Tuple[FnnModel, List[float]]:
    """Same optimizer, loss and seeding contract as the sequence networks."""
    X = _check_input(model, X)
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)

    def _loss_and_grad(blocks, xb, yb):
        return fnn_loss_and_gradients(model.with_blocks(blocks), xb, yb)

    blocks, history = fit_blocks(model.blocks(), _loss_and_grad, X, Y, hyper, f"fnn/{model.variant.value}")
    if not history:
        return model, history
    return model.with_blocks(blocks), history


def fnn_rows(variant: FNN_VARIANT | str, samples, pipeline) -> Tuple[np.ndarray, np.ndarray]:
    """Training matrix for an FNN from raw sequence samples.

    ``one_year`` rows are single normalized steps targeting that step's peak,
    deduplicated by (feeder, year) across overlapping windows; ``three_year``
    rows are whole flattened windows targeting the final peak.
    """
    variant = FNN_VARIANT(variant)
    if not samples:
        raise DomainError("no samples to build FNN rows from")
    X, Y = [], []
    if variant is FNN_VARIANT.THREE_YEAR:
        for s in samples:
            X.append(pipeline.transform_steps(s.steps).reshape(-1))
            Y.append(s.final_peak)
    else:
        seen = set()
        for s in samples:
            steps = pipeline.transform_steps(s.steps)
            peaks = s.step_peaks or (None,) * (s.n_steps - 1) + (s.final_peak,)
            for year, step, peak in zip(s.forecast_years, steps, peaks):
                if peak is None or (s.feeder_id, year) in seen:
                    continue
                seen.add((s.feeder_id, year))
                X.append(step)
                Y.append(peak)
    return np.array(X), pipeline.normalize_targets(np.array(Y))


def fnn_inputs(variant: FNN_VARIANT | str, samples, pipeline) -> np.ndarray:
    """Inputs that forecast each sample's final year."""
    variant = FNN_VARIANT(variant)
    if variant is FNN_VARIANT.THREE_YEAR:
        return np.array([pipeline.transform_steps(s.steps).reshape(-1) for s in samples])
    return np.array([pipeline.transform_steps(s.steps)[-1] for s in samples])
