"""LSTM/GRU sequence networks: forward pass, losses and exact BPTT gradients.

A network is one recurrent layer followed by a stack of dense ReLU layers and a
single-unit output layer.  ``many_to_one`` reads the output from the final step
only; ``many_to_many`` applies the dense stack at every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .cells import (
    CellParams,
    GruCellParams,
    LstmCellParams,
    gru_backward,
    gru_forward,
    lstm_backward,
    lstm_forward,
)
from .errors import DomainError, NumericError, ShapeError
from .model import ACTIVATION, CELL, MODE

if TYPE_CHECKING:
    from .seqdata import SequenceSample

Gradients = Dict[str, np.ndarray]


@dataclass(frozen=True, eq=False)
class DenseParams:
    weight: np.ndarray
    bias: np.ndarray
    activation: ACTIVATION = ACTIVATION.RELU

    def __post_init__(self) -> None:
        w = np.array(self.weight, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeError(f"dense layer weight {w.shape} and bias {b.shape} do not agree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NumericError("dense layer contains non-finite entries")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", ACTIVATION(self.activation))

    @property
    def in_width(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_width(self) -> int:
        return int(self.weight.shape[0])


def dense_forward(layer: DenseParams, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (activation output, pre-activation)."""
    a = x @ layer.weight.T + layer.bias
    if layer.activation is ACTIVATION.RELU:
        return np.maximum(a, 0.0), a
    return a, a


def dense_backward(layer: DenseParams, x: np.ndarray, a: np.ndarray, dy: np.ndarray,
                   prefix: str, grads: Gradients) -> np.ndarray:
    da = dy * (a > 0.0) if layer.activation is ACTIVATION.RELU else dy
    grads[f"{prefix}.weight"] += da.T @ x
    grads[f"{prefix}.bias"] += da.sum(axis=0)
    return da @ layer.weight


@dataclass(frozen=True, eq=False)
class NetworkParams:
    cell_kind: CELL
    config: MODE
    n_steps: int
    input_width: int
    recurrent: CellParams
    dense_hidden: Tuple[DenseParams, ...]
    dense_out: DenseParams

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell_kind", CELL(self.cell_kind))
        object.__setattr__(self, "config", MODE.parse(self.config))
        object.__setattr__(self, "dense_hidden", tuple(self.dense_hidden))
        expected = LstmCellParams if self.cell_kind is CELL.LSTM else GruCellParams
        if not isinstance(self.recurrent, expected):
            raise ShapeError(
                f"cell_kind={self.cell_kind.value} but recurrent params are {type(self.recurrent).__name__}"
            )
        if self.n_steps < 1 or self.input_width < 1:
            raise ShapeError("n_steps and input_width must be positive")
        if self.recurrent.input_width != self.input_width:
            raise ShapeError(
                f"recurrent layer expects {self.recurrent.input_width} inputs, network declares {self.input_width}"
            )
        width = self.recurrent.hidden
        for idx, layer in enumerate((*self.dense_hidden, self.dense_out)):
            if layer.in_width != width:
                raise ShapeError(f"layer {idx} expects {layer.in_width} inputs but receives {width}")
            width = layer.out_width
        if self.dense_out.out_width != 1:
            raise ShapeError("dense_out must have exactly one output unit")

    @property
    def hidden(self) -> int:
        return self.recurrent.hidden

    @property
    def n_outputs(self) -> int:
        return 1 if self.config is MODE.MANY_TO_ONE else self.n_steps

    def blocks(self) -> Dict[str, np.ndarray]:
        """Flat ``name -> array`` view of every trainable parameter."""
        out = {f"recurrent.{k}": v for k, v in self.recurrent.blocks().items()}
        for idx, layer in enumerate(self.dense_hidden):
            out[f"dense_hidden.{idx}.weight"] = layer.weight
            out[f"dense_hidden.{idx}.bias"] = layer.bias
        out["dense_out.weight"] = self.dense_out.weight
        out["dense_out.bias"] = self.dense_out.bias
        return out

    def with_blocks(self, blocks: Dict[str, np.ndarray]) -> "NetworkParams":
        cell_cls = type(self.recurrent)
        recurrent = cell_cls(**{k: blocks[f"recurrent.{k}"] for k in self.recurrent.blocks()})
        hidden = tuple(
            DenseParams(blocks[f"dense_hidden.{i}.weight"], blocks[f"dense_hidden.{i}.bias"], layer.activation)
            for i, layer in enumerate(self.dense_hidden)
        )
        out = DenseParams(blocks["dense_out.weight"], blocks["dense_out.bias"], self.dense_out.activation)
        return replace(self, recurrent=recurrent, dense_hidden=hidden, dense_out=out)


def parameter_count(net: NetworkParams) -> int:
    return int(sum(v.size for v in net.blocks().values()))


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_network(
    cell_kind: Union[CELL, str] = CELL.LSTM,
    config: Union[MODE, str] = MODE.MANY_TO_ONE,
    *,
    n_steps: int = 3,
    input_width: int = 8,
    hidden: int = 6,
    dense_widths: Sequence[int] = (6,),
    seed: int = 0,
    output_bias: float = 0.5,
    output_activation: ACTIVATION = ACTIVATION.RELU,
) -> NetworkParams:
    """Glorot-uniform weights, zero biases (output bias at the target midpoint)."""
    cell_kind = CELL(cell_kind)
    rng = np.random.Generator(np.random.PCG64(seed))
    concat = hidden + input_width
    cls = LstmCellParams if cell_kind is CELL.LSTM else GruCellParams
    kwargs = {name: _glorot(rng, hidden, concat) for name in cls.WEIGHTS}
    kwargs.update({name: np.zeros(hidden) for name in cls.BIASES})
    recurrent = cls(**kwargs)
    layers = []
    width = hidden
    for w in dense_widths:
        layers.append(DenseParams(_glorot(rng, w, width), np.zeros(w), ACTIVATION.RELU))
        width = w
    out = DenseParams(_glorot(rng, 1, width), np.full(1, float(output_bias)), output_activation)
    return NetworkParams(cell_kind, MODE.parse(config), n_steps, input_width, recurrent, tuple(layers), out)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

@dataclass
class _Trace:
    cells: List[object] = field(default_factory=list)
    hiddens: List[np.ndarray] = field(default_factory=list)
    dense_inputs: List[np.ndarray] = field(default_factory=list)
    dense_pre: List[np.ndarray] = field(default_factory=list)


def _check_batch(net: NetworkParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ShapeError(f"batch must be (batch, steps, width), got shape {X.shape}")
    if X.shape[1] != net.n_steps:
        raise ShapeError(f"sequence has {X.shape[1]} steps, network expects {net.n_steps}")
    if X.shape[2] != net.input_width:
        raise ShapeError(f"steps have width {X.shape[2]}, network expects {net.input_width}")
    return X


def _forward(net: NetworkParams, X: np.ndarray, trace: Optional[_Trace]) -> np.ndarray:
    batch = X.shape[0]
    h = np.zeros((batch, net.hidden))
    c = np.zeros((batch, net.hidden))
    hiddens = []
    for t in range(net.n_steps):
        if net.cell_kind is CELL.LSTM:
            h, c, cache = lstm_forward(net.recurrent, X[:, t, :], h, c)
        else:
            h, cache = gru_forward(net.recurrent, X[:, t, :], h)
        hiddens.append(h)
        if trace is not None:
            trace.cells.append(cache)
    if net.config is MODE.MANY_TO_ONE:
        y = hiddens[-1]
    else:
        y = np.concatenate(hiddens, axis=0)  # step-major: rows t*batch .. (t+1)*batch
    for layer in (*net.dense_hidden, net.dense_out):
        if trace is not None:
            trace.dense_inputs.append(y)
        y, a = dense_forward(layer, y)
        if trace is not None:
            trace.dense_pre.append(a)
    if trace is not None:
        trace.hiddens = hiddens
    if net.config is MODE.MANY_TO_ONE:
        return y.reshape(batch, 1)
    return y.reshape(net.n_steps, batch).T


def forward_batch(net: NetworkParams, X) -> np.ndarray:
    """Outputs of shape (batch, n_outputs) for X of shape (batch, n_steps, input_width)."""
    X = _check_batch(net, X)
    with np.errstate(over="ignore", invalid="ignore"):
        return _forward(net, X, None)


def forward_sequence(net: NetworkParams, steps: Sequence[Sequence[float]]) -> List[float]:
    """Run one sequence from a zero state; 1 output (many_to_one) or n_steps outputs."""
    X = np.asarray(steps, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"steps must be a list of vectors, got shape {X.shape}")
    return [float(v) for v in forward_batch(net, X[None, :, :])[0]]


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def _loss_arrays(config: MODE, actuals, forecasts) -> Tuple[np.ndarray, np.ndarray]:
    config = MODE.parse(config)
    A = np.asarray(actuals, dtype=np.float64)
    F = np.asarray(forecasts, dtype=np.float64)
    if A.size == 0 or F.size == 0:
        raise DomainError("loss of an empty batch is undefined")
    if A.ndim == 1:
        A = A[:, None]
    if F.ndim == 1:
        F = F[:, None]
    if A.shape != F.shape:
        raise ShapeError(f"actuals {A.shape} and forecasts {F.shape} differ")
    if config is MODE.MANY_TO_ONE and A.shape[1] != 1:
        raise ShapeError(f"many_to_one records carry one value, got {A.shape[1]}")
    return A, F


def sequence_loss(config: Union[MODE, str], actuals, forecasts) -> float:
    """Mean absolute error over the batch (and over steps for many_to_many)."""
    A, F = _loss_arrays(MODE.parse(config), actuals, forecasts)
    return float(np.mean(np.abs(A - F)))


# ---------------------------------------------------------------------------
# Backpropagation through time
# ---------------------------------------------------------------------------

def stack_samples(samples: Sequence["SequenceSample"]) -> Tuple[np.ndarray, np.ndarray]:
    if not samples:
        raise DomainError("batch is empty")
    X = np.stack([np.asarray(s.steps, dtype=np.float64) for s in samples])
    Y = np.stack([np.asarray(s.targets, dtype=np.float64) for s in samples])
    return X, Y


def _non_finite_block(net: NetworkParams, trace: _Trace) -> str:
    """First block whose forward output went non-finite; "loss" when only the targets are."""
    if any(not np.all(np.isfinite(h)) for h in trace.hiddens):
        return "recurrent"
    names = [f"dense_hidden.{i}" for i in range(len(net.dense_hidden))] + ["dense_out"]
    for name, a in zip(names, trace.dense_pre):
        if not np.all(np.isfinite(a)):
            return name
    return "loss"


def loss_and_gradients(net: NetworkParams, X, Y) -> Tuple[float, Gradients]:
    X = _check_batch(net, X)
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    if Y.shape[1] != net.n_outputs:
        raise ShapeError(f"targets have {Y.shape[1]} values per record, network emits {net.n_outputs}")
    batch = X.shape[0]
    trace = _Trace()
    grads = {name: np.zeros_like(v) for name, v in net.blocks().items()}
    with np.errstate(over="ignore", invalid="ignore"):
        F = _forward(net, X, trace)
        loss = float(np.mean(np.abs(F - Y)))
        # subgradient of |r| is taken as 0 at r == 0
        dF = np.sign(F - Y) / F.size

        if net.config is MODE.MANY_TO_ONE:
            dy = dF
        else:
            dy = dF.T.reshape(-1, 1)
        layers = (*net.dense_hidden, net.dense_out)
        names = [f"dense_hidden.{i}" for i in range(len(net.dense_hidden))] + ["dense_out"]
        for idx in range(len(layers) - 1, -1, -1):
            dy = dense_backward(layers[idx], trace.dense_inputs[idx], trace.dense_pre[idx], dy, names[idx], grads)

        dH = np.zeros((net.n_steps, batch, net.hidden))
        if net.config is MODE.MANY_TO_ONE:
            dH[-1] = dy
        else:
            dH[:] = dy.reshape(net.n_steps, batch, net.hidden)

        cell_grads = {k: np.zeros_like(v) for k, v in net.recurrent.blocks().items()}
        dh = np.zeros((batch, net.hidden))
        dc = np.zeros((batch, net.hidden))
        for t in range(net.n_steps - 1, -1, -1):
            dh = dh + dH[t]
            if net.cell_kind is CELL.LSTM:
                dh, dc = lstm_backward(net.recurrent, trace.cells[t], dh, dc, cell_grads)
            else:
                dh = gru_backward(net.recurrent, trace.cells[t], dh, cell_grads)
        for k, v in cell_grads.items():
            grads[f"recurrent.{k}"] = v

    if not np.isfinite(loss):
        block = _non_finite_block(net, trace)
        raise NumericError(f"forward pass produced a non-finite value in {block}", block=block)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter block {name!r}", block=name)
    return loss, grads


def compute_gradients(net: NetworkParams, batch: Sequence["SequenceSample"]) -> Gradients:
    """Exact gradient of the configuration's loss w.r.t. every block of *net*."""
    X, Y = stack_samples(batch)
    return loss_and_gradients(net, X, Y)[1]
