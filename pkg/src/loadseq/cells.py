"""Recurrent cells: LSTM and GRU steps with the caches needed for BPTT.

Every step function accepts a single vector (shape ``(width,)``) or a batch
(shape ``(batch, width)``); the recurrence is evaluated row-wise.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, NamedTuple, Optional, Tuple, Union

import numpy as np

from .errors import NumericError, ShapeError


def sigmoid(a: np.ndarray) -> np.ndarray:
    # tanh form: exact 0.5 at 0 and no overflow for large |a|
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _frozen_array(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries", block=name)
    arr.setflags(write=False)
    return arr


class _GateParams:
    """Shared validation for the gate-matrix parameter blocks."""

    WEIGHTS: Tuple[str, ...] = ()
    BIASES: Tuple[str, ...] = ()

    def _validate(self) -> None:
        for f in fields(self):  # type: ignore[arg-type]
            object.__setattr__(self, f.name, _frozen_array(getattr(self, f.name), f.name))
        first = getattr(self, self.WEIGHTS[0])
        if first.ndim != 2:
            raise ShapeError(f"{self.WEIGHTS[0]} must be a matrix, got shape {first.shape}")
        hidden, concat = first.shape
        if concat <= hidden:
            raise ShapeError(
                f"gate matrices must be hidden x (hidden + input); got {first.shape}"
            )
        for name in self.WEIGHTS:
            if getattr(self, name).shape != (hidden, concat):
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {(hidden, concat)}")
        for name in self.BIASES:
            if getattr(self, name).shape != (hidden,):
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {(hidden,)}")

    @property
    def hidden(self) -> int:
        return int(getattr(self, self.WEIGHTS[0]).shape[0])

    @property
    def input_width(self) -> int:
        return int(getattr(self, self.WEIGHTS[0]).shape[1]) - self.hidden

    def blocks(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}  # type: ignore[arg-type]

    @classmethod
    def zeros(cls, hidden: int, input_width: int):
        w = np.zeros((hidden, hidden + input_width))
        b = np.zeros(hidden)
        return cls(**{n: w for n in cls.WEIGHTS}, **{n: b for n in cls.BIASES})


@dataclass(frozen=True, eq=False)
class LstmCellParams(_GateParams):
    w_forget: np.ndarray
    w_input: np.ndarray
    w_cand: np.ndarray
    w_output: np.ndarray
    b_forget: np.ndarray
    b_input: np.ndarray
    b_cand: np.ndarray
    b_output: np.ndarray

    WEIGHTS = ("w_forget", "w_input", "w_cand", "w_output")
    BIASES = ("b_forget", "b_input", "b_cand", "b_output")

    def __post_init__(self) -> None:
        self._validate()


@dataclass(frozen=True, eq=False)
class GruCellParams(_GateParams):
    w_reset: np.ndarray
    w_update: np.ndarray
    w_cand: np.ndarray
    b_reset: np.ndarray
    b_update: np.ndarray
    b_cand: np.ndarray

    WEIGHTS = ("w_reset", "w_update", "w_cand")
    BIASES = ("b_reset", "b_update", "b_cand")

    def __post_init__(self) -> None:
        self._validate()


CellParams = Union[LstmCellParams, GruCellParams]


@dataclass(frozen=True, eq=False)
class CellState:
    """H_t and, for LSTM only, the memory cell C_t."""
    hidden: np.ndarray
    memory: Optional[np.ndarray] = None

    @staticmethod
    def zeros(hidden: int, *, lstm: bool, batch: Optional[int] = None) -> "CellState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return CellState(np.zeros(shape), np.zeros(shape) if lstm else None)


def _check_step_inputs(params: _GateParams, x: np.ndarray, h: np.ndarray) -> None:
    if x.shape[-1] != params.input_width:
        raise ShapeError(f"input has width {x.shape[-1]}, cell expects {params.input_width}")
    if h.shape[-1] != params.hidden:
        raise ShapeError(f"hidden state has width {h.shape[-1]}, cell expects {params.hidden}")
    if x.shape[:-1] != h.shape[:-1]:
        raise ShapeError(f"batch shape mismatch: input {x.shape}, hidden {h.shape}")


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

class LstmCache(NamedTuple):
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    k: np.ndarray
    o: np.ndarray
    c_prev: np.ndarray
    tanh_c: np.ndarray


def lstm_forward(p: LstmCellParams, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    z = np.concatenate([h, x], axis=-1)
    f = sigmoid(z @ p.w_forget.T + p.b_forget)
    k = np.tanh(z @ p.w_cand.T + p.b_cand)
    i = sigmoid(z @ p.w_input.T + p.b_input)
    c_new = f * c + i * k
    o = sigmoid(z @ p.w_output.T + p.b_output)
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, LstmCache(z, f, i, k, o, c, tanh_c)


def lstm_backward(p: LstmCellParams, cache: LstmCache, dh: np.ndarray, dc: np.ndarray,
                  grads: Dict[str, np.ndarray]):
    """Accumulate parameter gradients into *grads*; return (dh_prev, dc_prev)."""
    z, f, i, k, o, c_prev, tanh_c = cache
    d_o = dh * tanh_c
    dc = dc + dh * o * (1.0 - tanh_c ** 2)
    da_f = dc * c_prev * f * (1.0 - f)
    da_i = dc * k * i * (1.0 - i)
    da_k = dc * i * (1.0 - k ** 2)
    da_o = d_o * o * (1.0 - o)
    dz = np.zeros_like(z)
    for da, w, b in ((da_f, "w_forget", "b_forget"), (da_i, "w_input", "b_input"),
                     (da_k, "w_cand", "b_cand"), (da_o, "w_output", "b_output")):
        grads[w] += da.T @ z
        grads[b] += da.sum(axis=0)
        dz += da @ getattr(p, w)
    hidden = p.hidden
    return dz[:, :hidden], dc * f


def lstm_step(params: LstmCellParams, x, prev: CellState) -> CellState:
    """One LSTM step: forget/candidate/input/output gates on [H_{t-1}, X_t]."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(prev.hidden, dtype=np.float64)
    if prev.memory is None:
        raise ShapeError("LSTM step needs a memory vector in the previous state")
    c = np.asarray(prev.memory, dtype=np.float64)
    _check_step_inputs(params, x, h)
    if c.shape != h.shape:
        raise ShapeError(f"memory shape {c.shape} differs from hidden shape {h.shape}")
    h_new, c_new, _ = lstm_forward(params, x, h, c)
    return CellState(h_new, c_new)


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

class GruCache(NamedTuple):
    z: np.ndarray
    zr: np.ndarray
    r: np.ndarray
    u: np.ndarray
    cand: np.ndarray
    h_prev: np.ndarray


def gru_forward(p: GruCellParams, x: np.ndarray, h: np.ndarray):
    z = np.concatenate([h, x], axis=-1)
    r = sigmoid(z @ p.w_reset.T + p.b_reset)
    u = sigmoid(z @ p.w_update.T + p.b_update)
    zr = np.concatenate([r * h, x], axis=-1)
    cand = np.tanh(zr @ p.w_cand.T + p.b_cand)
    h_new = (1.0 - u) * h + u * cand
    return h_new, GruCache(z, zr, r, u, cand, h)


def gru_backward(p: GruCellParams, cache: GruCache, dh: np.ndarray,
                 grads: Dict[str, np.ndarray]) -> np.ndarray:
    """Accumulate parameter gradients into *grads*; return dh_prev."""
    z, zr, r, u, cand, h_prev = cache
    hidden = p.hidden
    dh_prev = dh * (1.0 - u)
    da_c = dh * u * (1.0 - cand ** 2)
    grads["w_cand"] += da_c.T @ zr
    grads["b_cand"] += da_c.sum(axis=0)
    d_rh = (da_c @ p.w_cand)[:, :hidden]
    dh_prev += d_rh * r
    da_r = d_rh * h_prev * r * (1.0 - r)
    da_u = dh * (cand - h_prev) * u * (1.0 - u)
    grads["w_reset"] += da_r.T @ z
    grads["b_reset"] += da_r.sum(axis=0)
    grads["w_update"] += da_u.T @ z
    grads["b_update"] += da_u.sum(axis=0)
    dz = da_r @ p.w_reset + da_u @ p.w_update
    return dh_prev + dz[:, :hidden]


def gru_step(params: GruCellParams, x, prev_hidden) -> np.ndarray:
    """One GRU step: H_t = (1 - u) * H_{t-1} + u * h~."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(prev_hidden, dtype=np.float64)
    _check_step_inputs(params, x, h)
    h_new, _ = gru_forward(params, x, h)
    return h_new
