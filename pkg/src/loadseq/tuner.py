"""Grid and random hyperparameter search with a deterministic scoreboard."""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import ModelSettings
from .debug import log
from .errors import DomainError, SearchError
from .evalkit import mape
from .forecasters import sequence_predictions
from .model import CELL, MODE
from .pipeline import FeaturePipeline
from .seqdata import SequenceSample, with_config
from .seqnet import init_network, parameter_count
from .training import TrainHyperparams, train

Score = Union[float, Tuple[float, int]]
Scorer = Callable[[Dict[str, Any], int], Score]


@dataclass(frozen=True)
class SearchSpace:
    params: Mapping[str, Tuple[Any, ...]]

    def __post_init__(self) -> None:
        params = {str(k): tuple(v) for k, v in dict(self.params).items()}
        if not params:
            raise DomainError("search space has no parameters")
        empty = [k for k, v in params.items() if not v]
        if empty:
            raise DomainError(f"search space parameters {empty} have no values")
        object.__setattr__(self, "params", params)

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.params.values())

    def combinations(self) -> List[Dict[str, Any]]:
        """Cartesian product in declaration order, last parameter varying fastest."""
        keys = list(self.params)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.params.values())]


@dataclass(frozen=True)
class TrialResult:
    index: int
    config: Mapping[str, Any]
    score: Optional[float] = None
    n_params: Optional[int] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class SearchResult:
    best: TrialResult
    scoreboard: Tuple[TrialResult, ...]

    @property
    def failures(self) -> Tuple[TrialResult, ...]:
        return tuple(t for t in self.scoreboard if t.failed)


def _run_trial(index: int, config: Dict[str, Any], scorer: Scorer, seed: int) -> TrialResult:
    try:
        result = scorer(dict(config), seed)
        score, n_params = result if isinstance(result, tuple) else (result, None)
        score = float(score)
        if not math.isfinite(score):
            raise ValueError(f"non-finite score {score}")
    except Exception as exc:  # a failed trial is recorded, not fatal
        log("WARN", f"trial {index} {config} failed: {exc}")
        return TrialResult(index, config, error=f"{type(exc).__name__}: {exc}")
    return TrialResult(index, config, score, None if n_params is None else int(n_params))


def _evaluate(configs: Sequence[Dict[str, Any]], scorer: Scorer, seed: int, workers: int) -> SearchResult:
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    jobs = list(enumerate(configs))
    if workers == 1:
        board = [_run_trial(i, c, scorer, seed) for i, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            board = list(pool.map(lambda job: _run_trial(job[0], job[1], scorer, seed), jobs))
    board.sort(key=lambda t: t.index)
    ok = [t for t in board if not t.failed]
    if not ok:
        raise SearchError(f"all {len(board)} trials failed; first error: {board[0].error if board else 'none'}")
    best = min(ok, key=lambda t: (t.score, t.n_params if t.n_params is not None else math.inf, t.index))
    log("INFO", f"best trial {best.index} {dict(best.config)} score={best.score:.4f}")
    return SearchResult(best, tuple(board))


def grid_search(space: SearchSpace, scorer: Scorer, seed: int = 0, workers: int = 1) -> SearchResult:
    """Score every combination once; ties go to fewer parameters, then enumeration order."""
    return _evaluate(space.combinations(), scorer, seed, workers)


def random_search(space: SearchSpace, n_trials: int, scorer: Scorer, seed: int = 0,
                  workers: int = 1) -> SearchResult:
    """Score ``min(n_trials, space.size)`` combinations sampled without replacement."""
    if n_trials < 1:
        raise DomainError(f"n_trials must be >= 1, got {n_trials}")
    combos = space.combinations()
    rng = np.random.Generator(np.random.PCG64(seed))
    picks = rng.choice(len(combos), size=min(n_trials, len(combos)), replace=False)
    return _evaluate([combos[int(i)] for i in picks], scorer, seed, workers)


def scoreboard_to_json(result: SearchResult) -> str:
    def _plain(v):
        return v.value if hasattr(v, "value") else v

    rows = [{
        "index": t.index,
        "config": {k: _plain(v) for k, v in t.config.items()},
        "score": t.score,
        "n_params": t.n_params,
        "error": t.error,
    } for t in result.scoreboard]
    return json.dumps({"best_index": result.best.index, "trials": rows}, indent=2, sort_keys=True) + "\n"


def settings_for(config: Mapping[str, Any], base: ModelSettings) -> ModelSettings:
    """One recurrent layer plus ``layers - 1`` dense hidden layers, all ``neurons`` wide."""
    neurons = int(config.get("neurons", base.hidden))
    layers = int(config.get("layers", 1 + len(base.dense_widths)))
    if layers < 1:
        raise DomainError(f"layers must be >= 1, got {layers}")
    return replace(
        base,
        cell=CELL(config.get("cell", base.cell)),
        mode=MODE.parse(config.get("mode", base.mode)),
        hidden=neurons,
        dense_widths=(neurons,) * (layers - 1),
    )


def network_scorer(train_samples: Sequence[SequenceSample], val_samples: Sequence[SequenceSample],
                   pipeline: FeaturePipeline, base: ModelSettings, hyper: TrainHyperparams) -> Scorer:
    """Train on raw *train_samples*; score is validation MAPE (%) on *val_samples*."""
    if not val_samples:
        raise DomainError("validation set is empty")
    actuals = [s.final_peak for s in val_samples]

    def score(config: Dict[str, Any], seed: int) -> Tuple[float, int]:
        settings = settings_for(config, base)
        h = replace(hyper, seed=seed, learning_rate=float(config.get("learning_rate", hyper.learning_rate)))
        net = init_network(settings.cell, settings.mode, n_steps=settings.n_steps,
                           input_width=pipeline.input_width, hidden=settings.hidden,
                           dense_widths=settings.dense_widths, seed=seed, output_bias=settings.output_bias)
        samples = [with_config(s, settings.mode) for s in train_samples]
        net, _ = train(net, pipeline.transform(samples), h)
        return mape(actuals, sequence_predictions(net, pipeline, val_samples)), parameter_count(net)

    return score
