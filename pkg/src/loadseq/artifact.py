"""Model documents: architecture, every parameter block and the fitted feature pipeline as JSON.

Floats are written with ``repr`` precision, which round-trips binary64 exactly.
"""
from __future__ import annotations

import json
from typing import Any, Dict, Tuple

import numpy as np

from .cells import GruCellParams, LstmCellParams
from .errors import ArtifactError, LoadSeqError
from .featlab import NormalizationStats, PcaTransform
from .model import ACTIVATION, CELL, MODE
from .pipeline import FeaturePipeline
from .seqdata import FeatureSchema
from .seqnet import DenseParams, NetworkParams

FORMAT = "loadseq-model"
VERSION = 1


def _array(arr: np.ndarray) -> Dict[str, Any]:
    a = np.asarray(arr, dtype=np.float64)
    return {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}


def _unarray(doc: Dict[str, Any]) -> np.ndarray:
    shape = tuple(int(s) for s in doc["shape"])
    data = np.array(doc["data"], dtype=np.float64)
    if data.size != int(np.prod(shape)):
        raise ArtifactError(f"array declares shape {shape} but holds {data.size} values")
    return data.reshape(shape)


def network_to_dict(net: NetworkParams) -> Dict[str, Any]:
    return {
        "cell_kind": net.cell_kind.value,
        "config": net.config.value,
        "n_steps": net.n_steps,
        "input_width": net.input_width,
        "hidden": net.hidden,
        "dense_widths": [layer.out_width for layer in net.dense_hidden],
        "activations": [layer.activation.value for layer in (*net.dense_hidden, net.dense_out)],
        "params": {name: _array(value) for name, value in net.blocks().items()},
    }


def network_from_dict(doc: Dict[str, Any]) -> NetworkParams:
    cell = CELL(doc["cell_kind"])
    params = {name: _unarray(value) for name, value in doc["params"].items()}
    cls = LstmCellParams if cell is CELL.LSTM else GruCellParams
    recurrent = cls(**{name: params[f"recurrent.{name}"] for name in (*cls.WEIGHTS, *cls.BIASES)})
    activations = [ACTIVATION(a) for a in doc["activations"]]
    n_hidden = len(doc["dense_widths"])
    if len(activations) != n_hidden + 1:
        raise ArtifactError(f"{len(activations)} activations for {n_hidden + 1} dense layers")
    dense = tuple(
        DenseParams(params[f"dense_hidden.{i}.weight"], params[f"dense_hidden.{i}.bias"], activations[i])
        for i in range(n_hidden)
    )
    out = DenseParams(params["dense_out.weight"], params["dense_out.bias"], activations[-1])
    net = NetworkParams(cell, MODE.parse(doc["config"]), int(doc["n_steps"]), int(doc["input_width"]),
                        recurrent, dense, out)
    if net.hidden != int(doc["hidden"]):
        raise ArtifactError(f"document declares hidden={doc['hidden']} but weights have {net.hidden}")
    return net


def _stats_to_dict(stats: NormalizationStats) -> Dict[str, Any]:
    return {"columns": list(stats.columns), "min": _array(stats.minimum), "max": _array(stats.maximum)}


def _stats_from_dict(doc: Dict[str, Any]) -> NormalizationStats:
    return NormalizationStats(_unarray(doc["min"]), _unarray(doc["max"]), tuple(doc["columns"]))


def pipeline_to_dict(pipeline: FeaturePipeline) -> Dict[str, Any]:
    schema = pipeline.schema
    return {
        "schema": {
            "econ_columns": list(schema.econ_columns),
            "optional_feeder_features": list(schema.optional_feeder_features),
            "pve_threshold": schema.pve_threshold,
            "n_components": schema.n_components,
        },
        "econ_stats": _stats_to_dict(pipeline.econ_stats),
        "pca": {
            "column_means": _array(pipeline.pca.column_means),
            "components": _array(pipeline.pca.components),
            "eigenvalues": _array(pipeline.pca.eigenvalues),
            "selected_count": pipeline.pca.selected_count,
        },
        "step_stats": _stats_to_dict(pipeline.step_stats),
    }


def pipeline_from_dict(doc: Dict[str, Any]) -> FeaturePipeline:
    pca = doc["pca"]
    return FeaturePipeline(
        schema=FeatureSchema(**doc["schema"]),
        econ_stats=_stats_from_dict(doc["econ_stats"]),
        pca=PcaTransform(_unarray(pca["column_means"]), _unarray(pca["components"]),
                         _unarray(pca["eigenvalues"]), int(pca["selected_count"])),
        step_stats=_stats_from_dict(doc["step_stats"]),
    )


def dumps_model(net: NetworkParams, pipeline: FeaturePipeline) -> str:
    if net.input_width != pipeline.input_width:
        raise ArtifactError(
            f"network takes {net.input_width} inputs but the pipeline emits {pipeline.input_width}"
        )
    doc = {"format": FORMAT, "version": VERSION,
           "network": network_to_dict(net), "pipeline": pipeline_to_dict(pipeline)}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def loads_model(text: str) -> Tuple[NetworkParams, FeaturePipeline]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ArtifactError(f"not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ArtifactError(f"unsupported model document version {doc.get('version')!r}; expected {VERSION}")
    try:
        return network_from_dict(doc["network"]), pipeline_from_dict(doc["pipeline"])
    except ArtifactError:
        raise
    except (KeyError, TypeError, ValueError, LoadSeqError) as exc:
        raise ArtifactError(f"malformed model document: {exc!r}") from exc


def save_model(path, net: NetworkParams, pipeline: FeaturePipeline) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(net, pipeline))


def load_model(path) -> Tuple[NetworkParams, FeaturePipeline]:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())


def save_pipeline(path, pipeline: FeaturePipeline) -> None:
    doc = {"format": FORMAT + "-pipeline", "version": VERSION, "pipeline": pipeline_to_dict(pipeline)}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_pipeline(path) -> FeaturePipeline:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT + "-pipeline":
        raise ArtifactError(f"{path}: not a {FORMAT}-pipeline document")
    try:
        return pipeline_from_dict(doc["pipeline"])
    except (KeyError, TypeError, ValueError, LoadSeqError) as exc:
        raise ArtifactError(f"{path}: malformed pipeline document: {exc!r}") from exc
