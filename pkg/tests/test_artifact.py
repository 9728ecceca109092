import copy
import json

import numpy as np
import pytest

from loadseq.artifact import (
    dumps_model,
    load_model,
    load_pipeline,
    loads_model,
    save_model,
    save_pipeline,
)
from loadseq.errors import ArtifactError
from loadseq.model import CELL, MODE
from loadseq.pipeline import fit_pipeline
from loadseq.seqdata import FeatureSchema, build_sequence_samples
from loadseq.seqnet import forward_batch, init_network


@pytest.fixture
def fitted(feeder_1001, regional_years):
    samples = build_sequence_samples(feeder_1001, regional_years)
    pipeline = fit_pipeline(samples, FeatureSchema())
    return samples, pipeline


@pytest.mark.parametrize("cell,mode", [(c, m) for c in CELL for m in MODE])
def test_reloaded_model_predicts_bit_identically(tmp_path, fitted, cell, mode):
    samples, pipeline = fitted
    net = init_network(cell, mode, input_width=pipeline.input_width, hidden=5, dense_widths=(4, 3), seed=8)
    path = tmp_path / "model.json"
    save_model(path, net, pipeline)

    net2, pipeline2 = load_model(path)

    X = np.stack([pipeline.transform_steps(s.steps) for s in samples])
    X2 = np.stack([pipeline2.transform_steps(s.steps) for s in samples])
    assert np.array_equal(X, X2)
    assert np.array_equal(forward_batch(net, X), forward_batch(net2, X2))
    assert (net2.cell_kind, net2.config, net2.hidden) == (cell, mode, 5)


def test_document_is_stable_text(fitted):
    _, pipeline = fitted
    net = init_network(CELL.GRU, MODE.MANY_TO_ONE, input_width=pipeline.input_width)

    text = dumps_model(net, pipeline)

    assert dumps_model(*loads_model(text)) == text
    assert json.loads(text)["format"] == "loadseq-model"


def test_mismatched_pipeline_is_rejected(fitted):
    _, pipeline = fitted
    net = init_network(CELL.GRU, MODE.MANY_TO_ONE, input_width=pipeline.input_width + 1)

    with pytest.raises(ArtifactError, match="pipeline emits"):
        dumps_model(net, pipeline)


def test_bad_documents_raise_artifact_errors(fitted):
    _, pipeline = fitted
    doc = json.loads(dumps_model(init_network(CELL.LSTM, MODE.MANY_TO_ONE,
                                              input_width=pipeline.input_width), pipeline))

    with pytest.raises(ArtifactError, match="not valid JSON"):
        loads_model("{")
    with pytest.raises(ArtifactError, match="not a loadseq-model document"):
        loads_model(json.dumps({"format": "other"}))
    with pytest.raises(ArtifactError, match="unsupported model document version 9"):
        loads_model(json.dumps({**doc, "version": 9}))

    truncated = copy.deepcopy(doc)
    truncated["network"]["params"]["recurrent.w_forget"]["data"].pop()
    with pytest.raises(ArtifactError, match="declares shape"):
        loads_model(json.dumps(truncated))

    del doc["pipeline"]
    with pytest.raises(ArtifactError, match="malformed model document"):
        loads_model(json.dumps(doc))


def test_pipeline_document_round_trip(tmp_path, fitted):
    samples, pipeline = fitted
    path = tmp_path / "pipeline.json"
    save_pipeline(path, pipeline)

    back = load_pipeline(path)

    assert back.columns == pipeline.columns
    assert np.array_equal(back.transform_steps(samples[0].steps), pipeline.transform_steps(samples[0].steps))
    path.write_text('{"format": "loadseq-model"}')
    with pytest.raises(ArtifactError, match="not a loadseq-model-pipeline document"):
        load_pipeline(path)
