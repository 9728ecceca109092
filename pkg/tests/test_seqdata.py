from dataclasses import replace

import numpy as np
import pytest

from conftest import ECON, ECON_SAMPLE
from loadseq.errors import ConfigError, ConsistencyError, DomainError, ShapeError
from loadseq.featlab import FeederYearRecord, RegionalYearRecord
from loadseq.model import CELL, MODE, SEASON
from loadseq.pipeline import fit_pipeline
from loadseq.seqdata import (
    FeatureSchema,
    SequenceSample,
    apply_temperature_scenario,
    build_sequence_samples,
    chain_forecast,
    estimate_temperature_sensitivity,
    flatten_sample,
    normalize_temperature_scenario,
    retro_normalize_history,
    split_dataset,
    unflatten,
    with_config,
)
from loadseq.seqnet import forward_batch, init_network


def _dummy(i):
    return SequenceSample(f"r{i}", f"f{i}", (2010,), [[float(i)]], (float(i),), MODE.MANY_TO_ONE)


def _zeroed(net):
    blocks = {k: np.zeros_like(v) for k, v in net.blocks().items()}
    blocks["dense_out.bias"] = np.array([0.5])
    return net.with_blocks(blocks)


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def test_windows_slide_with_stride_one(feeder_1001, regional_years):
    samples = build_sequence_samples(feeder_1001, regional_years, MODE.MANY_TO_ONE, n_steps=3)

    assert [s.forecast_years for s in samples] == [(2009, 2010, 2011), (2010, 2011, 2012)]
    assert samples[0].record_id == "1001:2009-2011"
    assert samples[0].targets == (550.0,)
    assert samples[1].targets == (521.0,)


def test_first_step_carries_previous_year_and_forecast_year_drivers(feeder_1001, regional_years):
    sample = build_sequence_samples(feeder_1001, regional_years, n_steps=3)[0]

    step = sample.steps[0]
    assert step[:3].tolist() == [433.0, 0.665, 0.102]
    assert step[3:7].tolist() == ECON_SAMPLE[2].tolist()
    assert step[7] == 33.3
    assert step[8] == pytest.approx(0.7)
    assert step[9] == 42.0
    assert sample.input_width == len(FeatureSchema().raw_columns()) == 10


def test_many_to_many_targets_every_step(feeder_1001, regional_years):
    sample = build_sequence_samples(feeder_1001, regional_years, "many-to-many", n_steps=3)[0]

    assert sample.targets == (502.0, 554.0, 550.0)
    assert with_config(sample, MODE.MANY_TO_ONE).targets == (550.0,)
    assert np.array_equal(with_config(sample, MODE.MANY_TO_ONE).steps, sample.steps)


def test_window_count_is_years_minus_steps(feeder_1001, regional_years):
    for n_steps in (1, 2, 3, 4):
        samples = build_sequence_samples(feeder_1001, regional_years, n_steps=n_steps)
        assert len(samples) == 5 - n_steps


def test_short_histories_and_gaps_are_skipped(feeder_1001, regional_years):
    no_2012 = [r for r in regional_years if r.year != 2012]
    gap = [r for r in feeder_1001 if r.year != 2010]

    assert len(build_sequence_samples(feeder_1001, no_2012, n_steps=3)) == 1
    assert build_sequence_samples(gap, regional_years, n_steps=3) == []
    assert build_sequence_samples(feeder_1001[:3], regional_years, n_steps=3) == []


def test_forecast_regional_replaces_final_step_econ(feeder_1001, regional_years):
    forecast = {2011: RegionalYearRecord(2011, dict(zip(ECON, (1.0, 2.0, 3.0, 4.0))), 0.0)}

    sample = build_sequence_samples(feeder_1001, regional_years, n_steps=3, forecast_regional=forecast)[0]

    assert sample.steps[-1, 3:7].tolist() == [1.0, 2.0, 3.0, 4.0]
    assert sample.steps[-1, 7] == 35.4
    assert sample.steps[0, 3:7].tolist() == ECON_SAMPLE[2].tolist()


def test_optional_features_are_appended_when_declared(regional_years):
    history = [FeederYearRecord("7", y, 100.0 + y - 2008, 0.5, 0.2, der_growth=0.01 * (y - 2007))
               for y in range(2008, 2013)]
    schema = FeatureSchema(optional_feeder_features=("der_growth",))

    sample = build_sequence_samples(history, regional_years, schema=schema)[0]

    assert sample.steps[:, -1].tolist() == pytest.approx([0.02, 0.03, 0.04])
    with pytest.raises(ConsistencyError, match="lacks ev_growth"):
        build_sequence_samples(history, regional_years, schema=FeatureSchema(optional_feeder_features=("ev_growth",)))


def test_mixed_seasons_and_duplicate_years_are_rejected(feeder_1001, regional_years):
    winter = [replace(r, season=SEASON.WINTER) for r in regional_years]

    with pytest.raises(ConsistencyError, match="mix seasons"):
        build_sequence_samples(feeder_1001, winter)
    with pytest.raises(ConsistencyError, match="lists year 2008 twice"):
        build_sequence_samples(feeder_1001 + feeder_1001[:1], regional_years)


def test_sample_validation():
    with pytest.raises(ConsistencyError, match="not consecutive"):
        SequenceSample("x", "f", (2010, 2012), [[0.0], [0.0]], (1.0,), MODE.MANY_TO_ONE)
    with pytest.raises(ShapeError, match="needs 2 targets"):
        SequenceSample("x", "f", (2010, 2011), [[0.0], [0.0]], (1.0,), MODE.MANY_TO_MANY)


def test_flatten_and_unflatten(feeder_1001, regional_years):
    sample = build_sequence_samples(feeder_1001, regional_years)[0]

    flat = flatten_sample(sample)

    assert flat.shape == (30,)
    assert np.array_equal(unflatten(flat, 3), sample.steps)
    with pytest.raises(ShapeError, match="into 4 steps"):
        unflatten(flat, 4)


def test_unknown_optional_feature_is_a_config_error():
    with pytest.raises(ConfigError, match="unknown optional feeder features"):
        FeatureSchema(optional_feeder_features=("solar",))


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------

def test_split_sizes_use_ceiling_for_the_test_share():
    big = split_dataset([_dummy(i) for i in range(1997)], 0.8, seed=0)
    small = split_dataset([_dummy(i) for i in range(10)], 0.8, seed=0)

    assert (len(big.train), len(big.test)) == (1597, 400)
    assert (len(small.train), len(small.test)) == (8, 2)


def test_split_is_a_seeded_partition():
    samples = [_dummy(i) for i in range(10)]

    a = split_dataset(samples, seed=4)
    b = split_dataset(samples, seed=4)
    c = split_dataset(samples, seed=5)

    ids = lambda split: [s.record_id for s in split.train + split.test]  # noqa: E731
    assert ids(a) == ids(b)
    assert ids(a) != ids(c)
    assert sorted(ids(a)) == sorted(s.record_id for s in samples)


def test_split_keeps_both_sides_non_empty():
    split = split_dataset([_dummy(0), _dummy(1)], 0.99)

    assert (len(split.train), len(split.test)) == (1, 1)
    with pytest.raises(DomainError, match="strictly between 0 and 1"):
        split_dataset([_dummy(0)], 1.0)
    with pytest.raises(DomainError, match="empty sample set"):
        split_dataset([], 0.8)


# ---------------------------------------------------------------------------
# Temperature scenarios
# ---------------------------------------------------------------------------

def test_temperature_scenario_uses_seasonal_extreme():
    assert normalize_temperature_scenario([33.3, 35.0, 34.1], 1.0) == 36.0
    assert normalize_temperature_scenario([-30.0, -25.0], -1.0, season="winter") == -31.0
    with pytest.raises(DomainError, match="empty"):
        normalize_temperature_scenario([])


def test_apply_temperature_scenario(regional_years):
    econ = dict(zip(ECON, ECON_SAMPLE[0]))

    future = apply_temperature_scenario(regional_years, {2014: econ, 2013: econ}, 36.0)

    assert [r.year for r in future] == [2013, 2014]
    assert future[0].temperature_change == pytest.approx(36.0 - 33.2)
    assert future[1].temperature_change == 0.0
    with pytest.raises(ConsistencyError, match="not after the last actual year"):
        apply_temperature_scenario(regional_years, {2012: econ}, 36.0)


def test_retro_normalization_restates_peaks(feeder_1001, regional_years):
    out = retro_normalize_history(feeder_1001, regional_years, 35.4, sensitivity=10.0)

    by_year = {r.year: r.peak_demand for r in out}
    assert by_year[2011] == 550.0
    assert by_year[2010] == pytest.approx(554.0 + 10.0 * 3.4)


def test_sensitivity_estimate_recovers_linear_response(regional_years):
    temps = {r.year: r.temperature for r in regional_years}
    peaks, peak = {}, 400.0
    for year in range(2008, 2013):
        peak += 2.0 + 5.0 * (temps[year] - temps[year - 1])
        peaks[year] = peak
    history = [FeederYearRecord("3", y, p, 0.5, 0.2) for y, p in peaks.items()]

    assert estimate_temperature_sensitivity(history, regional_years) == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# Chained forecasts
# ---------------------------------------------------------------------------

@pytest.fixture
def chain_setup(feeder_1001, regional_years):
    samples = build_sequence_samples(feeder_1001, regional_years, n_steps=3)
    pipeline = fit_pipeline(samples, FeatureSchema())
    net = init_network(CELL.GRU, MODE.MANY_TO_ONE, n_steps=3, input_width=pipeline.input_width, seed=2)
    econ = dict(zip(ECON, ECON_SAMPLE[5]))
    scenario = apply_temperature_scenario(regional_years, {2013: econ, 2014: econ}, 36.0)
    return pipeline, net, scenario


def test_zero_horizon_is_empty(chain_setup, feeder_1001, regional_years):
    pipeline, net, scenario = chain_setup

    out = chain_forecast(net, pipeline, feeder_1001, 0, regional_years, scenario)

    assert (out.years, out.peaks) == ((), ())


def test_constant_network_forecasts_midpoint_of_peak_scale(chain_setup, feeder_1001, regional_years):
    pipeline, net, scenario = chain_setup

    out = chain_forecast(_zeroed(net), pipeline, feeder_1001, 2, regional_years, scenario)

    # previous-year peaks seen in training span 433..554
    assert out.peaks == pytest.approx((493.5, 493.5))


def test_first_chained_year_matches_direct_forward(chain_setup, feeder_1001, regional_years):
    pipeline, net, scenario = chain_setup

    out = chain_forecast(net, pipeline, feeder_1001, 1, regional_years, scenario)

    window = out.windows[0]
    assert window[:, 0].tolist() == [554.0, 550.0, 521.0]
    direct = forward_batch(net, pipeline.transform_steps(window)[None])[0]
    assert out.years == (2013,)
    assert out.peaks[0] == pytest.approx(float(pipeline.denormalize_targets(direct)[-1]))


def test_later_windows_feed_forecasts_forward_without_margin(chain_setup, feeder_1001, regional_years):
    pipeline, net, scenario = chain_setup

    out = chain_forecast(net, pipeline, feeder_1001, 2, regional_years, scenario, event_margin=25.0)

    assert out.years == (2013, 2014)
    assert out.windows[1][2, 0] == pytest.approx(out.peaks[0] - 25.0)
    # the unobserved year carries the last actual composition and no large-customer change
    assert out.windows[1][2, 1:3].tolist() == [0.600, 0.125]
    assert out.windows[1][2, 9] == 0.0


def test_chain_needs_scenario_years(chain_setup, feeder_1001, regional_years):
    pipeline, net, _ = chain_setup

    with pytest.raises(DomainError, match="no regional drivers"):
        chain_forecast(net, pipeline, feeder_1001, 1, regional_years, [])
    with pytest.raises(DomainError, match="horizon must be >= 0"):
        chain_forecast(net, pipeline, feeder_1001, -1, regional_years, [])
