import math
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadseq.errors import ConfigError, DomainError
from loadseq.featlab import FeederYearRecord, TransferEvent, resolve_virtual_feeders
from loadseq.model import SEASON
from loadseq.synthgrid import (
    BIT_GENERATORS,
    SynthConfig,
    generate_synthetic_grid,
    inject_load_transfers,
    random_transfer_events,
    synthesize,
)


def _peaks(records):
    return [(r.feeder_id, r.year, r.peak_demand) for r in records]


def test_same_seed_gives_identical_grids(small_synth):
    a, b = synthesize(small_synth), synthesize(small_synth)

    assert a.feeder_years == b.feeder_years
    assert a.transfer_log == b.transfer_log
    assert [r.temperature for r in a.regional] == [r.temperature for r in b.regional]


def test_seed_and_bit_generator_change_the_grid(small_synth):
    base = _peaks(generate_synthetic_grid(small_synth).feeder_years)

    assert _peaks(generate_synthetic_grid(SynthConfig(n_feeders=8, years=8, seed=4)).feeder_years) != base
    assert _peaks(generate_synthetic_grid(SynthConfig(n_feeders=8, years=8, seed=3,
                                                      bit_generator="Philox")).feeder_years) != base
    assert "MT19937" in BIT_GENERATORS


def test_grid_shape(small_synth):
    grid = generate_synthetic_grid(small_synth)

    assert len(grid.feeder_years) == 8 * 8
    assert [r.year for r in grid.regional] == list(range(2004, 2012))
    assert sorted(grid.sensitivities) == [str(1001 + i) for i in range(8)]
    assert len(grid.regional_forecasts) == len(grid.regional)


def test_feeder_draws_do_not_depend_on_grid_size(small_synth):
    small = generate_synthetic_grid(small_synth)
    large = generate_synthetic_grid(SynthConfig(n_feeders=12, years=8, seed=3))

    assert _peaks(large.feeder_years)[: len(small.feeder_years)] == _peaks(small.feeder_years)


def test_winter_grids_respond_inversely_to_temperature():
    grid = generate_synthetic_grid(SynthConfig(n_feeders=4, years=6, season="winter", temperature_mean=-20.0))

    assert all(s.temperature < 0 for s in grid.sensitivities.values())
    assert {r.season for r in grid.feeder_years} == {SEASON.WINTER}


def test_config_validation():
    with pytest.raises(DomainError, match=r"years must be >= n_steps \+ 2 = 5"):
        SynthConfig(years=4)
    with pytest.raises(ConfigError, match="unknown bit generator"):
        SynthConfig(bit_generator="xorshift")
    with pytest.raises(DomainError, match="transfer_magnitude"):
        SynthConfig(transfer_magnitude=(0.5, 1.0))


def test_inject_moves_load_and_reweights_recipient_composition():
    records = [
        FeederYearRecord("A", 2009, 100.0, 0.5, 0.2), FeederYearRecord("A", 2010, 100.0, 0.5, 0.2),
        FeederYearRecord("B", 2009, 50.0, 1.0, 0.0), FeederYearRecord("B", 2010, 50.0, 1.0, 0.0),
    ]

    out, log = inject_load_transfers(records, [TransferEvent(2010, ("A", "B"))], [20.0])

    by_key = {(r.feeder_id, r.year): r for r in out}
    assert by_key[("A", 2009)].peak_demand == 100.0
    assert by_key[("A", 2010)].peak_demand == 80.0
    assert by_key[("A", 2010)].residential_pct == 0.5
    b = by_key[("B", 2010)]
    assert b.peak_demand == 70.0
    assert b.residential_pct == pytest.approx(60.0 / 70.0)
    assert b.commercial_pct == pytest.approx(4.0 / 70.0)
    assert log == [TransferEvent(2010, ("A", "B"))]


def test_inject_rejects_impossible_transfers():
    records = [FeederYearRecord("A", 2010, 10.0, 0.5, 0.2), FeederYearRecord("B", 2010, 50.0, 0.5, 0.2)]

    with pytest.raises(DomainError, match="not below donor A"):
        inject_load_transfers(records, [TransferEvent(2010, ("A", "B"))], [10.0])
    with pytest.raises(DomainError, match="unknown feeder C"):
        inject_load_transfers(records, [TransferEvent(2010, ("A", "C"))], [1.0])
    with pytest.raises(DomainError, match="1 events but 2 magnitudes"):
        inject_load_transfers(records, [TransferEvent(2010, ("A", "B"))], [1.0, 2.0])


def test_transfers_conserve_total_load_per_year(small_synth):
    grid = synthesize(small_synth)

    totals = defaultdict(float)
    for r in grid.clean_feeder_years:
        totals[r.year] += r.peak_demand
    for r in grid.feeder_years:
        totals[r.year] -= r.peak_demand

    assert grid.transfer_log
    assert all(abs(v) < 1e-8 for v in totals.values())


def test_virtual_feeders_undo_injected_transfers(small_synth):
    grid = synthesize(small_synth)

    transferred = resolve_virtual_feeders(grid.feeder_years, grid.transfer_log)
    clean = resolve_virtual_feeders(grid.clean_feeder_years, grid.transfer_log)

    assert [(r.feeder_id, r.year) for r in transferred] == [(r.feeder_id, r.year) for r in clean]
    for t, c in zip(transferred, clean):
        assert t.peak_demand == pytest.approx(c.peak_demand, rel=1e-12)
        assert t.residential_pct == pytest.approx(c.residential_pct, rel=1e-9, abs=1e-12)
        assert t.commercial_pct == pytest.approx(c.commercial_pct, rel=1e-9, abs=1e-12)


def test_zero_transfer_fraction_leaves_grid_clean():
    grid = synthesize(SynthConfig(n_feeders=4, years=6, transfer_fraction=0.0))

    assert grid.transfer_log == ()
    assert grid.feeder_years == grid.clean_feeder_years


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=2, max_value=16),
       st.floats(0.0, 1.0), st.floats(0.1, 1.0))
def test_transfer_groups_are_disjoint_pairs_or_triples(seed, n_feeders, multi_share, fraction):
    config = SynthConfig(n_feeders=n_feeders, years=6, seed=seed, transfer_fraction=fraction,
                         multi_feeder_share=multi_share)

    events, magnitudes = random_transfer_events(config, generate_synthetic_grid(config).feeder_years)

    touched = [fid for e in events for fid in e.feeder_ids]
    assert all(len(e.feeder_ids) in (2, 3) for e in events)
    assert len(touched) == len(set(touched)) <= math.ceil(fraction * n_feeders)
    assert len(magnitudes) == len(events)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_three_feeder_transfers_conserve_total_load_per_year(seed):
    grid = synthesize(SynthConfig(n_feeders=9, years=6, seed=seed, transfer_fraction=1.0,
                                  multi_feeder_share=1.0))

    totals = defaultdict(float)
    for r in grid.clean_feeder_years:
        totals[r.year] += r.peak_demand
    for r in grid.feeder_years:
        totals[r.year] -= r.peak_demand

    assert [len(e.feeder_ids) for e in grid.transfer_log] == [3, 3, 3]
    assert all(abs(v) < 1e-8 for v in totals.values())
