import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadseq.errors import ConsistencyError, DomainError, ShapeError
from loadseq.featlab import (
    FeederYearRecord,
    PcaTransform,
    RegionalYearRecord,
    TransferEvent,
    apply_normalizer,
    attach_components,
    build_virtual_feeder,
    fit_normalizer,
    fit_pca,
    invert_normalizer,
    load_composition,
    project_pca,
    proportion_variance_explained,
    resolve_virtual_feeders,
    select_component_count,
    temperature_changes,
    transfer_groups,
)
from loadseq.model import SEASON


def _rec(fid, year, peak, res=0.5, com=0.2, lc=0.0, **kw):
    return FeederYearRecord(fid, year, peak, res, com, lc, **kw)


# ---------------------------------------------------------------------------
# Load composition and virtual feeders
# ---------------------------------------------------------------------------

def test_industrial_share_is_the_residual():
    r, c, i = load_composition(540.0, [0.594 * 540.0], [0.127 * 540.0])

    assert round(i, 4) == 0.279
    assert (r, c) == pytest.approx((0.594, 0.127))
    assert _rec("1001", 2011, 540.0, res=r, com=c).industrial_pct == pytest.approx(i)


def test_composition_edge_cases():
    assert load_composition(200.0, [120.0, 80.0], []) == (1.0, 0.0, 0.0)
    assert load_composition(200.0, [], []) == (0.0, 0.0, 1.0)
    with pytest.raises(ConsistencyError, match="exceed the feeder peak"):
        load_composition(100.0, [80.0], [30.0])
    with pytest.raises(DomainError, match="feeder_peak must be > 0"):
        load_composition(0.0, [], [])


def test_virtual_feeder_hand_case():
    a = _rec("1001", 2010, 433.0, res=0.665, com=0.102, lc=42.0)
    b = _rec("1321", 2010, 317.0, res=0.942, com=0.058, lc=0.0)

    v = build_virtual_feeder([a, b])

    assert v.feeder_id == "V:1001+1321"
    assert v.peak_demand == 375.0
    assert round(v.residential_pct * 100, 2) == 78.21
    assert v.large_customer_net_change == 21.0
    assert v.commercial_pct == pytest.approx((0.102 * 433 + 0.058 * 317) / 750)


def test_virtual_feeder_of_identical_members_equals_member():
    a = _rec("1", 2011, 250.0, res=0.4, com=0.3, lc=5.0, der_growth=0.02)
    b = _rec("2", 2011, 250.0, res=0.4, com=0.3, lc=5.0, der_growth=0.02)

    v = build_virtual_feeder([a, b])

    assert (v.peak_demand, v.residential_pct, v.commercial_pct, v.large_customer_net_change, v.der_growth) == \
        pytest.approx((250.0, 0.4, 0.3, 5.0, 0.02))


def test_virtual_feeder_rejects_bad_groups():
    with pytest.raises(DomainError, match="at least 2 members"):
        build_virtual_feeder([_rec("1", 2010, 10.0)])
    with pytest.raises(ConsistencyError, match="span several years"):
        build_virtual_feeder([_rec("1", 2010, 10.0), _rec("2", 2011, 10.0)])
    with pytest.raises(ConsistencyError, match="der_growth is present for some"):
        build_virtual_feeder([_rec("1", 2010, 10.0, der_growth=0.1), _rec("2", 2010, 10.0)])


record_st = st.builds(
    lambda fid, peak, res, com_frac, lc: _rec(fid, 2015, peak, res, (1 - res) * com_frac, lc),
    fid=st.sampled_from([str(i) for i in range(100, 110)]),
    peak=st.floats(1.0, 1000.0),
    res=st.floats(0.0, 1.0),
    com_frac=st.floats(0.0, 1.0),
    lc=st.floats(-50.0, 50.0),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(record_st, min_size=2, max_size=5, unique_by=lambda r: r.feeder_id), st.randoms())
def test_virtual_feeder_ignores_member_order(members, rnd):
    shuffled = list(members)
    rnd.shuffle(shuffled)

    a, b = build_virtual_feeder(members), build_virtual_feeder(shuffled)

    assert a == b
    peaks = [m.peak_demand for m in members]
    assert min(peaks) * (1 - 1e-12) <= a.peak_demand <= max(peaks) * (1 + 1e-12)


def test_transfer_groups_are_transitive():
    events = [TransferEvent(2010, ("3", "1")), TransferEvent(2012, ("1", "7")), TransferEvent(2011, ("5", "6"))]

    assert transfer_groups(events) == [("1", "3", "7"), ("5", "6")]


def test_transfer_event_needs_two_distinct_feeders():
    with pytest.raises(DomainError, match="at least 2 feeders"):
        TransferEvent(2010, ("1",))
    with pytest.raises(DomainError, match="lists a feeder twice"):
        TransferEvent(2010, ("1", "1"))


def test_resolve_virtual_feeders_replaces_groups_on_common_years():
    records = [
        _rec("1", 2010, 100.0), _rec("1", 2011, 110.0), _rec("1", 2012, 90.0),
        _rec("2", 2011, 50.0), _rec("2", 2012, 70.0),
        _rec("9", 2010, 40.0),
    ]

    out = resolve_virtual_feeders(records, [TransferEvent(2012, ("1", "2"))])

    assert [(r.feeder_id, r.year, r.peak_demand) for r in out] == [
        ("9", 2010, 40.0), ("V:1+2", 2011, 80.0), ("V:1+2", 2012, 80.0),
    ]


def test_resolve_with_empty_log_is_identity():
    records = [_rec("2", 2011, 50.0), _rec("1", 2010, 100.0)]

    assert resolve_virtual_feeders(records, []) == sorted(records, key=lambda r: (r.feeder_id, r.year))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def test_normalizer_hand_cases():
    stats = fit_normalizer([[-2.5], [9.1], [14.2]], ["gdp_growth"])

    assert (stats.minimum[0], stats.maximum[0]) == (-2.5, 14.2)
    assert round(float(apply_normalizer(stats, [[9.1]])[0, 0]), 4) == 0.6946
    assert apply_normalizer(stats, [[-2.5], [14.2]]).ravel().tolist() == [0.0, 1.0]
    assert float(apply_normalizer(fit_normalizer([[0.0], [10.0]]), [[5.0]])[0, 0]) == 0.5


def test_degenerate_columns_map_to_zero():
    stats = fit_normalizer([[3.0, 1.0], [3.0, 2.0]])
    single = fit_normalizer([[1.0, 2.0, 3.0]])

    assert stats.degenerate.tolist() == [True, False]
    assert single.degenerate.all()
    assert apply_normalizer(stats, [[7.0, 1.5]]).tolist() == [[0.0, 0.5]]


def test_normalizer_rejects_width_mismatch():
    stats = fit_normalizer([[1.0, 2.0], [2.0, 3.0]])

    with pytest.raises(ShapeError, match="normalizer was fitted on 2"):
        apply_normalizer(stats, [[1.0, 2.0, 3.0]])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3), min_size=2, max_size=12))
def test_invert_normalizer_recovers_non_degenerate_columns(rows):
    X = np.array(rows)
    stats = fit_normalizer(X)

    back = invert_normalizer(stats, apply_normalizer(stats, X))

    live = ~stats.degenerate
    np.testing.assert_allclose(back[:, live], X[:, live], rtol=1e-9, atol=1e-7)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

def test_pca_on_scaled_econ_sample_matches_reference_scores(econ_sample, econ_scores):
    stats = fit_normalizer(econ_sample)
    pca = fit_pca(apply_normalizer(stats, econ_sample), pve_threshold=0.95)

    scores = project_pca(pca, apply_normalizer(stats, econ_sample))

    assert pca.selected_count == 2
    assert proportion_variance_explained(pca, 2) == pytest.approx(0.971, abs=0.02)
    for j in range(2):
        deviation = min(np.max(np.abs(scores[:, j] - econ_scores[:, j])),
                        np.max(np.abs(-scores[:, j] - econ_scores[:, j])))
        assert deviation <= 0.02
    first = project_pca(pca, apply_normalizer(stats, econ_sample[:1]))[0]
    assert np.abs(first) == pytest.approx([0.64, 0.44], abs=0.02)


def test_components_are_orthonormal_and_signed(econ_sample):
    pca = fit_pca(econ_sample)
    P = pca.components

    assert np.max(np.abs(P.T @ P - np.eye(4))) < 1e-8
    for j in range(4):
        assert P[np.argmax(np.abs(P[:, j])), j] > 0
    assert np.all(np.diff(pca.eigenvalues) <= 0)


def test_rank_one_data_has_one_nonzero_eigenvalue():
    t = np.linspace(-2.0, 3.0, 7)
    X = np.column_stack([t, 2 * t + 1, -t])

    pca = fit_pca(X)

    assert pca.eigenvalues[0] > 0
    assert np.all(np.abs(pca.eigenvalues[1:]) < 1e-10)
    assert select_component_count(pca, 0.95) == 1


def test_reconstruction_identity_on_random_matrix():
    X = np.random.default_rng(7).normal(size=(30, 5))
    pca = fit_pca(X)
    Xc = X - X.mean(axis=0)

    recon = pca.components @ np.diag(pca.eigenvalues) @ pca.components.T

    assert np.max(np.abs(Xc.T @ Xc - recon)) < 1e-8


def test_pve_hand_cases():
    pca = PcaTransform(np.zeros(2), np.eye(2), np.array([3.0, 1.0]), 2)

    assert proportion_variance_explained(pca, 1) == 0.75
    assert proportion_variance_explained(pca, 2) == 1.0
    with pytest.raises(DomainError, match=r"t must lie in \[1, 2\]"):
        proportion_variance_explained(pca, 3)


def test_constant_data_keeps_one_component():
    pca = fit_pca(np.ones((5, 3)), pve_threshold=0.95)

    assert pca.selected_count == 1
    with pytest.raises(DomainError, match="PVE is undefined"):
        proportion_variance_explained(pca, 1)


def test_mean_row_projects_to_zero(econ_sample):
    pca = fit_pca(econ_sample, selected_count=3)

    assert np.allclose(project_pca(pca, econ_sample.mean(axis=0)), 0.0, atol=1e-12)
    assert project_pca(pca, econ_sample).shape == (10, 3)


def test_pca_needs_two_rows():
    with pytest.raises(DomainError, match="at least 2 rows"):
        fit_pca([[1.0, 2.0]])


# ---------------------------------------------------------------------------
# Regional helpers
# ---------------------------------------------------------------------------

def test_temperature_changes_follow_calendar_years():
    recs = [RegionalYearRecord(y, {"g": 0.0}, t) for y, t in ((2011, 35.4), (2009, 33.3), (2010, 32.0))]

    out = temperature_changes(recs)

    assert [r.year for r in out] == [2009, 2010, 2011]
    assert out[0].temperature_change is None
    assert [round(r.temperature_change, 6) for r in out[1:]] == [-1.3, 3.4]


def test_temperature_changes_reject_duplicate_years():
    recs = [RegionalYearRecord(2010, {"g": 0.0}, 30.0), RegionalYearRecord(2010, {"g": 1.0}, 31.0)]

    with pytest.raises(ConsistencyError, match="year twice"):
        temperature_changes(recs)


def test_attach_components_stores_scores(econ_sample):
    columns = ("a", "b", "c", "d")
    recs = [RegionalYearRecord(2000 + i, dict(zip(columns, row)), 30.0, season=SEASON.WINTER)
            for i, row in enumerate(econ_sample)]
    stats = fit_normalizer(econ_sample)
    pca = fit_pca(apply_normalizer(stats, econ_sample), selected_count=2)

    out = attach_components(recs, columns, stats, pca)

    assert all(len(r.components) == 2 for r in out)
    assert out[0].components == pytest.approx(tuple(project_pca(pca, apply_normalizer(stats, econ_sample[:1]))[0]))
