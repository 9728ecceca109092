import sys
import pathlib

import numpy as np
import pytest

# Ensure src/ layout is on path for pytest invocation from repo folder
ROOT = pathlib.Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
for p in (str(SRC), str(ROOT)):
    if p not in sys.path:
        sys.path.insert(0, p)

from loadseq.featlab import FeederYearRecord, RegionalYearRecord  # noqa: E402
from loadseq.synthgrid import SynthConfig  # noqa: E402

ECON = ("gdp_growth", "employment_growth", "population_growth", "net_migration")

# GDP growth, employment growth, population growth, net migration ('000) and their reference pc scores
ECON_SAMPLE = np.array([
    [14.2, 4.9, 2.9, 17.6],
    [9.1, 2.7, 2.2, 12.4],
    [-2.5, -0.5, 2.2, 12.9],
    [2.2, 1.3, 2.6, 18.0],
    [3.2, 2.0, 1.0, 4.0],
    [3.5, 3.4, 2.7, 14.3],
    [2.3, 2.6, 2.6, 19.1],
    [3.9, 3.2, 3.4, 22.0],
    [-0.2, 1.3, 3.0, 24.9],
    [-3.2, -2.6, 0.3, -6.5],
])
ECON_SAMPLE_SCORES = np.array([
    [-0.64, 0.44], [-0.16, 0.31], [0.33, -0.31], [-0.06, -0.17], [0.38, 0.32],
    [-0.19, 0.02], [-0.17, -0.12], [-0.44, -0.18], [-0.19, -0.42], [1.14, 0.11],
])


@pytest.fixture(autouse=True)
def _quiet_logs(monkeypatch):
    monkeypatch.setenv("LOADSEQ_LOG_LEVEL", "ERROR")


@pytest.fixture
def econ_sample():
    return ECON_SAMPLE.copy()


@pytest.fixture
def econ_scores():
    return ECON_SAMPLE_SCORES.copy()


@pytest.fixture
def feeder_1001():
    """Feeder 1001 reference history, 2008-2012."""
    rows = [
        (2008, 433.0, 0.665, 0.102, 0.0),
        (2009, 502.0, 0.631, 0.111, 42.0),
        (2010, 554.0, 0.630, 0.113, 34.0),
        (2011, 550.0, 0.594, 0.127, 0.0),
        (2012, 521.0, 0.600, 0.125, -21.0),
    ]
    return [FeederYearRecord("1001", y, p, r, c, lc) for y, p, r, c, lc in rows]


@pytest.fixture
def regional_years():
    temps = {2007: 32.6, 2008: 32.6, 2009: 33.3, 2010: 32.0, 2011: 35.4, 2012: 33.2}
    out = []
    for i, (year, temp) in enumerate(sorted(temps.items())):
        econ = dict(zip(ECON, ECON_SAMPLE[i % len(ECON_SAMPLE)]))
        out.append(RegionalYearRecord(year, econ, temp))
    return out


@pytest.fixture
def small_synth():
    """A grid small enough to train on in a test."""
    return SynthConfig(n_feeders=8, years=8, seed=3)
