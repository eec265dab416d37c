import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import quantcredit as qc
from quantcredit.filtering import FilterDistribution
from quantcredit.quantization import QuantizerGrid
from quantcredit.spreads import load_curve_csv, save_curve_csv, steps_for_maturity
from conftest import MC_SEED


def point_mass(v):
    return FilterDistribution(QuantizerGrid(np.array([float(v)]), np.array([1.0]), 0.0),
                              np.array([1.0]), 0.0)


class TestSpread:
    def test_riskless(self):
        assert qc.spread(1.0, 1.0, 3.0) == 0.0

    def test_inverts_exponential_decay(self):
        p = math.exp(-0.05 * 2.0)
        assert_allclose(qc.spread(p, 1.0, 3.0), 0.05, rtol=1e-12)

    def test_zero_survival_is_infinite(self):
        assert qc.spread(0.0, 1.0, 2.0) == math.inf

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            qc.spread(1.2, 1.0, 2.0)
        with pytest.raises(ValueError):
            qc.spread(-0.1, 1.0, 2.0)
        with pytest.raises(ValueError):
            qc.spread(0.5, 2.0, 2.0)


@given(r=st.floats(0.0, 2.0), span=st.floats(0.01, 10.0))
@settings(max_examples=200, deadline=None)
def test_spread_round_trips_hazard_rate(r, span):
    p = math.exp(-r * span)
    assert_allclose(qc.spread(p, 1.0, 1.0 + span), r, rtol=1e-9, atol=1e-12)


def test_steps_for_maturity_schedule():
    sched = ((3.0, 50), (math.inf, 100))
    assert steps_for_maturity(sched, 1.1) == 50
    assert steps_for_maturity(sched, 3.0) == 50
    assert steps_for_maturity(sched, 3.1) == 100
    with pytest.raises(ValueError):
        steps_for_maturity(((2.0, 50),), 5.0)


class TestSpreadCurve:
    def test_point_mass_curve_equals_full_mc_composition(self, bs_model, bs_scenario):
        sched = ((math.inf, 50),)
        curve = qc.spread_curve(point_mass(86.3), bs_model, bs_scenario, (2.0,), sched, 20_000, MC_SEED)
        direct = qc.survival_full_mc(bs_model, 86.3, 1.0, 2.0, 76.0, 50, 20_000, MC_SEED)
        assert curve.points[0].survival == direct.value
        assert_allclose(curve.points[0].spread, -math.log(direct.value) / 1.0, rtol=1e-12)

    def test_survival_nonincreasing_on_nested_schedule(self, bs_filter, bs_model, bs_scenario):
        # maturities 1.5, 2, 3 with a common 0.02 step: shared increments
        # make the shorter-horizon trial weights prefixes of the longer
        # ones, so the ordering holds pathwise, not just on average
        sched = ((1.5, 25), (2.0, 50), (3.0, 100))
        curve = qc.spread_curve(bs_filter, bs_model, bs_scenario, (1.5, 2.0, 3.0), sched, 10_000, MC_SEED)
        sv = curve.survivals
        assert np.all(np.diff(sv) <= 0)

    def test_riskless_barrier_spread_below_one_bp(self, bs_model):
        scn = qc.MarketScenario(86.3, 86.3, 1e-6, 1.0, (1.5, 2.0))
        sched = ((math.inf, 50),)
        curve = qc.spread_curve(point_mass(86.3), bs_model, scn, (1.5, 2.0), sched, 2000, MC_SEED)
        assert np.all(curve.spreads <= 1e-4)

    def test_deterministic_across_runs_and_workers(self, bs_filter, bs_model, bs_scenario):
        sched = ((math.inf, 50),)
        a = qc.spread_curve(bs_filter, bs_model, bs_scenario, (1.5, 2.0), sched, 5000, MC_SEED, workers=1)
        b = qc.spread_curve(bs_filter, bs_model, bs_scenario, (1.5, 2.0), sched, 5000, MC_SEED, workers=3)
        for pa, pb in zip(a.points, b.points):
            assert (pa.survival, pa.stderr, pa.spread) == (pb.survival, pb.stderr, pb.spread)

    def test_curve_validation_rejects_bad_maturities(self):
        with pytest.raises(ValueError):
            qc.SpreadCurve(1.0, (qc.SpreadPoint(0.5, 1.0, 0.0, 0.0),)).validate()


def test_curve_csv_round_trip_including_inf(tmp_path):
    pts = (
        qc.SpreadPoint(1.5, 0.9, 0.001, qc.spread(0.9, 1.0, 1.5)),
        qc.SpreadPoint(2.0, 0.0, 0.0, math.inf),
    )
    curve = qc.SpreadCurve(1.0, pts)
    path = tmp_path / "curve.csv"
    save_curve_csv(path, curve, "abc123", 42)
    text = path.read_text()
    assert ",inf" in text
    loaded, config_hash, seed = load_curve_csv(path)
    assert config_hash == "abc123" and seed == 42
    assert loaded.start == 1.0
    for a, b in zip(curve.points, loaded.points):
        assert (a.maturity, a.survival, a.stderr, a.spread) == (b.maturity, b.survival, b.stderr, b.spread)
