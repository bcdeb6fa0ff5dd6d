from statistics import median

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oppctl.report import (
    CSV_COLUMNS,
    ComparisonError,
    RunReport,
    compare,
    emit_csv,
    emit_json,
    emit_rd_timeline,
    parse_json,
    quantiles,
)


class TestQuantiles:
    def test_singleton(self):
        s = quantiles([5])
        assert (s.min, s.q1, s.median, s.q3, s.max) == (5, 5, 5, 5, 5)

    def test_four_points(self):
        s = quantiles([1, 2, 3, 4])
        assert (s.q1, s.median, s.q3) == (1.75, 2.5, 3.25)

    def test_unsorted(self):
        assert quantiles([3, 1, 2]).median == 2

    def test_empty(self):
        with pytest.raises(ValueError):
            quantiles([])

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50))
    def test_matches_numpy_linear(self, xs):
        s = quantiles(xs)
        ref = np.quantile(xs, [0, 0.25, 0.5, 0.75, 1.0], method="linear")
        assert [s.min, s.q1, s.median, s.q3, s.max] == pytest.approx(list(ref), rel=1e-9, abs=1e-9)


def sample_report(**kw):
    base = dict(
        strategy="controlled",
        created_data=10,
        delivered_data=4,
        latencies_s=[12.5, 3.0, 40.25, 7.0],
        dropped_data=3,
        dropped_control=1,
        data_bytes_transferred=2_000_000,
        control_bytes_transferred=780,
        rd_timeline=[(90.0, 0, 12.0), (95.5, 3, 12.0)],
        scenario_digest="abc123",
    )
    base.update(kw)
    return RunReport(**base)


class TestRunReport:
    def test_derived_fields(self):
        r = sample_report()
        assert r.delivery_ratio == 0.4
        assert r.control_overhead == 780 / 2_000_000

    def test_zero_guards(self):
        r = RunReport()
        assert r.delivery_ratio == 0.0 and r.control_overhead == 0.0 and r.latency_summary is None


class TestEmit:
    def test_empty_run_csv(self):
        header, row = emit_csv(RunReport(scenario_digest="d")).splitlines()
        assert header.split(",") == list(CSV_COLUMNS)
        cells = dict(zip(CSV_COLUMNS, row.split(",")))
        assert cells["delivery_ratio"] == "0"
        assert all(cells[c] == "" for c in ("lat_min", "lat_q1", "lat_median", "lat_q3", "lat_max"))

    def test_six_significant_digits(self):
        row = emit_csv(sample_report(created_data=3, delivered_data=1)).splitlines()[1].split(",")
        assert row[CSV_COLUMNS.index("delivery_ratio")] == "0.333333"
        assert row[CSV_COLUMNS.index("control_overhead")] == "0.00039"

    def test_deterministic(self):
        assert emit_csv(sample_report()) == emit_csv(sample_report())
        assert emit_json(sample_report()) == emit_json(sample_report())

    def test_json_round_trip(self):
        text = emit_json(sample_report())
        assert emit_json(parse_json(text)) == text

    def test_rd_timeline_csv(self):
        lines = emit_rd_timeline(sample_report()).splitlines()
        assert lines == ["time,node,rd", "90.0,0,12.0", "95.5,3,12.0"]


def reports(ratios, lat=10.0, digests=None):
    digests = digests or [f"s{i}" for i in range(len(ratios))]
    out = []
    for ratio, d in zip(ratios, digests):
        created = 1000
        out.append(RunReport(created_data=created, delivered_data=round(ratio * created),
                             latencies_s=[lat], scenario_digest=d))
    return out


class TestCompare:
    def test_improvement_percent(self):
        t = compare({"controlled": reports([0.6]), "epidemic": reports([0.4])})
        assert t.improvements["epidemic"] == pytest.approx(50.0)

    def test_identical_reports(self):
        t = compare({"controlled": reports([0.5, 0.7]), "epidemic": reports([0.5, 0.7]),
                     "static": reports([0.5, 0.7])})
        assert t.improvements == {"epidemic": 0.0, "static": 0.0}

    def test_medians_match_brute_force(self):
        rng = np.random.default_rng(0)
        data = {lb: [float(x) for x in rng.uniform(0.1, 0.9, 5).round(3)] for lb in ("controlled", "static")}
        t = compare({lb: reports(v) for lb, v in data.items()})
        for lb, vals in data.items():
            # brute-force median: middle element of the sorted five
            assert t.summaries[lb].median_delivery_ratio == pytest.approx(sorted(vals)[2])
            assert t.summaries[lb].median_delivery_ratio == pytest.approx(median(vals))

    def test_mismatched_digests(self):
        with pytest.raises(ComparisonError):
            compare({"controlled": reports([0.5], digests=["a"]), "epidemic": reports([0.5], digests=["b"])})

    def test_zero_overhead_for_baselines(self):
        t = compare({"controlled": reports([0.5]), "epidemic": reports([0.4])})
        assert t.summaries["epidemic"].median_overhead == 0.0
