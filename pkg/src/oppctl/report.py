"""Per-run statistics, CSV/JSON emitters and the cross-strategy comparison."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from statistics import median
from typing import Mapping, Optional, Sequence

CSV_COLUMNS = (
    "created_data",
    "delivered_data",
    "delivery_ratio",
    "lat_min",
    "lat_q1",
    "lat_median",
    "lat_q3",
    "lat_max",
    "dropped_data",
    "dropped_control",
    "data_bytes",
    "control_bytes",
    "control_overhead",
    "scenario_digest",
)


@dataclass(frozen=True)
class LatencySummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float


def quantiles(samples: Sequence[float]) -> LatencySummary:
    """Five-number summary; quantile p sits at position p*(n-1), interpolated linearly."""
    if not samples:
        raise ValueError("quantiles of an empty sample")
    xs = sorted(samples)
    last = len(xs) - 1

    def at(p: float) -> float:
        pos = p * last
        lo = math.floor(pos)
        frac = pos - lo
        if frac == 0:
            return float(xs[lo])
        return xs[lo] + (xs[lo + 1] - xs[lo]) * frac

    return LatencySummary(at(0.0), at(0.25), at(0.5), at(0.75), at(1.0))


@dataclass
class RunReport:
    strategy: str = ""
    created_data: int = 0
    delivered_data: int = 0
    latencies_s: list[float] = field(default_factory=list)
    dropped_data: int = 0
    dropped_control: int = 0
    created_control: int = 0
    data_bytes_transferred: int = 0
    control_bytes_transferred: int = 0
    rd_timeline: list[tuple[float, int, float]] = field(default_factory=list)
    scenario_digest: str = ""

    @property
    def delivery_ratio(self) -> float:
        return self.delivered_data / self.created_data if self.created_data else 0.0

    @property
    def latency_summary(self) -> Optional[LatencySummary]:
        return quantiles(self.latencies_s) if self.latencies_s else None

    @property
    def control_overhead(self) -> float:
        if not self.data_bytes_transferred:
            return 0.0
        return self.control_bytes_transferred / self.data_bytes_transferred

    def to_dict(self) -> dict:
        summary = self.latency_summary
        return {
            "strategy": self.strategy,
            "created_data": self.created_data,
            "delivered_data": self.delivered_data,
            "delivery_ratio": self.delivery_ratio,
            "latencies_s": list(self.latencies_s),
            "latency_summary": asdict(summary) if summary else None,
            "dropped_data": self.dropped_data,
            "dropped_control": self.dropped_control,
            "created_control": self.created_control,
            "data_bytes_transferred": self.data_bytes_transferred,
            "control_bytes_transferred": self.control_bytes_transferred,
            "control_overhead": self.control_overhead,
            "rd_timeline": [list(r) for r in self.rd_timeline],
            "scenario_digest": self.scenario_digest,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunReport":
        return cls(
            strategy=d["strategy"],
            created_data=d["created_data"],
            delivered_data=d["delivered_data"],
            latencies_s=list(d["latencies_s"]),
            dropped_data=d["dropped_data"],
            dropped_control=d["dropped_control"],
            created_control=d.get("created_control", 0),
            data_bytes_transferred=d["data_bytes_transferred"],
            control_bytes_transferred=d["control_bytes_transferred"],
            rd_timeline=[(float(t), int(n), float(rd)) for t, n, rd in d["rd_timeline"]],
            scenario_digest=d["scenario_digest"],
        )


def _g(x: float) -> str:
    return f"{x:.6g}"


def csv_row(report: RunReport) -> list[str]:
    s = report.latency_summary
    lat = [_g(v) for v in (s.min, s.q1, s.median, s.q3, s.max)] if s else [""] * 5
    return [
        str(report.created_data),
        str(report.delivered_data),
        _g(report.delivery_ratio),
        *lat,
        str(report.dropped_data),
        str(report.dropped_control),
        str(report.data_bytes_transferred),
        str(report.control_bytes_transferred),
        _g(report.control_overhead),
        report.scenario_digest,
    ]


def _csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def emit_csv(report: RunReport) -> str:
    return _csv([CSV_COLUMNS, csv_row(report)])


def emit_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def parse_json(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def emit_rd_timeline(report: RunReport) -> str:
    return _csv([("time", "node", "rd")] + [(repr(t), n, repr(rd)) for t, n, rd in report.rd_timeline])


class ComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class LabelSummary:
    label: str
    runs: int
    median_delivery_ratio: float
    median_latency: Optional[float]
    median_overhead: float


@dataclass(frozen=True)
class ComparisonTable:
    reference: str
    summaries: dict[str, LabelSummary]
    # baseline label -> percent delivery-ratio improvement of the reference
    improvements: dict[str, Optional[float]]


def improvement(ctrl: float, baseline: float) -> Optional[float]:
    if baseline == 0:
        return 0.0 if ctrl == 0 else None
    return 100.0 * (ctrl - baseline) / baseline


def compare(reports: Mapping[str, Sequence[RunReport]], reference: str = "controlled") -> ComparisonTable:
    """Median delivery ratio and latency per label, plus improvement of ``reference`` over the rest.

    Every label must cover the same scenarios (same multiset of digests).
    A run's latency is its median first-delivery latency; runs without
    deliveries are left out of the latency median.
    """
    if reference not in reports:
        raise ComparisonError(f"reference label {reference!r} missing")
    digests = {label: sorted(r.scenario_digest for r in runs) for label, runs in reports.items()}
    ref_digests = digests[reference]
    for label, ds in digests.items():
        if ds != ref_digests:
            raise ComparisonError(f"label {label!r} ran different scenarios than {reference!r}")

    summaries = {}
    for label, runs in reports.items():
        if not runs:
            raise ComparisonError(f"label {label!r} has no runs")
        lats = [r.latency_summary.median for r in runs if r.latencies_s]
        summaries[label] = LabelSummary(
            label=label,
            runs=len(runs),
            median_delivery_ratio=median(r.delivery_ratio for r in runs),
            median_latency=median(lats) if lats else None,
            median_overhead=median(r.control_overhead for r in runs),
        )
    ref = summaries[reference].median_delivery_ratio
    improvements = {
        label: improvement(ref, s.median_delivery_ratio)
        for label, s in summaries.items()
        if label != reference
    }
    return ComparisonTable(reference, summaries, improvements)
