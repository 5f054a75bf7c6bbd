"""Twin-fidelity metrics.

Everything here is a pure function over immutable inputs: throughput
binning, the alignment ratio, update latency, age-of-information, the
series comparison (lag search + error measures) and the configuration
consistency audit. Bins use half-open intervals with boundary points in
the later bin, the same convention the capture segmentation uses.
"""

import json
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .emit import DeploymentBundle
from .errors import MetricsError
from .model import MICROS_PER_SECOND, PacketRecord, TwinDescriptor
from .transport import SyncLog


@dataclass(frozen=True, slots=True)
class ThroughputSeries:
    """Bits/s per fixed-width time bin, the comparand of twin fidelity."""

    origin_ts_micros: int
    bin_width_micros: int
    bins: tuple[float, ...]
    ignored_packets: int = 0

    @property
    def span_micros(self) -> int:
        return self.bin_width_micros * len(self.bins)

    def to_csv_bytes(self) -> bytes:
        lines = ["t_seconds,bits_per_second"]
        for k, value in enumerate(self.bins):
            t = (self.origin_ts_micros + k * self.bin_width_micros) / MICROS_PER_SECOND
            lines.append(f"{t},{value}")
        return ("\n".join(lines) + "\n").encode("utf-8")


def throughput_series(
    packets: Iterable[PacketRecord],
    bin_width_micros: int = MICROS_PER_SECOND,
    origin_ts_micros: int = 0,
    span_micros: int | None = None,
) -> ThroughputSeries:
    """Bin packet volume into a bits/s series.

    Bin k collects original_len bytes of packets with ts in
    [origin + k*w, origin + (k+1)*w). Packets outside the span are not an
    error; they are skipped and counted in ``ignored_packets``.
    """
    if bin_width_micros <= 0:
        raise ValueError("bin_width_micros must be positive")
    packets = list(packets)
    if span_micros is None:
        if packets:
            span_micros = max(p.ts_micros for p in packets) - origin_ts_micros + 1
        else:
            span_micros = 0
    n_bins = -(-span_micros // bin_width_micros) if span_micros > 0 else 0
    byte_bins = [0] * n_bins
    ignored = 0
    for p in packets:
        idx = (p.ts_micros - origin_ts_micros) // bin_width_micros
        if p.ts_micros < origin_ts_micros or idx >= n_bins:
            ignored += 1
            continue
        byte_bins[idx] += p.original_len
    scale = 8 * MICROS_PER_SECOND / bin_width_micros
    return ThroughputSeries(
        origin_ts_micros=origin_ts_micros,
        bin_width_micros=bin_width_micros,
        bins=tuple(b * scale for b in byte_bins),
        ignored_packets=ignored,
    )


def twin_alignment_ratio(log: SyncLog, planned_period_micros: int, observation: tuple[int, int]) -> float:
    """Achieved over planned twinning frequency, clamped to 1.

    A window counts as achieved when it was delivered and its capture
    interval ends inside the observation interval, so late arrival of the
    final windows does not penalize the ratio.
    """
    start, end = observation
    if end <= start:
        raise MetricsError("observation interval must have positive length")
    if planned_period_micros <= 0:
        raise MetricsError("planned period must be positive")
    delivered = sum(
        1
        for e in log.delivered_entries()
        if start < e.t_window_end <= end
    )
    # Single division keeps the ratio exact when the observation length is
    # a whole number of periods: achieved_hz / planned_hz folds to this.
    return min(delivered * planned_period_micros / (end - start), 1.0)


@dataclass(frozen=True, slots=True)
class LatencyStats:
    per_window: Mapping[int, int]
    mean_micros: float
    max_micros: int


def update_latency(log: SyncLog) -> LatencyStats:
    """Replay completion minus window end, per delivered window."""
    per_window = {
        e.seq: e.t_replayed - e.t_window_end
        for e in log.delivered_entries()
        if e.t_replayed is not None
    }
    if not per_window:
        raise MetricsError("no replayed windows in the log")
    values = list(per_window.values())
    return LatencyStats(per_window, sum(values) / len(values), max(values))


@dataclass(frozen=True, slots=True)
class AoiStats:
    """Age-of-information sawtooth: samples plus exact mean and peak."""

    samples: tuple[tuple[int, int], ...]
    mean_micros: float
    peak_micros: int


def age_of_information(
    log: SyncLog,
    eval_times_micros: Sequence[int] | None = None,
    origin_ts_micros: int | None = None,
    horizon_micros: int | None = None,
) -> AoiStats:
    """Age of the freshest replayed data, over time.

    AoI(t) is t minus the end timestamp of the newest window replayed by
    t; before the first replay it is measured from the run origin. Mean
    and peak are computed exactly from the piecewise-linear sawtooth over
    [origin, horizon]; ``samples`` holds the instantaneous series at the
    requested eval times (default: around each replay event).
    """
    entries = [e for e in log.delivered_entries() if e.t_replayed is not None]
    events = sorted((e.t_replayed, e.t_window_end) for e in entries)
    # The freshest data at time t is the max window end replayed by t.
    event_times: list[int] = []
    newest_end: list[int] = []
    running = None
    for t_replayed, end_ts in events:
        running = end_ts if running is None else max(running, end_ts)
        if event_times and event_times[-1] == t_replayed:
            newest_end[-1] = running
        else:
            event_times.append(t_replayed)
            newest_end.append(running)

    if origin_ts_micros is None:
        all_entries = log.entries()
        if not all_entries:
            raise MetricsError("empty sync log and no origin given")
        origin_ts_micros = min(e.t_window_start for e in all_entries)
    if horizon_micros is None:
        if eval_times_micros:
            horizon_micros = max(eval_times_micros)
        elif event_times:
            horizon_micros = event_times[-1]
        else:
            raise MetricsError("no replays and no horizon given")

    def aoi_at(t: int) -> int:
        i = bisect_right(event_times, t)
        if i == 0:
            return t - origin_ts_micros
        return t - newest_end[i - 1]

    if eval_times_micros is None:
        sample_points: list[int] = [origin_ts_micros]
        for t in event_times:
            if origin_ts_micros < t <= horizon_micros:
                sample_points.append(t - 1)
                sample_points.append(t)
        sample_points.append(horizon_micros)
    else:
        sample_points = list(eval_times_micros)
    samples = tuple((t, aoi_at(t)) for t in sample_points)

    # Exact peak and mean over [origin, horizon]: age grows with slope 1
    # and drops at each replay event.
    peak = 0
    total_area = 0.0
    t_prev = origin_ts_micros
    aoi_prev = 0
    for t, end in zip(event_times, newest_end):
        if t <= origin_ts_micros:
            aoi_prev = origin_ts_micros - end
            continue
        if t > horizon_micros:
            break
        length = t - t_prev
        top = aoi_prev + length
        peak = max(peak, top)
        total_area += (aoi_prev + top) / 2 * length
        t_prev = t
        aoi_prev = t - end
        peak = max(peak, aoi_prev)
    length = horizon_micros - t_prev
    if length > 0:
        top = aoi_prev + length
        peak = max(peak, top)
        total_area += (aoi_prev + top) / 2 * length
    span = horizon_micros - origin_ts_micros
    mean = total_area / span if span > 0 else float(aoi_prev)
    return AoiStats(samples, mean, peak)


@dataclass(frozen=True, slots=True)
class SeriesComparison:
    rmse_bps: float
    nrmse: float | None
    pearson_r: float
    estimated_lag_bins: int
    estimated_lag_micros: int
    flat_reference: bool = False
    degenerate_correlation: bool = False


def _pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Pearson r plus a degenerate flag.

    Identical arrays short-circuit to exactly 1.0 (no float noise). A
    zero-variance side otherwise makes r undefined and is reported as
    0.0 with the degenerate flag set.
    """
    if np.array_equal(x, y):
        return 1.0, bool(np.std(x) == 0.0)
    sx = float(np.std(x))
    sy = float(np.std(y))
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    r = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
    return max(-1.0, min(1.0, r)), False


def compare_series(npt: ThroughputSeries, ndt: ThroughputSeries, max_lag_bins: int) -> SeriesComparison:
    """Similarity of the physical-side and twin-side throughput series.

    The lag estimate is the integer bin shift (within +/-max_lag_bins)
    maximizing normalized cross-correlation; rmse, nrmse and pearson_r
    are computed on the lag-corrected overlap. Positive lag means the
    twin series trails the physical one.
    """
    if npt.bin_width_micros != ndt.bin_width_micros:
        raise MetricsError(
            f"bin width mismatch: {npt.bin_width_micros} vs {ndt.bin_width_micros}"
        )
    x = np.asarray(npt.bins, dtype=float)
    y = np.asarray(ndt.bins, dtype=float)

    scored: list[tuple[float, int]] = []
    for s in range(-max_lag_bins, max_lag_bins + 1):
        i0 = max(0, -s)
        i1 = min(len(x), len(y) - s)
        if i1 - i0 < 2:
            continue
        xs = x[i0:i1]
        ys = y[i0 + s:i1 + s]
        if np.std(xs) == 0.0 or np.std(ys) == 0.0:
            if np.array_equal(xs, ys):
                scored.append((1.0, s))
            continue
        r, _ = _pearson(xs, ys)
        scored.append((r, s))
    if not scored:
        raise MetricsError("series overlap is under 2 bins at every candidate lag")

    scored.sort(key=lambda item: (-item[0], abs(item[1]), item[1]))
    lag = scored[0][1]

    i0 = max(0, -lag)
    i1 = min(len(x), len(y) - lag)
    xs = x[i0:i1]
    ys = y[i0 + lag:i1 + lag]
    rmse = float(np.sqrt(np.mean((xs - ys) ** 2)))
    pearson_r, degenerate = _pearson(xs, ys)
    spread = float(x.max() - x.min()) if len(x) else 0.0
    flat = spread == 0.0
    nrmse = None if flat else rmse / spread
    return SeriesComparison(
        rmse_bps=rmse,
        nrmse=nrmse,
        pearson_r=pearson_r,
        estimated_lag_bins=lag,
        estimated_lag_micros=lag * npt.bin_width_micros,
        flat_reference=flat,
        degenerate_correlation=degenerate,
    )


# Fields audited per slice by the consistency index, against the session
# entries of the emitted bundle.
_SLICE_AUDIT = (
    ("dnn", "dnn"),
    ("subnet", "subnet"),
    ("gateway_ip", "gateway"),
    ("dl_bandwidth_bps", "dl_bandwidth_bps"),
    ("ul_bandwidth_bps", "ul_bandwidth_bps"),
    ("qci", "qos_index"),
)


def audited_field_count(d: TwinDescriptor) -> int:
    return 2 + len(_SLICE_AUDIT) * len(d.slices)


def state_consistency_index(d: TwinDescriptor, bundle: DeploymentBundle) -> float:
    """Fraction of audited configuration fields matching descriptor vs bundle.

    Audits plmn and ue_count globally plus dnn, subnet, gateway and both
    bandwidths and the QoS index per slice, matching slices by position.
    """
    amf = bundle.amf_doc.get("amf", {}) if isinstance(bundle.amf_doc, dict) else {}
    sessions = []
    if isinstance(bundle.smf_doc, dict):
        sessions = bundle.smf_doc.get("smf", {}).get("sessions", []) or []
    matches = 0
    total = audited_field_count(d)
    if amf.get("plmn") == d.plmn:
        matches += 1
    if amf.get("ue_count") == d.ue_count:
        matches += 1
    for i, s in enumerate(d.slices):
        session = sessions[i] if i < len(sessions) and isinstance(sessions[i], dict) else {}
        for attr, key in _SLICE_AUDIT:
            if session.get(key) == getattr(s, attr):
                matches += 1
    return matches / total


@dataclass(frozen=True, slots=True)
class FidelityReport:
    """All evaluation metrics of one capture/transfer/replay run."""

    twin_alignment_ratio: float
    mean_update_latency_us: float | None
    max_update_latency_us: int | None
    mean_age_of_information_us: float
    peak_age_of_information_us: int
    sync_frequency_hz: float
    rmse_bps: float | None
    nrmse: float | None
    pearson_r: float | None
    estimated_lag_us: int | None
    consistency_index: float
    windows_lost: int
    prediction_deviation: float | None = None  # needs a predictor plugin

    def as_dict(self) -> dict:
        return {
            "twin_alignment_ratio": self.twin_alignment_ratio,
            "mean_update_latency_us": self.mean_update_latency_us,
            "max_update_latency_us": self.max_update_latency_us,
            "mean_age_of_information_us": self.mean_age_of_information_us,
            "peak_age_of_information_us": self.peak_age_of_information_us,
            "sync_frequency_hz": self.sync_frequency_hz,
            "rmse_bps": self.rmse_bps,
            "nrmse": self.nrmse,
            "pearson_r": self.pearson_r,
            "estimated_lag_us": self.estimated_lag_us,
            "consistency_index": self.consistency_index,
            "windows_lost": self.windows_lost,
            "prediction_deviation": self.prediction_deviation,
        }

    def to_json_bytes(self) -> bytes:
        doc = {"schema_version": 1, **self.as_dict()}
        return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")

    def to_csv_bytes(self) -> bytes:
        fields = self.as_dict()
        header = ",".join(fields)
        row = ",".join("" if v is None else str(v) for v in fields.values())
        return (header + "\n" + row + "\n").encode("utf-8")
