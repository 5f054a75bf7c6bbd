"""End-to-end orchestration of one capture/transfer/replay run.

Three stages run concurrently, connected by the transfer channel: a
producer (simulated traffic, segmented into windows and sent), the
channel itself, and a consumer (in-order receive plus replay into a
collecting sink). Shutdown is ordered producer -> channel -> consumer;
the producer always closes the channel, even on failure, so the consumer
drains and terminates.

Under the virtual clock every timestamp is computed from the data, never
read from a wall clock, so a run is deterministic down to the report
bytes. Real-time mode paces windows against a monotonic clock and exists
for live demonstrations; its timing is measured, not asserted.
"""

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path

from .clocks import MonotonicClock
from .emit import emit_bundle
from .errors import MetricsError, StageError
from .metrics import (
    FidelityReport,
    ThroughputSeries,
    age_of_information,
    compare_series,
    state_consistency_index,
    throughput_series,
    twin_alignment_ratio,
    update_latency,
)
from .model import MICROS_PER_SECOND, TwinDescriptor
from .pcap import segment_stream
from .replay import CollectingSink, PcapDirectorySink, ReplayEngine, ReplayMode, ReplayPlan, TeeSink
from .scenarios import ScenarioSpec, generate
from .transport import (
    ChannelSpec,
    DirectoryExchangeChannel,
    InProcessChannel,
    SyncLog,
    TcpReceiverChannel,
    TcpSenderChannel,
    WindowReceiver,
    send_window,
)

# Decorrelates the channel's loss draws from the traffic generator while
# still deriving everything from the single run seed.
_CHANNEL_SEED_SALT = 0x7F4A7C15

REPORT_SCHEMA_VERSION = 1


@dataclass(slots=True)
class RunConfig:
    descriptor: TwinDescriptor
    scenario: ScenarioSpec
    channel: ChannelSpec
    plan: ReplayPlan
    seed: int = 0
    bin_width_micros: int = MICROS_PER_SECOND
    max_lag_bins: int = 30
    reorder_timeout: float = 0.0
    out_dir: Path | None = None
    save_replayed_pcaps: bool = False
    exchange_dir: Path | None = None
    tcp_host: str = "127.0.0.1"
    tcp_port: int | None = None


@dataclass(slots=True)
class RunResult:
    report: FidelityReport
    log: SyncLog
    npt_series: ThroughputSeries
    ndt_series: ThroughputSeries
    align_offset_micros: int
    max_lateness_micros: int
    windows_sent: int
    windows_replayed: int
    packets_replayed: int


def _make_channels(cfg: RunConfig, clock) -> tuple[object, object]:
    """Returns (send endpoint, receive endpoint) for the configured kind."""
    spec = replace(cfg.channel, seed=cfg.seed ^ _CHANNEL_SEED_SALT)
    if spec.kind == "in-process":
        ch = InProcessChannel(spec, clock=clock)
        return ch, ch
    if spec.kind == "directory-exchange":
        if cfg.exchange_dir is None:
            raise ValueError("directory-exchange channel needs an exchange directory")
        sender = DirectoryExchangeChannel(spec, cfg.exchange_dir)
        receiver = DirectoryExchangeChannel(spec, cfg.exchange_dir)
        return sender, receiver
    if spec.kind == "tcp":
        receiver = TcpReceiverChannel(cfg.tcp_host, cfg.tcp_port or 0)
        sender = TcpSenderChannel(spec, cfg.tcp_host, receiver.port)
        return sender, receiver
    raise ValueError(f"unknown channel kind {spec.kind!r}")


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Run the full loop and evaluate twin fidelity.

    Raises StageError naming the failed stage; the sync log collected so
    far is flushed to out_dir before re-raising.
    """
    virtual = cfg.plan.mode is ReplayMode.VIRTUAL
    log = SyncLog()
    try:
        if virtual and cfg.channel.kind != "in-process":
            raise StageError("transport", ValueError(
                "virtual-clock runs use the in-process channel; pick real-time mode for "
                f"the {cfg.channel.kind} channel"))
        return _run(cfg, log, virtual)
    except Exception:
        if cfg.out_dir is not None:
            out = Path(cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "sync_log.csv").write_bytes(log.to_csv_bytes())
        raise


def _run(cfg: RunConfig, log: SyncLog, virtual: bool) -> RunResult:
    scenario = replace(cfg.scenario, seed=cfg.seed)
    window_micros = cfg.descriptor.window_micros

    try:
        trace = generate(scenario)
    except Exception as exc:
        raise StageError("simulate", exc) from exc

    clock = None if virtual else MonotonicClock()
    if virtual:
        origin = scenario.origin_ts_micros
        records = trace.records
    else:
        # Shift the whole trace onto the wall-clock timeline so windows,
        # replay and series all share one time base.
        wall0 = clock.now_micros()
        shift = wall0 - scenario.origin_ts_micros
        records = tuple(replace(r, ts_micros=r.ts_micros + shift) for r in trace.records)
        origin = wall0
    span_end = origin + scenario.duration_micros

    try:
        send_channel, recv_channel = _make_channels(cfg, clock)
    except Exception as exc:
        raise StageError("transport", exc) from exc

    sink = CollectingSink()
    if cfg.save_replayed_pcaps and cfg.out_dir is not None:
        engine_sink = TeeSink(sink, PcapDirectorySink(Path(cfg.out_dir) / "replayed"))
    else:
        engine_sink = sink
    engine = ReplayEngine(cfg.plan, engine_sink, log, clock=clock)

    failures: dict[str, BaseException] = {}
    windows_sent = 0

    def producer():
        nonlocal windows_sent
        try:
            for window in segment_stream(
                records, window_micros, origin, span_end_micros=span_end,
                source_interface=cfg.descriptor.capture_interface,
            ):
                if virtual:
                    now = window.end_ts_micros
                else:
                    wait = window.end_ts_micros - clock.now_micros()
                    if wait > 0:
                        clock.sleep_micros(wait)
                    now = clock.now_micros()
                send_window(window, send_channel, log, now)
                windows_sent += 1
        except BaseException as exc:
            failures["capture"] = exc
        finally:
            send_channel.close_send()

    def consumer():
        try:
            receiver = WindowReceiver(recv_channel, log, reorder_timeout=cfg.reorder_timeout)
            while True:
                delivery = receiver.receive()
                if delivery is None:
                    break
                window, _manifest = delivery
                t_available = log.entry(window.seq).t_received
                engine.replay_window(window, t_available)
        except BaseException as exc:
            failures["replay"] = exc

    producer_thread = threading.Thread(target=producer, name="twinsync-producer")
    consumer_thread = threading.Thread(target=consumer, name="twinsync-consumer")
    producer_thread.start()
    consumer_thread.start()
    producer_thread.join()
    consumer_thread.join()

    if hasattr(recv_channel, "close"):
        recv_channel.close()

    for stage in ("capture", "replay"):
        if stage in failures:
            raise StageError(stage, failures[stage]) from failures[stage]

    try:
        return _evaluate(cfg, log, sink, engine, records, origin,
                         scenario.duration_micros, window_micros, windows_sent)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("metrics", exc) from exc


def _evaluate(cfg, log, sink, engine, records, origin, duration_micros,
              window_micros, windows_sent) -> RunResult:
    align_offset = engine.align_offset_micros or 0

    npt_series = throughput_series(records, cfg.bin_width_micros, origin, duration_micros)
    ndt_series = throughput_series(
        sink.records, cfg.bin_width_micros, origin, duration_micros + max(0, align_offset)
    )
    try:
        comparison = compare_series(npt_series, ndt_series, cfg.max_lag_bins)
    except MetricsError:
        comparison = None

    n_windows = -(-duration_micros // window_micros)
    observation = (origin, origin + n_windows * window_micros)
    tar = twin_alignment_ratio(log, window_micros, observation)
    delivered_in_obs = sum(
        1 for e in log.delivered_entries() if observation[0] < e.t_window_end <= observation[1]
    )
    sync_frequency = delivered_in_obs * MICROS_PER_SECOND / (observation[1] - observation[0])

    try:
        latency = update_latency(log)
    except MetricsError:
        latency = None

    last_replayed = max(
        (e.t_replayed for e in log.entries() if e.t_replayed is not None), default=None
    )
    horizon = observation[1] if last_replayed is None else max(observation[1], last_replayed)
    aoi = age_of_information(log, origin_ts_micros=origin, horizon_micros=horizon)

    consistency = state_consistency_index(cfg.descriptor, emit_bundle(cfg.descriptor))

    report = FidelityReport(
        twin_alignment_ratio=tar,
        mean_update_latency_us=None if latency is None else latency.mean_micros,
        max_update_latency_us=None if latency is None else latency.max_micros,
        mean_age_of_information_us=aoi.mean_micros,
        peak_age_of_information_us=aoi.peak_micros,
        sync_frequency_hz=sync_frequency,
        rmse_bps=None if comparison is None else comparison.rmse_bps,
        nrmse=None if comparison is None else comparison.nrmse,
        pearson_r=None if comparison is None else comparison.pearson_r,
        estimated_lag_us=None if comparison is None else comparison.estimated_lag_micros,
        consistency_index=consistency,
        windows_lost=log.lost_count(),
    )
    max_lateness = max((t.max_lateness_micros for t in sink.traces), default=0)
    return RunResult(
        report=report,
        log=log,
        npt_series=npt_series,
        ndt_series=ndt_series,
        align_offset_micros=align_offset,
        max_lateness_micros=max_lateness,
        windows_sent=windows_sent,
        windows_replayed=len(sink.traces),
        packets_replayed=len(sink.records),
    )


def build_report_document(cfg: RunConfig, result: RunResult) -> bytes:
    """Canonical report JSON: stable key order, no wall-clock content."""
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": {
            "scenario": cfg.scenario.kind,
            "duration_seconds": cfg.scenario.duration_micros / MICROS_PER_SECOND,
            "ue_count": cfg.scenario.ue_count,
            "seed": cfg.seed,
            "window_seconds": cfg.descriptor.window_seconds,
            "mode": cfg.plan.mode.value,
            "speed_factor": cfg.plan.speed_factor,
            "bin_width_us": cfg.bin_width_micros,
            "max_lag_bins": cfg.max_lag_bins,
            "channel": {
                "kind": cfg.channel.kind,
                "latency_us": cfg.channel.latency_us,
                "bandwidth_bps": cfg.channel.bandwidth_bps,
                "loss_probability": cfg.channel.loss_probability,
            },
        },
        "metrics": result.report.as_dict(),
        "replay": {
            "align_offset_us": result.align_offset_micros,
            "max_lateness_us": result.max_lateness_micros,
            "windows_sent": result.windows_sent,
            "windows_replayed": result.windows_replayed,
            "packets_replayed": result.packets_replayed,
        },
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def write_run_artifacts(cfg: RunConfig, result: RunResult, report_path: Path) -> list[Path]:
    """Write the report JSON plus the plot-ready CSV artifacts."""
    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else Path(report_path).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    written = []
    report_path.write_bytes(build_report_document(cfg, result))
    written.append(report_path)
    for name, payload in (
        ("npt_throughput.csv", result.npt_series.to_csv_bytes()),
        ("ndt_throughput.csv", result.ndt_series.to_csv_bytes()),
        ("sync_log.csv", result.log.to_csv_bytes()),
        ("report.csv", result.report.to_csv_bytes()),
    ):
        path = out_dir / name
        path.write_bytes(payload)
        written.append(path)
    return written
