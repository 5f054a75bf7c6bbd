"""Deterministic traffic generation standing in for the physical network.

Four scenario kinds cover the demo workloads end to end: phones
attaching then browsing, video streaming, a voice call between two
phones, and a live video upload. The shapes are first-order models
(attach burst, Poisson page events with paced download bursts, on/off
chunk fetching, constant-rate RTP-like voice, jittered constant-rate
upload) whose parameters are all ScenarioSpec fields.

Packets carry synthetic IPv4/UDP headers with correct length fields and
pseudo-random fill; there is no protocol stack behind them. Throughput
and fidelity metrics depend only on sizes and times, which are exact.
Identical (spec, seed) pairs generate byte-identical traces.
"""

import math
import random
import struct
from dataclasses import dataclass
from typing import Iterator

from .clocks import Clock
from .errors import TwinError
from .model import MICROS_PER_SECOND, Direction, PacketRecord

SCENARIO_KINDS = ("attach-and-browse", "video-streaming", "voice-call", "live-upload")

# Operator-facing aliases used on the command line.
CLI_SCENARIO_NAMES = {
    "browse": "attach-and-browse",
    "stream": "video-streaming",
    "voice": "voice-call",
    "live-upload": "live-upload",
}

_SERVER_IP = bytes([203, 0, 113, 1])
_IP_UDP_HEADER_LEN = 28
_MAX_IPV4_LEN = 65535


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    """One workload to simulate; per-kind knobs have sensible defaults."""

    kind: str
    duration_micros: int
    seed: int = 0
    ue_count: int = 2
    origin_ts_micros: int = 0
    # attach-and-browse
    attach_packets: int = 40
    attach_span_micros: int = 2 * MICROS_PER_SECOND
    attach_packet_bytes: int = 120
    page_mean_interval_micros: int = 8 * MICROS_PER_SECOND
    page_mean_bytes: int = 1_500_000
    page_sigma: float = 0.5
    browse_pacing_bps: int = 10_000_000
    # video-streaming
    stream_on_micros: int = 2 * MICROS_PER_SECOND
    stream_off_micros: int = 2 * MICROS_PER_SECOND
    stream_rate_bps: int = 5_000_000
    # voice-call
    voice_packet_bytes: int = 172
    voice_pps: int = 50
    # live-upload
    upload_rate_bps: int = 3_000_000
    upload_jitter: float = 0.2
    ack_interval_micros: int = 50_000
    ack_bytes: int = 60
    # shared
    data_packet_bytes: int = 1200
    snap_bytes: int = 96

    def validate(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.duration_micros <= 0:
            raise ValueError("duration must be positive")
        minimum = 2 if self.kind == "voice-call" else 1
        if self.ue_count < minimum:
            raise ValueError(f"{self.kind} needs at least {minimum} UEs, got {self.ue_count}")


@dataclass(frozen=True, slots=True)
class GeneratedTrace:
    scenario: ScenarioSpec
    seed: int
    records: tuple[PacketRecord, ...]


def _ue_ip(ue: int) -> bytes:
    return bytes([10, 45, 1 + ue // 250, 2 + ue % 250])


def _packet(
    ts_micros: int,
    total_len: int,
    direction: Direction,
    ue: int,
    port: int,
    rng: random.Random,
    snap: int,
) -> PacketRecord:
    total_len = max(total_len, _IP_UDP_HEADER_LEN)
    if total_len > _MAX_IPV4_LEN:
        raise ValueError(f"packet of {total_len} bytes exceeds the IPv4 limit")
    if direction is Direction.UPLINK:
        src, dst = _ue_ip(ue), _SERVER_IP
        sport, dport = 40_000 + ue, port
    else:
        src, dst = _SERVER_IP, _ue_ip(ue)
        sport, dport = port, 40_000 + ue
    header = struct.pack(
        ">BBHHHBBH4s4s", 0x45, 0, total_len, rng.getrandbits(16), 0, 64, 17, 0, src, dst
    ) + struct.pack(">HHHH", sport, dport, total_len - 20, 0)
    captured = min(total_len, snap)
    if captured <= len(header):
        payload = header[:captured]
    else:
        payload = header + rng.randbytes(captured - len(header))
    return PacketRecord(ts_micros, captured, total_len, payload, direction)


def _gen_attach_and_browse(spec: ScenarioSpec, rng: random.Random) -> list[PacketRecord]:
    origin = spec.origin_ts_micros
    end = origin + spec.duration_micros
    out: list[PacketRecord] = []
    spacing = spec.attach_span_micros / spec.attach_packets
    mu = math.log(spec.page_mean_bytes) - spec.page_sigma ** 2 / 2
    for ue in range(spec.ue_count):
        stagger = int(spacing * ue / spec.ue_count)
        for k in range(spec.attach_packets):
            ts = origin + int(k * spacing) + stagger
            if ts >= end:
                break
            direction = Direction.UPLINK if k % 2 == 0 else Direction.DOWNLINK
            out.append(_packet(ts, spec.attach_packet_bytes, direction, ue, 3868, rng, spec.snap_bytes))
        # Page fetches only start once the control-plane burst is over.
        t = origin + spec.attach_span_micros
        while True:
            t += int(rng.expovariate(1.0) * spec.page_mean_interval_micros) + 1
            if t >= end:
                break
            out.append(_packet(t, 400, Direction.UPLINK, ue, 443, rng, spec.snap_bytes))
            size = int(rng.lognormvariate(mu, spec.page_sigma))
            size = min(max(size, 10_000), 20_000_000)
            n = -(-size // spec.data_packet_bytes)
            burst_micros = size * 8 * MICROS_PER_SECOND / spec.browse_pacing_bps
            gap = burst_micros / n
            remainder = size - (n - 1) * spec.data_packet_bytes
            for i in range(n):
                ts = t + 200 + int(i * gap)
                if ts >= end:
                    break
                length = spec.data_packet_bytes if i < n - 1 else remainder
                out.append(_packet(ts, length, Direction.DOWNLINK, ue, 443, rng, spec.snap_bytes))
    return out


def _gen_video_streaming(spec: ScenarioSpec, rng: random.Random) -> list[PacketRecord]:
    origin = spec.origin_ts_micros
    end = origin + spec.duration_micros
    period = spec.stream_on_micros + spec.stream_off_micros
    chunk_bytes = spec.stream_rate_bps * spec.stream_on_micros // (8 * MICROS_PER_SECOND)
    n = -(-chunk_bytes // spec.data_packet_bytes)
    gap = spec.stream_on_micros / n
    out: list[PacketRecord] = []
    for ue in range(spec.ue_count):
        chunk = 0
        while True:
            start = origin + chunk * period
            if start >= end:
                break
            out.append(_packet(start, 200, Direction.UPLINK, ue, 443, rng, spec.snap_bytes))
            for i in range(n):
                ts = start + 100 + int(i * gap)
                if ts >= min(start + spec.stream_on_micros, end):
                    break
                out.append(_packet(ts, spec.data_packet_bytes, Direction.DOWNLINK, ue, 443, rng, spec.snap_bytes))
            chunk += 1
    return out


def _gen_voice_call(spec: ScenarioSpec, rng: random.Random) -> list[PacketRecord]:
    # One call between the first two phones: a constant-rate stream each
    # way, half a period out of phase.
    origin = spec.origin_ts_micros
    end = origin + spec.duration_micros
    period = MICROS_PER_SECOND // spec.voice_pps
    out: list[PacketRecord] = []
    for offset, direction, ue in ((0, Direction.UPLINK, 0), (period // 2, Direction.DOWNLINK, 1)):
        k = 0
        while True:
            ts = origin + offset + k * period
            if ts >= end:
                break
            out.append(_packet(ts, spec.voice_packet_bytes, direction, ue, 5060, rng, spec.snap_bytes))
            k += 1
    return out


def _gen_live_upload(spec: ScenarioSpec, rng: random.Random) -> list[PacketRecord]:
    origin = spec.origin_ts_micros
    end = origin + spec.duration_micros
    out: list[PacketRecord] = []
    second = 0
    while True:
        sec_start = origin + second * MICROS_PER_SECOND
        if sec_start >= end:
            break
        sec_len = min(MICROS_PER_SECOND, end - sec_start)
        rate = spec.upload_rate_bps * (1.0 + rng.uniform(-spec.upload_jitter, spec.upload_jitter))
        sec_bytes = rate * sec_len / (8 * MICROS_PER_SECOND)
        n = max(1, int(sec_bytes // spec.data_packet_bytes))
        gap = sec_len / n
        for i in range(n):
            ts = sec_start + int(i * gap)
            if ts >= end:
                break
            out.append(_packet(ts, spec.data_packet_bytes, Direction.UPLINK, 0, 1935, rng, spec.snap_bytes))
        second += 1
    ts = origin
    while ts < end:
        out.append(_packet(ts, spec.ack_bytes, Direction.DOWNLINK, 0, 1935, rng, spec.snap_bytes))
        ts += spec.ack_interval_micros
    return out


_GENERATORS = {
    "attach-and-browse": _gen_attach_and_browse,
    "video-streaming": _gen_video_streaming,
    "voice-call": _gen_voice_call,
    "live-upload": _gen_live_upload,
}


def generate(spec: ScenarioSpec) -> GeneratedTrace:
    """Produce the full trace for a scenario. Pure: no global state."""
    spec.validate()
    rng = random.Random(spec.seed)
    records = _GENERATORS[spec.kind](spec, rng)
    records.sort(key=lambda r: r.ts_micros)  # stable, so ties keep build order
    return GeneratedTrace(scenario=spec, seed=spec.seed, records=tuple(records))


def stream_live(spec: ScenarioSpec, clock: Clock, speed_factor: float = 1.0) -> Iterator[PacketRecord]:
    """Emit the same trace as generate(), paced against a clock.

    speed_factor > 1 compresses wall time. Interrupting the iterator
    yields a clean prefix of the full trace.
    """
    if speed_factor <= 0:
        raise ValueError("speed_factor must be positive")
    trace = generate(spec)
    wall_start = clock.now_micros()
    last_now = wall_start
    for record in trace.records:
        target = wall_start + int((record.ts_micros - spec.origin_ts_micros) / speed_factor)
        now = clock.now_micros()
        if now < last_now:
            raise TwinError("clock regression during live streaming")
        last_now = now
        if target > now:
            clock.sleep_micros(target - now)
        yield record


def volume_bytes(records, direction: Direction | None = None) -> int:
    """Total original bytes, optionally filtered by direction."""
    return sum(r.original_len for r in records if direction is None or r.direction is direction)
