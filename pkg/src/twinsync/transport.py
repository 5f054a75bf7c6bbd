"""Window transfer between the physical side and the twin side.

The transfer contract is deliberately narrow: ordered-ish delivery of
(manifest, pcap bytes) pairs with measurable delay and possible loss.
Three interchangeable channels implement it:

* InProcessChannel - a queue with simulated latency, serialization delay
  and seeded loss; the deterministic backbone of tests and virtual runs.
* DirectoryExchangeChannel - windows published as files in a shared
  directory (``window_<seq>.pcap`` + ``window_<seq>.manifest.json``),
  mirroring a fetch-the-latest-capture-folder deployment.
* TCP sender/receiver - length-prefixed frames over a socket for
  two-process runs.

Lost windows are never retransmitted: the twin always wants the most
recent trace, and the gap stays visible to the metrics.
"""

import hashlib
import json
import queue
import random
import socket
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .clocks import Clock, MonotonicClock
from .errors import ChannelClosedError, DigestMismatchError, SchemaError, TwinError
from .pcap import LINKTYPE_RAW_IP, CaptureWindow, read_pcap, write_pcap

DIGEST_ALGORITHM = "sha256"


def _digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True, slots=True)
class WindowManifest:
    """Integrity envelope shipped alongside each window's pcap bytes."""

    seq: int
    start_ts_micros: int
    end_ts_micros: int
    byte_length: int
    content_digest: str
    digest_algorithm: str = DIGEST_ALGORITHM
    source_interface: str = "tun2"

    def to_json(self) -> bytes:
        doc = {
            "seq": self.seq,
            "start_ts_micros": self.start_ts_micros,
            "end_ts_micros": self.end_ts_micros,
            "byte_length": self.byte_length,
            "content_digest": self.content_digest,
            "digest_algorithm": self.digest_algorithm,
            "source_interface": self.source_interface,
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")

    @classmethod
    def from_json(cls, data: bytes) -> "WindowManifest":
        doc = json.loads(data.decode("utf-8"))
        try:
            return cls(
                seq=doc["seq"],
                start_ts_micros=doc["start_ts_micros"],
                end_ts_micros=doc["end_ts_micros"],
                byte_length=doc["byte_length"],
                content_digest=doc["content_digest"],
                digest_algorithm=doc["digest_algorithm"],
                source_interface=doc["source_interface"],
            )
        except KeyError as exc:
            raise SchemaError(str(exc.args[0]), "missing in window manifest") from exc


def pack_window(window: CaptureWindow, linktype: int = LINKTYPE_RAW_IP) -> tuple[WindowManifest, bytes]:
    """Serialize a window for transfer: pcap payload plus its manifest."""
    payload = write_pcap(linktype, window.packets)
    manifest = WindowManifest(
        seq=window.seq,
        start_ts_micros=window.start_ts_micros,
        end_ts_micros=window.end_ts_micros,
        byte_length=len(payload),
        content_digest=_digest(payload),
        source_interface=window.source_interface,
    )
    return manifest, payload


def unpack_window(manifest: WindowManifest, payload: bytes) -> CaptureWindow:
    """Verify the digest and rebuild the window from its pcap payload."""
    if len(payload) != manifest.byte_length or _digest(payload) != manifest.content_digest:
        raise DigestMismatchError(manifest.seq)
    _, records = read_pcap(payload)
    return CaptureWindow(
        seq=manifest.seq,
        start_ts_micros=manifest.start_ts_micros,
        end_ts_micros=manifest.end_ts_micros,
        packets=tuple(records),
        source_interface=manifest.source_interface,
    )


@dataclass(frozen=True, slots=True)
class ChannelSpec:
    """Tuning knobs of a transfer channel.

    ``bandwidth_bps`` of 0 means no serialization delay. Loss draws come
    from ``seed``, so a run is reproducible down to which windows vanish.
    """

    kind: str = "in-process"  # in-process | directory-exchange | tcp
    latency_us: int = 0
    bandwidth_bps: int = 0
    loss_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")
        if self.latency_us < 0 or self.bandwidth_bps < 0:
            raise ValueError("latency and bandwidth must be non-negative")


@dataclass(frozen=True, slots=True)
class SendReceipt:
    seq: int
    t_sent_micros: int
    dropped: bool
    expected_arrival_micros: int | None


@dataclass(slots=True)
class SyncLogEntry:
    """Timeline of one window through the loop; fields fill in as it moves."""

    seq: int
    t_window_start: int
    t_window_end: int
    t_sent: int | None = None
    t_received: int | None = None
    t_replayed: int | None = None
    lost: bool = False


class SyncLog:
    """Per-window timeline, appended by sender and receiver.

    A single lock serializes writers; reads return copies, so the metrics
    can run while a live pipeline keeps appending.
    """

    def __init__(self):
        self._entries: dict[int, SyncLogEntry] = {}
        self._lock = threading.Lock()

    def _entry(self, seq: int, start: int | None = None, end: int | None = None) -> SyncLogEntry:
        entry = self._entries.get(seq)
        if entry is None:
            entry = SyncLogEntry(seq, start if start is not None else 0, end if end is not None else 0)
            self._entries[seq] = entry
        elif start is not None and entry.t_window_start == 0 and entry.t_window_end == 0:
            entry.t_window_start = start
            entry.t_window_end = end if end is not None else 0
        return entry

    def record_sent(self, seq: int, t_window_start: int, t_window_end: int, t_sent: int) -> None:
        with self._lock:
            entry = self._entry(seq, t_window_start, t_window_end)
            entry.t_window_start = t_window_start
            entry.t_window_end = t_window_end
            entry.t_sent = t_sent

    def record_received(self, seq: int, t_received: int, t_window_start: int | None = None,
                        t_window_end: int | None = None) -> None:
        with self._lock:
            self._entry(seq, t_window_start, t_window_end).t_received = t_received

    def record_replayed(self, seq: int, t_replayed: int) -> None:
        with self._lock:
            self._entry(seq).t_replayed = t_replayed

    def mark_lost(self, seq: int, t_window_start: int | None = None, t_window_end: int | None = None) -> None:
        with self._lock:
            self._entry(seq, t_window_start, t_window_end).lost = True

    def entry(self, seq: int) -> SyncLogEntry:
        with self._lock:
            if seq not in self._entries:
                raise KeyError(f"no sync-log entry for window {seq}")
            e = self._entries[seq]
            return SyncLogEntry(e.seq, e.t_window_start, e.t_window_end, e.t_sent, e.t_received, e.t_replayed, e.lost)

    def entries(self) -> list[SyncLogEntry]:
        with self._lock:
            return [
                SyncLogEntry(e.seq, e.t_window_start, e.t_window_end, e.t_sent, e.t_received, e.t_replayed, e.lost)
                for e in sorted(self._entries.values(), key=lambda e: e.seq)
            ]

    def delivered_entries(self) -> list[SyncLogEntry]:
        return [e for e in self.entries() if e.t_received is not None and not e.lost]

    def lost_count(self) -> int:
        return sum(1 for e in self.entries() if e.lost)

    def check_ordering(self) -> list[int]:
        """Seqs whose timestamps violate end <= sent <= received <= replayed."""
        bad = []
        for e in self.entries():
            stamps = [e.t_window_end, e.t_sent, e.t_received, e.t_replayed]
            present = [s for s in stamps if s is not None]
            if any(b < a for a, b in zip(present, present[1:])):
                bad.append(e.seq)
        return bad

    def to_csv_bytes(self) -> bytes:
        lines = ["seq,t_window_start,t_window_end,t_sent,t_received,t_replayed,lost"]
        for e in self.entries():
            def cell(v):
                return "" if v is None else str(v)
            lines.append(
                f"{e.seq},{e.t_window_start},{e.t_window_end},{cell(e.t_sent)},{cell(e.t_received)},{cell(e.t_replayed)},{int(e.lost)}"
            )
        return ("\n".join(lines) + "\n").encode("utf-8")


def twin_lag(log: SyncLog, seq: int) -> int:
    """Total age of a replayed window: replay completion minus window start.

    Equals the window length T plus all transfer and replay delay past
    the window's end.
    """
    entry = log.entry(seq)
    if entry.t_replayed is None:
        raise ValueError(f"window {seq} has not been replayed")
    return entry.t_replayed - entry.t_window_start


_END_OF_STREAM = object()


class InProcessChannel:
    """Single-producer/single-consumer queue with a simulated link.

    Delivery time models a serialized pipe: transmission starts once the
    previous window finished transmitting, takes bytes*8/bandwidth, and
    propagation adds a fixed latency. Without a clock the computed
    arrival timestamp is simply carried with the delivery (virtual time);
    with a clock the receiver actually waits for it.
    """

    def __init__(self, spec: ChannelSpec, clock: Clock | None = None):
        self.spec = spec
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._rng = random.Random(spec.seed)
        self._clock = clock
        self._link_free_at: int | None = None
        self._send_closed = False

    def send(self, manifest: WindowManifest, payload: bytes, now_micros: int) -> SendReceipt:
        if self._send_closed:
            raise ChannelClosedError("send on closed channel")
        if self._rng.random() < self.spec.loss_probability:
            return SendReceipt(manifest.seq, now_micros, True, None)
        if self.spec.bandwidth_bps > 0:
            tx = -(-len(payload) * 8 * 1_000_000 // self.spec.bandwidth_bps)
        else:
            tx = 0
        start = now_micros if self._link_free_at is None else max(now_micros, self._link_free_at)
        arrival = start + tx + self.spec.latency_us
        self._link_free_at = start + tx
        self._queue.put((manifest, payload, arrival))
        return SendReceipt(manifest.seq, now_micros, False, arrival)

    def close_send(self) -> None:
        self._send_closed = True
        self._queue.put(_END_OF_STREAM)

    def receive(self, timeout: float | None = None) -> tuple[WindowManifest, bytes, int] | None:
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no window within timeout")
        if item is _END_OF_STREAM:
            return None
        manifest, payload, arrival = item
        if self._clock is not None:
            wait = arrival - self._clock.now_micros()
            if wait > 0:
                self._clock.sleep_micros(wait)
            arrival = max(arrival, self._clock.now_micros())
        return manifest, payload, arrival


class DirectoryExchangeChannel:
    """Windows exchanged as pcap+manifest file pairs in one directory.

    The manifest is written last via rename, so its presence marks a
    fully published window. ``end.marker`` closes the stream. Loss is
    simulated on the sending side; latency/bandwidth shaping is not
    (real file systems provide their own delays).
    """

    POLL_SECONDS = 0.02

    def __init__(self, spec: ChannelSpec, directory: Path, clock: Clock | None = None):
        self.spec = spec
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._rng = random.Random(spec.seed)
        self._clock = clock or MonotonicClock()
        self._send_closed = False
        self._picked: set[int] = set()

    def send(self, manifest: WindowManifest, payload: bytes, now_micros: int) -> SendReceipt:
        if self._send_closed:
            raise ChannelClosedError("send on closed channel")
        if self._rng.random() < self.spec.loss_probability:
            return SendReceipt(manifest.seq, now_micros, True, None)
        pcap_path = self.directory / f"window_{manifest.seq}.pcap"
        manifest_path = self.directory / f"window_{manifest.seq}.manifest.json"
        pcap_path.write_bytes(payload)
        tmp = manifest_path.with_suffix(".json.tmp")
        tmp.write_bytes(manifest.to_json())
        tmp.rename(manifest_path)
        return SendReceipt(manifest.seq, now_micros, False, None)

    def close_send(self) -> None:
        self._send_closed = True
        (self.directory / "end.marker").write_bytes(b"")

    def _pending(self) -> list[int]:
        seqs = []
        for path in self.directory.glob("window_*.manifest.json"):
            try:
                seq = int(path.name.split("_")[1].split(".")[0])
            except ValueError:
                continue
            if seq not in self._picked:
                seqs.append(seq)
        return sorted(seqs)

    def receive(self, timeout: float | None = None) -> tuple[WindowManifest, bytes, int] | None:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            pending = self._pending()
            if pending:
                seq = pending[0]
                manifest = WindowManifest.from_json((self.directory / f"window_{seq}.manifest.json").read_bytes())
                payload = (self.directory / f"window_{seq}.pcap").read_bytes()
                self._picked.add(seq)
                return manifest, payload, self._clock.now_micros()
            if (self.directory / "end.marker").exists():
                return None
            if deadline is not None and time.monotonic() >= deadline:
                raise TimeoutError("no window within timeout")
            time.sleep(self.POLL_SECONDS)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class TcpSenderChannel:
    """Sending half of the TCP transport.

    Frame layout: 4-byte big-endian manifest length, manifest JSON,
    4-byte big-endian payload length, pcap bytes.
    """

    def __init__(self, spec: ChannelSpec, host: str, port: int):
        self.spec = spec
        self._rng = random.Random(spec.seed)
        self._sock = socket.create_connection((host, port), timeout=10)
        self._closed = False

    def send(self, manifest: WindowManifest, payload: bytes, now_micros: int) -> SendReceipt:
        if self._closed:
            raise ChannelClosedError("send on closed channel")
        if self._rng.random() < self.spec.loss_probability:
            return SendReceipt(manifest.seq, now_micros, True, None)
        blob = manifest.to_json()
        frame = len(blob).to_bytes(4, "big") + blob + len(payload).to_bytes(4, "big") + payload
        self._sock.sendall(frame)
        return SendReceipt(manifest.seq, now_micros, False, None)

    def close_send(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._sock.shutdown(socket.SHUT_WR)
            except OSError:
                pass
            self._sock.close()


class TcpReceiverChannel:
    """Receiving half of the TCP transport; accepts exactly one sender."""

    def __init__(self, bind_host: str = "127.0.0.1", port: int = 0, clock: Clock | None = None):
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((bind_host, port))
        self._listener.listen(1)
        self._conn: socket.socket | None = None
        self._clock = clock or MonotonicClock()

    @property
    def port(self) -> int:
        return self._listener.getsockname()[1]

    @staticmethod
    def _sock_timeout(timeout: float | None) -> float | None:
        # 0 would mean non-blocking; clamp to a short real timeout instead.
        if timeout is not None and timeout <= 0:
            return 0.001
        return timeout

    def _ensure_conn(self, timeout: float | None):
        if self._conn is None:
            self._listener.settimeout(self._sock_timeout(timeout))
            try:
                self._conn, _ = self._listener.accept()
            except socket.timeout:
                raise TimeoutError("no sender connected within timeout")

    def receive(self, timeout: float | None = None) -> tuple[WindowManifest, bytes, int] | None:
        self._ensure_conn(timeout)
        assert self._conn is not None
        self._conn.settimeout(self._sock_timeout(timeout))
        try:
            header = _recv_exact(self._conn, 4)
            if header is None:
                return None
            manifest_blob = _recv_exact(self._conn, int.from_bytes(header, "big"))
            if manifest_blob is None:
                raise TwinError("connection closed mid-frame")
            length = _recv_exact(self._conn, 4)
            if length is None:
                raise TwinError("connection closed mid-frame")
            payload = _recv_exact(self._conn, int.from_bytes(length, "big"))
            if payload is None:
                raise TwinError("connection closed mid-frame")
        except socket.timeout:
            raise TimeoutError("no window within timeout")
        return WindowManifest.from_json(manifest_blob), payload, self._clock.now_micros()

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
        self._listener.close()


def send_window(window: CaptureWindow, channel, log: SyncLog, now_micros: int,
                linktype: int = LINKTYPE_RAW_IP) -> SendReceipt:
    """Pack and send one window, recording its send time in the log."""
    manifest, payload = pack_window(window, linktype)
    log.record_sent(window.seq, window.start_ts_micros, window.end_ts_micros, now_micros)
    receipt = channel.send(manifest, payload, now_micros)
    if receipt.dropped:
        log.mark_lost(window.seq, window.start_ts_micros, window.end_ts_micros)
    return receipt


class WindowReceiver:
    """Delivers windows in seq order, turning gaps into recorded losses.

    A window arriving ahead of a hole is buffered while the hole is given
    ``reorder_timeout`` seconds to show up; then the hole is declared
    lost and delivery resumes. FIFO channels can use a timeout of 0: once
    a later seq arrives, the earlier one can no longer be in flight.
    """

    def __init__(self, channel, log: SyncLog, reorder_timeout: float = 0.0):
        self.channel = channel
        self.log = log
        self.reorder_timeout = reorder_timeout
        self._expected = 0
        self._buffer: dict[int, tuple[WindowManifest, bytes, int]] = {}
        self._eos = False
        self.digest_failures = 0

    def _declare_holes_until(self, seq: int) -> None:
        while self._expected < seq:
            self.log.mark_lost(self._expected)
            self._expected += 1

    def _take(self, manifest: WindowManifest, payload: bytes, arrival: int) -> tuple[CaptureWindow, WindowManifest] | None:
        self._expected = manifest.seq + 1
        self.log.record_received(manifest.seq, arrival, manifest.start_ts_micros, manifest.end_ts_micros)
        try:
            window = unpack_window(manifest, payload)
        except DigestMismatchError:
            self.digest_failures += 1
            self.log.mark_lost(manifest.seq, manifest.start_ts_micros, manifest.end_ts_micros)
            return None
        return window, manifest

    def receive(self) -> tuple[CaptureWindow, WindowManifest] | None:
        """Next in-order window, or None at end of stream."""
        while True:
            if self._expected in self._buffer:
                manifest, payload, arrival = self._buffer.pop(self._expected)
                taken = self._take(manifest, payload, arrival)
                if taken is not None:
                    return taken
                continue
            if self._eos:
                if not self._buffer:
                    return None
                self._declare_holes_until(min(self._buffer))
                continue
            timeout = self.reorder_timeout if self._buffer else None
            try:
                delivery = self.channel.receive(timeout=timeout)
            except TimeoutError:
                self._declare_holes_until(min(self._buffer))
                continue
            if delivery is None:
                self._eos = True
                continue
            manifest, payload, arrival = delivery
            if manifest.seq < self._expected:
                continue  # duplicate or already written off
            if manifest.seq > self._expected:
                self._buffer[manifest.seq] = (manifest, payload, arrival)
                if self.reorder_timeout == 0:
                    self._declare_holes_until(manifest.seq)
                continue
            taken = self._take(manifest, payload, arrival)
            if taken is not None:
                return taken
