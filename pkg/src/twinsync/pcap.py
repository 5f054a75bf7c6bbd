"""Bit-exact classic pcap reading/writing and windowed segmentation.

The writer always emits little-endian, microsecond-resolution pcap
(magic 0xa1b2c3d4, version 2.4) so output is byte-deterministic. The
reader additionally accepts the opposite byte order and the
nanosecond-resolution magic 0xa1b23c4d, truncating nanoseconds to
microseconds (truncation is monotone, so packet order is preserved).
"""

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import BadMagicError, PcapError, PcapWriteError, TimestampRegressionError, TruncatedRecordError
from .model import Direction, PacketRecord

PCAP_MAGIC_MICROS = 0xA1B2C3D4
PCAP_MAGIC_NANOS = 0xA1B23C4D
DEFAULT_SNAPLEN = 65535
LINKTYPE_RAW_IP = 101

_GLOBAL_HEADER = struct.Struct("<IHHiIII")
_GLOBAL_HEADER_LEN = 24
_RECORD_HEADER_LEN = 16


@dataclass(frozen=True, slots=True)
class CaptureWindow:
    """One T-second segment of the capture stream, the unit of sync.

    Windows abut without gaps; ``seq`` counts from 0 with no holes on the
    sending side (holes appear downstream only through loss).
    """

    seq: int
    start_ts_micros: int
    end_ts_micros: int
    packets: tuple[PacketRecord, ...]
    source_interface: str = "tun2"

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        if self.seq < 0:
            raise ValueError("seq must be non-negative")
        if self.end_ts_micros <= self.start_ts_micros:
            raise ValueError("window must have positive duration")
        prev = None
        for p in self.packets:
            if not self.start_ts_micros <= p.ts_micros < self.end_ts_micros:
                raise ValueError(f"packet ts {p.ts_micros} outside window [{self.start_ts_micros}, {self.end_ts_micros})")
            if prev is not None and p.ts_micros < prev:
                raise ValueError("packet timestamps must be non-decreasing")
            prev = p.ts_micros

    @property
    def duration_micros(self) -> int:
        return self.end_ts_micros - self.start_ts_micros


def write_pcap(linktype: int, packets: Sequence[PacketRecord], snaplen: int = DEFAULT_SNAPLEN) -> bytes:
    """Serialize packets into a classic pcap byte string.

    Output is deterministic: same packets, same bytes.
    """
    parts = [_GLOBAL_HEADER.pack(PCAP_MAGIC_MICROS, 2, 4, 0, 0, snaplen, linktype)]
    for i, p in enumerate(packets):
        if p.captured_len > snaplen:
            raise PcapWriteError(i, f"captured_len {p.captured_len} exceeds snaplen {snaplen}")
        sec, usec = divmod(p.ts_micros, 1_000_000)
        if sec > 0xFFFFFFFF:
            raise PcapWriteError(i, "timestamp beyond 32-bit seconds")
        parts.append(struct.pack("<IIII", sec, usec, p.captured_len, p.original_len))
        parts.append(p.payload)
    return b"".join(parts)


def read_pcap(data: bytes) -> tuple[int, list[PacketRecord]]:
    """Parse a classic pcap byte string into (linktype, packets).

    Accepts both byte orders and both the microsecond and nanosecond
    magics. Direction is Unknown: the file format does not carry it.
    """
    if len(data) < _GLOBAL_HEADER_LEN:
        raise TruncatedRecordError(len(data), "global header")
    magic_raw = struct.unpack_from("<I", data)[0]
    if magic_raw == PCAP_MAGIC_MICROS:
        order, nanos = "<", False
    elif magic_raw == PCAP_MAGIC_NANOS:
        order, nanos = "<", True
    else:
        magic_be = struct.unpack_from(">I", data)[0]
        if magic_be == PCAP_MAGIC_MICROS:
            order, nanos = ">", False
        elif magic_be == PCAP_MAGIC_NANOS:
            order, nanos = ">", True
        else:
            raise BadMagicError(magic_raw)
    _, _, _, _, _, linktype = struct.unpack_from(order + "HHiIII", data, 4)

    records: list[PacketRecord] = []
    offset = _GLOBAL_HEADER_LEN
    rec_hdr = struct.Struct(order + "IIII")
    while offset < len(data):
        if len(data) - offset < _RECORD_HEADER_LEN:
            raise TruncatedRecordError(offset)
        sec, frac, incl_len, orig_len = rec_hdr.unpack_from(data, offset)
        end = offset + _RECORD_HEADER_LEN + incl_len
        if end > len(data):
            raise TruncatedRecordError(offset)
        if incl_len > orig_len:
            raise PcapError(f"incl_len {incl_len} exceeds orig_len {orig_len} at byte offset {offset}")
        micros = sec * 1_000_000 + (frac // 1000 if nanos else frac)
        records.append(
            PacketRecord(
                ts_micros=micros,
                captured_len=incl_len,
                original_len=orig_len,
                payload=data[offset + _RECORD_HEADER_LEN:end],
                direction=Direction.UNKNOWN,
            )
        )
        offset = end
    return linktype, records


def segment_stream(
    packets: Iterable[PacketRecord],
    window_micros: int,
    origin_ts_micros: int,
    span_end_micros: int | None = None,
    source_interface: str = "tun2",
) -> Iterator[CaptureWindow]:
    """Split a time-ordered packet stream into gapless capture windows.

    Window k covers [origin + k*T, origin + (k+1)*T); a packet exactly on
    a boundary lands in the later window. Empty windows are emitted too,
    so the sync cadence is independent of traffic presence. When
    ``span_end_micros`` is given, windows are produced until the whole
    span is covered and the final window may be shorter than T; without
    it, segmentation stops at the (full) window holding the last packet.
    """
    if window_micros <= 0:
        raise ValueError("window_micros must be positive")
    if span_end_micros is not None and span_end_micros <= origin_ts_micros:
        raise ValueError("span_end_micros must lie after the origin")

    seq = 0
    cur_start = origin_ts_micros
    cur_packets: list[PacketRecord] = []
    prev_ts: int | None = None

    def close(end_ts: int) -> CaptureWindow:
        nonlocal seq, cur_start, cur_packets
        window = CaptureWindow(seq, cur_start, end_ts, tuple(cur_packets), source_interface)
        seq += 1
        cur_start = end_ts
        cur_packets = []
        return window

    for index, p in enumerate(packets):
        if prev_ts is not None and p.ts_micros < prev_ts:
            raise TimestampRegressionError(index)
        if p.ts_micros < origin_ts_micros:
            raise TimestampRegressionError(index, "timestamp before stream origin")
        if span_end_micros is not None and p.ts_micros >= span_end_micros:
            raise TimestampRegressionError(index, "timestamp beyond span end")
        prev_ts = p.ts_micros
        while p.ts_micros >= cur_start + window_micros:
            yield close(cur_start + window_micros)
        cur_packets.append(p)

    if span_end_micros is None:
        if cur_packets:
            yield close(cur_start + window_micros)
    else:
        while cur_start < span_end_micros:
            yield close(min(cur_start + window_micros, span_end_micros))
