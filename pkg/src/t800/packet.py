"""IPv4/TCP header model, wire codec, feature extraction and classic pcap I/O.

Packets are modelled after lwIP's ``pbuf``: a parsed header, the payload
length and an optional link to the next buffer of a sequence. Everything
here is immutable and side-effect free, so it is safe to share across
threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntFlag
from typing import BinaryIO, Iterable, Iterator, Optional

import numpy as np

IPPROTO_TCP = 6
MIN_IP_HEADER = 20
MIN_TCP_HEADER = 20

LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_IPV4 = 228
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_NS = 0xA1B23C4D


class PacketError(ValueError):
    """Base class for packet decoding failures."""


class Truncated(PacketError):
    pass


class NotIPv4(PacketError):
    pass


class NotTCP(PacketError):
    pass


class MalformedHeader(PacketError):
    """Header lengths that cannot describe a valid packet (ihl < 5 and the like)."""


class PcapError(ValueError):
    pass


class BadMagic(PcapError):
    pass


class CorruptRecord(PcapError):
    pass


class TcpFlags(IntFlag):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20
    ECE = 0x40
    CWR = 0x80


@dataclass(frozen=True)
class PacketHeader:
    src_addr: int
    dst_addr: int
    src_port: int
    dst_port: int
    tcp_flags: TcpFlags = TcpFlags(0)
    seq: int = 0
    ack: int = 0
    window: int = 0
    urgent_ptr: int = 0
    data_offset: int = 5
    ip_version: int = 4
    ihl: int = 5
    tos: int = 0
    total_length: int = 40
    identification: int = 0
    flag_df: bool = False
    flag_mf: bool = False
    frag_offset: int = 0
    ttl: int = 64
    protocol: int = IPPROTO_TCP

    def __post_init__(self):
        object.__setattr__(self, "tcp_flags", TcpFlags(self.tcp_flags))
        if self.ip_version != 4:
            raise NotIPv4(f"ip_version={self.ip_version}")
        if self.protocol != IPPROTO_TCP:
            raise NotTCP(f"protocol={self.protocol}")
        for name, bits in _FIELD_BITS.items():
            value = getattr(self, name)
            if not 0 <= value < (1 << bits):
                raise MalformedHeader(f"{name}={value} outside {bits}-bit range")
        if self.ihl < 5 or self.data_offset < 5:
            raise MalformedHeader(f"ihl={self.ihl} data_offset={self.data_offset}")
        if self.total_length < self.header_length:
            raise MalformedHeader(
                f"total_length={self.total_length} < headers {self.header_length}"
            )

    @property
    def header_length(self) -> int:
        return 4 * self.ihl + 4 * self.data_offset

    @property
    def payload_length(self) -> int:
        return self.total_length - self.header_length

    def has(self, flag: TcpFlags) -> bool:
        return bool(self.tcp_flags & flag)


_FIELD_BITS = {
    "ihl": 4,
    "tos": 8,
    "total_length": 16,
    "identification": 16,
    "frag_offset": 13,
    "ttl": 8,
    "src_addr": 32,
    "dst_addr": 32,
    "src_port": 16,
    "dst_port": 16,
    "seq": 32,
    "ack": 32,
    "data_offset": 4,
    "tcp_flags": 8,
    "window": 16,
    "urgent_ptr": 16,
}


@dataclass(frozen=True)
class PacketBuf:
    """A received packet: header, payload size, arrival time and chain link.

    ``next`` can only reference an already constructed buffer, so chains
    built through the constructor are acyclic by construction.
    """

    header: PacketHeader
    arrival_time: int = 0
    next: Optional["PacketBuf"] = None

    @property
    def payload_len(self) -> int:
        return self.header.payload_length

    def __iter__(self) -> Iterator["PacketBuf"]:
        buf: Optional[PacketBuf] = self
        while buf is not None:
            yield buf
            buf = buf.next


def chain(bufs: Iterable[PacketBuf]) -> Optional[PacketBuf]:
    """Link buffers into a pbuf chain in the given order; returns the head."""
    head = None
    for buf in reversed(list(bufs)):
        head = PacketBuf(buf.header, buf.arrival_time, head)
    return head


_IP = struct.Struct("!BBHHHBBH4s4s")
_TCP = struct.Struct("!HHIIBBHHH")


def parse_ipv4_tcp(data: bytes, arrival_time: int = 0) -> PacketBuf:
    """Decode a buffer starting at the IPv4 header into a :class:`PacketBuf`.

    Only the headers must be present; a payload cut short by the capture
    snap length is accepted since ``payload_len`` comes from ``total_length``.
    Checksums are decoded but not verified.
    """
    n = len(data)
    if n < 1:
        raise Truncated("empty buffer")
    version = data[0] >> 4
    if version != 4:
        raise NotIPv4(f"version nibble {version}")
    if n < MIN_IP_HEADER:
        raise Truncated(f"{n} bytes < minimal IPv4 header")
    (vihl, tos, total_length, ident, frag, ttl, proto, _csum, src, dst) = _IP.unpack_from(data)
    ihl = vihl & 0x0F
    if ihl < 5:
        raise MalformedHeader(f"ihl={ihl}")
    if proto != IPPROTO_TCP:
        raise NotTCP(f"protocol {proto}")
    ip_len = 4 * ihl
    if n < ip_len + MIN_TCP_HEADER:
        raise Truncated(f"{n} bytes < ip header {ip_len} + tcp header")
    (sport, dport, seq, ack, off, flags, window, _tcsum, urg) = _TCP.unpack_from(data, ip_len)
    data_offset = off >> 4
    if data_offset < 5:
        raise MalformedHeader(f"data_offset={data_offset}")
    if n < ip_len + 4 * data_offset:
        raise Truncated(f"{n} bytes < declared headers {ip_len + 4 * data_offset}")
    if total_length < ip_len + 4 * data_offset:
        raise MalformedHeader(f"total_length={total_length} shorter than headers")
    header = PacketHeader(
        ip_version=4,
        ihl=ihl,
        tos=tos,
        total_length=total_length,
        identification=ident,
        flag_df=bool(frag & 0x4000),
        flag_mf=bool(frag & 0x2000),
        frag_offset=frag & 0x1FFF,
        ttl=ttl,
        protocol=proto,
        src_addr=int.from_bytes(src, "big"),
        dst_addr=int.from_bytes(dst, "big"),
        src_port=sport,
        dst_port=dport,
        seq=seq,
        ack=ack,
        data_offset=data_offset,
        tcp_flags=TcpFlags(flags),
        window=window,
        urgent_ptr=urg,
    )
    return PacketBuf(header, arrival_time)


def _checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def to_bytes(header: PacketHeader, payload: Optional[bytes] = None) -> bytes:
    """Serialize a header to wire bytes; option space and payload are zero-filled."""
    h = header
    frag = (0x4000 if h.flag_df else 0) | (0x2000 if h.flag_mf else 0) | h.frag_offset
    ip = bytearray(
        _IP.pack(
            (4 << 4) | h.ihl,
            h.tos,
            h.total_length,
            h.identification,
            frag,
            h.ttl,
            h.protocol,
            0,
            h.src_addr.to_bytes(4, "big"),
            h.dst_addr.to_bytes(4, "big"),
        )
    )
    ip += bytes(4 * h.ihl - MIN_IP_HEADER)
    ip[10:12] = _checksum(bytes(ip)).to_bytes(2, "big")
    tcp = _TCP.pack(
        h.src_port,
        h.dst_port,
        h.seq,
        h.ack,
        h.data_offset << 4,
        int(h.tcp_flags),
        h.window,
        0,
        h.urgent_ptr,
    ) + bytes(4 * h.data_offset - MIN_TCP_HEADER)
    if payload is None:
        payload = bytes(h.payload_length)
    elif len(payload) != h.payload_length:
        raise ValueError(f"payload is {len(payload)} bytes, header says {h.payload_length}")
    return bytes(ip) + tcp + payload


# --- features -----------------------------------------------------------------

FEATURE_NAMES = (
    "ttl",
    "total_length",
    "flag_df",
    "flag_mf",
    "frag_offset",
    "src_port",
    "dst_port",
    "data_offset",
    "tcp_fin",
    "tcp_syn",
    "tcp_rst",
    "tcp_psh",
    "tcp_ack",
    "tcp_urg",
    "tcp_ece_cwr",
    "urgent_ptr",
)
FEATURE_LEN = len(FEATURE_NAMES)


def extract_features(h: PacketHeader) -> np.ndarray:
    """Encode a header as the 16-slot, [0, 1]-scaled classifier input.

    Numeric fields are divided by their bit-width maximum, flags become
    0.0/1.0 and ECE/CWR share one slot. The TCP window never contributes.
    """
    f = int(h.tcp_flags)
    return np.array(
        (
            h.ttl / 255.0,
            h.total_length / 65535.0,
            1.0 if h.flag_df else 0.0,
            1.0 if h.flag_mf else 0.0,
            h.frag_offset / 8191.0,
            h.src_port / 65535.0,
            h.dst_port / 65535.0,
            h.data_offset / 15.0,
            f & 0x01 and 1.0,
            f & 0x02 and 1.0,
            f & 0x04 and 1.0,
            f & 0x08 and 1.0,
            f & 0x10 and 1.0,
            f & 0x20 and 1.0,
            f & 0xC0 and 1.0,
            h.urgent_ptr / 65535.0,
        ),
        dtype=np.float64,
    )


# --- classic pcap -----------------------------------------------------------------


@dataclass(frozen=True)
class PcapRecord:
    ts_sec: int
    ts_frac: int
    data: bytes
    orig_len: int
    nanosecond: bool = False

    @property
    def timestamp_ns(self) -> int:
        return self.ts_sec * 1_000_000_000 + self.ts_frac * (1 if self.nanosecond else 1000)


@dataclass(frozen=True)
class PcapHeader:
    endian: str
    nanosecond: bool
    version_major: int
    version_minor: int
    thiszone: int
    sigfigs: int
    snaplen: int
    linktype: int

    def pack(self) -> bytes:
        magic = PCAP_MAGIC_NS if self.nanosecond else PCAP_MAGIC
        return struct.pack(
            self.endian + "IHHiIII",
            magic,
            self.version_major,
            self.version_minor,
            self.thiszone,
            self.sigfigs,
            self.snaplen,
            self.linktype,
        )


def read_pcap_header(stream: BinaryIO) -> PcapHeader:
    raw = stream.read(24)
    if len(raw) < 4:
        raise BadMagic("stream too short for a pcap magic number")
    for endian in ("<", ">"):
        (magic,) = struct.unpack(endian + "I", raw[:4])
        if magic in (PCAP_MAGIC, PCAP_MAGIC_NS):
            break
    else:
        raise BadMagic(f"unrecognized magic 0x{raw[:4].hex()}")
    if len(raw) < 24:
        raise CorruptRecord("global header truncated")
    _, vmaj, vmin, zone, sigfigs, snaplen, linktype = struct.unpack(endian + "IHHiIII", raw)
    return PcapHeader(endian, magic == PCAP_MAGIC_NS, vmaj, vmin, zone, sigfigs, snaplen, linktype)


def iter_pcap_records(stream: BinaryIO, header: PcapHeader) -> Iterator[PcapRecord]:
    rec = struct.Struct(header.endian + "IIII")
    while True:
        raw = stream.read(16)
        if not raw:
            return
        if len(raw) < 16:
            raise CorruptRecord("record header truncated")
        ts_sec, ts_frac, incl_len, orig_len = rec.unpack(raw)
        data = stream.read(incl_len)
        if len(data) < incl_len:
            raise CorruptRecord(f"record declares {incl_len} bytes, {len(data)} remain")
        yield PcapRecord(ts_sec, ts_frac, data, orig_len, header.nanosecond)


def ip_payload(data: bytes, linktype: int) -> Optional[bytes]:
    """Strip the link layer; ``None`` when the frame does not carry IPv4."""
    if linktype in (LINKTYPE_RAW, LINKTYPE_IPV4):
        return data
    if linktype == LINKTYPE_ETHERNET:
        if len(data) < 14:
            return None
        ethertype = int.from_bytes(data[12:14], "big")
        offset = 14
        if ethertype == ETHERTYPE_VLAN and len(data) >= 18:
            ethertype = int.from_bytes(data[16:18], "big")
            offset = 18
        return data[offset:] if ethertype == ETHERTYPE_IPV4 else None
    return None


def decode_record(record: PcapRecord, linktype: int) -> Optional[PacketBuf]:
    """Parse one record; non-TCP/IPv4 or undecodable frames give ``None``."""
    payload = ip_payload(record.data, linktype)
    if payload is None:
        return None
    try:
        return parse_ipv4_tcp(payload, record.timestamp_ns)
    except PacketError:
        return None


def read_pcap(stream: BinaryIO) -> Iterator[PacketBuf]:
    """Yield one PacketBuf per TCP-over-IPv4 record of a classic pcap stream."""
    header = read_pcap_header(stream)
    for record in iter_pcap_records(stream, header):
        buf = decode_record(record, header.linktype)
        if buf is not None:
            yield buf


class PcapWriter:
    def __init__(self, stream: BinaryIO, linktype: int = LINKTYPE_RAW,
                 snaplen: int = 65535, nanosecond: bool = False, endian: str = "<"):
        self.stream = stream
        self.header = PcapHeader(endian, nanosecond, 2, 4, 0, 0, snaplen, linktype)
        self._rec = struct.Struct(endian + "IIII")
        stream.write(self.header.pack())

    def write_record(self, record: PcapRecord) -> None:
        self.stream.write(
            self._rec.pack(record.ts_sec, record.ts_frac, len(record.data), record.orig_len)
        )
        self.stream.write(record.data)

    def write(self, data: bytes, timestamp_ns: int) -> None:
        unit = 1 if self.header.nanosecond else 1000
        sec, rem = divmod(timestamp_ns, 1_000_000_000)
        self.write_record(PcapRecord(sec, rem // unit, data, len(data), self.header.nanosecond))


def write_pcap(stream: BinaryIO, packets: Iterable[PacketBuf]) -> int:
    """Write packets as a RAW-IP pcap; returns the number of records."""
    writer = PcapWriter(stream, LINKTYPE_RAW)
    count = 0
    for p in packets:
        writer.write(to_bytes(p.header), p.arrival_time)
        count += 1
    return count


def ip_to_int(dotted: str) -> int:
    a, b, c, d = (int(x) for x in dotted.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d
