"""Seeded synthetic traffic: an iperf-style bulk flow and SYN port scans.

All randomness comes from numpy's PCG64 generator (``np.random.default_rng``)
seeded from the profile, so a seed reproduces a stream byte for byte on any
platform. Hash-derived header fields use CRC-32 (``zlib.crc32``).
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .packet import PacketBuf, PacketHeader, TcpFlags, extract_features, ip_to_int
from .policy import BENIGN, MALICIOUS
from .trainer import LabeledDataset, salting_merge

NS = 1_000_000_000
DEVICE_ADDR = ip_to_int("192.168.4.1")
CLIENT_ADDR = ip_to_int("192.168.4.2")
SCANNER_ADDR = ip_to_int("192.168.4.3")
IPERF_PORT = 5001
MSS = 1460
INTENSITIES_MBPS = {"I0": 8, "I1": 16}
SCAN_TOOLS = ("nmap", "zmap", "masscan", "hping3", "unicornscan")
DEFAULT_SCAN_PORTS = tuple(range(1, 1001))
DEFAULT_SCAN_RATE = 100.0
HANDSHAKE_GAP_NS = 100_000

SYN = TcpFlags.SYN
ACK = TcpFlags.ACK
PSH = TcpFlags.PSH
FIN = TcpFlags.FIN
RST = TcpFlags.RST


@dataclass(frozen=True)
class TrafficProfile:
    intensity_mbps: int = 8
    malicious: bool = False
    duration: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.intensity_mbps not in INTENSITIES_MBPS.values():
            raise ValueError(f"intensity must be 8 or 16 Mbps, got {self.intensity_mbps}")

    @classmethod
    def from_codes(cls, intensity: str, malicious: str, duration: float = 10.0, seed: int = 0):
        return cls(INTENSITIES_MBPS[intensity], malicious == "M1", duration, seed)


@dataclass(frozen=True)
class ScanProfile:
    tool: str = "nmap"
    target_ports: Sequence[int] = DEFAULT_SCAN_PORTS
    rate: float = DEFAULT_SCAN_RATE
    target_addr: int = DEVICE_ADDR
    source_addr: int = SCANNER_ADDR

    def __post_init__(self):
        if self.tool not in SCAN_TOOLS:
            raise ValueError(f"unknown scanner {self.tool!r}")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        ports = tuple(int(p) for p in self.target_ports)
        if not ports or any(not 0 <= p <= 65535 for p in ports):
            raise ValueError("target_ports must be a nonempty set of valid ports")
        object.__setattr__(self, "target_ports", ports)


def _crc(*values: int) -> int:
    return zlib.crc32(b"".join(v.to_bytes(4, "big") for v in values))


def gen_benign(p: TrafficProfile, start_ns: int = 0, client_addr: int = CLIENT_ADDR,
               server_addr: int = DEVICE_ADDR) -> list[PacketBuf]:
    """One long-lived TCP bulk flow at the profile's IP-layer bit rate.

    The handshake comes first (100 us apart), then 1500-byte segments
    carrying a full MSS with ACK set. Segment ``k`` is scheduled at
    ``k * 1500 * 8 / rate`` plus a uniform jitter of at most a quarter
    interval, which keeps timestamps strictly increasing and any 1-second
    window within one segment of the nominal byte count.
    """
    rng = np.random.default_rng([p.seed, 0xB3])
    end = start_ns + int(round(p.duration * NS))
    sport = int(rng.integers(32768, 61000))
    isn_c = int(rng.integers(0, 2**32))
    isn_s = int(rng.integers(0, 2**32))
    ip_id = int(rng.integers(0, 2**16))
    out: list[PacketBuf] = []

    def emit(t: int, h: PacketHeader) -> None:
        if t < end:
            out.append(PacketBuf(h, t))

    emit(start_ns, PacketHeader(client_addr, server_addr, sport, IPERF_PORT, SYN, seq=isn_c,
                                window=64240, data_offset=10, total_length=60,
                                identification=ip_id, flag_df=True, ttl=64))
    emit(start_ns + HANDSHAKE_GAP_NS,
         PacketHeader(server_addr, client_addr, IPERF_PORT, sport, SYN | ACK, seq=isn_s,
                      ack=(isn_c + 1) % 2**32, window=5744, data_offset=6, total_length=44,
                      flag_df=True, ttl=64))
    emit(start_ns + 2 * HANDSHAKE_GAP_NS,
         PacketHeader(client_addr, server_addr, sport, IPERF_PORT, ACK, seq=(isn_c + 1) % 2**32,
                      ack=(isn_s + 1) % 2**32, window=502, total_length=40,
                      identification=(ip_id + 1) % 2**16, flag_df=True, ttl=64))

    interval = 1500 * 8 * NS / (p.intensity_mbps * 1_000_000)
    data_start = start_ns + 3 * HANDSHAKE_GAP_NS
    n = int(np.ceil((end - data_start) / interval)) + 1 if end > data_start else 0
    jitter = rng.uniform(-0.25, 0.25, size=n) * interval
    push = rng.random(n) < 0.1
    seq = (isn_c + 1) % 2**32
    for k in range(n):
        t = data_start + int(round(k * interval + jitter[k] + 0.25 * interval))
        if t >= end:
            break
        flags = ACK | PSH if push[k] else ACK
        emit(t, PacketHeader(client_addr, server_addr, sport, IPERF_PORT, flags, seq=seq,
                             ack=(isn_s + 1) % 2**32, window=502, total_length=1500,
                             identification=(ip_id + 2 + k) % 2**16, flag_df=True, ttl=64))
        seq = (seq + MSS) % 2**32
    return out


def _scan_header(tool: str, s: ScanProfile, k: int, port: int, rng, fixed: dict) -> PacketHeader:
    dst = s.target_addr
    if tool == "nmap":
        return PacketHeader(s.source_addr, dst, fixed["sport"], port, SYN,
                            seq=int(rng.integers(0, 2**32)), window=1024, data_offset=6,
                            total_length=44, identification=int(rng.integers(0, 2**16)),
                            ttl=fixed["ttl"])
    if tool == "zmap":
        return PacketHeader(s.source_addr, dst, int(rng.integers(32768, 61000)), port, SYN,
                            seq=_crc(dst, fixed["key"]), window=65535, total_length=40,
                            identification=54321, ttl=255)
    if tool == "masscan":
        seq = _crc(dst, port, fixed["key"])
        ip_id = (dst ^ port ^ seq) & 0xFFFF
        return PacketHeader(s.source_addr, dst, fixed["sport"], port, SYN, seq=seq, window=1024,
                            total_length=40, identification=ip_id, ttl=255)
    if tool == "hping3":
        return PacketHeader(s.source_addr, dst, (fixed["sport"] + k) % 65536, port, SYN,
                            seq=int(rng.integers(0, 2**32)), window=512, total_length=40,
                            identification=int(rng.integers(0, 2**16)), ttl=64)
    return PacketHeader(s.source_addr, dst, fixed["sport"], port, SYN,  # unicornscan
                        seq=int(rng.integers(0, 2**32)), window=4096, total_length=40,
                        identification=int(rng.integers(0, 2**16)), ttl=fixed["ttl"])


def gen_scan(s: ScanProfile, duration: float, seed: int = 0, start_ns: int = 0) -> list[PacketBuf]:
    """SYN probes at ``s.rate`` per second, cycling a seeded permutation of the ports.

    Per-tool header traits: nmap sends window 1024 with an MSS option and a
    fixed source port; zmap uses IP id 54321 and a sequence number derived
    from the target address; masscan derives the sequence number from
    (target, port); hping3 uses window 512 and increments the source port;
    unicornscan keeps one source port for the whole scan.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng([seed, 0x5C, SCAN_TOOLS.index(s.tool)])
    ports = [s.target_ports[i] for i in rng.permutation(len(s.target_ports))]
    fixed = {
        "sport": int(rng.integers(1024, 65536)),
        "ttl": int(rng.integers(37, 60)),
        "key": int(rng.integers(0, 2**32)),
    }
    interval = NS / s.rate
    end = start_ns + int(round(duration * NS))
    out = []
    k = 0
    while True:
        t = start_ns + int(round(k * interval))
        if t >= end:
            break
        out.append(PacketBuf(_scan_header(s.tool, s, k, ports[k % len(ports)], rng, fixed), t))
        k += 1
    return out


def merge_streams(*streams: Iterable[PacketBuf]) -> list[PacketBuf]:
    """Merge time-ordered streams by arrival time; ties keep argument order."""
    return list(heapq.merge(*streams, key=lambda b: b.arrival_time))


def export_dataset(streams: Sequence[tuple[int, Iterable[PacketBuf]]],
                   provenance: Optional[Sequence[str]] = None) -> LabeledDataset:
    """Featurize labeled streams into one dataset ordered by arrival time.

    ``streams`` holds ``(label, packets)`` pairs; ``provenance`` optionally
    names each stream's origin and defaults to synthetic-benign/-scan by
    label.
    """
    tagged = []
    for i, (label, packets) in enumerate(streams):
        prov = provenance[i] if provenance else ("synthetic-scan" if label == MALICIOUS else "synthetic-benign")
        tagged.append([(b.arrival_time, i, j, b, label, prov) for j, b in enumerate(packets)])
    merged = list(heapq.merge(*tagged, key=lambda r: (r[0], r[1], r[2])))
    if not merged:
        return LabeledDataset(np.zeros((0, 16)), np.zeros(0, dtype=np.int64), [])
    X = np.stack([extract_features(r[3].header) for r in merged])
    y = np.array([r[4] for r in merged], dtype=np.int64)
    return LabeledDataset(X, y, [r[5] for r in merged])


# --- training corpus -------------------------------------------------------------

BENIGN_SERVICE_PORTS = (80, 443, 1883, 8883, 5001, 8080, 22, 53)


def gen_benign_corpus(n_packets: int, seed: int = 0, server_addr: int = DEVICE_ADDR) -> list[PacketBuf]:
    """Varied benign TCP conversations for training.

    Each flow has a handshake with typical client options, DF set on most
    flows (small embedded stacks often leave it clear), a
    random mix of data segments and pure ACKs in both directions, and a FIN
    or (rarely) RST teardown. Peers sit behind 0-6 router hops.
    """
    rng = np.random.default_rng([seed, 0xBE])
    out: list[PacketBuf] = []
    t = 0
    while len(out) < n_packets:
        client = int(rng.integers(ip_to_int("10.0.0.1"), ip_to_int("10.255.255.254")))
        sport = int(rng.integers(32768, 61000))
        dport = int(rng.choice(BENIGN_SERVICE_PORTS))
        ttl_c = int(rng.choice((64, 128))) - int(rng.integers(0, 7))
        isn = int(rng.integers(0, 2**32))
        isn_s = int(rng.integers(0, 2**32))
        syn_opts = int(rng.choice((8, 10, 11)))
        df = bool(rng.random() < 0.75)
        c2s = dict(src_addr=client, dst_addr=server_addr, src_port=sport, dst_port=dport,
                   flag_df=df, ttl=ttl_c)
        s2c = dict(src_addr=server_addr, dst_addr=client, src_port=dport, dst_port=sport,
                   flag_df=df, ttl=64)
        flow = [
            PacketHeader(**c2s, tcp_flags=SYN, seq=isn, window=64240, data_offset=syn_opts,
                         total_length=20 + 4 * syn_opts),
            PacketHeader(**s2c, tcp_flags=SYN | ACK, seq=isn_s, ack=(isn + 1) % 2**32,
                         window=5744, data_offset=6, total_length=44),
            PacketHeader(**c2s, tcp_flags=ACK, seq=(isn + 1) % 2**32, ack=(isn_s + 1) % 2**32,
                         window=502, total_length=40),
        ]
        for _ in range(int(rng.integers(2, 40))):
            fwd = rng.random() < 0.6
            base = c2s if fwd else s2c
            if rng.random() < 0.35:
                length = 40
                flags = ACK
            else:
                length = int(rng.choice((1500, int(rng.integers(41, 1500)))))
                flags = ACK | PSH if rng.random() < 0.4 else ACK
            doff = 8 if rng.random() < 0.3 and length >= 52 else 5
            flow.append(PacketHeader(**base, tcp_flags=flags, seq=int(rng.integers(0, 2**32)),
                                     ack=int(rng.integers(0, 2**32)), window=int(rng.integers(200, 65535)),
                                     data_offset=doff, total_length=length,
                                     identification=int(rng.integers(0, 2**16))))
        if rng.random() < 0.05:
            flow.append(PacketHeader(**c2s, tcp_flags=RST | ACK, total_length=40))
        else:
            flow.append(PacketHeader(**c2s, tcp_flags=FIN | ACK, total_length=40))
            flow.append(PacketHeader(**s2c, tcp_flags=FIN | ACK, total_length=40))
            flow.append(PacketHeader(**c2s, tcp_flags=ACK, total_length=40))
        for h in flow:
            t += int(rng.integers(10_000, 2_000_000))
            out.append(PacketBuf(h, t))
    return out[:n_packets]


def gen_scan_corpus(n_packets: int, seed: int = 0, tools: Sequence[str] = SCAN_TOOLS,
                    rate: float = DEFAULT_SCAN_RATE) -> list[PacketBuf]:
    """Probes from every scanner profile in equal shares."""
    per_tool = -(-n_packets // len(tools))
    streams = []
    for i, tool in enumerate(tools):
        ports = tuple(range(1, 65536))
        prof = ScanProfile(tool, ports, rate)
        streams.append(gen_scan(prof, per_tool / rate, seed=seed * 31 + i))
    return merge_streams(*streams)[:n_packets]


def build_training_dataset(n_benign: int = 10_900, n_malicious: int = 9_100, seed: int = 0) -> LabeledDataset:
    """Salted benign + scan dataset; default sizes keep the 103,094 : 86,480 class ratio under 20k."""
    benign = export_dataset([(BENIGN, gen_benign_corpus(n_benign, seed))])
    scans = export_dataset([(MALICIOUS, gen_scan_corpus(n_malicious, seed))])
    return salting_merge(benign, scans, seed)
