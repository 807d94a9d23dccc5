"""Benchmark harness: the six-step control protocol, the device under test,
per-second metric sampling and replica campaigns.

The device under test is an in-process stack: every ingress frame is
parsed, presented to the filter hook and, when accepted, charged a
simulated upper-layer cost. Metric windows are one second of *traffic*
time: packets are replayed as fast as the host allows and the measured
processing time is attributed to the window their timestamp falls in, so
``cpu_busy_fraction`` is busy nanoseconds over 1e9.
"""

from __future__ import annotations

import csv
import logging
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import IO, Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .filter import POLICY_NAMES, FilterHandle, PolicyCode, T800Config, Verdict, t800_init
from .packet import PacketBuf, extract_features, parse_ipv4_tcp, to_bytes
from .policy import PolicyModel
from .synth import (
    DEFAULT_SCAN_PORTS,
    INTENSITIES_MBPS,
    NS,
    ScanProfile,
    TrafficProfile,
    gen_benign,
    gen_scan,
    merge_streams,
)

log = logging.getLogger(__name__)

PROTOCOL_TIMEOUT_S = 5.0
DESK_DURATION = 10.0
DESK_REPLICAS = 5
FULL_DURATION = 360.0
FULL_REPLICAS = 30
HARNESS_SCAN_RATE = 500.0
SCAN_BURST = (0.2, 0.8)  # scan active over this fraction of the run
CALIBRATION_MARGIN = 2.0

INTENSITY_CODES = ("I0", "I1")
MALICIOUS_CODES = ("M0", "M1")
POLICY_CODES = tuple(PolicyCode)
POLICY_BY_NAME = {v: k for k, v in POLICY_NAMES.items()}

METRICS_HEADER = (
    "scenario", "policy", "replica", "window", "cpu_busy_fraction", "ns_per_packet",
    "stack_bytes", "rx_mbps", "accepted", "dropped", "power_mw",
)


class HarnessError(RuntimeError):
    pass


class ProtocolViolation(HarnessError):
    pass


class ProtocolTimeout(HarnessError):
    pass


class MalformedRow(HarnessError):
    pass


# --- control protocol -----------------------------------------------------------


class Msg(IntEnum):
    BEGIN = 0x01
    POLICY_SELECT = 0x02
    READY = 0x03
    END = 0x04
    END_ACK = 0x05


LEGAL_SEQUENCE = (Msg.BEGIN, Msg.POLICY_SELECT, Msg.READY, Msg.END, Msg.END_ACK)


def encode(kind: Msg, policy_code: Optional[int] = None) -> bytes:
    if kind is Msg.POLICY_SELECT:
        if policy_code is None or not 0 <= policy_code <= 255:
            raise ValueError("PolicySelect needs a policy code byte")
        return bytes((kind, policy_code))
    return bytes((kind,))


def decode(data: bytes) -> tuple[Msg, Optional[int]]:
    if not data:
        raise ProtocolViolation("empty message")
    try:
        kind = Msg(data[0])
    except ValueError:
        raise ProtocolViolation(f"unknown message code 0x{data[0]:02x}") from None
    if kind is Msg.POLICY_SELECT:
        if len(data) != 2:
            raise ProtocolViolation("PolicySelect must carry exactly one code byte")
        return kind, data[1]
    if len(data) != 1:
        raise ProtocolViolation(f"{kind.name} carries no payload")
    return kind, None


class ProtocolStateMachine:
    """Tracks one replica's message exchange; any out-of-order message raises."""

    def __init__(self):
        self.position = 0

    def feed(self, kind: Msg) -> None:
        if self.position >= len(LEGAL_SEQUENCE):
            raise ProtocolViolation(f"{Msg(kind).name} after the exchange completed")
        expected = LEGAL_SEQUENCE[self.position]
        if kind != expected:
            raise ProtocolViolation(f"expected {expected.name}, got {Msg(kind).name}")
        self.position += 1

    @property
    def complete(self) -> bool:
        return self.position == len(LEGAL_SEQUENCE)


class InProcessChannel:
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox

    def send(self, data: bytes) -> None:
        self._outbox.put(bytes(data))

    def recv(self, timeout: float = PROTOCOL_TIMEOUT_S) -> bytes:
        try:
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise ProtocolTimeout(f"no message within {timeout} s") from None

    def close(self) -> None:
        pass


def inprocess_pair() -> tuple[InProcessChannel, InProcessChannel]:
    """``(controller_end, device_end)`` joined by two queues."""
    a, b = queue.Queue(), queue.Queue()
    return InProcessChannel(a, b), InProcessChannel(b, a)


class UdpChannel:
    """Same byte encoding over a datagram socket, for two-process runs."""

    def __init__(self, local: tuple[str, int], peer: Optional[tuple[str, int]] = None):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(local)
        self.peer = peer

    @property
    def address(self) -> tuple[str, int]:
        return self.sock.getsockname()

    def send(self, data: bytes) -> None:
        if self.peer is None:
            raise HarnessError("peer address unknown; receive first or pass peer=")
        self.sock.sendto(bytes(data), self.peer)

    def recv(self, timeout: float = PROTOCOL_TIMEOUT_S) -> bytes:
        self.sock.settimeout(timeout)
        try:
            data, addr = self.sock.recvfrom(64)
        except socket.timeout:
            raise ProtocolTimeout(f"no datagram within {timeout} s") from None
        if self.peer is None:
            self.peer = addr
        return data

    def close(self) -> None:
        self.sock.close()


def udp_pair(host: str = "127.0.0.1") -> tuple[UdpChannel, UdpChannel]:
    device = UdpChannel((host, 0))
    controller = UdpChannel((host, 0), peer=device.address)
    device.peer = controller.address
    return controller, device


# --- device under test ------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Simulated stack cost for every accepted packet: ``base_ns + per_byte_ns * length``.

    ``clock="wall"`` measures real processing time (the busy loop is spun
    on ``perf_counter_ns``). ``clock="virtual"`` charges nominal costs
    instead, which makes every output column reproducible bit for bit.
    """

    base_ns: int = 100_000
    per_byte_ns: float = 0.0
    clock: str = "wall"

    def __post_init__(self):
        if self.clock not in ("wall", "virtual"):
            raise ValueError("clock must be 'wall' or 'virtual'")
        if self.base_ns < 0 or self.per_byte_ns < 0:
            raise ValueError("costs must be nonnegative")

    def stack_ns(self, length: int) -> int:
        return int(self.base_ns + self.per_byte_ns * length)


# nominal per-packet costs of the virtual clock
VIRTUAL_PARSE_NS = 5_000
VIRTUAL_CLASSIFY_NS = {"dt": 3_000, "logreg": 4_000, "svm": 4_000, "mlp": 15_000, "mlp_q8": 30_000}
VIRTUAL_DEFAULT_CLASSIFY_NS = 5_000


def busy_wait(ns: int) -> None:
    end = time.perf_counter_ns() + ns
    while time.perf_counter_ns() < end:
        pass


@dataclass(frozen=True)
class MetricSample:
    window_index: int
    cpu_busy_fraction: float
    ns_per_packet: float
    stack_bytes: int
    rx_mbps: float
    accepted: int
    dropped: int
    power_mw: Optional[float] = None


class DeviceUnderTest:
    """Parse -> filter hook -> simulated upper layers, with per-window accounting."""

    def __init__(self, handle: FilterHandle, cost: CostModel = CostModel()):
        self.handle = handle
        self.cost = cost
        self._lock = threading.Lock()
        self._busy: dict[int, int] = {}
        self._packets: dict[int, int] = {}
        self._bytes: dict[int, int] = {}
        self._accepted: dict[int, int] = {}
        self._dropped: dict[int, int] = {}
        self._stack: dict[int, int] = {}

    def _scratch_bytes(self) -> int:
        policy = self.handle.config.policy
        if policy is None:
            return 0
        fn = getattr(policy, "scratch_bytes", None)
        return 8 * 16 + (fn() if fn else 0)

    def ingress(self, frame: bytes, arrival_ns: int) -> Verdict:
        if self.cost.clock == "wall":
            t0 = time.perf_counter_ns()
            buf = parse_ipv4_tcp(frame, arrival_ns)
            verdict = self.handle.input_hook(buf)
            if verdict is Verdict.ACCEPT:
                busy_wait(self.cost.stack_ns(buf.header.total_length))
            busy = time.perf_counter_ns() - t0
        else:
            buf = parse_ipv4_tcp(frame, arrival_ns)
            verdict = self.handle.input_hook(buf)
            busy = VIRTUAL_PARSE_NS
            policy = self.handle.config.policy
            if policy is not None:
                busy += VIRTUAL_CLASSIFY_NS.get(getattr(policy, "kind", ""), VIRTUAL_DEFAULT_CLASSIFY_NS)
            if verdict is Verdict.ACCEPT:
                busy += self.cost.stack_ns(buf.header.total_length)
        w = arrival_ns // NS
        stack = 4 * (buf.header.ihl + buf.header.data_offset) + self._scratch_bytes()
        with self._lock:
            self._busy[w] = self._busy.get(w, 0) + busy
            self._packets[w] = self._packets.get(w, 0) + 1
            self._bytes[w] = self._bytes.get(w, 0) + buf.header.total_length
            if verdict is Verdict.ACCEPT:
                self._accepted[w] = self._accepted.get(w, 0) + 1
            else:
                self._dropped[w] = self._dropped.get(w, 0) + 1
            if stack > self._stack.get(w, 0):
                self._stack[w] = stack
        return verdict

    def samples(self, n_windows: int) -> list[MetricSample]:
        """One sample per window; counts are cumulative so they never decrease."""
        out = []
        acc = drop = 0
        with self._lock:
            for w in range(n_windows):
                n = self._packets.get(w, 0)
                busy = self._busy.get(w, 0)
                acc += self._accepted.get(w, 0)
                drop += self._dropped.get(w, 0)
                out.append(MetricSample(
                    window_index=w,
                    cpu_busy_fraction=min(1.0, busy / NS),
                    ns_per_packet=busy / n if n else 0.0,
                    stack_bytes=self._stack.get(w, 0),
                    rx_mbps=self._bytes.get(w, 0) * 8 / 1e6,
                    accepted=acc,
                    dropped=drop,
                ))
        return out


class Device:
    """Device side of the control protocol, reacting to controller messages."""

    def __init__(self, channel, policies: Mapping[int, PolicyModel], cost: CostModel = CostModel()):
        self.channel = channel
        self.policies = dict(policies)
        self.handle = t800_init(T800Config.disabled())
        self.dut = DeviceUnderTest(self.handle, cost)
        self.machine = ProtocolStateMachine()
        self.error: Optional[BaseException] = None
        self.policy_code: Optional[int] = None

    def config_for(self, code: int) -> T800Config:
        if code == PolicyCode.DISABLED:
            return T800Config.disabled()
        if code not in self.policies:
            raise ProtocolViolation(f"policy code {code} has no loaded model")
        return T800Config.stateless(self.policies[code], code)

    def on_message(self, data: bytes) -> Optional[bytes]:
        """Handle one controller message and return the reply, if any."""
        kind, code = decode(data)
        self.machine.feed(kind)
        if kind is Msg.POLICY_SELECT:
            self.handle.swap_policy(self.config_for(code))
            self.policy_code = code
            self.machine.feed(Msg.READY)
            return encode(Msg.READY)
        if kind is Msg.END:
            self.machine.feed(Msg.END_ACK)
            return encode(Msg.END_ACK)
        return None

    def start(self) -> None:
        self.machine.feed(Msg.BEGIN)
        self.channel.send(encode(Msg.BEGIN))

    def serve(self) -> None:
        """Thread body: signal Begin, then answer until EndAck or an error."""
        try:
            self.start()
            while not self.machine.complete:
                reply = self.on_message(self.channel.recv())
                if reply is not None:
                    self.channel.send(reply)
        except BaseException as exc:  # surfaced by the controller
            self.error = exc


# --- scenarios and runs -----------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    policy_code: int
    intensity: str = "I0"
    malicious: str = "M0"
    duration: float = DESK_DURATION
    replica_index: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.intensity not in INTENSITY_CODES or self.malicious not in MALICIOUS_CODES:
            raise ValueError(f"bad scenario {self.intensity}{self.malicious}")
        object.__setattr__(self, "policy_code", int(PolicyCode(self.policy_code)))

    @property
    def code(self) -> str:
        return f"{self.intensity}{self.malicious}"

    @property
    def policy_name(self) -> str:
        return POLICY_NAMES[PolicyCode(self.policy_code)]

    @property
    def n_windows(self) -> int:
        return math.ceil(self.duration)


@dataclass(frozen=True)
class ExperimentRun:
    scenario: Scenario
    samples: tuple
    outcome: str = "completed"
    reason: str = ""
    benign_packets: int = 0
    scan_packets: int = 0
    scan_dropped: int = 0
    notes: tuple = ()

    @property
    def completed(self) -> bool:
        return self.outcome == "completed"

    @property
    def total_packets(self) -> int:
        return self.benign_packets + self.scan_packets

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples], dtype=np.float64)


def workload_seed(seed: int, replica: int, intensity: str, malicious: str) -> int:
    """Per-replica workload seed, shared by every policy of the same cell."""
    ss = np.random.SeedSequence([seed, replica, INTENSITY_CODES.index(intensity),
                                 MALICIOUS_CODES.index(malicious)])
    return int(ss.generate_state(1)[0])


def build_workload(s: Scenario, seed: int, scan_rate: float = HARNESS_SCAN_RATE,
                   scan_ports: Sequence[int] = DEFAULT_SCAN_PORTS):
    """Benign flow always, plus an nmap burst in the middle of the run for M1.

    Returns ``(frames, is_scan)`` where ``frames`` is a time-ordered list of
    ``(arrival_ns, wire_bytes)``.
    """
    benign = gen_benign(TrafficProfile(INTENSITIES_MBPS[s.intensity], s.malicious == "M1", s.duration, seed))
    streams = [[(b, False) for b in benign]]
    if s.malicious == "M1":
        lo, hi = SCAN_BURST
        scan = gen_scan(ScanProfile("nmap", scan_ports, scan_rate), (hi - lo) * s.duration, seed,
                        start_ns=int(lo * s.duration * NS))
        streams.append([(b, True) for b in scan])
    import heapq
    merged = list(heapq.merge(*streams, key=lambda r: r[0].arrival_time))
    frames = [(b.arrival_time, to_bytes(b.header)) for b, _ in merged]
    return frames, [flag for _, flag in merged]


def run_replica(s: Scenario, seed: int, policies: Mapping[int, PolicyModel],
                cost: CostModel = CostModel(), transport: str = "inprocess",
                scan_rate: float = HARNESS_SCAN_RATE,
                timeout: float = PROTOCOL_TIMEOUT_S) -> ExperimentRun:
    """Execute one replica of the six-step protocol against an in-process device."""
    frames, is_scan = build_workload(s, seed, scan_rate)
    ctrl, dev_end = udp_pair() if transport == "udp" else inprocess_pair()
    device = Device(dev_end, policies, cost)
    thread = threading.Thread(target=device.serve, daemon=True)
    machine = ProtocolStateMachine()

    def expect(kind: Msg) -> None:
        try:
            got, _ = decode(ctrl.recv(timeout))
        except ProtocolTimeout:
            thread.join(0.1)
            if device.error is not None:
                raise device.error
            raise
        machine.feed(got)
        if got is not kind:
            raise ProtocolViolation(f"expected {kind.name}, got {got.name}")

    try:
        thread.start()
        expect(Msg.BEGIN)                                          # (1)
        machine.feed(Msg.POLICY_SELECT)
        ctrl.send(encode(Msg.POLICY_SELECT, s.policy_code))        # (2)
        expect(Msg.READY)                                          # (3)
        scan_dropped = 0
        for (t, frame), scan in zip(frames, is_scan):              # (4)
            verdict = device.dut.ingress(frame, t)
            if scan and verdict is Verdict.DROP:
                scan_dropped += 1
        machine.feed(Msg.END)
        ctrl.send(encode(Msg.END))                                 # (5)
        expect(Msg.END_ACK)                                        # (6)
    finally:
        thread.join(timeout)
        ctrl.close()
        dev_end.close()
    n_scan = sum(is_scan)
    return ExperimentRun(s, tuple(device.dut.samples(s.n_windows)), "completed", "",
                         len(frames) - n_scan, n_scan, scan_dropped)


# --- calibration --------------------------------------------------------------------


def measure_hook_ns(policy: PolicyModel, code: int, n: int = 2000, seed: int = 0) -> float:
    """Median per-packet hook time (feature extraction + classification)."""
    frames, _ = build_workload(Scenario(code, "I1", "M1", 3.0), seed)
    frames = frames[:n]
    handle = t800_init(T800Config.stateless(policy, code))
    bufs = [parse_ipv4_tcp(f, t) for t, f in frames]
    times = []
    for b in bufs:
        t0 = time.perf_counter_ns()
        handle.input_hook(b)
        times.append(time.perf_counter_ns() - t0)
    return float(np.median(times))


def calibrate_cost(policies: Mapping[int, PolicyModel], scan_rate: float = HARNESS_SCAN_RATE,
                   margin: float = CALIBRATION_MARGIN, per_byte_ns: float = 0.0,
                   clock: str = "wall") -> CostModel:
    """Size the per-packet stack cost so early dropping pays off.

    During a scan burst at the high intensity an enabled filter classifies
    ``B1 + S`` packets per second and saves the stack cost of ``S`` probes;
    the base cost is set to ``margin`` times the break-even value for the
    most expensive policy measured on this host.
    """
    b1 = INTENSITIES_MBPS["I1"] * 1e6 / (1500 * 8)
    if clock == "virtual":
        worst = max((VIRTUAL_CLASSIFY_NS.get(getattr(m, "kind", ""), VIRTUAL_DEFAULT_CLASSIFY_NS)
                     for m in policies.values()), default=VIRTUAL_DEFAULT_CLASSIFY_NS)
    else:
        worst = max((measure_hook_ns(m, c) for c, m in policies.items()), default=0.0)
    base = margin * worst * (b1 + scan_rate) / scan_rate
    return CostModel(int(round(base)), per_byte_ns, clock)


# --- campaigns ----------------------------------------------------------------------


def run_campaign(policies: Mapping[int, PolicyModel], replicas: int = DESK_REPLICAS,
                 duration: float = DESK_DURATION, seed: int = 0, cost: Optional[CostModel] = None,
                 policy_codes: Sequence[int] = POLICY_CODES, scan_rate: float = HARNESS_SCAN_RATE,
                 progress: Optional[Callable[[ExperimentRun], None]] = None) -> list[ExperimentRun]:
    """Every {I0,I1} x {M0,M1} cell for every policy code, ``replicas`` times.

    Within a replica all policies see the identical seeded workload and run
    back to back, so slow drift of the host affects them alike. A failed
    replica is recorded as aborted and retried once.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if cost is None:
        cost = calibrate_cost({c: policies[c] for c in policy_codes if c in policies}, scan_rate)
    runs = []
    for r in range(replicas):
        for i in INTENSITY_CODES:
            for m in MALICIOUS_CODES:
                wseed = workload_seed(seed, r, i, m)
                for code in policy_codes:
                    s = Scenario(code, i, m, duration, r)
                    run = None
                    for attempt in range(2):
                        try:
                            run = run_replica(s, wseed, policies, cost, scan_rate=scan_rate)
                            break
                        except HarnessError as exc:
                            log.warning("replica %s/%s/%d failed (%s), attempt %d", s.code,
                                        s.policy_name, r, exc, attempt + 1)
                            runs.append(ExperimentRun(s, (), "aborted", str(exc)))
                    if run is not None:
                        runs.append(run)
                        if progress:
                            progress(run)
    return runs


# --- metrics CSV and power import -----------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(runs: Iterable[ExperimentRun], sink: IO[str]) -> int:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    rows = 0
    for run in runs:
        if not run.completed:
            continue
        s = run.scenario
        for m in run.samples:
            w.writerow([s.code, s.policy_name, s.replica_index, m.window_index,
                        _fmt(m.cpu_busy_fraction), _fmt(m.ns_per_packet), m.stack_bytes,
                        _fmt(m.rx_mbps), m.accepted, m.dropped, _fmt(m.power_mw)])
            rows += 1
    return rows


def read_metrics_csv(source: IO[str]) -> list[ExperimentRun]:
    """Rebuild runs from a metrics CSV (one run per scenario/policy/replica)."""
    r = csv.reader(source)
    header = next(r, None)
    if header is None or tuple(header) != METRICS_HEADER:
        raise MalformedRow(f"unexpected metrics header: {header}")
    groups: dict[tuple, list[MetricSample]] = {}
    for lineno, row in enumerate(r, start=2):
        if not row:
            continue
        if len(row) != len(METRICS_HEADER):
            raise MalformedRow(f"line {lineno}: {len(row)} fields")
        try:
            code, policy, replica = row[0], row[1], int(row[2])
            sample = MetricSample(int(row[3]), float(row[4]), float(row[5]), int(row[6]), float(row[7]),
                                  int(row[8]), int(row[9]), float(row[10]) if row[10] else None)
        except ValueError as exc:
            raise MalformedRow(f"line {lineno}: {exc}") from None
        if policy not in POLICY_BY_NAME or len(code) != 4:
            raise MalformedRow(f"line {lineno}: unknown scenario/policy {code}/{policy}")
        groups.setdefault((code, policy, replica), []).append(sample)
    runs = []
    for (code, policy, replica), samples in groups.items():
        samples.sort(key=lambda m: m.window_index)
        s = Scenario(POLICY_BY_NAME[policy], code[:2], code[2:], float(len(samples)), replica)
        runs.append(ExperimentRun(s, tuple(samples)))
    return runs


def import_power_csv(run: ExperimentRun, stream: IO[str]) -> ExperimentRun:
    """Attach externally measured power to windows by timestamp.

    Rows are ``timestamp_s,power_mw`` (an identical header row is allowed);
    several samples in one window are averaged and windows without samples
    keep ``power_mw`` empty.
    """
    per_window: dict[int, list[float]] = {}
    for lineno, row in enumerate(csv.reader(stream), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and [c.strip() for c in row] == ["timestamp_s", "power_mw"]:
            continue
        if len(row) != 2:
            raise MalformedRow(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            ts, mw = float(row[0]), float(row[1])
        except ValueError:
            raise MalformedRow(f"line {lineno}: {row!r}") from None
        if not (math.isfinite(ts) and math.isfinite(mw)) or ts < 0:
            raise MalformedRow(f"line {lineno}: {row!r}")
        per_window.setdefault(int(ts), []).append(mw)
    if not per_window:
        return replace(run, notes=run.notes + ("power: no samples imported",))
    samples = tuple(
        replace(m, power_mw=float(np.mean(per_window[m.window_index])))
        if m.window_index in per_window else m
        for m in run.samples
    )
    return replace(run, samples=samples, notes=run.notes + (f"power: {len(per_window)} windows",))


# --- default policy set -------------------------------------------------------------

DESK_MLP = dict(epochs=200, lr=1e-2)


def default_policies(seed: int = 0, n_benign: int = 10_900, n_malicious: int = 9_100,
                     mlp_epochs: int = DESK_MLP["epochs"], mlp_lr: float = DESK_MLP["lr"]) -> dict:
    """Train one model per policy code on the seeded synthetic training split."""
    from .synth import build_training_dataset
    from .trainer import stratified_split, train_dt, train_logistic, train_mlp, train_svm

    train, _ = stratified_split(build_training_dataset(n_benign, n_malicious, seed), 0.7, seed)
    return {
        PolicyCode.DT: train_dt(train, max_depth=12),
        PolicyCode.LR: train_logistic(train, seed=seed),
        PolicyCode.SVM: train_svm(train, seed=seed),
        PolicyCode.MLP: train_mlp(train, epochs=mlp_epochs, lr=mlp_lr, seed=seed),
    }
