"""The packet filter hook: per-packet verdicts from a swappable policy.

The hook sits where the stack first sees an ingress packet. It extracts the
feature vector, asks the active policy, and either drops the packet or
hands it on. Policies are swapped by replacing one immutable snapshot, so a
packet is always judged by exactly one policy.
"""

from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass
from typing import BinaryIO, Optional, Protocol

from .packet import PacketBuf, PcapWriter, decode_record, extract_features, iter_pcap_records, read_pcap_header
from .policy import MALICIOUS


class WorkingMode(enum.Enum):
    DISABLED = "disabled"
    STATELESS = "stateless"
    STATEFUL = "stateful"


class PolicyCode(enum.IntEnum):
    DISABLED = 0
    DT = 1
    LR = 2
    SVM = 3
    MLP = 4


POLICY_NAMES = {
    PolicyCode.DISABLED: "disabled",
    PolicyCode.DT: "dt",
    PolicyCode.LR: "lr",
    PolicyCode.SVM: "svm",
    PolicyCode.MLP: "mlp",
}


class Verdict(enum.Enum):
    ACCEPT = "accept"
    DROP = "drop"


class InvalidConfig(ValueError):
    pass


class Classifier(Protocol):
    def classify(self, x) -> int: ...


@dataclass(frozen=True)
class T800Config:
    working_mode: WorkingMode = WorkingMode.DISABLED
    policy: Optional[Classifier] = None
    policy_id: int = PolicyCode.DISABLED

    def validate(self) -> None:
        if self.working_mode is WorkingMode.STATEFUL:
            raise NotImplementedError("stateful filtering is not implemented")
        if self.working_mode is WorkingMode.DISABLED:
            if self.policy is not None:
                raise InvalidConfig("disabled mode takes no policy")
            if self.policy_id != PolicyCode.DISABLED:
                raise InvalidConfig("disabled mode requires policy_id 0")
        elif self.working_mode is WorkingMode.STATELESS:
            if self.policy is None or not callable(getattr(self.policy, "classify", None)):
                raise InvalidConfig("stateless mode requires a policy with classify()")
            if self.policy_id not in (PolicyCode.DT, PolicyCode.LR, PolicyCode.SVM, PolicyCode.MLP):
                raise InvalidConfig(f"policy_id {self.policy_id} is not a policy code")
        else:
            raise InvalidConfig(f"unknown working mode {self.working_mode!r}")

    @classmethod
    def disabled(cls) -> "T800Config":
        return cls()

    @classmethod
    def stateless(cls, policy: Classifier, policy_id: int) -> "T800Config":
        return cls(WorkingMode.STATELESS, policy, int(policy_id))


@dataclass(frozen=True)
class FilterCounters:
    accepted: int = 0
    dropped: int = 0
    errors: int = 0
    classify_time_total: int = 0
    classify_time_max: int = 0

    @property
    def presented(self) -> int:
        return self.accepted + self.dropped

    def line(self) -> str:
        return (f"accepted={self.accepted} dropped={self.dropped} errors={self.errors} "
                f"classify_ns_total={self.classify_time_total} classify_ns_max={self.classify_time_max}")


class FilterHandle:
    """A running filter. ``input_hook`` may be called from any thread."""

    def __init__(self, config: T800Config):
        config.validate()
        self._config = config
        self._lock = threading.Lock()
        self._swap_lock = threading.Lock()
        self._accepted = 0
        self._dropped = 0
        self._errors = 0
        self._ns_total = 0
        self._ns_max = 0

    @property
    def config(self) -> T800Config:
        return self._config

    @property
    def policy_id(self) -> int:
        return self._config.policy_id

    def input_hook(self, p: PacketBuf) -> Verdict:
        cfg = self._config  # one snapshot per packet: never a mix of two policies
        if cfg.working_mode is WorkingMode.DISABLED:
            with self._lock:
                self._accepted += 1
            return Verdict.ACCEPT
        t0 = time.perf_counter_ns()
        failed = False
        try:
            malicious = cfg.policy.classify(extract_features(p.header)) == MALICIOUS
        except Exception:
            malicious = False
            failed = True
        elapsed = time.perf_counter_ns() - t0
        with self._lock:
            if malicious:
                self._dropped += 1
            else:
                self._accepted += 1
            if failed:
                self._errors += 1
            self._ns_total += elapsed
            if elapsed > self._ns_max:
                self._ns_max = elapsed
        return Verdict.DROP if malicious else Verdict.ACCEPT

    def swap_policy(self, config: T800Config) -> int:
        """Install a new configuration; returns the replaced policy id.

        An invalid configuration raises and leaves the active one in place.
        """
        config.validate()
        with self._swap_lock:
            previous = self._config.policy_id
            self._config = config
        return int(previous)

    def counters(self) -> FilterCounters:
        with self._lock:
            return FilterCounters(self._accepted, self._dropped, self._errors, self._ns_total, self._ns_max)


def t800_init(config: T800Config) -> FilterHandle:
    return FilterHandle(config)


def t800_input_hook(handle: FilterHandle, p: PacketBuf) -> Verdict:
    return handle.input_hook(p)


def t800_swap_policy(handle: FilterHandle, config: T800Config) -> int:
    return handle.swap_policy(config)


def filter_pcap(source: BinaryIO, config: T800Config, sink: BinaryIO) -> FilterCounters:
    """Replay a capture through a fresh filter, writing accepted records to ``sink``.

    Records that are not TCP over IPv4 never reach the hook and are not
    written. Accepted records keep their original bytes and link type.
    """
    header = read_pcap_header(source)
    handle = t800_init(config)
    writer = PcapWriter(sink, header.linktype, header.snaplen, header.nanosecond, header.endian)
    for record in iter_pcap_records(source, header):
        buf = decode_record(record, header.linktype)
        if buf is None:
            continue
        if handle.input_hook(buf) is Verdict.ACCEPT:
            writer.write_record(record)
    return handle.counters()
