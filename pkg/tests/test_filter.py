import io

import numpy as np
import pytest

from oracles import swap_stress
from t800.filter import (
    FilterCounters,
    InvalidConfig,
    PolicyCode,
    T800Config,
    Verdict,
    WorkingMode,
    filter_pcap,
    t800_init,
    t800_input_hook,
    t800_swap_policy,
)
from t800.packet import PacketBuf, PacketHeader, PcapWriter, TcpFlags, read_pcap, to_bytes
from t800.policy import DecisionTreeModel, LEAF, LinearModel

SYN = PacketBuf(PacketHeader(1, 2, 40000, 22, TcpFlags.SYN))
DATA = PacketBuf(PacketHeader(1, 2, 40000, 22, TcpFlags.ACK, total_length=1500, flag_df=True))

# drops anything with SYN set and ACK clear
SYN_TREE = DecisionTreeModel([9, LEAF, 12, LEAF, LEAF], [0.5, 0, 0.5, 0, 0],
                             [1, -1, 3, -1, -1], [2, -1, 4, -1, -1], [0, 0, 0, 1, 0])


class Exploding:
    def classify(self, x):
        raise RuntimeError("boom")


class TestConfig:
    def test_disabled_accepts_everything(self):
        h = t800_init(T800Config.disabled())
        assert t800_input_hook(h, SYN) is Verdict.ACCEPT
        assert h.counters() == FilterCounters(accepted=1)

    def test_stateful_not_implemented(self):
        with pytest.raises(NotImplementedError):
            t800_init(T800Config(WorkingMode.STATEFUL, SYN_TREE, PolicyCode.DT))

    @pytest.mark.parametrize("cfg", [
        T800Config(WorkingMode.STATELESS, None, PolicyCode.DT),
        T800Config(WorkingMode.STATELESS, SYN_TREE, PolicyCode.DISABLED),
        T800Config(WorkingMode.DISABLED, SYN_TREE, PolicyCode.DISABLED),
        T800Config(WorkingMode.STATELESS, SYN_TREE, 9),
    ])
    def test_invalid(self, cfg):
        with pytest.raises(InvalidConfig):
            t800_init(cfg)


class TestHook:
    def test_tree_verdicts(self):
        h = t800_init(T800Config.stateless(SYN_TREE, PolicyCode.DT))
        assert t800_input_hook(h, SYN) is Verdict.DROP
        assert t800_input_hook(h, DATA) is Verdict.ACCEPT
        c = h.counters()
        assert (c.accepted, c.dropped, c.errors) == (1, 1, 0)
        assert c.classify_time_total >= c.classify_time_max > 0

    def test_fail_open(self):
        h = t800_init(T800Config.stateless(Exploding(), PolicyCode.MLP))
        assert t800_input_hook(h, SYN) is Verdict.ACCEPT
        assert h.counters().errors == 1 and h.counters().accepted == 1

    def test_counter_line(self):
        line = FilterCounters(3, 2, 1, 10, 7).line()
        assert line == "accepted=3 dropped=2 errors=1 classify_ns_total=10 classify_ns_max=7"
        assert "\n" not in line


class TestSwap:
    def test_returns_previous_id(self):
        h = t800_init(T800Config.disabled())
        assert t800_swap_policy(h, T800Config.stateless(SYN_TREE, PolicyCode.DT)) == PolicyCode.DISABLED
        assert t800_input_hook(h, SYN) is Verdict.DROP
        assert t800_swap_policy(h, T800Config.disabled()) == PolicyCode.DT
        assert t800_input_hook(h, SYN) is Verdict.ACCEPT

    def test_invalid_swap_keeps_policy(self):
        h = t800_init(T800Config.stateless(SYN_TREE, PolicyCode.DT))
        with pytest.raises(InvalidConfig):
            t800_swap_policy(h, T800Config(WorkingMode.STATELESS, None, PolicyCode.LR))
        assert h.policy_id == PolicyCode.DT

    def test_concurrent_swaps_never_mix(self):
        violations, counters, total, swaps = swap_stress(100_000, 20, n_threads=4)
        assert violations == 0 and swaps > 0
        assert counters.presented == total and counters.errors == 0


def capture(packets, linktype=101):
    buf = io.BytesIO()
    w = PcapWriter(buf, linktype)
    for i, p in enumerate(packets):
        frame = to_bytes(p.header)
        if linktype == 1:
            frame = bytes(12) + b"\x08\x00" + frame
        w.write(frame, i * 1000)
    return buf.getvalue()


class TestFilterPcap:
    def test_disabled_passes_all(self):
        src = capture([SYN, DATA, SYN])
        out = io.BytesIO()
        c = filter_pcap(io.BytesIO(src), T800Config.disabled(), out)
        assert c.accepted == 3 and out.getvalue() == src

    @pytest.mark.parametrize("linktype", [1, 101])
    def test_drops_keep_link_type(self, linktype):
        src = capture([SYN, DATA, SYN, DATA], linktype)
        out = io.BytesIO()
        c = filter_pcap(io.BytesIO(src), T800Config.stateless(SYN_TREE, PolicyCode.DT), out)
        assert (c.accepted, c.dropped) == (2, 2)
        assert out.getvalue()[20:24] == src[20:24]
        assert [b.header for b in read_pcap(io.BytesIO(out.getvalue()))] == [DATA.header] * 2

    def test_linear_policy(self):
        m = LinearModel("logreg", -np.eye(16)[12] * 10, 5.0)  # malicious unless ACK
        h = t800_init(T800Config.stateless(m, PolicyCode.LR))
        assert h.input_hook(SYN) is Verdict.DROP and h.input_hook(DATA) is Verdict.ACCEPT
