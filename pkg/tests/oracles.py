"""Independent reference implementations used as test oracles.

Each one recomputes a quantity by a different route from the package code:
brute-force loops instead of vectorized numpy, contrasts instead of the
design-matrix product, finite differences instead of backpropagation.
"""

import math
from itertools import product

import numpy as np


def entropy_bits(counts):
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c) if n else 0.0


def best_split_bruteforce(X, y, min_leaf=1):
    """Try every midpoint threshold of every feature; returns (feature, threshold, gain)."""
    n = len(y)
    parent = entropy_bits([n - sum(y), sum(y)])
    best = None
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            thr = (lo + hi) / 2
            left = [y[i] for i in range(n) if X[i, f] <= thr]
            right = [y[i] for i in range(n) if X[i, f] > thr]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            child = (len(left) * entropy_bits([len(left) - sum(left), sum(left)])
                     + len(right) * entropy_bits([len(right) - sum(right), sum(right)])) / n
            gain = parent - child
            if best is None or gain > best[2] + 1e-12:
                best = (f, thr, gain)
    return best


def numeric_mlp_grads(model, X, y, loss_fn, eps=1e-6):
    """Central differences of ``loss_fn(model, X, y)`` for every parameter."""
    from t800.policy import MlpModel

    ws = [w.copy() for w in model.weights]
    bs = [b.copy() for b in model.biases]

    def loss_at():
        return loss_fn(MlpModel([w.copy() for w in ws], [b.copy() for b in bs]), X, y)

    out_w, out_b = [], []
    for group, out in ((ws, out_w), (bs, out_b)):
        for arr in group:
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                keep = arr[idx]
                arr[idx] = keep + eps
                up = loss_at()
                arr[idx] = keep - eps
                down = loss_at()
                arr[idx] = keep
                g[idx] = (up - down) / (2 * eps)
            out.append(g)
    return out_w, out_b


def max_relative_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a, n = np.asarray(a), np.asarray(n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


FACTOR_LEVELS = list(product((-1, 1), repeat=3))  # (A, I, M) with M fastest


def contrast_effects(y):
    """Effects and sums of squares from cell-mean contrasts, without a design matrix.

    ``y`` is an 8 x r array of replica responses with cells ordered as
    ``FACTOR_LEVELS``. An effect is (mean of cells where the term's sign
    product is +1 minus mean where it is -1) / 2.
    """
    y = np.asarray(y, dtype=float)
    r = y.shape[1]
    means = [sum(row) / r for row in y.tolist()]
    grand = sum(means) / 8
    terms = {"A": (0,), "I": (1,), "M": (2,), "AI": (0, 1), "AM": (0, 2), "IM": (1, 2), "AIM": (0, 1, 2)}
    q, ss = {"0": grand}, {}
    for name, idx in terms.items():
        plus, minus = [], []
        for cell, levels in enumerate(FACTOR_LEVELS):
            sign = math.prod(levels[i] for i in idx)
            (plus if sign > 0 else minus).append(means[cell])
        q[name] = (sum(plus) / 4 - sum(minus) / 4) / 2
        ss[name] = 8 * r * q[name] ** 2
    sse = sum((v - means[i]) ** 2 for i, row in enumerate(y.tolist()) for v in row)
    flat = [v for row in y.tolist() for v in row]
    mu = sum(flat) / len(flat)
    sst = sum((v - mu) ** 2 for v in flat)
    ss["SSE"] = sse
    return q, ss, sst


class TaggedPolicy:
    """Constant classifier that logs which policy judged each packet, per thread."""

    def __init__(self, tag, verdict, log):
        self.tag = tag
        self.verdict = verdict
        self.log = log

    def classify(self, x):
        self.log.seen.append(self.tag)
        return self.verdict


def swap_stress(n_packets, n_swaps, n_threads=4, seed=0):
    """Hammer one handle from several threads while another thread swaps policies.

    Returns ``(violations, counters, total, swaps_in_flight)``: a violation
    is a packet that was judged by other than exactly one policy, or whose
    verdict differs from that policy's constant answer. Swaps are spread
    over the expected run time; ``swaps_in_flight`` counts those that
    happened while workers were still running.
    """
    import threading

    from t800.filter import T800Config, Verdict, t800_init, t800_input_hook, t800_swap_policy
    from t800.packet import PacketBuf, PacketHeader, TcpFlags

    log = threading.local()
    policies = [TaggedPolicy(k, k % 2, log) for k in range(2)]
    configs = [T800Config.stateless(p, 1 + p.tag) for p in policies]
    handle = t800_init(configs[0])
    buf = PacketBuf(PacketHeader(1, 2, 3, 4, TcpFlags.SYN))
    per_thread = n_packets // n_threads
    violations = []
    done = threading.Event()

    def worker():
        log.seen = []
        bad = 0
        for _ in range(per_thread):
            log.seen.clear()
            v = t800_input_hook(handle, buf)
            if len(log.seen) != 1:
                bad += 1
                continue
            expected = Verdict.DROP if policies[log.seen[0]].verdict else Verdict.ACCEPT
            bad += v is not expected
        violations.append(bad)

    in_flight = []

    def swapper():
        import time
        rng = np.random.default_rng(seed)
        gap = 3e-6 * n_packets / max(n_swaps, 1)
        for k in range(n_swaps):
            time.sleep(float(rng.uniform(0, gap)))
            t800_swap_policy(handle, configs[(k + 1) % 2])
            if not done.is_set():
                in_flight.append(k)

    threads = [threading.Thread(target=worker) for _ in range(n_threads)]
    s = threading.Thread(target=swapper)
    for t in threads:
        t.start()
    s.start()
    for t in threads:
        t.join()
    done.set()
    s.join()
    return sum(violations), handle.counters(), per_thread * n_threads, len(in_flight)
