"""Summary statistics and the 2^3 full-factorial influence-of-factors analysis.

Factors: A (filter policy present), I (traffic intensity), M (malicious
traffic present), coded -1 for the low level and +1 for the high one.
Design rows run through the levels with M varying fastest and A slowest,
so the first row is all-low and the last all-high.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

FACTORS = ("A", "I", "M")
TERMS = ("A", "I", "M", "AI", "AM", "IM", "AIM")
COLUMNS = ("1",) + TERMS
REPORT_COLUMNS = ("Model",) + TERMS + ("Err",)


class AnalysisError(ValueError):
    pass


class EmptyInput(AnalysisError):
    pass


class DegenerateInput(AnalysisError):
    pass


class IncompleteGrid(AnalysisError):
    pass


# --- summary statistics -------------------------------------------------------------


@dataclass(frozen=True)
class SummaryStats:
    median: float
    min: float
    max: float
    q1: float
    q3: float
    n: int


def summarize(samples: Sequence[float]) -> SummaryStats:
    """Order statistics; quartiles use linear interpolation between ranks."""
    a = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if a.size == 0:
        raise EmptyInput("summarize() needs at least one sample")
    q1, med, q3 = np.quantile(a, [0.25, 0.5, 0.75])
    return SummaryStats(float(med), float(a[0]), float(a[-1]), float(q1), float(q3), int(a.size))


# --- design and effects -------------------------------------------------------------


def build_design_matrix() -> np.ndarray:
    """8x8 integer sign matrix with columns ``[1, A, I, M, AI, AM, IM, AIM]``."""
    X = np.empty((8, 8), dtype=np.int64)
    for i in range(8):
        a = 1 if i & 4 else -1
        b = 1 if i & 2 else -1
        m = 1 if i & 1 else -1
        X[i] = (1, a, b, m, a * b, a * m, b * m, a * b * m)
    return X


def cell_index(a: int, i: int, m: int) -> int:
    """Row of the design matrix for factor levels given as 0 (low) or 1 (high)."""
    return (int(a) << 2) | (int(i) << 1) | int(m)


@dataclass(frozen=True)
class FactorialInput:
    """Replicate responses ``y[cell, replica]`` in design-matrix row order."""

    y: np.ndarray
    factor_names: tuple = FACTORS

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 2 or y.shape[0] != 8:
            raise DegenerateInput(f"need an 8 x r response array, got shape {y.shape}")
        if y.shape[1] < 1:
            raise DegenerateInput("need at least one replica per cell")
        if not np.all(np.isfinite(y)):
            raise DegenerateInput("responses must be finite")
        object.__setattr__(self, "y", y)

    @property
    def r(self) -> int:
        return self.y.shape[1]

    @property
    def cell_means(self) -> np.ndarray:
        return self.y.mean(axis=1)


@dataclass(frozen=True)
class EffectsTable:
    q: np.ndarray          # (q0, qA, qI, qM, qAI, qAM, qIM, qAIM)
    ss: dict               # per term, plus "SSE"
    sst: float
    fractions: dict        # per term, plus "Err"

    def as_dict(self) -> dict:
        return {
            "q": dict(zip(("0",) + TERMS, (float(v) for v in self.q))),
            "ss": {k: float(v) for k, v in self.ss.items()},
            "sst": float(self.sst),
            "fractions": {k: float(v) for k, v in self.fractions.items()},
        }


def estimate_effects(inp: FactorialInput, require_error: bool = True) -> EffectsTable:
    """Effects ``Q = X^T Ybar / 8`` and the allocation of variation.

    ``SS_x = 8 r q_x^2``, ``SSE`` is the within-cell sum of squared
    deviations, and ``SST`` is the total sum of squares about the grand
    mean, which equals their sum. With one replica there is no error term,
    which raises unless ``require_error`` is false.
    """
    if inp.r < 2 and require_error:
        raise DegenerateInput("at least two replicas per cell are needed to estimate SSE")
    X = build_design_matrix()
    ybar = inp.cell_means
    q = X.T.astype(np.float64) @ ybar / 8.0
    r = inp.r
    ss = {t: 8.0 * r * float(q[k + 1]) ** 2 for k, t in enumerate(TERMS)}
    ss["SSE"] = float(np.sum((inp.y - ybar[:, None]) ** 2))
    sst = float(np.sum((inp.y - inp.y.mean()) ** 2))
    if sst > 0:
        fractions = {t: ss[t] / sst for t in TERMS}
        fractions["Err"] = ss["SSE"] / sst
    else:
        fractions = {t: 0.0 for t in TERMS}
        fractions["Err"] = 0.0
    return EffectsTable(q, ss, sst, fractions)


# --- influence report over a campaign ----------------------------------------------------


@dataclass(frozen=True)
class InfluenceReport:
    metric: str
    rows: dict             # policy name -> EffectsTable
    average: dict          # term -> mean fraction across policies

    def table_rows(self) -> list[list]:
        out = []
        for name, t in self.rows.items():
            out.append([name] + [t.fractions[k] for k in TERMS + ("Err",)])
        out.append(["average"] + [self.average[k] for k in TERMS + ("Err",)])
        return out

    def to_text(self, delimiter: str = ",", digits: int = 4) -> str:
        lines = [delimiter.join(REPORT_COLUMNS)]
        for row in self.table_rows():
            lines.append(delimiter.join([row[0]] + [f"{v:.{digits}f}" for v in row[1:]]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc = {
            "metric": self.metric,
            "columns": list(REPORT_COLUMNS),
            "policies": {k: v.as_dict() for k, v in self.rows.items()},
            "average": self.average,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def replica_responses(runs: Iterable, metric: str = "cpu_busy_fraction") -> dict:
    """``{(policy_name, scenario_code): {replica: mean of per-window metric}}``."""
    out: dict = {}
    for run in runs:
        if not getattr(run, "completed", True) or not run.samples:
            continue
        values = [getattr(s, metric) for s in run.samples]
        if any(v is None for v in values):
            raise IncompleteGrid(f"metric {metric} missing in {run.scenario.code}/{run.scenario.policy_name}")
        s = run.scenario
        out.setdefault((s.policy_name, s.code), {})[s.replica_index] = float(np.mean(values))
    return out


def influence_report(runs: Iterable, metric: str = "cpu_busy_fraction",
                     baseline: str = "disabled") -> InfluenceReport:
    """One effects table per policy, with factor A = that policy vs the disabled filter.

    The baseline gets a row of its own (compared with itself, so every
    A term is zero) and the average row is taken over all rows, baseline
    included. Replicas are matched by index: replica ``j`` of a policy
    pairs with replica ``j`` of the baseline. Only replica indices present
    in all eight cells of a policy are used; fewer than two is an
    incomplete grid.
    """
    resp = replica_responses(runs, metric)
    enabled = sorted({p for p, _ in resp if p != baseline})
    if not enabled:
        raise IncompleteGrid("no filtering policy in the campaign")
    policies = [baseline] + enabled
    rows = {}
    for p in policies:
        cells = []
        for idx in range(8):
            a, i, m = (idx >> 2) & 1, (idx >> 1) & 1, idx & 1
            key = (p if a else baseline, f"I{i}M{m}")
            if key not in resp:
                raise IncompleteGrid(f"missing cell {key[1]} for policy {key[0]}")
            cells.append(resp[key])
        common = sorted(set.intersection(*(set(c) for c in cells)))
        if len(common) < 2:
            raise IncompleteGrid(f"policy {p}: fewer than two complete replicas")
        y = np.array([[c[j] for j in common] for c in cells])
        rows[p] = estimate_effects(FactorialInput(y))
    keys = TERMS + ("Err",)
    average = {k: float(np.mean([rows[p].fractions[k] for p in policies])) for k in keys}
    return InfluenceReport(metric, rows, average)
