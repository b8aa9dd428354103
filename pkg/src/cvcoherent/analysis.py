"""EPR correlation metrics, teleportation fidelity, and degradation summaries."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .gaussian import GaussianState, ModeRef, apply, beamsplitter_5050, embed, quad_vector

CLASSICAL_LIMIT = 0.5
TRACE_CSV_VERSION = "cvcoherent-degradation-trace v1"
TRACE_COLUMNS = ("level", "eps1", "eps2", "eps3", "sum_mq", "sum_pq", "fidelity_bound", "conforming")


def second_moment(state: GaussianState, expr) -> float:
    """``<(c . r)^2>``, i.e. variance plus squared mean, of a quadrature combination."""
    c = quad_vector(state.n_modes, expr, state)
    m = c @ state.mean
    return state.variance(c) + float(m * m)


@dataclass(frozen=True)
class CorrelationReport:
    mode_pair: tuple[int, int]
    var_x_minus: float
    var_x_plus: float
    var_p_minus: float
    var_p_plus: float
    orientation: str
    epsilon: float
    entangled: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode_pair"] = list(self.mode_pair)
        return d


def correlation_report(state: GaussianState, a: ModeRef, b: ModeRef) -> CorrelationReport:
    """EPR second moments of a mode pair and the tighter of the two orientations.

    Position-correlated means small ``(x_a - x_b)`` and ``(p_a + p_b)``;
    momentum-correlated means small ``(x_a + x_b)`` and ``(p_a - p_b)``.
    Ties go to position-correlated.  The pair is flagged entangled when the
    detected epsilon is below 1 (two vacua sit exactly at 1).
    """
    i, j = state.index(a), state.index(b)
    if i == j:
        raise ValueError("correlation needs two distinct modes")
    xm = second_moment(state, {(i, "x"): 1.0, (j, "x"): -1.0})
    xp = second_moment(state, {(i, "x"): 1.0, (j, "x"): 1.0})
    pm = second_moment(state, {(i, "p"): 1.0, (j, "p"): -1.0})
    pp = second_moment(state, {(i, "p"): 1.0, (j, "p"): 1.0})
    pos, mom = max(xm, pp), max(xp, pm)
    if pos <= mom:
        orientation, eps = "position-correlated", pos
    else:
        orientation, eps = "momentum-correlated", mom
    return CorrelationReport((i, j), xm, xp, pm, pp, orientation, eps, bool(eps < 1))


def fidelity_from_error_vars(sx2: float, sp2: float) -> float:
    """Coherent-state averaged fidelity ``2 / sqrt((2 + sx2)(2 + sp2))``.

    ``sx2`` and ``sp2`` are the variances of ``x_tel - x_in`` and
    ``p_tel - p_in`` in vacuum-1/2 units.  Gives 1 for perfect transfer and
    1/2 when each quadrature carries two vacuum units of added noise.
    """
    if sx2 < -1e-12 or sp2 < -1e-12:
        raise ValueError("error variances must be nonnegative")
    sx2, sp2 = max(sx2, 0.0), max(sp2, 0.0)
    return float(2.0 / np.sqrt((2.0 + sx2) * (2.0 + sp2)))


_BOUND_ARITY = {"fig1": 3, "fig2": 2, "composed1": 2}


def fidelity_lower_bound(protocol: str, eps: Sequence[float]) -> float:
    """Closed-form fidelity lower bounds of the coherent teleportation variants.

    ``fig1`` takes (resource, MQ channel, PQ channel); ``fig2`` takes
    (PQ channel, MQ channel); ``composed1`` takes (teleport resource,
    superdense resource).
    """
    if protocol not in _BOUND_ARITY:
        raise ValueError(f"unknown protocol {protocol!r}")
    eps = [float(e) for e in eps]
    if len(eps) != _BOUND_ARITY[protocol]:
        raise ValueError(f"{protocol} bound takes {_BOUND_ARITY[protocol]} epsilons, got {len(eps)}")
    if protocol == "fig1":
        e1, e2, e3 = eps
        return float(2.0 / np.sqrt((2 + e1 + e2) * (2 + e1 + e3)))
    return float(2.0 / (2 + eps[0] + eps[1]))


@dataclass(frozen=True)
class BeamsplitterReport:
    kind: str
    port_relative_second_moment: float
    port_total_second_moment: float
    raw_relative_second_moment: float
    raw_total_second_moment: float
    epsilon: float
    input_second_moment: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def beamsplitter_conat_test(
    state: GaussianState,
    sender: ModeRef,
    receiver: ModeRef,
    input_second_moment: float,
    epsilon: float,
    kind: str = "PQ",
) -> BeamsplitterReport:
    """Measure conat performance by interfering sender and receiver on a 50:50 splitter.

    For a PQ channel the difference port's position carries the relative
    position and the sum port's momentum the total momentum; an MQ channel
    swaps the roles of x and p.  Port moments are half the raw EPR moments.
    The pass flag uses the raw moments: relative <= epsilon and
    total <= input_second_moment + epsilon, where ``input_second_moment`` is
    the pre-channel second moment of the undisturbed quadrature (p for PQ).
    """
    s, r = state.index(sender), state.index(receiver)
    if s == r:
        raise ValueError("sender and receiver must differ")
    if kind not in ("PQ", "MQ"):
        raise ValueError("kind must be 'PQ' or 'MQ'")
    rel_q, tot_q = ("x", "p") if kind == "PQ" else ("p", "x")
    split = apply(state, embed(beamsplitter_5050(), [s, r], state.n_modes))
    port_rel = second_moment(split, {(r, rel_q): 1.0})
    port_tot = second_moment(split, {(s, tot_q): 1.0})
    raw_rel = second_moment(state, {(s, rel_q): 1.0, (r, rel_q): -1.0})
    raw_tot = second_moment(state, {(s, tot_q): 1.0, (r, tot_q): 1.0})
    passed = bool(raw_rel <= epsilon + 1e-12 and raw_tot <= input_second_moment + epsilon + 1e-12)
    return BeamsplitterReport(kind, port_rel, port_tot, raw_rel, raw_tot, float(epsilon), float(input_second_moment), passed)


# --- degradation ------------------------------------------------------------


@dataclass(frozen=True)
class LevelRecord:
    """One composition level.

    ``eps1`` is the position-correlated resource, ``eps2`` the PQ channel and
    ``eps3`` the MQ channel consumed at this level.  The ``measured_*``
    fields are the achieved epsilons of what the level generates.
    """

    level: int
    eps1: float
    eps2: float
    eps3: float
    sum_mq: float
    sum_pq: float
    fidelity_bound: float
    conforming: bool
    measured_fidelity: float | None = None
    measured_mq: float | None = None
    measured_pq: float | None = None
    measured_correlation: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DegradationTrace:
    records: tuple[LevelRecord, ...]
    max_depth: int = field(default=-1)

    def __post_init__(self):
        if self.max_depth < 0:
            depth = 0
            for rec in self.records:
                if not rec.conforming:
                    break
                depth += 1
            object.__setattr__(self, "max_depth", depth)

    @classmethod
    def from_epsilons(cls, eps: Sequence[Sequence[float]]) -> "DegradationTrace":
        """Trace built from per-level (eps1, eps2, eps3) without simulation."""
        recs = []
        for k, (e1, e2, e3) in enumerate(eps, start=1):
            recs.append(level_record(k, e1, e2, e3))
        return cls(tuple(recs))

    def to_dict(self) -> dict:
        return {"max_depth": self.max_depth, "levels": [r.to_dict() for r in self.records]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {TRACE_CSV_VERSION} max_depth={self.max_depth}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for rec in self.records:
            w.writerow([rec.level] + [repr(float(getattr(rec, c))) for c in TRACE_COLUMNS[1:-1]] + [int(rec.conforming)])
        return buf.getvalue()


def level_record(level: int, e1: float, e2: float, e3: float, **measured) -> LevelRecord:
    sum_mq = e1 + e2 + e3
    sum_pq = e1 + e2
    return LevelRecord(
        level=level,
        eps1=float(e1),
        eps2=float(e2),
        eps3=float(e3),
        sum_mq=float(sum_mq),
        sum_pq=float(sum_pq),
        fidelity_bound=fidelity_lower_bound("fig1", [e1, e3, e2]),
        conforming=bool(sum_mq < 1 and sum_pq < 1),
        **measured,
    )


def degradation_report(trace: DegradationTrace) -> dict:
    """Summarize where the sufficient conditions break down along a trace.

    Returns ``max_depth``, the first level whose MQ sum reaches 1
    (entanglement condition), the first level whose fidelity bound no
    longer exceeds 1/2, and the least-squares slope of the MQ sum per level.
    """
    if not trace.records:
        raise ValueError("empty degradation trace")
    first_ent = next((r.level for r in trace.records if not r.sum_mq < 1), None)
    first_fid = next((r.level for r in trace.records if not r.fidelity_bound > CLASSICAL_LIMIT), None)
    levels = np.array([r.level for r in trace.records], dtype=float)
    sums = np.array([r.sum_mq for r in trace.records])
    slope = float(np.polyfit(levels, sums, 1)[0]) if len(levels) > 1 else 0.0
    return {
        "max_depth": trace.max_depth,
        "levels": len(trace.records),
        "first_entanglement_violation": first_ent,
        "first_fidelity_violation": first_fid,
        "sum_mq_slope": slope,
    }
