"""Coherent teleportation, coherent superdense coding, and their compositions.

Every protocol is tracked as a :class:`~cvcoherent.gaussian.Circuit`, so the
end-to-end symplectic map is available next to the final state.  Output
modes are ordered as in the usual numbering of each protocol (mode 1 first),
and ``role_map`` gives both ``modeK`` names and semantic roles.

Noise operators of the canonical conat channels in terms of the ancilla
symbols (``B'`` for PQ, ``B''`` for MQ):

    PQ:  x_dX = x_B',  p_dX = -p_B',  p_B' = p_B'     (so p_dX + p_B' = 0)
    MQ:  p_dP = -x_B'', x_dP = -p_B'', x_B'' = p_B''  (so x_dP + x_B'' = 0)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import (
    CorrelationReport,
    DegradationTrace,
    correlation_report,
    fidelity_from_error_vars,
    fidelity_lower_bound,
    level_record,
)
from .conat import ConatChannelSpec, ConatReport, apply_mq_conat, apply_pq_conat, verify_circuit
from .gaussian import (
    Circuit,
    GaussianState,
    add_noise,
    controlled_p,
    controlled_x,
    controlled_x_inv,
    displace,
    homodyne,
    new_coherent,
    new_tmsv,
    overlap_fidelity,
    reflection,
    select_modes,
    tensor,
)

IDEAL_SQUEEZING = 20.0
DEFAULT_INPUT = (3.0, -2.0)
DEFAULT_SECOND_INPUT = (-1.0, 0.5)


@dataclass(frozen=True)
class ResourceSpec:
    """Two-mode position-correlated resource.

    A two-mode squeezed vacuum with squeezing ``r``; ``added_noise`` puts
    extra classical noise on mode A's quadratures so that resources with
    epsilon above 1 (already separable) can be represented too.
    """

    r: float
    kind: str = "tmsv"
    added_noise: float = 0.0

    def __post_init__(self):
        if self.kind != "tmsv":
            raise ValueError("only 'tmsv' resources are supported")
        if self.r < 0:
            raise ValueError("squeezing parameter must be nonnegative")
        if self.added_noise < 0:
            raise ValueError("added noise must be nonnegative")

    @property
    def implied_epsilon(self) -> float:
        return float(np.exp(-2 * self.r)) + self.added_noise

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "ResourceSpec":
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if epsilon <= np.exp(-2 * IDEAL_SQUEEZING):
            return cls(IDEAL_SQUEEZING)
        if epsilon <= 1:
            return cls(-0.5 * float(np.log(epsilon)))
        return cls(0.0, added_noise=epsilon - 1.0)

    def state(self, labels: Sequence[str] = ("A", "B")) -> GaussianState:
        st = new_tmsv(self.r, labels)
        if self.added_noise:
            st = add_noise(st, np.diag([self.added_noise, self.added_noise, 0.0, 0.0]))
        return st


def channel_from_epsilon(kind: str, epsilon: float) -> ConatChannelSpec:
    """Canonical channel with the given epsilon; zero maps to the ideal-limit squeezing."""
    if epsilon <= 0.5 * np.exp(-2 * IDEAL_SQUEEZING):
        return ConatChannelSpec(kind, IDEAL_SQUEEZING)
    return ConatChannelSpec.from_epsilon(kind, epsilon)


@dataclass(frozen=True)
class ProtocolOutcome:
    name: str
    final_state: GaussianState
    role_map: dict
    noise_ledger: dict
    circuit: Circuit | None = None
    fidelity: float | None = None
    overlap_fidelity: float | None = None
    conat_reports: tuple[ConatReport, ...] = ()
    correlation_reports: tuple[CorrelationReport, ...] = ()
    measurements: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(v for v in self.role_map.values()) != set(range(self.final_state.n_modes)):
            raise ValueError("role_map must cover exactly the modes of the final state")
        if any(v < 0 for k, v in self.noise_ledger.items() if k.startswith("eps")):
            raise ValueError("noise ledger epsilons must be nonnegative")

    def mode(self, role: str) -> int:
        return self.role_map[role]

    def to_dict(self) -> dict:
        return {
            "protocol": self.name,
            "final_state": self.final_state.to_dict(),
            "role_map": dict(self.role_map),
            "noise_ledger": dict(self.noise_ledger),
            "fidelity": self.fidelity,
            "overlap_fidelity": self.overlap_fidelity,
            "conat_reports": [r.to_dict() for r in self.conat_reports],
            "correlation_reports": [r.to_dict() for r in self.correlation_reports],
            "measurements": dict(self.measurements),
        }


# --- shared stages -----------------------------------------------------------


def _single(state: GaussianState, label: str) -> GaussianState:
    if state.n_modes != 1:
        raise ValueError("input must be a single mode")
    return state.relabel({0: label})


def _pair(state: GaussianState, labels: Sequence[str]) -> GaussianState:
    if state.n_modes != 2:
        raise ValueError("inputs must be two modes")
    return state.relabel({0: labels[0], 1: labels[1]})


def _roles(n: int, **named) -> dict:
    roles = {f"mode{k + 1}": k for k in range(n)}
    roles.update(named)
    return roles


def teleport_error(circ: Circuit, tel_mode, input_label: str) -> tuple[float, float, float, float]:
    """Variances and means of ``x_tel - x_in`` and ``p_tel - p_in``."""
    mx, vx = circ.combo_stats(circ.unit(tel_mode, "x"), -circ.unit(input_label, "x", initial=True))
    mp, vp = circ.combo_stats(circ.unit(tel_mode, "p"), -circ.unit(input_label, "p", initial=True))
    return vx, vp, mx, mp


def _fidelities(circ: Circuit, tel_mode, input_label: str) -> tuple[float, float | None, dict]:
    vx, vp, mx, mp = teleport_error(circ, tel_mode, input_label)
    inp = select_modes(circ.initial, [circ.symbol(input_label)])
    out = select_modes(circ.state, [circ.index(tel_mode)])
    overlap = overlap_fidelity(out, inp) if inp.is_pure() or out.is_pure() else None
    errs = {"var_x_error": vx, "var_p_error": vp, "mean_x_error": mx, "mean_p_error": mp}
    return fidelity_from_error_vars(vx, vp), overlap, errs


def _teleport_prep(circ: Circuit, a1, a) -> Circuit:
    """Alice's reflection on A then controlled-position displacement A1 -> A."""
    return circ.gate(reflection(), [a]).gate(controlled_x(), [a1, a])


def _teleport_bob(circ: Circuit, mq_recv, pq_recv, b) -> Circuit:
    """Bob's controlled-position (PQ receiver -> B) then controlled-momentum (MQ receiver, B)."""
    return circ.gate(controlled_x(), [pq_recv, b]).gate(controlled_p(), [mq_recv, b])


def _superdense_encode(circ: Circuit, m1, m2, a) -> Circuit:
    return circ.gate(controlled_x(), [m2, a]).gate(controlled_p(), [m1, a])


def _superdense_decode(circ: Circuit, a, b) -> Circuit:
    return circ.gate(controlled_x_inv(), [a, b]).gate(reflection(), [b])


def _check_kinds(mq: ConatChannelSpec | None = None, pq: ConatChannelSpec | None = None) -> None:
    if mq is not None and mq.kind != "MQ":
        raise ValueError("expected an MQ channel spec")
    if pq is not None and pq.kind != "PQ":
        raise ValueError("expected a PQ channel spec")


# --- protocols ---------------------------------------------------------------


def coherent_teleport(
    input_state: GaussianState,
    resource: ResourceSpec,
    mq: ConatChannelSpec,
    pq: ConatChannelSpec,
) -> ProtocolOutcome:
    """Coherent teleportation with an MQ and a PQ conat channel.

    Output modes: 1 = A1, 2 = A, 3 = MQ receiver, 4 = PQ receiver, 5 = B
    (the teleported mode).
    """
    _check_kinds(mq, pq)
    circ = Circuit.start(tensor(_single(input_state, "A1"), resource.state(("A", "B"))))
    circ = _teleport_prep(circ, "A1", "A")
    circ, _, _ = apply_mq_conat(circ, "A1", mq, "B''")
    circ, _, _ = apply_pq_conat(circ, "A", pq, "B'")
    circ = circ.reorder(["A1", "A", "B''", "B'", "B"])
    circ = _teleport_bob(circ, 2, 3, 4)

    e1, e2, e3 = resource.implied_epsilon, mq.nominal_epsilon, pq.nominal_epsilon
    fid, overlap, errs = _fidelities(circ, 4, "A1")
    state = circ.state
    ledger = {
        "eps1": e1,
        "eps2": e2,
        "eps3": e3,
        "sum_123": e1 + e2 + e3,
        "sum_13": e1 + e3,
        "fidelity_bound": fidelity_lower_bound("fig1", [e1, e2, e3]),
        **errs,
    }
    return ProtocolOutcome(
        name="coherent_teleport",
        final_state=state,
        role_map=_roles(5, teleported=4),
        noise_ledger=ledger,
        circuit=circ,
        fidelity=fid,
        overlap_fidelity=overlap,
        correlation_reports=(correlation_report(state, 0, 2), correlation_report(state, 1, 3)),
    )


def alternate_coherent_teleport(
    input_state: GaussianState,
    pq: ConatChannelSpec,
    mq: ConatChannelSpec,
) -> ProtocolOutcome:
    """Teleport by a PQ then an MQ conat channel and an inverse controlled-position on Bob's side.

    Output modes: 1 = A (Alice), 2 = PQ receiver (teleported), 3 = MQ receiver.
    """
    _check_kinds(mq, pq)
    circ = Circuit.start(_single(input_state, "A"))
    circ, _, recv_x = apply_pq_conat(circ, "A", pq, "B'")
    circ, _, recv_p = apply_mq_conat(circ, "A", mq, "B''")
    circ = circ.gate(controlled_x_inv(), [recv_x, recv_p])

    e1, e2 = pq.nominal_epsilon, mq.nominal_epsilon
    fid, overlap, errs = _fidelities(circ, 1, "A")
    state = circ.state
    ledger = {
        "eps1": e1,
        "eps2": e2,
        "sum_12": e1 + e2,
        "fidelity_bound": fidelity_lower_bound("fig2", [e1, e2]),
        **errs,
    }
    return ProtocolOutcome(
        name="alternate_coherent_teleport",
        final_state=state,
        role_map=_roles(3, teleported=1),
        noise_ledger=ledger,
        circuit=circ,
        fidelity=fid,
        overlap_fidelity=overlap,
        correlation_reports=(correlation_report(state, 0, 2),),
    )


def coherent_superdense(inputs: GaussianState, resource: ResourceSpec) -> ProtocolOutcome:
    """Coherent superdense coding: an MQ channel on A1 and a PQ channel on A2.

    Output modes: 1 = A1, 2 = A2, 3 = A (sent to Bob), 4 = B.  Modes (1, 3)
    are certified as an MQ conat channel and (2, 4) as a PQ conat channel.
    """
    circ = Circuit.start(tensor(_pair(inputs, ("A1", "A2")), resource.state(("A", "B"))))
    circ = _superdense_encode(circ, "A1", "A2", "A")
    circ = _superdense_decode(circ, "A", "B")

    eps = resource.implied_epsilon
    reports = (
        verify_circuit(circ, "MQ", 0, 2, "A1"),
        verify_circuit(circ, "PQ", 1, 3, "A2"),
    )
    return ProtocolOutcome(
        name="coherent_superdense",
        final_state=circ.state,
        role_map=_roles(4, mq_sender=0, pq_sender=1, mq_receiver=2, pq_receiver=3),
        noise_ledger={"eps1": eps},
        circuit=circ,
        conat_reports=reports,
    )


def compose_teleport_via_superdense(
    input_state: GaussianState,
    resource1: ResourceSpec,
    resource2: ResourceSpec,
) -> ProtocolOutcome:
    """Coherent teleportation whose two conat channels come from coherent superdense coding.

    ``resource1`` is the teleportation resource (A, B); ``resource2`` feeds
    the superdense coding (Abar, Bbar).  Output modes: 1 = A1, 2 = A,
    3 = Abar, 4 = Bbar, 5 = B (teleported).
    """
    circ = Circuit.start(
        tensor(
            _single(input_state, "A1"),
            resource1.state(("A", "B")),
            resource2.state(("Abar", "Bbar")),
        )
    )
    circ = _teleport_prep(circ, "A1", "A")
    circ = _superdense_encode(circ, "A1", "A", "Abar")
    circ = _superdense_decode(circ, "Abar", "Bbar")
    circ = circ.reorder(["A1", "A", "Abar", "Bbar", "B"])
    circ = _teleport_bob(circ, 2, 3, 4)

    e1, e2 = resource1.implied_epsilon, resource2.implied_epsilon
    fid, overlap, errs = _fidelities(circ, 4, "A1")
    state = circ.state
    ledger = {
        "eps1": e1,
        "eps2": e2,
        "sum_12": e1 + e2,
        "fidelity_bound": fidelity_lower_bound("composed1", [e1, e2]),
        **errs,
    }
    return ProtocolOutcome(
        name="compose_teleport_via_superdense",
        final_state=state,
        role_map=_roles(5, teleported=4),
        noise_ledger=ledger,
        circuit=circ,
        fidelity=fid,
        overlap_fidelity=overlap,
        correlation_reports=(correlation_report(state, 0, 2), correlation_report(state, 1, 3)),
    )


def compose_superdense_via_teleport(
    inputs: GaussianState,
    resource: ResourceSpec,
    pq: ConatChannelSpec,
    mq: ConatChannelSpec,
) -> ProtocolOutcome:
    """Coherent superdense coding with the qunat channel replaced by alternate teleportation.

    Output modes: 1 = A1, 2 = A2, 3 = A (Alice); 4 = PQ receiver (carries
    the teleported mode A), 5 = MQ receiver, 6 = B (Bob).
    """
    _check_kinds(mq, pq)
    circ = Circuit.start(tensor(_pair(inputs, ("A1", "A2")), resource.state(("A", "B"))))
    circ = _superdense_encode(circ, "A1", "A2", "A")
    circ, _, recv_x = apply_pq_conat(circ, "A", pq, "B'")
    circ, _, recv_p = apply_mq_conat(circ, "A", mq, "B''")
    circ = circ.gate(controlled_x_inv(), [recv_x, recv_p])
    circ = _superdense_decode(circ, "B'", "B")
    circ = circ.reorder(["A1", "A2", "A", "B'", "B''", "B"])

    e1, e2, e3 = resource.implied_epsilon, pq.nominal_epsilon, mq.nominal_epsilon
    reports = (
        verify_circuit(circ, "MQ", 0, 3, "A1"),
        verify_circuit(circ, "PQ", 1, 5, "A2"),
    )
    state = circ.state
    ledger = {
        "eps1": e1,
        "eps2": e2,
        "eps3": e3,
        "sum_mq": e1 + e2 + e3,
        "sum_pq": e1 + e2,
        "sum_23": e2 + e3,
    }
    return ProtocolOutcome(
        name="compose_superdense_via_teleport",
        final_state=state,
        role_map=_roles(6, mq_sender=0, pq_sender=1, mq_receiver=3, pq_receiver=5),
        noise_ledger=ledger,
        circuit=circ,
        conat_reports=reports,
        correlation_reports=(correlation_report(state, 2, 4),),
    )


# --- measurement baseline -------------------------------------------------------


def _bk_premeasurement(input_state: GaussianState, resource: ResourceSpec) -> GaussianState:
    circ = Circuit.start(tensor(_single(input_state, "A1"), resource.state(("A", "B"))))
    return _teleport_prep(circ, "A1", "A").state


def bk_deferred_circuit(input_state: GaussianState, resource: ResourceSpec) -> Circuit:
    """Unconditional (outcome-averaged) baseline as a unitary circuit.

    Homodyne outcomes only ever displace Bob's mode, so measuring and then
    displacing equals a controlled-position gate from A and a
    controlled-momentum gate from A1 onto B followed by discarding A1 and A.
    Output modes: 1 = A1, 2 = A, 3 = B (teleported).
    """
    circ = Circuit.start(tensor(_single(input_state, "A1"), resource.state(("A", "B"))))
    circ = _teleport_prep(circ, "A1", "A")
    return circ.gate(controlled_x(), ["A", "B"]).gate(controlled_p(), ["A1", "B"])


def standard_bk_teleport(
    input_state: GaussianState,
    resource: ResourceSpec,
    seed: int | np.random.Generator | None = None,
) -> ProtocolOutcome:
    """One run of measurement-based teleportation.

    Alice applies the same reflection and controlled-position displacement as
    in the coherent protocol, homodynes p of A1 and x of A, and Bob displaces
    B by the two outcomes.  The fidelity is the exact overlap of Bob's
    conditional state with the input.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    state = _bk_premeasurement(input_state, resource)
    m_p, state = homodyne(state, "A1", "p", rng)
    m_x, state = homodyne(state, "A", "x", rng)
    out = displace(state, "B", m_x, m_p)
    inp = _single(input_state, "A1")
    fid = overlap_fidelity(out, inp) if inp.is_pure() else None
    eps = resource.implied_epsilon
    return ProtocolOutcome(
        name="standard_bk_teleport",
        final_state=out,
        role_map={"mode1": 0, "teleported": 0},
        noise_ledger={"eps1": eps, "expected_average_fidelity": 2 / (2 + 2 * eps)},
        fidelity=fid,
        overlap_fidelity=fid,
        measurements={"p_A1": m_p, "x_A": m_x},
    )


def bk_average_fidelity(
    input_state: GaussianState,
    resource: ResourceSpec,
    n_trials: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo average overlap fidelity of the measurement baseline.

    Outcomes are drawn jointly from their Gaussian marginal and Bob's mode
    is conditioned in one batch, which is equivalent to sequential homodyne
    but vectorized.  Returns ``(mean, standard_error)``.
    """
    if n_trials < 2:
        raise ValueError("need at least two trials")
    inp = _single(input_state, "A1")
    if not inp.is_pure():
        raise ValueError("overlap fidelity needs a pure input")
    st = _bk_premeasurement(input_state, resource)
    meas = [1, 2]  # p of A1, x of A
    bob = [4, 5]
    mu_m, mu_b = st.mean[meas], st.mean[bob]
    L_m, L_b = st.factor[meas], st.factor[bob]
    V_mm = L_m @ L_m.T
    gain = np.linalg.solve(V_mm, L_m @ L_b.T).T
    resid = L_b - gain @ L_m  # factor of the conditional covariance
    cond_cov = resid @ resid.T

    rng = np.random.default_rng(seed)
    m = rng.multivariate_normal(mu_m, V_mm, size=n_trials, method="cholesky")
    cond_mean = mu_b + (m - mu_m) @ gain.T
    out_mean = cond_mean + m[:, ::-1]  # x_B += x_A outcome, p_B += p_A1 outcome
    total = cond_cov + inp.cov
    delta = out_mean - inp.mean
    quad = np.einsum("ij,jk,ik->i", delta, np.linalg.inv(total), delta)
    fids = np.exp(-0.5 * quad) / np.sqrt(np.linalg.det(total))
    return float(fids.mean()), float(fids.std(ddof=1) / np.sqrt(n_trials))


# --- degradation -------------------------------------------------------------


def default_input() -> GaussianState:
    return new_coherent(*DEFAULT_INPUT)


def default_inputs() -> GaussianState:
    return tensor(new_coherent(*DEFAULT_INPUT, label="A1"), new_coherent(*DEFAULT_SECOND_INPUT, label="A2"))


def iterate_composition(initial: Sequence[float], depth: int) -> DegradationTrace:
    """Alternate superdense-from-teleportation and teleportation-from-superdense.

    Each level consumes a position-correlated resource (``eps1``), a PQ
    channel (``eps2``) and an MQ channel (``eps3``).  It runs coherent
    superdense coding built on alternate teleportation, which generates an
    MQ channel, a PQ channel and a momentum-correlated pair; those achieved
    epsilons become the next level's channels and resource.  Coherent
    teleportation is also run on the level's inputs to record its fidelity.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    e1, e2, e3 = (float(e) for e in initial)
    if min(e1, e2, e3) < 0:
        raise ValueError("epsilons must be nonnegative")
    records = []
    for level in range(1, depth + 1):
        resource = ResourceSpec.from_epsilon(e1)
        pq = channel_from_epsilon("PQ", e2)
        mq = channel_from_epsilon("MQ", e3)
        e1, e2, e3 = resource.implied_epsilon, pq.nominal_epsilon, mq.nominal_epsilon
        sd = compose_superdense_via_teleport(default_inputs(), resource, pq, mq)
        tel = coherent_teleport(default_input(), resource, mq, pq)
        mq_out = sd.conat_reports[0].achieved_epsilon
        pq_out = sd.conat_reports[1].achieved_epsilon
        corr = sd.correlation_reports[0].epsilon
        records.append(
            level_record(
                level,
                e1,
                e2,
                e3,
                measured_fidelity=tel.fidelity,
                measured_mq=mq_out,
                measured_pq=pq_out,
                measured_correlation=corr,
            )
        )
        # reflecting one mode of the momentum-correlated pair makes it position-correlated
        e1, e2, e3 = corr, pq_out, mq_out
    return DegradationTrace(tuple(records))
