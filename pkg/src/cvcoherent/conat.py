"""Finitely squeezed conat channels and a checker for their defining conditions.

A position-quadrature (PQ) conat channel copies ``x`` of the sender mode onto
a fresh receiver mode while disturbing ``p`` only in a way that the
receiver's momentum can undo.  The canonical realization used here is a
controlled-position displacement onto a position-squeezed ancilla:

    x_A' = x_A,   p_A' = p_A - p_c,   x_B' = x_A + x_c,   p_B' = p_c

so the copy noise is ``x_c`` (variance ``exp(-2 r_c)/2``) and the conjugate
combination ``p_dX + p_B'`` cancels exactly.  The momentum (MQ) channel is
the same circuit conjugated by Fourier transforms.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .gaussian import (
    Circuit,
    GaussianState,
    ModeRef,
    SymplecticOp,
    controlled_x,
    fourier,
    fourier_inv,
    new_squeezed,
    new_vacuum,
)

MEAN_TOL = 1e-9
COPY_TOL = 1e-12
KINDS = ("PQ", "MQ")


@dataclass(frozen=True)
class ConatChannelSpec:
    """Canonical conat channel with ancilla squeezing ``r_c``.

    Negative ``r_c`` means an anti-squeezed ancilla; it is allowed so that
    degraded channels with ``epsilon >= 1/2`` can still be instantiated, but
    such channels stop being conforming once ``epsilon >= 1``.
    """

    kind: str
    r_c: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not np.isfinite(self.r_c):
            raise ValueError("r_c must be finite")

    @property
    def nominal_epsilon(self) -> float:
        return 0.5 * float(np.exp(-2 * self.r_c))

    @property
    def conforming(self) -> bool:
        return 0 < self.nominal_epsilon < 1

    @classmethod
    def from_epsilon(cls, kind: str, epsilon: float) -> "ConatChannelSpec":
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        return cls(kind, -0.5 * float(np.log(2 * epsilon)))

    def ancilla(self, label: str) -> GaussianState:
        """Ancilla whose copied quadrature (x before conjugation) has variance epsilon."""
        if self.r_c >= 0:
            return new_squeezed(self.r_c, "position", label)
        return new_squeezed(-self.r_c, "momentum", label)


@dataclass(frozen=True)
class ConatReport:
    kind: str
    sender: int
    receiver: int
    input_mode: int
    copies_exactly: bool
    var_copy_noise: float
    var_conjugate_combo: float
    mean_copy_noise: float
    mean_conjugate_combo: float
    achieved_epsilon: float
    conforming: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _wrap(state):
    if isinstance(state, Circuit):
        return state, False
    if isinstance(state, GaussianState):
        return Circuit.start(state), True
    raise TypeError(f"expected GaussianState or Circuit, got {type(state).__name__}")


def _check_ancilla(ancilla: GaussianState) -> None:
    if ancilla.n_modes != 1:
        raise ValueError("ancilla must be a single mode")
    if np.abs(ancilla.mean).max() > MEAN_TOL:
        raise ValueError("ancilla must have zero mean")


def apply_pq_conat_with_ancilla(state, mode: ModeRef, ancilla: GaussianState, receiver_label: str = "B'"):
    """PQ conat circuit with a caller-supplied ancilla.

    ``state`` may be a :class:`GaussianState` or a :class:`Circuit`; the
    result has the same type.  Returns ``(result, sender, receiver)`` where
    the receiver is appended as the last mode.
    """
    _check_ancilla(ancilla)
    circ, unwrap = _wrap(state)
    sender = circ.index(mode)
    circ = circ.add_modes(ancilla.relabel({0: receiver_label}))
    receiver = circ.n_modes - 1
    circ = circ.gate(controlled_x(), [sender, receiver])
    return (circ.state if unwrap else circ), sender, receiver


def apply_pq_conat(state, mode: ModeRef, spec: ConatChannelSpec, receiver_label: str = "B'"):
    if spec.kind != "PQ":
        raise ValueError("apply_pq_conat needs a PQ channel spec")
    return apply_pq_conat_with_ancilla(state, mode, spec.ancilla(receiver_label), receiver_label)


def apply_mq_conat(state, mode: ModeRef, spec: ConatChannelSpec, receiver_label: str = "B''"):
    """MQ conat channel built as (F^-1 (x) F^-1) . PQ . F on the sender mode."""
    if spec.kind != "MQ":
        raise ValueError("apply_mq_conat needs an MQ channel spec")
    circ, unwrap = _wrap(state)
    sender = circ.index(mode)
    circ = circ.gate(fourier(), [sender])
    circ, sender, receiver = apply_pq_conat_with_ancilla(circ, sender, spec.ancilla(receiver_label), receiver_label)
    circ = circ.gate(fourier_inv(), [sender]).gate(fourier_inv(), [receiver])
    return (circ.state if unwrap else circ), sender, receiver


def conat_circuit(kind: str, r_c: float, input_state: GaussianState | None = None) -> Circuit:
    """Two-mode end-to-end circuit of a single canonical channel."""
    circ = Circuit.start(input_state if input_state is not None else new_vacuum(1, ("A",)))
    spec = ConatChannelSpec(kind, r_c)
    apply_fn = apply_pq_conat if kind == "PQ" else apply_mq_conat
    circ, _, _ = apply_fn(circ, 0, spec)
    return circ


def verify_conat(
    end_to_end_map: SymplecticOp,
    input_moments: GaussianState,
    kind: str,
    sender_mode: int,
    receiver_mode: int,
    input_mode: int | None = None,
) -> ConatReport:
    """Check the conat conditions on an end-to-end map.

    Noise operators are read off as row differences of the map, e.g. for PQ
    ``x_dX = row(x_receiver) - x_input`` and ``p_dX = row(p_sender) - p_input``,
    and their moments are evaluated against ``input_moments`` (the state the
    map acts on).  ``input_mode`` defaults to ``sender_mode``.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    n = input_moments.n_modes
    if end_to_end_map.n_modes != n:
        raise ValueError("map and input moments have different mode counts")
    s, r = int(sender_mode), int(receiver_mode)
    i = s if input_mode is None else int(input_mode)
    if s == r:
        raise ValueError("sender and receiver modes collide")
    for m in (s, r, i):
        if not 0 <= m < n:
            raise IndexError(f"mode {m} out of range")
    S, d = end_to_end_map.S, end_to_end_map.d
    mu = input_moments.mean

    # copied / disturbed quadrature offsets within a mode
    cq, dq = (0, 1) if kind == "PQ" else (1, 0)
    e_copy = np.zeros(2 * n)
    e_copy[2 * i + cq] = 1.0
    e_dist = np.zeros(2 * n)
    e_dist[2 * i + dq] = 1.0

    copy_row = S[2 * s + cq]
    copies_exactly = bool(np.abs(copy_row - e_copy).max() <= COPY_TOL and abs(d[2 * s + cq]) <= COPY_TOL)

    copy_noise = S[2 * r + cq] - e_copy
    copy_noise_shift = d[2 * r + cq]
    combo = (S[2 * s + dq] - e_dist) + S[2 * r + dq]
    combo_shift = d[2 * s + dq] + d[2 * r + dq]

    mean_copy = float(copy_noise @ mu + copy_noise_shift)
    mean_combo = float(combo @ mu + combo_shift)
    var_copy = input_moments.variance(copy_noise)
    var_combo = input_moments.variance(combo)
    eps = max(var_copy, var_combo, 0.0)
    conforming = bool(
        eps < 1 and abs(mean_copy) <= MEAN_TOL and abs(mean_combo) <= MEAN_TOL and copies_exactly
    )
    return ConatReport(
        kind=kind,
        sender=s,
        receiver=r,
        input_mode=i,
        copies_exactly=copies_exactly,
        var_copy_noise=var_copy,
        var_conjugate_combo=var_combo,
        mean_copy_noise=mean_copy,
        mean_conjugate_combo=mean_combo,
        achieved_epsilon=eps,
        conforming=conforming,
    )


def verify_circuit(circ: Circuit, kind: str, sender: ModeRef, receiver: ModeRef, input_mode: ModeRef | None = None):
    """:func:`verify_conat` on a tracked circuit, with label-aware mode lookup."""
    i = circ.index(sender) if input_mode is None else circ.symbol(input_mode)
    return verify_conat(circ.op, circ.initial, kind, circ.index(sender), circ.index(receiver), i)
