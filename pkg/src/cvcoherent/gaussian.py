"""Second-moment engine for Gaussian continuous-variable states.

Quadratures are interleaved ``(x1, p1, x2, p2, ...)`` with ``[x, p] = i``,
so a vacuum quadrature has variance 1/2.  Operations are represented by a
symplectic matrix ``S`` and a displacement ``d`` acting in the Heisenberg
picture: ``r -> S r + d``.  On moments this is ``mean -> S mean + d`` and
``cov -> S cov S^T``.

Everything here is an immutable value; functions return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-10
PHYSICAL_TOL = 1e-9
MIN_HOMODYNE_VARIANCE = 1e-14

ModeRef = Union[int, str]
QuadExpr = Union[Mapping[tuple, float], np.ndarray]


class PhysicsError(ValueError):
    """A state or operation violates a physical invariant."""


def omega(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with 2x2 blocks [[0, 1], [-1, 0]]."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Williamson eigenvalues of a covariance matrix, ascending, one per mode."""
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * omega(n) @ cov))
    return np.sort(ev)[::2]


def uncertainty_margin(cov: np.ndarray) -> float:
    """Smallest eigenvalue of ``cov + (i/2) Omega``; nonnegative for physical states."""
    n = cov.shape[0] // 2
    return float(np.linalg.eigvalsh(cov + 0.5j * omega(n)).min())


def _scaled_tol(cov: np.ndarray, tol: float) -> float:
    # eigvalsh rounding grows like dim * eps * |cov|; O(1) margins are unresolvable next to O(1e17) entries
    return tol + 64 * cov.shape[0] * np.finfo(float).eps * float(np.abs(cov).max())


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    lam, U = np.linalg.eigh(cov)
    return U * np.sqrt(np.clip(lam, 0.0, None))


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an ``n``-mode Gaussian state.

    ``labels`` holds one free-text role tag per mode (``"A1"``, ``"B'"``...).
    The constructor checks shapes, symmetry and the uncertainty principle.

    ``factor`` is a matrix ``L`` with ``cov = L L^T``.  Second moments are
    evaluated through it as ``|c^T L|^2``, which stays accurate when the
    state holds strongly anti-squeezed quadratures whose large parts cancel
    in the combination of interest.  It is derived from ``cov`` if omitted;
    use :meth:`from_factor` to build a state from a factor directly.
    """

    mean: np.ndarray
    cov: np.ndarray
    labels: tuple[str, ...] = field(default=())
    factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise ValueError(f"mean must have even nonzero length, got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > SYMMETRY_TOL * scale:
            raise PhysicsError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if uncertainty_margin(cov) < -_scaled_tol(cov, PHYSICAL_TOL):
            raise PhysicsError("covariance violates the uncertainty principle")
        labels = tuple(self.labels) if self.labels else tuple(f"m{i}" for i in range(mean.size // 2))
        if len(labels) != mean.size // 2:
            raise ValueError("need exactly one label per mode")
        if self.factor is None:
            factor = _psd_factor(cov)
        else:
            factor = np.array(self.factor, dtype=float)
            if factor.ndim != 2 or factor.shape[0] != mean.size:
                raise ValueError("factor must have one row per quadrature")
        for arr in (mean, cov, factor):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "factor", factor)

    @classmethod
    def from_factor(cls, mean, factor, labels: Sequence[str] = ()) -> "GaussianState":
        L = np.asarray(factor, dtype=float)
        return cls(mean, L @ L.T, tuple(labels), L)

    def variance(self, c: np.ndarray) -> float:
        """Variance of ``c . r`` computed through the factor."""
        v = np.asarray(c, dtype=float) @ self.factor
        return float(v @ v)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def index(self, ref: ModeRef) -> int:
        """Resolve a mode reference (position or unique label) to a position."""
        if isinstance(ref, (int, np.integer)) and not isinstance(ref, bool):
            if not 0 <= ref < self.n_modes:
                raise IndexError(f"mode {ref} out of range for {self.n_modes}-mode state")
            return int(ref)
        hits = [i for i, lab in enumerate(self.labels) if lab == ref]
        if len(hits) != 1:
            raise KeyError(f"label {ref!r} matches {len(hits)} modes")
        return hits[0]

    def relabel(self, mapping: Mapping[ModeRef, str]) -> "GaussianState":
        labels = list(self.labels)
        for ref, new in mapping.items():
            labels[self.index(ref)] = new
        return GaussianState(self.mean, self.cov, tuple(labels), self.factor)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return uncertainty_margin(self.cov) >= -_scaled_tol(self.cov, tol)

    def is_pure(self, tol: float = 1e-9) -> bool:
        """Pure iff ``(2 V Omega)^2 = -I``; tolerance scales with ``|V|^2``."""
        w = omega(self.n_modes)
        dev = 4 * self.cov @ w @ self.cov @ w + np.eye(2 * self.n_modes)
        return float(np.abs(dev).max()) < tol * max(1.0, float(np.abs(self.cov).max())) ** 2

    def to_dict(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "labels": list(self.labels),
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GaussianState":
        return cls(np.asarray(data["mean"]), np.asarray(data["cov"]), tuple(data.get("labels", ())))


@dataclass(frozen=True, eq=False)
class SymplecticOp:
    """Affine phase-space map ``r -> S r + d``; ``S`` must be symplectic."""

    S: np.ndarray
    d: np.ndarray | None = None

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise ValueError(f"S must be square with even size, got {S.shape}")
        d = np.zeros(S.shape[0]) if self.d is None else np.array(self.d, dtype=float).reshape(-1)
        if d.shape != (S.shape[0],):
            raise ValueError("displacement length does not match S")
        W = omega(S.shape[0] // 2)
        scale = max(1.0, float(np.abs(S).max()) ** 2)
        if np.abs(S @ W @ S.T - W).max() > SYMPLECTIC_TOL * scale:
            raise PhysicsError("matrix is not symplectic")
        S.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "d", d)

    @property
    def n_modes(self) -> int:
        return self.S.shape[0] // 2

    def then(self, other: "SymplecticOp") -> "SymplecticOp":
        """The op that applies ``self`` first and ``other`` second."""
        if other.n_modes != self.n_modes:
            raise ValueError("cannot compose ops on different numbers of modes")
        return SymplecticOp(other.S @ self.S, other.S @ self.d + other.d)

    def inverse(self) -> "SymplecticOp":
        Sinv = np.linalg.inv(self.S)
        return SymplecticOp(Sinv, -Sinv @ self.d)

    def direct_sum(self, other: "SymplecticOp") -> "SymplecticOp":
        n1, n2 = self.S.shape[0], other.S.shape[0]
        S = np.zeros((n1 + n2, n1 + n2))
        S[:n1, :n1] = self.S
        S[n1:, n1:] = other.S
        return SymplecticOp(S, np.concatenate([self.d, other.d]))

    @classmethod
    def identity(cls, n_modes: int) -> "SymplecticOp":
        return cls(np.eye(2 * n_modes))


# --- state constructors -----------------------------------------------------


_HALF = np.sqrt(0.5)


def new_vacuum(n: int = 1, labels: Sequence[str] = ()) -> GaussianState:
    if n < 1:
        raise ValueError("need at least one mode")
    return GaussianState(np.zeros(2 * n), 0.5 * np.eye(2 * n), tuple(labels), _HALF * np.eye(2 * n))


def new_coherent(x0: float, p0: float, label: str = "in") -> GaussianState:
    return GaussianState(np.array([x0, p0]), 0.5 * np.eye(2), (label,), _HALF * np.eye(2))


def new_squeezed(r: float, axis: str = "position", label: str = "sq") -> GaussianState:
    """Single-mode squeezed vacuum; ``axis`` is the quadrature with reduced noise."""
    if r < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    lo, hi = 0.5 * np.exp(-2 * r), 0.5 * np.exp(2 * r)
    if axis in ("position", "x"):
        var = np.array([lo, hi])
    elif axis in ("momentum", "p"):
        var = np.array([hi, lo])
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return GaussianState(np.zeros(2), np.diag(var), (label,), np.diag(np.sqrt(var)))


def new_tmsv(r: float, labels: Sequence[str] = ("A", "B")) -> GaussianState:
    """Two-mode squeezed vacuum with Var(x_A - x_B) = Var(p_A + p_B) = exp(-2r)."""
    if r < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    c = 0.5 * np.cosh(2 * r)
    # fixes c - s to within one ulp of exp(-2r)/2 instead of two independent roundings
    s = c - 0.5 * np.exp(-2 * r)
    cov = np.array(
        [
            [c, 0, s, 0],
            [0, c, 0, -s],
            [s, 0, c, 0],
            [0, -s, 0, c],
        ]
    )
    # beamsplitter on an (x-anti, p-squeezed) and an (x-squeezed, p-anti) mode;
    # the large columns of x_A and x_B are identical floats, so x_A - x_B cancels exactly
    lo, hi = 0.5 * np.exp(-r), 0.5 * np.exp(r)
    L = np.array(
        [
            [hi, 0, lo, 0],
            [0, lo, 0, hi],
            [hi, 0, -lo, 0],
            [0, lo, 0, -hi],
        ]
    )
    return GaussianState(np.zeros(4), cov, tuple(labels), L)


def new_thermal(nbar: float, label: str = "th") -> GaussianState:
    if nbar < 0:
        raise ValueError("mean photon number must be nonnegative")
    return GaussianState(np.zeros(2), (nbar + 0.5) * np.eye(2), (label,), np.sqrt(nbar + 0.5) * np.eye(2))


def tensor(*states: GaussianState) -> GaussianState:
    """Product state; means and covariances are direct sums, labels concatenate."""
    if not states:
        raise ValueError("need at least one state")
    dims = [s.mean.size for s in states]
    widths = [s.factor.shape[1] for s in states]
    cov = np.zeros((sum(dims), sum(dims)))
    L = np.zeros((sum(dims), sum(widths)))
    k = j = 0
    for s, n, w in zip(states, dims, widths):
        cov[k : k + n, k : k + n] = s.cov
        L[k : k + n, j : j + w] = s.factor
        k += n
        j += w
    mean = np.concatenate([s.mean for s in states])
    labels = tuple(lab for s in states for lab in s.labels)
    return GaussianState(mean, cov, labels, L)


def add_noise(state: GaussianState, noise: np.ndarray) -> GaussianState:
    """Add a positive semidefinite classical noise matrix to the covariance."""
    noise = np.asarray(noise, dtype=float)
    if np.linalg.eigvalsh(noise).min() < -1e-12 * max(1.0, float(np.abs(noise).max())):
        raise PhysicsError("added noise must be positive semidefinite")
    L = np.hstack([state.factor, _psd_factor(noise)])
    return GaussianState(state.mean, state.cov + noise, state.labels, L)


# --- evolution and bookkeeping ------------------------------------------------


def apply(state: GaussianState, op: SymplecticOp) -> GaussianState:
    if op.n_modes != state.n_modes:
        raise ValueError(f"op acts on {op.n_modes} modes, state has {state.n_modes}")
    return GaussianState.from_factor(op.S @ state.mean + op.d, op.S @ state.factor, state.labels)


def _quad_slice(i: int) -> slice:
    return slice(2 * i, 2 * i + 2)


def embed(op: SymplecticOp, target_modes: Sequence[int], total_modes: int) -> SymplecticOp:
    """Lift ``op`` so its k-th mode acts on ``target_modes[k]``; identity elsewhere."""
    targets = [int(t) for t in target_modes]
    if len(targets) != op.n_modes:
        raise ValueError(f"op acts on {op.n_modes} modes but {len(targets)} targets given")
    if len(set(targets)) != len(targets):
        raise ValueError("target modes must be distinct")
    if any(not 0 <= t < total_modes for t in targets):
        raise IndexError("target mode out of range")
    idx = np.concatenate([[2 * t, 2 * t + 1] for t in targets])
    S = np.eye(2 * total_modes)
    S[np.ix_(idx, idx)] = op.S
    d = np.zeros(2 * total_modes)
    d[idx] = op.d
    return SymplecticOp(S, d)


def drop_modes(state: GaussianState, modes: Iterable[ModeRef]) -> GaussianState:
    """Gaussian partial trace over ``modes``."""
    drop = {state.index(m) for m in modes}
    keep = [i for i in range(state.n_modes) if i not in drop]
    if not keep:
        raise ValueError("cannot drop every mode")
    return select_modes(state, keep)


def select_modes(state: GaussianState, modes: Sequence[ModeRef]) -> GaussianState:
    """Reduced state on ``modes``, in the given order."""
    keep = [state.index(m) for m in modes]
    idx = np.concatenate([[2 * i, 2 * i + 1] for i in keep])
    return GaussianState(
        state.mean[idx], state.cov[np.ix_(idx, idx)], tuple(state.labels[i] for i in keep), state.factor[idx]
    )


def quad_vector(n_modes: int, expr: QuadExpr, state: GaussianState | None = None) -> np.ndarray:
    """Coefficient vector for a linear combination of quadratures.

    ``expr`` maps ``(mode, "x" | "p")`` to a coefficient, or is already a
    length-``2n`` array.  Modes may be labels when ``state`` is given.
    """
    if isinstance(expr, np.ndarray):
        c = np.asarray(expr, dtype=float).reshape(-1)
        if c.size != 2 * n_modes:
            raise ValueError("coefficient vector has wrong length")
        return c
    if not expr:
        raise ValueError("empty quadrature expression")
    c = np.zeros(2 * n_modes)
    for (mode, quad), coeff in expr.items():
        i = state.index(mode) if state is not None else int(mode)
        if not 0 <= i < n_modes:
            raise IndexError(f"mode {mode} out of range")
        if quad not in ("x", "p"):
            raise ValueError(f"quadrature must be 'x' or 'p', got {quad!r}")
        c[2 * i + (quad == "p")] += coeff
    return c


def quad_stats(state: GaussianState, expr: QuadExpr) -> tuple[float, float]:
    """Mean and variance of a linear combination of the state's quadratures."""
    c = quad_vector(state.n_modes, expr, state)
    return float(c @ state.mean), state.variance(c)


def homodyne(
    state: GaussianState,
    mode: ModeRef,
    quadrature: str,
    seed: int | np.random.Generator | None = None,
) -> tuple[float, GaussianState]:
    """Measure one quadrature of ``mode`` and condition the remaining modes.

    The outcome is drawn from the Gaussian marginal; the other modes are
    updated with the Schur complement on the measured quadrature and the
    measured mode is removed.  Measuring the last mode is not allowed.
    """
    i = state.index(mode)
    if state.n_modes < 2:
        raise ValueError("homodyne needs at least one unmeasured mode to remain")
    if quadrature not in ("x", "p"):
        raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")
    k = 2 * i + (quadrature == "p")
    Lk = state.factor[k]
    var = float(Lk @ Lk)
    if var < MIN_HOMODYNE_VARIANCE:
        raise PhysicsError("measured quadrature has vanishing variance")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    outcome = float(state.mean[k] + np.sqrt(var) * rng.standard_normal())
    rest = np.array([j for j in range(state.mean.size) if j not in (2 * i, 2 * i + 1)])
    Lr = state.factor[rest]
    cross = Lr @ Lk
    mean = state.mean[rest] + cross * (outcome - state.mean[k]) / var
    # projecting the factor off the measured direction is the Schur complement
    L = Lr - np.outer(cross / var, Lk)
    labels = state.labels[:i] + state.labels[i + 1 :]
    return outcome, GaussianState.from_factor(mean, L, labels)


def displace(state: GaussianState, mode: ModeRef, dx: float, dp: float) -> GaussianState:
    i = state.index(mode)
    mean = state.mean.copy()
    mean[2 * i] += dx
    mean[2 * i + 1] += dp
    return GaussianState(mean, state.cov, state.labels, state.factor)


def overlap_fidelity(a: GaussianState, b: GaussianState) -> float:
    """Fidelity of two single-mode Gaussian states, at least one of them pure."""
    if a.n_modes != 1 or b.n_modes != 1:
        raise ValueError("single-mode states only")
    if not (a.is_pure() or b.is_pure()):
        raise ValueError("closed form needs one pure state")
    total = a.cov + b.cov
    delta = a.mean - b.mean
    return float(np.exp(-0.5 * delta @ np.linalg.solve(total, delta)) / np.sqrt(np.linalg.det(total)))


# --- gates ------------------------------------------------------------------


def reflection() -> SymplecticOp:
    return SymplecticOp(-np.eye(2))


def fourier() -> SymplecticOp:
    """(x, p) -> (-p, x)."""
    return SymplecticOp(np.array([[0.0, -1.0], [1.0, 0.0]]))


def fourier_inv() -> SymplecticOp:
    return SymplecticOp(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def controlled_x() -> SymplecticOp:
    """Controlled-position displacement: x2 += x1, p1 -= p2 (mode 1 controls)."""
    return SymplecticOp(
        np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, -1.0],
                [1.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    )


def controlled_x_inv() -> SymplecticOp:
    return SymplecticOp(
        np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 1.0],
                [-1.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    )


def controlled_p() -> SymplecticOp:
    """Controlled-momentum displacement: x1 -= x2, p2 += p1."""
    return SymplecticOp(
        np.array(
            [
                [1.0, 0.0, -1.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, 1.0],
            ]
        )
    )


def beamsplitter_5050() -> SymplecticOp:
    """Mode 1 -> sum port (q1 + q2)/sqrt2, mode 2 -> difference port (q1 - q2)/sqrt2."""
    h = 1 / np.sqrt(2)
    return SymplecticOp(
        np.array(
            [
                [h, 0.0, h, 0.0],
                [0.0, h, 0.0, h],
                [h, 0.0, -h, 0.0],
                [0.0, h, 0.0, -h],
            ]
        )
    )


def squeeze(r: float, axis: str = "position") -> SymplecticOp:
    if r < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    if axis in ("position", "x"):
        return SymplecticOp(np.diag([np.exp(-r), np.exp(r)]))
    if axis in ("momentum", "p"):
        return SymplecticOp(np.diag([np.exp(r), np.exp(-r)]))
    raise ValueError(f"unknown axis {axis!r}")


def displacement(dx: float, dp: float) -> SymplecticOp:
    return SymplecticOp(np.eye(2), np.array([dx, dp]))


def permutation(order: Sequence[int]) -> SymplecticOp:
    """Reorder modes: output mode k is input mode ``order[k]``."""
    order = [int(o) for o in order]
    n = len(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of range(n)")
    S = np.zeros((2 * n, 2 * n))
    for k, src in enumerate(order):
        S[_quad_slice(k), _quad_slice(src)] = np.eye(2)
    return SymplecticOp(S)


# --- circuit tracking -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Circuit:
    """An initial product state together with the end-to-end map applied to it.

    Row ``k`` of ``op.S`` expresses output quadrature ``k`` as a linear
    combination of the initial quadratures, which is how the Heisenberg
    observable tables are checked.  Adding a mode mid-circuit extends the
    map by an identity block, since nothing has acted on that mode yet.
    """

    initial: GaussianState
    op: SymplecticOp
    labels: tuple[str, ...]

    @classmethod
    def start(cls, state: GaussianState) -> "Circuit":
        return cls(state, SymplecticOp.identity(state.n_modes), state.labels)

    @property
    def n_modes(self) -> int:
        return self.initial.n_modes

    @property
    def state(self) -> GaussianState:
        out = apply(self.initial, self.op)
        return GaussianState(out.mean, out.cov, self.labels, out.factor)

    def index(self, ref: ModeRef) -> int:
        """Position of a mode in the current (output) ordering."""
        if isinstance(ref, (int, np.integer)) and not isinstance(ref, bool):
            if not 0 <= ref < self.n_modes:
                raise IndexError(f"mode {ref} out of range")
            return int(ref)
        hits = [i for i, lab in enumerate(self.labels) if lab == ref]
        if len(hits) != 1:
            raise KeyError(f"label {ref!r} matches {len(hits)} modes")
        return hits[0]

    def symbol(self, label: str) -> int:
        """Position of an initial mode, by its initial label."""
        return self.initial.index(label)

    def gate(self, op: SymplecticOp, modes: Sequence[ModeRef]) -> "Circuit":
        full = embed(op, [self.index(m) for m in modes], self.n_modes)
        return Circuit(self.initial, self.op.then(full), self.labels)

    def add_modes(self, state: GaussianState) -> "Circuit":
        return Circuit(
            tensor(self.initial, state),
            self.op.direct_sum(SymplecticOp.identity(state.n_modes)),
            self.labels + state.labels,
        )

    def reorder(self, order: Sequence[ModeRef]) -> "Circuit":
        idx = [self.index(m) for m in order]
        return Circuit(
            self.initial,
            self.op.then(permutation(idx)),
            tuple(self.labels[i] for i in idx),
        )

    def relabel(self, mapping: Mapping[ModeRef, str]) -> "Circuit":
        labels = list(self.labels)
        for ref, new in mapping.items():
            labels[self.index(ref)] = new
        return Circuit(self.initial, self.op, tuple(labels))

    def row(self, mode: ModeRef, quadrature: str) -> np.ndarray:
        """Output quadrature as a coefficient vector over initial quadratures."""
        k = 2 * self.index(mode) + (quadrature == "p")
        return self.op.S[k].copy()

    def combo_stats(self, out_coeffs=None, in_coeffs=None) -> tuple[float, float]:
        """Mean and variance of ``out_coeffs . r_out + in_coeffs . r_in``.

        Mixing output and initial quadratures gives error operators such as
        ``x_tel - x_in`` directly, without going through the output covariance.
        """
        dim = 2 * self.n_modes
        c_out = np.zeros(dim) if out_coeffs is None else np.asarray(out_coeffs, dtype=float)
        c_in = np.zeros(dim) if in_coeffs is None else np.asarray(in_coeffs, dtype=float)
        w = self.op.S.T @ c_out + c_in
        mean = float(w @ self.initial.mean + c_out @ self.op.d)
        return mean, self.initial.variance(w)

    def unit(self, mode: ModeRef, quadrature: str, initial: bool = False) -> np.ndarray:
        """Unit coefficient vector on one output (or initial) quadrature."""
        i = self.symbol(mode) if initial else self.index(mode)
        e = np.zeros(2 * self.n_modes)
        e[2 * i + (quadrature == "p")] = 1.0
        return e
