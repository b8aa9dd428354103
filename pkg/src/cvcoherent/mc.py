"""Monte-Carlo cross-check of the covariance engine.

Every state and operation in this package is Gaussian and every reported
quantity is a first or second moment, so drawing classical phase-space
points from the Wigner distribution and pushing them through the same
affine maps reproduces all moments.  This is a moment oracle, not a general
quantum simulator.

Sampling uses numpy's PCG64 generator.  Points are drawn in blocks, each
seeded from ``(seed, block_index)``, so a batch does not depend on how the
blocks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import Circuit, GaussianState, SymplecticOp

RNG_ALGORITHM = "PCG64"
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    seed: int
    algorithm: str = RNG_ALGORITHM

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class MomentVerdict:
    passed: bool
    max_abs_z: float
    mean_z: np.ndarray
    cov_z: np.ndarray
    n_samples: int
    tolerance_sigmas: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_abs_z": self.max_abs_z,
            "n_samples": self.n_samples,
            "tolerance_sigmas": self.tolerance_sigmas,
            "rng": RNG_ALGORITHM,
        }


def sample_state(state: GaussianState, n: int, seed: int, block_size: int = BLOCK_SIZE) -> SampleBatch:
    if n < 1:
        raise ValueError("need at least one sample")
    L = state.factor  # cov = L L^T, so z @ L^T has the right covariance
    blocks = []
    for b, start in enumerate(range(0, n, block_size)):
        m = min(block_size, n - start)
        rng = np.random.default_rng([seed, b])
        blocks.append(rng.standard_normal((m, L.shape[1])) @ L.T)
    return SampleBatch(np.vstack(blocks) + state.mean, seed)


def push(batch: SampleBatch, op: SymplecticOp) -> SampleBatch:
    if batch.points.shape[1] != op.S.shape[0]:
        raise ValueError("batch and op dimensions differ")
    return SampleBatch(batch.points @ op.S.T + op.d, batch.seed, batch.algorithm)


def compare_moments(batch: SampleBatch, state: GaussianState, tolerance_sigmas: float = 5.0) -> MomentVerdict:
    """z-scores of empirical means and covariances against the analytic state.

    Standard errors are the Gaussian ones: ``sqrt(V_ii / n)`` for means and
    ``sqrt((V_ii V_jj + V_ij^2) / n)`` for covariance entries.
    """
    pts = batch.points
    if pts.shape[1] != state.mean.size:
        raise ValueError("batch and state dimensions differ")
    n = pts.shape[0]
    V = state.cov
    diag = np.diag(V)
    mean_z = (pts.mean(axis=0) - state.mean) / np.sqrt(diag / n)
    emp = np.cov(pts, rowvar=False)
    se = np.sqrt((np.outer(diag, diag) + V**2) / n)
    cov_z = (emp - V) / se
    worst = float(max(np.abs(mean_z).max(), np.abs(cov_z).max()))
    return MomentVerdict(worst <= tolerance_sigmas, worst, mean_z, cov_z, n, tolerance_sigmas)


def combo_zscore(values: np.ndarray, mean: float, variance: float) -> tuple[float, float]:
    """z-scores of the sample mean and sample variance of a scalar combination."""
    n = values.size
    zm = (values.mean() - mean) / np.sqrt(variance / n)
    zv = (values.var(ddof=1) - variance) / (variance * np.sqrt(2.0 / (n - 1)))
    return float(zm), float(zv)


def verify_circuit(circ: Circuit, n: int = 100_000, seed: int = 0, tolerance_sigmas: float = 5.0) -> MomentVerdict:
    """Sample the initial state, push through the end-to-end map, compare with the engine."""
    batch = push(sample_state(circ.initial, n, seed), circ.op)
    return compare_moments(batch, circ.state, tolerance_sigmas)
