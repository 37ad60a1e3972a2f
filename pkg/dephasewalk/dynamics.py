from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from dephasewalk.channels import (
    DensityMatrix,
    StochasticMatrix,
    SuperoperatorMatrix,
    unvectorize,
    vectorize,
)
from dephasewalk.errors import ConfigError, DefectiveSpectrumError, DimensionError, InvariantError
from dephasewalk.spectral import SpectralDecomposition

logger = logging.getLogger("dephasewalk.dynamics")

DEFAULT_TRAJECTORY_CAP = 500
CLAMP_TOL = 1e-14
SUM_TOL = 1e-12
RESIDUAL_FLOOR = 1e-14


@dataclass(frozen=True)
class ProbabilityVector:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float).reshape(-1)
        if arr.size == 0:
            raise DimensionError("empty probability vector")
        if arr.min() < -CLAMP_TOL:
            raise InvariantError(f"negative probability {arr.min():.3e} beyond round-off")
        arr = np.where(arr < 0.0, 0.0, arr)
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise InvariantError(f"probabilities sum to {total:.15g}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def site(cls, index: int, n: int) -> "ProbabilityVector":
        p = np.zeros(n)
        p[index] = 1.0
        return cls(p)


Snapshot = Union[ProbabilityVector, DensityMatrix]


@dataclass(frozen=True)
class Trajectory:
    tau: float
    steps: List[int]
    states: List[Snapshot] = field(repr=False)

    def __post_init__(self):
        if len(self.steps) != len(self.states):
            raise InvariantError("trajectory steps and snapshots differ in length")
        if self.steps and self.steps[0] != 0:
            raise InvariantError("trajectory must start at step 0")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise InvariantError("trajectory step indices must be strictly increasing")

    def populations(self) -> np.ndarray:
        """(steps, N) array of occupation probabilities."""
        rows = []
        for s in self.states:
            rows.append(s.data if isinstance(s, ProbabilityVector) else s.populations)
        return np.vstack(rows)

    def coherence_norms(self) -> np.ndarray:
        return np.array([s.coherence_norm if isinstance(s, DensityMatrix) else 0.0 for s in self.states])


@dataclass(frozen=True)
class SpectralAmplitudes:
    """C_s = <l_s|P0> for s >= 2; C_1 r_1 is the stationary part."""

    coefficients: np.ndarray
    stationary: np.ndarray = field(repr=False)
    decomposition: SpectralDecomposition = field(repr=False)

    def reconstruct(self, k: int) -> np.ndarray:
        d = self.decomposition
        if k == 0:
            decay = np.ones(d.dimension - 1, dtype=complex)
        else:
            decay = np.exp(-d.exponents[1:] * k)
        vec = self.stationary + d.right[:, 1:] @ (self.coefficients * decay)
        return vec


def _check_cap(steps: int, cap: Optional[int]) -> None:
    cap = DEFAULT_TRAJECTORY_CAP if cap is None else cap
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if steps > cap:
        raise ConfigError(f"{steps} steps exceed the trajectory cap of {cap}")


def relax_classical(
    q: StochasticMatrix,
    p0: ProbabilityVector,
    steps: int,
    tau: float = 1.0,
    cap: Optional[int] = None,
) -> Trajectory:
    """P(k) = Q^k P(0), every step stored."""
    _check_cap(steps, cap)
    if q.dimension != p0.dimension:
        raise DimensionError(f"Markov matrix dimension {q.dimension} does not match state dimension {p0.dimension}")
    states: List[Snapshot] = [p0]
    p = p0.data
    for _ in range(steps):
        p = q.data @ p
        states.append(ProbabilityVector(p))
        p = states[-1].data
    return Trajectory(tau=tau, steps=list(range(steps + 1)), states=states)


def spectral_expansion(d: SpectralDecomposition, p0: Union[ProbabilityVector, DensityMatrix]) -> SpectralAmplitudes:
    if d.near_ep or not d.biorthonormal:
        raise DefectiveSpectrumError(
            f"defective spectrum: eigenvector matrix condition {d.condition:.3e}, expansion not available"
        )
    vec = vectorize(p0) if isinstance(p0, DensityMatrix) else np.asarray(p0.data, dtype=complex)
    if vec.shape[0] != d.dimension:
        raise DimensionError(f"state dimension {vec.shape[0]} does not match decomposition dimension {d.dimension}")
    c = d.left.conj().T @ vec
    return SpectralAmplitudes(coefficients=c[1:], stationary=c[0] * d.right[:, 0], decomposition=d)


def relax_quantum(
    m: SuperoperatorMatrix,
    rho0: DensityMatrix,
    steps: int,
    tau: float = 1.0,
    cap: Optional[int] = None,
) -> Trajectory:
    _check_cap(steps, cap)
    n = rho0.dimension
    if m.dimension != n * n:
        raise DimensionError(f"superoperator acts on dimension {m.hilbert_dimension}, state has {n}")
    states: List[Snapshot] = [rho0]
    v = vectorize(rho0)
    for _ in range(steps):
        rho = unvectorize(m.data @ v, n)
        rho = 0.5 * (rho + rho.conj().T)
        states.append(DensityMatrix(rho))
        v = vectorize(states[-1])
    return Trajectory(tau=tau, steps=list(range(steps + 1)), states=states)


def marginals(p: ProbabilityVector, L: int) -> ProbabilityVector:
    """p_l = X_l + Y_l."""
    if p.dimension % 2 != 0:
        raise DimensionError(f"marginals need an even dimension (X, Y blocks), got {p.dimension}")
    if p.dimension != 2 * L:
        raise DimensionError(f"state dimension {p.dimension} is not 2L = {2 * L}")
    return ProbabilityVector(p.data[:L] + p.data[L:])


def marginal_trajectory(traj: Trajectory, L: int) -> Trajectory:
    states: List[Snapshot] = []
    for s in traj.states:
        pv = s if isinstance(s, ProbabilityVector) else ProbabilityVector(s.populations)
        states.append(marginals(pv, L))
    return Trajectory(tau=traj.tau, steps=list(traj.steps), states=states)


def relaxation_residuals(traj: Trajectory, stationary: Optional[Sequence[float]] = None) -> np.ndarray:
    """Signed residuals P_n(k) - pi_n, shape (steps, N)."""
    pops = traj.populations()
    pi = np.full(pops.shape[1], 1.0 / pops.shape[1]) if stationary is None else np.asarray(stationary, dtype=float)
    return pops - pi


def late_time_rate(series: Sequence[float], floor: float = RESIDUAL_FLOOR, fraction: float = 1.0 / 3.0) -> float:
    """
    Decay rate from a linear fit of log|series| over the last `fraction` of the points
    that are still above `floor`.
    """
    values = np.abs(np.asarray(series, dtype=float))
    t = np.flatnonzero(values > floor)
    if t.size < 3:
        raise InvariantError("too few points above the residual floor to fit a rate")
    start = int(np.floor(t.size * (1.0 - fraction)))
    window = t[min(start, t.size - 3):]
    slope, _ = np.polyfit(window.astype(float), np.log(values[window]), 1)
    return float(-slope)


def sign_changes(series: Sequence[float], floor: float = RESIDUAL_FLOOR, stride: int = 2) -> int:
    """Sign changes of series[0::stride], ignoring samples with |x| <= floor."""
    x = np.asarray(series, dtype=float)[::stride]
    x = x[np.abs(x) > floor]
    if x.size < 2:
        return 0
    return int(np.count_nonzero(np.sign(x[1:]) != np.sign(x[:-1])))


def is_oscillatory(
    residuals: np.ndarray,
    floor: float = RESIDUAL_FLOOR,
    stride: int = 2,
    min_changes: int = 2,
    skip: int = 1,
) -> bool:
    """
    Monotone-vs-oscillatory discriminator on signed residuals (steps, N).

    Sampling every second step removes the period-two alternation of negative real
    eigenvalues; a sum of real decaying modes then changes sign at most (modes - 1)
    times, while a complex pair keeps changing sign.
    """
    res = np.asarray(residuals, dtype=float)
    if res.ndim == 1:
        res = res[:, None]
    res = res[skip:]
    counts = [sign_changes(res[:, n], floor=floor, stride=stride) for n in range(res.shape[1])]
    return max(counts) >= min_changes
