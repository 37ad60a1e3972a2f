"""
One-step evolution objects: unitary propagator, dephasing map, the classical
Markov matrix of the fully dephased walk and the q < 1 superoperator.

Vectorization is row-major: rho[n, m] sits at index n * N + m.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from dephasewalk.errors import DimensionError, InvariantError
from dephasewalk.models import (
    CoinedWalkModel,
    HermitianMatrix,
    RingModel,
    UnitaryMatrix,
    WalkModel,
    at_beta,
    coined_step_unitary,
    ring_hamiltonian,
)

logger = logging.getLogger("dephasewalk.channels")

TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
SUM_TOL = 1e-12
CLAMP_TOL = 1e-14


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_q(q: float) -> float:
    q = float(q)
    if not (0.0 <= q <= 1.0):
        raise InvariantError(f"dephasing probability q must lie in [0, 1], got {q}")
    return q


@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"DensityMatrix must be square, got shape {arr.shape}")
        tr = complex(np.trace(arr))
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantError(f"density matrix trace {tr:.15g} differs from 1")
        herm = float(np.max(np.abs(arr - arr.conj().T)))
        if herm > TRACE_TOL:
            raise InvariantError(f"density matrix is not Hermitian (residual {herm:.3e})")
        low = float(np.linalg.eigvalsh(0.5 * (arr + arr.conj().T))[0])
        if low < -POSITIVITY_TOL:
            raise InvariantError(f"density matrix has negative eigenvalue {low:.3e}")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    @property
    def populations(self) -> np.ndarray:
        return np.clip(self.data.diagonal().real, 0.0, None)

    @property
    def coherence_norm(self) -> float:
        """Largest off-diagonal magnitude."""
        off = self.data - np.diag(self.data.diagonal())
        return float(np.max(np.abs(off))) if off.size else 0.0

    @classmethod
    def pure_site(cls, n: int, dimension: int) -> "DensityMatrix":
        rho = np.zeros((dimension, dimension), dtype=complex)
        rho[n, n] = 1.0
        return cls(rho)

    @classmethod
    def diagonal(cls, populations) -> "DensityMatrix":
        return cls(np.diag(np.asarray(populations, dtype=complex)))


@dataclass(frozen=True)
class StochasticMatrix:
    """Column-stochastic and row-stochastic transition matrix, P' = Q P."""

    data: np.ndarray = field(repr=False)
    residual: float = 0.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"StochasticMatrix must be square, got shape {arr.shape}")
        if arr.min() < -CLAMP_TOL or arr.max() > 1.0 + CLAMP_TOL:
            raise InvariantError(
                f"transition probabilities outside [0, 1]: min={arr.min():.3e} max={arr.max():.3e}"
            )
        arr = np.clip(arr, 0.0, 1.0)
        col = float(np.max(np.abs(arr.sum(axis=0) - 1.0)))
        row = float(np.max(np.abs(arr.sum(axis=1) - 1.0)))
        residual = max(col, row)
        if col > SUM_TOL:
            raise InvariantError(f"column sums deviate from 1 by {col:.3e}")
        if row > SUM_TOL:
            raise InvariantError(f"row sums deviate from 1 by {row:.3e} (not doubly stochastic)")
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "residual", residual)

    @property
    def dimension(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SuperoperatorMatrix:
    data: np.ndarray = field(repr=False)
    q: float = 1.0

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"SuperoperatorMatrix must be square, got shape {arr.shape}")
        n = int(round(np.sqrt(arr.shape[0])))
        if n * n != arr.shape[0]:
            raise DimensionError(f"superoperator size {arr.shape[0]} is not a perfect square")
        q = _check_q(self.q)
        # tr(M rho) = tr(rho) for all rho  <=>  vec(I)^T M = vec(I)^T
        vec_identity = np.eye(n).reshape(-1)
        leak = float(np.max(np.abs(vec_identity @ arr - vec_identity)))
        if leak > TRACE_TOL:
            raise InvariantError(f"superoperator is not trace preserving (residual {leak:.3e})")
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "q", q)

    @property
    def dimension(self) -> int:
        return self.data.shape[0]

    @property
    def hilbert_dimension(self) -> int:
        return int(round(np.sqrt(self.data.shape[0])))


OneStepMap = Union[StochasticMatrix, SuperoperatorMatrix]


def vectorize(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    arr = rho.data if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return np.asarray(arr, dtype=complex).reshape(-1)


def unvectorize(vec: np.ndarray, dimension: int) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape(dimension, dimension)


def propagator(h: HermitianMatrix, tau: float) -> UnitaryMatrix:
    """U = exp(-i H tau) through the eigendecomposition of H."""
    if not isinstance(h, HermitianMatrix):
        h = HermitianMatrix(h)
    if tau < 0:
        raise InvariantError(f"step duration tau must be >= 0, got {tau}")
    energies, vecs = np.linalg.eigh(h.data)
    phases = np.exp(-1j * energies * tau)
    return UnitaryMatrix((vecs * phases) @ vecs.conj().T)


def dephase_step(rho: DensityMatrix, u: UnitaryMatrix, q: float) -> DensityMatrix:
    q = _check_q(q)
    if rho.dimension != u.dimension:
        raise DimensionError(f"state dimension {rho.dimension} does not match propagator dimension {u.dimension}")
    sigma = u.data @ rho.data @ u.data.conj().T
    out = (1.0 - q) * sigma + q * np.diag(sigma.diagonal())
    return DensityMatrix(out)


def classical_markov(u: UnitaryMatrix) -> StochasticMatrix:
    """Q[n, m] = |U[n, m]|^2."""
    return StochasticMatrix(np.abs(u.data) ** 2)


def liouvillian(u: UnitaryMatrix, q: float) -> SuperoperatorMatrix:
    """
    One-step map on row-major vec(rho):
    M[(n,m),(l,r)] = (1-q) U[n,l] conj(U[m,r]) + q delta(n,m) U[n,l] conj(U[n,r])
    """
    q = _check_q(q)
    n = u.dimension
    conjugation = np.kron(u.data, u.data.conj())
    diag_rows = np.zeros(n * n, dtype=bool)
    diag_rows[np.arange(n) * (n + 1)] = True
    m = (1.0 - q) * conjugation
    m[diag_rows] += q * conjugation[diag_rows]
    return SuperoperatorMatrix(m, q=q)


def diagonal_block(m: SuperoperatorMatrix) -> np.ndarray:
    """Restriction of the superoperator to populations -> populations."""
    n = m.hilbert_dimension
    idx = np.arange(n) * (n + 1)
    return m.data[np.ix_(idx, idx)]


def step_operator(model: WalkModel, beta: float) -> UnitaryMatrix:
    """Coherent one-step unitary of `model` at control value beta."""
    if isinstance(model, RingModel):
        return propagator(ring_hamiltonian(model), model.tau_for(beta))
    if isinstance(model, CoinedWalkModel):
        return coined_step_unitary(at_beta(model, beta))
    raise TypeError(f"unsupported model type {type(model).__name__}")


def one_step_map(model: WalkModel, beta: float, q: float = 1.0) -> OneStepMap:
    """Markov matrix for q == 1, superoperator otherwise."""
    q = _check_q(q)
    u = step_operator(model, beta)
    if q == 1.0:
        return classical_markov(u)
    return liouvillian(u, q)
