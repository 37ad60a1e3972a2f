"""
Coherent generators of the two walk families: the three-site ring threaded by a
gauge flux, and the coined walk on a line with reflecting ends.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from dephasewalk.errors import DimensionError, InvariantError

logger = logging.getLogger("dephasewalk.models")

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _square(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RingModel:
    """Three sites, hoppings j1 (1-2), j2 (2-3), j3 (1-3) and flux phi on the 1-3 bond."""

    j1: float = 1.0
    j2: float = 1.0
    j3: float = 0.5
    phi: float = 0.0

    def __post_init__(self):
        for name in ("j1", "j2", "j3"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise InvariantError(f"RingModel.{name} must be a finite non-negative amplitude, got {v}")
            object.__setattr__(self, name, v)
        if not math.isfinite(self.phi):
            raise InvariantError(f"RingModel.phi must be finite, got {self.phi}")
        phi = float(self.phi) % TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
        object.__setattr__(self, "phi", phi)

    @property
    def dimension(self) -> int:
        return 3

    @property
    def time_reversal_symmetric(self) -> bool:
        return min(self.phi, abs(self.phi - math.pi), TWO_PI - self.phi) <= 1e-14

    def tau_for(self, beta: float) -> float:
        # beta = J1 * tau
        return beta / self.j1 if self.j1 > 0 else beta


@dataclass(frozen=True)
class CoinedWalkModel:
    """Walker on sites 1..L with internal states H, V; interior coin angle `beta` (radians)."""

    L: int = 3
    beta: float = 0.0

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 2:
            raise InvariantError(f"CoinedWalkModel.L must be an integer >= 2, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        if not math.isfinite(self.beta):
            raise InvariantError(f"CoinedWalkModel.beta must be finite, got {self.beta}")
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dimension(self) -> int:
        return 2 * self.L

    @property
    def coin_angles(self) -> np.ndarray:
        """beta_0 .. beta_L; the two ends are pinned to pi/2 (reflection)."""
        angles = np.full(self.L + 1, self.beta, dtype=float)
        angles[0] = HALF_PI
        angles[self.L] = HALF_PI
        return angles

    def h_index(self, n: int) -> int:
        return n - 1

    def v_index(self, n: int) -> int:
        return self.L + n - 1


WalkModel = Union[RingModel, CoinedWalkModel]


def at_beta(model: WalkModel, beta: float) -> WalkModel:
    """The model at control value beta (coin angle for the walk; the ring keeps its couplings)."""
    if isinstance(model, CoinedWalkModel):
        return replace(model, beta=beta)
    return model


@dataclass(frozen=True)
class HermitianMatrix:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _square(self.data, "HermitianMatrix")
        residual = float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0
        if residual > HERMITIAN_TOL:
            raise InvariantError(f"matrix is not Hermitian (residual {residual:.3e} > {HERMITIAN_TOL:g})")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def dimension(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class UnitaryMatrix:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = _square(self.data, "UnitaryMatrix")
        residual = float(np.max(np.abs(arr.conj().T @ arr - np.eye(arr.shape[0]))))
        if residual > UNITARY_TOL:
            raise InvariantError(f"matrix is not unitary (residual {residual:.3e} > {UNITARY_TOL:g})")
        object.__setattr__(self, "data", _frozen(arr))

    @property
    def dimension(self) -> int:
        return self.data.shape[0]


def ring_hamiltonian(model: RingModel) -> HermitianMatrix:
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = model.j1
    h[1, 2] = model.j2
    h[0, 2] = model.j3 * np.exp(1j * model.phi)
    h = h + h.conj().T
    return HermitianMatrix(h)


def _shift_h(model: CoinedWalkModel) -> np.ndarray:
    # H component moves n -> n-1; the amplitude leaving site 1 re-enters at site L,
    # where the pi/2 boundary coin turns it into the reflected V component
    L = model.L
    s = np.zeros((2 * L, 2 * L))
    for n in range(1, L + 1):
        target = n - 1 if n > 1 else L
        s[model.h_index(target), model.h_index(n)] = 1.0
        s[model.v_index(n), model.v_index(n)] = 1.0
    return s


def _shift_v(model: CoinedWalkModel) -> np.ndarray:
    L = model.L
    s = np.zeros((2 * L, 2 * L))
    for n in range(1, L + 1):
        target = n + 1 if n < L else 1
        s[model.v_index(target), model.v_index(n)] = 1.0
        s[model.h_index(n), model.h_index(n)] = 1.0
    return s


def _coin(model: CoinedWalkModel) -> np.ndarray:
    L = model.L
    angles = model.coin_angles
    c = np.zeros((2 * L, 2 * L))
    for n in range(1, L + 1):
        cb, sb = math.cos(angles[n]), math.sin(angles[n])
        h, v = model.h_index(n), model.v_index(n)
        c[h, h] = cb
        c[h, v] = -sb
        c[v, h] = sb
        c[v, v] = cb
    return c


def coined_step_unitary(model: CoinedWalkModel) -> UnitaryMatrix:
    """U = S_V C S_H on the basis (H_1..H_L, V_1..V_L)."""
    u = _shift_v(model) @ _coin(model) @ _shift_h(model)
    return UnitaryMatrix(u)


def coined_markov_direct(model: CoinedWalkModel):
    """Transition matrix of the fully dephased walk on P = (X_1..X_L, Y_1..Y_L), built entry by entry."""
    from dephasewalk.channels import StochasticMatrix

    L = model.L
    angles = model.coin_angles
    q = np.zeros((2 * L, 2 * L))
    for n in range(1, L + 1):
        c2, s2 = math.cos(angles[n]) ** 2, math.sin(angles[n]) ** 2
        c2_prev, s2_prev = math.cos(angles[n - 1]) ** 2, math.sin(angles[n - 1]) ** 2
        x, y = model.h_index(n), model.v_index(n)
        # X_n <- cos^2(b_n) X_{n+1} + sin^2(b_n) Y_n
        if n < L:
            q[x, model.h_index(n + 1)] += c2
        q[x, y] += s2
        # Y_n <- sin^2(b_{n-1}) X_n + cos^2(b_{n-1}) Y_{n-1}
        q[y, x] += s2_prev
        if n > 1:
            q[y, model.v_index(n - 1)] += c2_prev
    return StochasticMatrix(q)
