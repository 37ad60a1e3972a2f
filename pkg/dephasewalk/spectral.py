"""
Spectral decomposition of one-step maps (Markov matrices and superoperators).

Modes are ordered with the stationary mode (mu closest to 1) first, then by
ascending decay rate Re(lambda), ties broken by ascending Im(lambda).
lambda = -Log(mu) on the branch Im(lambda) in (-pi, pi].

Right eigenvectors are unit 2-norm with their largest-magnitude entry real and
positive. Left eigenvectors are the rows of R^-1 (so <l_s|r_t> = delta_st)
unless R is too ill-conditioned, in which case the decomposition is flagged
near an exceptional point and the left vectors are only unit-normalised.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, eig

from dephasewalk.channels import OneStepMap, StochasticMatrix, SuperoperatorMatrix, diagonal_block, one_step_map
from dephasewalk.errors import DimensionError, NumericalError
from dephasewalk.models import WalkModel

logger = logging.getLogger("dephasewalk.spectral")

NEAR_EP_CONDITION = 1e8
BIORTHO_TOL = 1e-8
RESIDUAL_TOL = 1e-8
TIE_TOL = 1e-9
DECAY_TOL = 1e-9
SPLIT_TOL = 1e-8
AMBIGUITY_TOL = 1e-6
PARTNER_TOL = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralDecomposition:
    matrix: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    exponents: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    biorthonormal: bool
    near_ep: bool
    condition: float

    @property
    def dimension(self) -> int:
        return self.eigenvalues.shape[0]

    def right_vector(self, s: int) -> np.ndarray:
        return self.right[:, s]

    def left_vector(self, s: int) -> np.ndarray:
        return self.left[:, s]


@dataclass(frozen=True)
class OverlapValue:
    g: float

    def __post_init__(self):
        g = float(self.g)
        if not (0.0 <= g <= 1.0 + 1e-12):
            raise NumericalError(f"overlap g={g} outside [0, 1]")
        object.__setattr__(self, "g", min(g, 1.0))

    def __float__(self) -> float:
        return self.g


def floquet_exponent(mu) -> np.ndarray:
    """-Log(mu) with Im in (-pi, pi]."""
    mu = np.asarray(mu, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = -np.log(mu)
    re = np.where(mu == 0, np.inf, lam.real)
    im = np.where(mu == 0, 0.0, lam.imag)
    im = np.where(im <= -math.pi + 1e-12, math.pi, im)
    return re + 1j * im


def normalize_phase(v: np.ndarray) -> np.ndarray:
    """Unit 2-norm, first largest-magnitude entry made real positive."""
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise NumericalError("cannot normalise a zero vector")
    v = v / norm
    mags = np.abs(v)
    k = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
    return v * (abs(v[k]) / v[k])


def _as_array(m: Union[OneStepMap, np.ndarray]) -> np.ndarray:
    if isinstance(m, (StochasticMatrix, SuperoperatorMatrix)):
        return np.asarray(m.data)
    return np.asarray(m)


def _mode_order(eigenvalues: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    n = eigenvalues.shape[0]
    first = int(np.argmin(np.abs(eigenvalues - 1.0)))
    rest = np.array([i for i in range(n) if i != first], dtype=int)
    if rest.size == 0:
        return np.array([first])
    rest = rest[np.argsort(exponents[rest].real, kind="stable")]

    ordered: List[int] = [first]
    group: List[int] = [int(rest[0])]
    for i in rest[1:]:
        prev = exponents[group[-1]].real
        cur = exponents[i].real
        if abs(cur - prev) <= TIE_TOL * max(1.0, abs(prev)) or (np.isinf(cur) and np.isinf(prev)):
            group.append(int(i))
            continue
        ordered.extend(sorted(group, key=lambda j: exponents[j].imag))
        group = [int(i)]
    ordered.extend(sorted(group, key=lambda j: exponents[j].imag))
    return np.array(ordered, dtype=int)


def full_spectrum(m: Union[OneStepMap, np.ndarray]) -> SpectralDecomposition:
    a = _as_array(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"spectral decomposition needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    try:
        w, vl, vr = eig(a, left=True, right=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"eigensolver did not converge (dimension {a.shape[0]}, condition {np.linalg.cond(a):.3e}): {exc}"
        ) from exc

    exps = floquet_exponent(w)
    order = _mode_order(w, exps)
    w, exps = w[order], exps[order]
    right = np.column_stack([normalize_phase(vr[:, i]) for i in order])

    cond = float(np.linalg.cond(right))
    near_ep = not np.isfinite(cond) or cond > NEAR_EP_CONDITION
    if near_ep:
        logger.debug("near-EP decomposition (cond(R)=%.3e), left vectors not biorthonormalised", cond)
        left = np.column_stack([normalize_phase(vl[:, i]) for i in order])
    else:
        left = np.linalg.inv(right).conj().T

    scale = max(float(np.linalg.norm(a, 2)), 1.0)
    residual = float(np.max(np.linalg.norm(a @ right - right * w, axis=0)))
    if residual > RESIDUAL_TOL * scale:
        raise NumericalError(f"eigenpair residual {residual:.3e} exceeds tolerance")

    biortho = not near_ep
    if biortho:
        gram_err = float(np.max(np.abs(left.conj().T @ right - np.eye(a.shape[0]))))
        if gram_err > BIORTHO_TOL:
            logger.debug("biorthonormality residual %.3e above tolerance, flag cleared", gram_err)
            biortho = False

    return SpectralDecomposition(
        matrix=_frozen(np.array(a)),
        eigenvalues=_frozen(w),
        exponents=_frozen(exps),
        right=_frozen(right),
        left=_frozen(left),
        biorthonormal=biortho,
        near_ep=near_ep,
        condition=cond,
    )


def eigen_residual(d: SpectralDecomposition) -> float:
    """max_n ||M r_n - mu_n r_n||."""
    return float(np.max(np.linalg.norm(d.matrix @ d.right - d.right * d.eigenvalues, axis=0)))


def biorthonormality_residual(d: SpectralDecomposition) -> float:
    return float(np.max(np.abs(d.left.conj().T @ d.right - np.eye(d.dimension))))


def detailed_balance_residual(q: Union[OneStepMap, np.ndarray]) -> float:
    """
    With a uniform stationary state detailed balance is the symmetry Q = Q^T. For a
    superoperator the populations-to-populations block is used.
    """
    if isinstance(q, SuperoperatorMatrix):
        a = diagonal_block(q).real
    else:
        a = q.data if isinstance(q, StochasticMatrix) else np.asarray(q)
    return float(np.max(np.abs(a - a.T)))


def overlap(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise NumericalError("overlap of a zero-norm eigenvector")
    return float(abs(np.vdot(v, u)) / (nu * nv))


def overlap_g(d: SpectralDecomposition, pair: Tuple[int, int] = (1, 2)) -> OverlapValue:
    """g = |<r_b|r_a>| / sqrt(<r_a|r_a><r_b|r_b>) for the pair (default modes 2 and 3)."""
    if d.dimension < 3:
        raise DimensionError(f"overlap needs at least three modes, got {d.dimension}")
    a, b = pair
    return OverlapValue(overlap(d.right[:, a], d.right[:, b]))


def _tied(a: float, b: float) -> bool:
    return abs(a - b) <= TIE_TOL * max(1.0, abs(b))


def _partner_pairs(d: SpectralDecomposition, modes: Sequence[int]) -> List[Tuple[int, int]]:
    """Greedy matching of modes with their partner at -mu, closest pairs first."""
    mu = d.eigenvalues
    candidates = sorted(
        (abs(mu[a] + mu[b]), a, b) for i, a in enumerate(modes) for b in modes[i + 1:]
    )
    used: set = set()
    pairs: List[Tuple[int, int]] = []
    for dist, a, b in candidates:
        if a in used or b in used:
            continue
        if dist > PARTNER_TOL * max(1.0, abs(mu[a])):
            break
        used.update((a, b))
        pairs.append((a, b))
    return pairs


def _representative(d: SpectralDecomposition, a: int, b: int) -> int:
    # |Im lambda| < pi/2; on the imaginary mu axis the one with Im lambda = +pi/2
    ia, ib = d.exponents[a].imag, d.exponents[b].imag
    if _tied(abs(ia), abs(ib)):
        return a if ia >= ib else b
    return a if abs(ia) < abs(ib) else b


def decay_modes(d: SpectralDecomposition, pairing: bool = False) -> List[int]:
    """
    Indices of decaying modes (|mu| < 1). With `pairing` (spectra symmetric under mu -> -mu)
    each mode is matched with its -mu partner and one representative per pair is kept.
    """
    modes = [s for s in range(d.dimension) if abs(d.eigenvalues[s]) < 1.0 - DECAY_TOL]
    if not pairing:
        return modes
    dropped = set()
    for a, b in _partner_pairs(d, modes):
        dropped.add(b if _representative(d, a, b) == a else a)
    return [s for s in modes if s not in dropped]


def _on_imaginary_axis(d: SpectralDecomposition, s: int) -> bool:
    lam = d.exponents[s]
    return bool(np.isfinite(lam.real)) and abs(abs(lam.imag) - 0.5 * math.pi) <= TIE_TOL


def leading_pair(d: SpectralDecomposition, pairing: bool = False) -> Tuple[int, int]:
    """
    Slowest decay pair. When more than two modes share the slowest rate, the one with the
    smallest |Im lambda| is paired with its complex conjugate if the group holds it. With
    `pairing`, representatives with mu on the imaginary axis are left out: their conjugate
    is their own -mu partner, so they never coalesce with another representative.
    """
    modes = decay_modes(d, pairing)
    if pairing:
        capable = [s for s in modes if not _on_imaginary_axis(d, s)]
        if len(capable) >= 2:
            modes = capable
    if len(modes) < 2:
        raise NumericalError(f"fewer than two decaying modes ({len(modes)})")
    slowest = d.exponents[modes[0]].real
    group = [s for s in modes if _tied(d.exponents[s].real, slowest)]
    if len(group) <= 2:
        return modes[0], modes[1]

    a = min(group, key=lambda s: (abs(d.exponents[s].imag), d.exponents[s].imag))
    mu_a = d.eigenvalues[a]
    rest = [s for s in group if s != a]
    conj = [s for s in rest if abs(d.eigenvalues[s] - np.conj(mu_a)) <= SPLIT_TOL * max(1.0, abs(mu_a))]
    b = conj[0] if conj and abs(d.exponents[a].imag) > SPLIT_TOL else min(
        rest, key=lambda s: (abs(d.exponents[s].imag), d.exponents[s].imag))
    return (a, b) if d.exponents[a].imag <= d.exponents[b].imag else (b, a)


def is_conjugate_split(d: SpectralDecomposition, pair: Tuple[int, int]) -> bool:
    """True when the pair is a non-real complex-conjugate pair."""
    a, b = pair
    la, lb = d.exponents[a], d.exponents[b]
    if abs((la - lb).imag) <= SPLIT_TOL:
        return False
    if abs((la - lb).real) > SPLIT_TOL:
        return False
    mu_a, mu_b = d.eigenvalues[a], d.eigenvalues[b]
    return abs(mu_a - np.conj(mu_b)) <= SPLIT_TOL * max(1.0, abs(mu_a))


def pairing_check(d: SpectralDecomposition, L: int) -> float:
    """
    Residual of the mu -> -mu symmetry of the dephased coined walk: the spectrum must equal
    its negation and D r must be an eigenvector for -mu, with D = diag((-1)^l on X, (-1)^(l+1) on Y).
    """
    n = d.dimension
    if n % 2 != 0:
        raise DimensionError(f"pairing check needs an even dimension, got {n}")
    if n != 2 * L:
        raise DimensionError(f"decomposition dimension {n} does not match 2L = {2 * L}")
    sites = np.arange(1, L + 1)
    sign = np.concatenate([(-1.0) ** sites, (-1.0) ** (sites + 1)])

    mu = d.eigenvalues
    value_mismatch = float(max(np.min(np.abs(mu + mu[i])) for i in range(n)))

    vector_mismatch = 0.0
    for i in range(n):
        partner = sign * d.right[:, i]
        res = np.linalg.norm(d.matrix @ partner + mu[i] * partner)
        vector_mismatch = max(vector_mismatch, float(res))
        dist = np.abs(mu + mu[i])
        j = int(np.argmin(dist))
        others = np.delete(dist, j)
        # partner unico: D r_i paralelo a r_j (fase global libre)
        if others.size and np.min(others) > 1e-6:
            vector_mismatch = max(vector_mismatch, 1.0 - overlap(partner, d.right[:, j]))
    return max(value_mismatch, vector_mismatch)


@dataclass
class BranchTracking:
    """labels[k][j] is the branch carried by mode j at grid point k (branch b starts as mode b)."""

    betas: List[float]
    labels: List[np.ndarray]
    ambiguous: List[Tuple[int, int]] = field(default_factory=list)

    def mode_of(self, k: int, branch: int) -> int:
        return int(np.flatnonzero(self.labels[k] == branch)[0])


def match_modes(
    previous: SpectralDecomposition,
    current: SpectralDecomposition,
    rows: Optional[Sequence[int]] = None,
) -> Tuple[dict, List[int]]:
    """
    Greedy bipartite matching of modes of `previous` (restricted to `rows`) onto modes of
    `current` by maximal |<r_i|r_j>|. Near-ties (within 1e-6) are settled by eigenvalue
    proximity and reported.
    """
    if previous.dimension != current.dimension:
        raise DimensionError("consecutive decompositions differ in dimension")
    o = np.abs(previous.right.conj().T @ current.right)
    row_set = list(range(previous.dimension)) if rows is None else list(rows)
    free_rows = set(row_set)
    free_cols = set(range(current.dimension))
    assignment: dict = {}
    ambiguous: List[int] = []
    while free_rows:
        r_idx = sorted(free_rows)
        c_idx = sorted(free_cols)
        sub = o[np.ix_(r_idx, c_idx)]
        flat = int(np.argmax(sub))
        i = r_idx[flat // len(c_idx)]
        best = sub.flat[flat]
        candidates = [c for c in c_idx if o[i, c] >= best - AMBIGUITY_TOL]
        if len(candidates) > 1:
            ambiguous.append(i)
            j = min(candidates, key=lambda c: (abs(previous.eigenvalues[i] - current.eigenvalues[c]), c))
        else:
            j = candidates[0]
        assignment[i] = j
        free_rows.discard(i)
        free_cols.discard(j)
    return assignment, ambiguous


def track_modes(grid: Sequence[Tuple[float, SpectralDecomposition]]) -> BranchTracking:
    if not grid:
        return BranchTracking(betas=[], labels=[])
    betas = [float(b) for b, _ in grid]
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("track_modes needs a grid sorted by strictly increasing beta")
    n = grid[0][1].dimension
    labels = [np.arange(n)]
    flagged: List[Tuple[int, int]] = []
    for k in range(1, len(grid)):
        prev_d, cur_d = grid[k - 1][1], grid[k][1]
        assignment, ambiguous = match_modes(prev_d, cur_d)
        lab = np.empty(n, dtype=int)
        for i, j in assignment.items():
            lab[j] = labels[-1][i]
        labels.append(lab)
        for i in ambiguous:
            logger.warning("ambiguous branch match at beta=%.6f (branch %d), resolved by eigenvalue proximity",
                           betas[k], int(labels[-2][i]))
            flagged.append((k, int(labels[-2][i])))
    return BranchTracking(betas=betas, labels=labels, ambiguous=flagged)


def eigenvector_snapshots(model: WalkModel, betas: Sequence[float], q: float = 1.0, pairing: bool = False) -> List[dict]:
    """Right eigenvectors of the leading decay pair at a few control values."""
    out = []
    for beta in betas:
        d = full_spectrum(one_step_map(model, beta, q))
        a, b = leading_pair(d, pairing)
        out.append({
            "beta": float(beta),
            "lambda2": complex(d.exponents[a]),
            "lambda3": complex(d.exponents[b]),
            "r2": d.right[:, a].copy(),
            "r3": d.right[:, b].copy(),
            "near_ep": d.near_ep,
        })
    return out
