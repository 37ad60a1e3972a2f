"""
Parameter sweeps and dynamical phase transitions of the leading decay pair.

Two indicators are bisected:

  * "split": the leading pair turns into (or stops being) a complex-conjugate pair;
  * "crossing": Re(lambda_a - lambda_b) changes sign on branches followed by
    eigenvector overlap.

The order comes from the eigenvectors. A split where the modes below continue into
the conjugate pair above is a coalescence (g -> 1, second order). A split where a
real mode drops out of the leading pair while an existing conjugate pair takes its
place is a crossing of decay rates (first order, eigenvectors stay distinct), and
is reported as such.

For the fully dephased coined walk only one member of each (mu, -mu) pair is
considered (see spectral.decay_modes).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dephasewalk.channels import one_step_map
from dephasewalk.errors import ConfigError, DephaseWalkError, NumericalError
from dephasewalk.models import HALF_PI, CoinedWalkModel, WalkModel
from dephasewalk.spectral import (
    SpectralDecomposition,
    decay_modes,
    detailed_balance_residual,
    full_spectrum,
    is_conjugate_split,
    leading_pair,
    normalize_phase,
    overlap,
    track_modes,
)

logger = logging.getLogger("dephasewalk.transitions")

EP_THRESHOLD = 0.999
CLASSIFY_OFFSET = 1e-4
# g -> 1 linearly in the offset at a coalescence; shrunk by decades down to here
MIN_CLASSIFY_OFFSET = 1e-6
BISECTION_TOL = 1e-7
# gap |lambda2 - lambda3| closes like sqrt(distance) at an exceptional point
SPLIT_BISECTION_TOL = 1e-12
QC_TOL = 5e-3
QC_RANGE = (0.05, 1.0)
QC_WINDOW = (0.1, 1.2)
QC_SCAN_POINTS = 161
SCAN_POINTS = 61
SIZE_WINDOW = (0.02 * HALF_PI, 0.98 * HALF_PI)
SIZE_SCAN_POINTS = 97


class Order(str, Enum):
    FIRST = "FirstOrder"
    SECOND = "SecondOrder"
    NONE = "None"


def uses_pairing(model: WalkModel, q: float) -> bool:
    return isinstance(model, CoinedWalkModel) and q == 1.0


def _decompose(model: WalkModel, beta: float, q: float) -> SpectralDecomposition:
    return full_spectrum(one_step_map(model, beta, q))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    beta: float
    lambda2: complex = complex("nan+nanj")
    lambda3: complex = complex("nan+nanj")
    g: float = math.nan
    db_residual: float = math.nan
    near_ep: bool = False
    failed: bool = False
    error: str = ""
    branches: Tuple[complex, ...] = ()


@dataclass
class SweepTable:
    parameter: str
    q: float
    records: List[SweepRecord]
    ambiguous: List[Tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        grid = self.grid
        if not grid:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")

    @property
    def grid(self) -> List[float]:
        return [r.beta for r in self.records]

    @property
    def failed(self) -> List[SweepRecord]:
        return [r for r in self.records if r.failed]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _sweep_point(model: WalkModel, beta: float, q: float):
    try:
        m = one_step_map(model, beta, q)
        d = full_spectrum(m)
        leading_pair(d, uses_pairing(model, q))
        return d, detailed_balance_residual(m), None
    except DephaseWalkError as exc:
        logger.warning("sweep point beta=%.6f failed: %s", beta, exc.detail)
        logger.debug("sweep point failure", exc_info=True)
        return None, math.nan, exc.detail


def sweep(model: WalkModel, grid: Sequence[float], q: float = 1.0, threads: Optional[int] = None) -> SweepTable:
    grid = [float(b) for b in grid]
    if not grid:
        raise ConfigError("sweep grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep grid must be strictly increasing")
    if not (0.0 <= q <= 1.0):
        raise ConfigError(f"q must lie in [0, 1], got {q}")
    pairing = uses_pairing(model, q)

    workers = max(1, threads or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        points = list(pool.map(lambda b: _sweep_point(model, b, q), grid))

    ok = [(beta, p[0]) for beta, p in zip(grid, points) if p[0] is not None]
    tracking = track_modes(ok) if ok else None
    branch_a = branch_b = None
    if ok:
        branch_a, branch_b = leading_pair(ok[0][1], pairing)

    records: List[SweepRecord] = []
    k = 0
    for beta, (d, db, err) in zip(grid, points):
        if d is None:
            records.append(SweepRecord(beta=beta, failed=True, error=err or "unknown failure"))
            continue
        a = tracking.mode_of(k, branch_a)
        b = tracking.mode_of(k, branch_b)
        sa, sb = leading_pair(d, pairing)
        branches = tuple(complex(d.exponents[s]) for s in decay_modes(d)) if isinstance(model, CoinedWalkModel) else ()
        records.append(SweepRecord(
            beta=beta,
            lambda2=complex(d.exponents[a]),
            lambda3=complex(d.exponents[b]),
            g=overlap(d.right[:, sa], d.right[:, sb]),
            db_residual=db,
            near_ep=d.near_ep,
            branches=branches,
        ))
        k += 1

    table = SweepTable(parameter="beta", q=q, records=records, ambiguous=list(tracking.ambiguous) if tracking else [])
    if table.failed:
        logger.warning("%d of %d sweep points failed", len(table.failed), len(records))
    return table


# ---------------------------------------------------------------------------
# Indicators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Point:
    beta: float
    d: SpectralDecomposition
    pair: Tuple[int, int]
    split: bool


def _point(model: WalkModel, beta: float, q: float) -> _Point:
    d = _decompose(model, beta, q)
    pair = leading_pair(d, uses_pairing(model, q))
    return _Point(beta=beta, d=d, pair=pair, split=is_conjugate_split(d, pair))


def _follow(refs: Tuple[np.ndarray, np.ndarray], d: SpectralDecomposition, pairing: bool) -> Tuple[int, int]:
    """Modes of `d` continuing the two reference eigenvectors (largest overlap, distinct modes)."""
    modes = decay_modes(d, pairing)
    if len(modes) < 2:
        raise NumericalError("fewer than two decaying modes to follow")
    ia = max(modes, key=lambda s: overlap(refs[0], d.right[:, s]))
    ib = max((s for s in modes if s != ia), key=lambda s: overlap(refs[1], d.right[:, s]))
    return ia, ib


def _crossed(d: SpectralDecomposition, ia: int, ib: int) -> bool:
    return float((d.exponents[ia] - d.exponents[ib]).real) > 0.0


def _refs(p: _Point) -> Tuple[np.ndarray, np.ndarray]:
    return p.d.right[:, p.pair[0]].copy(), p.d.right[:, p.pair[1]].copy()


def _exchanged(below: _Point, above: _Point, pairing: bool) -> bool:
    """True when the modes continuing the pair below are not the pair above, or arrive swapped."""
    ia, ib = _follow(_refs(below), above.d, pairing)
    if {ia, ib} != set(above.pair):
        return True
    if below.split or above.split:
        return False
    return _crossed(above.d, ia, ib)


def _change_between(lo: _Point, hi: _Point, pairing: bool) -> Optional[str]:
    if lo.split != hi.split:
        return "split"
    if lo.split or hi.split:
        return None
    ia, ib = _follow(_refs(lo), hi.d, pairing)
    return "crossing" if _crossed(hi.d, ia, ib) else None


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    indicator: str


def scan_for_transition(
    model: WalkModel,
    window: Tuple[float, float],
    q: float = 1.0,
    points: int = SCAN_POINTS,
) -> List[Bracket]:
    """Sub-intervals of a uniform grid over `window` where an indicator changes."""
    lo, hi = window
    if not hi > lo:
        raise ConfigError(f"empty window ({lo}, {hi})")
    pairing = uses_pairing(model, q)
    grid = np.linspace(lo, hi, max(points, 2))
    evaluated: List[Optional[_Point]] = []
    for beta in grid:
        try:
            evaluated.append(_point(model, float(beta), q))
        except DephaseWalkError as exc:
            logger.debug("scan point beta=%.6f skipped: %s", beta, exc.detail)
            evaluated.append(None)
    found = []
    for a, b in zip(evaluated, evaluated[1:]):
        if a is None or b is None:
            continue
        kind = _change_between(a, b, pairing)
        if kind:
            found.append(Bracket(lo=a.beta, hi=b.beta, indicator=kind))
    return found


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _complex_pair(z: Optional[complex]) -> Optional[List[float]]:
    return None if z is None else [float(z.real), float(z.imag)]


def _vector(v: Optional[np.ndarray]) -> Optional[List[List[float]]]:
    return None if v is None else [[float(x.real), float(x.imag)] for x in v]


@dataclass
class TransitionReport:
    beta_c: Optional[float]
    order: Order
    q: float = 1.0
    g_at_critical: Optional[float] = None
    lambda2: Optional[complex] = None
    lambda3: Optional[complex] = None
    r2: Optional[np.ndarray] = field(default=None, repr=False)
    r3: Optional[np.ndarray] = field(default=None, repr=False)
    merged: Optional[np.ndarray] = field(default=None, repr=False)
    indicator: Optional[str] = None
    bracket: Optional[Tuple[float, float]] = None
    g_offset: float = CLASSIFY_OFFSET
    message: str = ""

    def __post_init__(self):
        if self.order is Order.SECOND and (self.g_at_critical is None or self.g_at_critical < EP_THRESHOLD):
            raise NumericalError(f"second-order report with g={self.g_at_critical} below {EP_THRESHOLD}")
        if self.order is Order.FIRST and self.g_at_critical is not None and self.g_at_critical >= EP_THRESHOLD:
            raise NumericalError(f"first-order report with g={self.g_at_critical} at or above {EP_THRESHOLD}")

    @property
    def bracket_width(self) -> Optional[float]:
        return None if self.bracket is None else self.bracket[1] - self.bracket[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta_c": self.beta_c,
            "order": self.order.value,
            "q": self.q,
            "g_at_critical": self.g_at_critical,
            "g_offset": self.g_offset,
            "lambda2": _complex_pair(self.lambda2),
            "lambda3": _complex_pair(self.lambda3),
            "r2": _vector(self.r2),
            "r3": _vector(self.r3),
            "merged": _vector(self.merged),
            "indicator": self.indicator,
            "bracket": list(self.bracket) if self.bracket else None,
            "bracket_width": self.bracket_width,
            "message": self.message,
        }


def _merge(r2: np.ndarray, r3: np.ndarray) -> np.ndarray:
    ov = np.vdot(r3, r2)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return normalize_phase(r2 + phase * r3)


def _g_around(model: WalkModel, beta_c: float, q: float, offset: float) -> Tuple[_Point, _Point, float]:
    below = _point(model, beta_c - offset, q)
    above = _point(model, beta_c + offset, q)
    g = max(overlap(*_refs(below)), overlap(*_refs(above)))
    return below, above, min(g, 1.0)


def classify_transition(model: WalkModel, beta_c: float, q: float = 1.0) -> TransitionReport:
    """
    Order of the transition at beta_c from the overlap g evaluated at beta_c -/+ 1e-4.

    When the leading pair turns conjugate without exchanging modes and g is still short of
    the threshold, the offset is divided by ten (down to 1e-6): at a coalescence 1 - g
    shrinks with the offset, at a crossing it does not.
    """
    pairing = uses_pairing(model, q)
    offset = CLASSIFY_OFFSET
    below, above, g = _g_around(model, beta_c, q, offset)
    exchange = _exchanged(below, above, pairing)
    while g < EP_THRESHOLD and not exchange and below.split != above.split and offset > MIN_CLASSIFY_OFFSET:
        offset /= 10.0
        below, above, g = _g_around(model, beta_c, q, offset)
        logger.debug("g=%.6f at offset %.0e around beta=%.9f", g, offset, beta_c)

    if g >= EP_THRESHOLD:
        at = _point(model, beta_c, q)
        r2, r3 = _refs(at)
        return TransitionReport(
            beta_c=beta_c, order=Order.SECOND, q=q, g_at_critical=g,
            lambda2=complex(at.d.exponents[at.pair[0]]), lambda3=complex(at.d.exponents[at.pair[1]]),
            r2=r2, r3=r3, merged=_merge(r2, r3), g_offset=offset,
            message="eigenvalues and eigenvectors coalesce (exceptional point)",
        )

    r2, r3 = _refs(below)
    lam2 = complex(below.d.exponents[below.pair[0]])
    lam3 = complex(below.d.exponents[below.pair[1]])
    if exchange:
        return TransitionReport(
            beta_c=beta_c, order=Order.FIRST, q=q, g_at_critical=g,
            lambda2=lam2, lambda3=lam3, r2=r2, r3=r3,
            message="decay rates cross with distinct eigenvectors",
        )
    return TransitionReport(
        beta_c=beta_c, order=Order.NONE, q=q, g_at_critical=g,
        lambda2=lam2, lambda3=lam3, r2=r2, r3=r3,
        message="no crossing or coalescence confirmed around beta_c",
    )


def _bisect_split(model: WalkModel, lo: _Point, hi: _Point, q: float, tol: float) -> Tuple[float, float]:
    a, b = lo.beta, hi.beta
    s_lo = lo.split
    while b - a > tol:
        mid = 0.5 * (a + b)
        if _point(model, mid, q).split == s_lo:
            a = mid
        else:
            b = mid
    return a, b


def _bisect_crossing(model: WalkModel, lo: _Point, hi: _Point, q: float, tol: float) -> Tuple[float, float]:
    pairing = uses_pairing(model, q)
    a, b = lo.beta, hi.beta
    refs = _refs(lo)
    while b - a > tol:
        mid = 0.5 * (a + b)
        d = _decompose(model, mid, q)
        ia, ib = _follow(refs, d, pairing)
        if _crossed(d, ia, ib):
            b = mid
        else:
            a = mid
            refs = (d.right[:, ia].copy(), d.right[:, ib].copy())
    return a, b


def locate_crossing(
    model: WalkModel,
    bracket: Tuple[float, float],
    q: float = 1.0,
    tol: float = BISECTION_TOL,
    scan_points: int = SCAN_POINTS,
) -> TransitionReport:
    lo_b, hi_b = float(bracket[0]), float(bracket[1])
    if not hi_b > lo_b:
        raise ConfigError(f"empty bracket ({lo_b}, {hi_b})")
    # barrido grueso primero; se biseca el primer subintervalo con cambio
    found = scan_for_transition(model, (lo_b, hi_b), q, scan_points)
    if not found:
        return TransitionReport(
            beta_c=None, order=Order.NONE, q=q, bracket=(lo_b, hi_b),
            message=f"no indicator change in ({lo_b:.6g}, {hi_b:.6g}) at q={q:.6g}",
        )
    sub = found[0]
    lo, hi, kind = _point(model, sub.lo, q), _point(model, sub.hi, q), sub.indicator

    if kind == "split":
        a, b = _bisect_split(model, lo, hi, q, min(tol, SPLIT_BISECTION_TOL))
    else:
        a, b = _bisect_crossing(model, lo, hi, q, tol)
    beta_c = 0.5 * (a + b)
    logger.info("%s indicator converged: beta_c=%.9f (width %.1e, q=%.4g)", kind, beta_c, b - a, q)

    report = classify_transition(model, beta_c, q)
    report.bracket = (a, b)
    if kind == "split" and report.order is Order.FIRST:
        # un modo real sale del par lider y entra un par conjugado ya existente
        logger.info("conjugate pair takes the lead at beta=%.6f by a crossing (g=%.4f)", beta_c, report.g_at_critical)
        kind = "crossing"
    elif kind == "split" and report.order is Order.NONE:
        logger.warning("conjugate splitting at beta=%.6f but g=%.4f below the EP threshold", beta_c, report.g_at_critical)
    report.indicator = kind
    return report


# ---------------------------------------------------------------------------
# Threshold in q and size dependence
# ---------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    q_c: Optional[float]
    reference: Optional[str]
    bracket: Optional[Tuple[float, float]] = None
    drift: List[Tuple[float, Optional[float]]] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q_c": self.q_c,
            "reference_indicator": self.reference,
            "bracket": list(self.bracket) if self.bracket else None,
            "drift": [{"q": q, "beta_c": b} for q, b in self.drift],
            "message": self.message,
        }


def _has_transition(model: WalkModel, window: Tuple[float, float], q: float, points: int) -> bool:
    """
    The leading pair still has two distinct decay rates at the window floor and an indicator
    changes above it. Below q_c the pair is already conjugate at the floor: lambda2 and
    lambda3 share their decay rate and there is nothing left to cross.
    """
    try:
        if _point(model, window[0], q).split:
            return False
    except DephaseWalkError as exc:
        logger.debug("window floor skipped at q=%.6f: %s", q, exc.detail)
        return False
    return bool(scan_for_transition(model, window, q, points))


def locate_qc(
    model: WalkModel,
    beta_window: Tuple[float, float] = QC_WINDOW,
    q_range: Tuple[float, float] = QC_RANGE,
    tol: float = QC_TOL,
    points: int = QC_SCAN_POINTS,
    drift_points: int = 5,
) -> ThresholdReport:
    """
    Smallest dephasing probability for which the transition of the leading pair still shows
    up in the beta window. As q decreases the transition moves to smaller beta; q_c is where
    it leaves the window through its floor.
    """
    q_lo, q_hi = q_range
    found = scan_for_transition(model, beta_window, q_hi, points)
    if not found or not _has_transition(model, beta_window, q_hi, points):
        return ThresholdReport(q_c=None, reference=None,
                               message=f"no transition in the beta window at q={q_hi:g}")
    kind = found[0].indicator

    if _has_transition(model, beta_window, q_lo, points):
        return ThresholdReport(q_c=None, reference=kind, bracket=(q_lo, q_hi),
                               message=f"transition present at both ends of q in [{q_lo:g}, {q_hi:g}]: no threshold")

    a, b = q_lo, q_hi
    while b - a > tol:
        mid = 0.5 * (a + b)
        if _has_transition(model, beta_window, mid, points):
            b = mid
        else:
            a = mid
    q_c = 0.5 * (a + b)
    logger.info("q_c converged: %.4f (width %.1e, %s indicator)", q_c, b - a, kind)

    qs = list(np.linspace(b, q_hi, drift_points)) if drift_points > 1 else []
    drift = [(float(r.q), r.beta_c) for r in beta_c_versus_q(model, qs, beta_window)]
    return ThresholdReport(q_c=q_c, reference=kind, bracket=(a, b), drift=drift)


def beta_c_versus_q(
    model: WalkModel,
    qs: Sequence[float],
    window: Tuple[float, float] = QC_WINDOW,
    threads: Optional[int] = None,
) -> List[TransitionReport]:
    with ThreadPoolExecutor(max_workers=max(1, threads or 1)) as pool:
        return list(pool.map(lambda q: locate_crossing(model, window, float(q)), qs))


@dataclass
class SizeScanEntry:
    L: int
    report: TransitionReport

    @property
    def beta_c(self) -> Optional[float]:
        return self.report.beta_c

    def to_dict(self) -> Dict[str, Any]:
        out = self.report.to_dict()
        out["L"] = self.L
        out["beta_c_over_half_pi"] = None if self.beta_c is None else self.beta_c / HALF_PI
        return out


def _size_point(L: int, q: float, window: Tuple[float, float], points: int) -> SizeScanEntry:
    model = CoinedWalkModel(L=L)
    splits = [b for b in scan_for_transition(model, window, q, points) if b.indicator == "split"]
    if not splits:
        return SizeScanEntry(L=L, report=TransitionReport(
            beta_c=None, order=Order.NONE, q=q, bracket=window,
            message=f"no coalescence of the slowest decay pair for L={L}"))
    last = splits[-1]
    return SizeScanEntry(L=L, report=locate_crossing(model, (last.lo, last.hi), q))


def size_scan(
    L_values: Sequence[int],
    q: float = 1.0,
    window: Tuple[float, float] = SIZE_WINDOW,
    points: int = SIZE_SCAN_POINTS,
    threads: Optional[int] = None,
) -> List[SizeScanEntry]:
    """Critical coin angle of the coined walk per system size."""
    for L in L_values:
        if L < 3:
            raise ConfigError(f"size scan needs L >= 3, got {L}")
    with ThreadPoolExecutor(max_workers=max(1, threads or 1)) as pool:
        entries = list(pool.map(lambda L: _size_point(int(L), q, window, points), L_values))
    values = [e.beta_c for e in entries]
    if None not in values and any(b >= a for a, b in zip(values, values[1:])):
        logger.warning("beta_c is not strictly decreasing in L: %s", values)
    return entries
