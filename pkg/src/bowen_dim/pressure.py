"""Topological pressure, Bowen roots, similarity dimension and the
variational-principle gap.

Two pressure evaluators are provided. ``pressure_spectral`` is exact for
locally constant potentials (log of the Perron root of the weighted
transition matrix). ``pressure_partition_sum`` handles arbitrary continuous
potentials by summing ``exp`` of Birkhoff sums over one anchor orbit per
admissible depth-n cylinder, and reports the Holder-variation error bound.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import BracketError, BudgetExceededError, ValidationError
from .geometry import canonical_fiber_points
from .symbolic import DEFAULT_WORD_BUDGET, PotentialSpec, TransitionStructure, perron_root, word_array
from .systems import SkewSystem

BISECTION_TOL = 1e-9
PRESSURE_TOL = 1e-10
MAX_DOUBLINGS = 60
MAX_BISECTIONS = 200
DEFAULT_GRID_BUDGET = 10**12
DEFAULT_ROOT_DEPTH = 12


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    method: str
    depth: int
    epsilon: float
    variation_bound: float


@dataclass(frozen=True)
class CylinderOrbits:
    """One anchor orbit per periodically admissible word of length ``n``.

    A word is periodically admissible when it is admissible and its last
    symbol may be followed by its first, so it codes a period-n orbit. For a
    locally constant potential the resulting partition sum is the trace of
    the n-th power of the weighted transition matrix.

    ``points[w, k]`` is the phase point at time ``k``: its base coordinate is
    the midpoint of the cylinder ``[w_k ... w_{n-1}]`` and its fiber
    coordinate the forward image of a slice point over the initial anchor.
    ``base_width[k]`` is the widest such cylinder at time ``k``.
    """

    words: np.ndarray
    points: np.ndarray
    base_width: np.ndarray

    @property
    def depth(self) -> int:
        return self.words.shape[1]


def periodic_words(ts: TransitionStructure, n: int, budget: int = DEFAULT_WORD_BUDGET) -> np.ndarray:
    """Admissible words of length n whose last symbol may be followed by the first."""
    words = word_array(ts, n, budget)
    return words[ts.admissible[words[:, -1], words[:, 0]]]


def cylinder_orbits(sys: SkewSystem, n: int, budget: int = DEFAULT_WORD_BUDGET,
                    periodic: bool = True) -> CylinderOrbits:
    if periodic:
        words = periodic_words(sys.transitions, n, budget)
    else:
        words = word_array(sys.transitions, n, budget)
    count = len(words)
    lo = sys._dom_lo[words[:, -1]].copy()
    hi = sys._dom_hi[words[:, -1]].copy()
    mids = np.empty((count, n))
    width = np.empty(n)
    mids[:, n - 1] = 0.5 * (lo + hi)
    width[n - 1] = np.max(hi - lo)
    for k in range(n - 2, -1, -1):
        lo = sys.base_inverse(words[:, k], lo)
        hi = sys.base_inverse(words[:, k], hi)
        mids[:, k] = 0.5 * (lo + hi)
        width[k] = np.max(hi - lo)
    d = sys.fiber_dimension
    points = np.empty((count, n, 1 + d))
    points[:, :, 0] = mids
    y = canonical_fiber_points(sys, mids[:, 0])
    points[:, 0, 1:] = y
    for k in range(1, n):
        y = sys.fiber_apply(words[:, k - 1], mids[:, k - 1], y)
        points[:, k, 1:] = y
    return CylinderOrbits(words, points, width)


def _birkhoff_sums(psi: PotentialSpec, orbits: CylinderOrbits) -> np.ndarray:
    n = orbits.depth
    if psi.evaluator is None:
        return psi.locally_constant[orbits.words].sum(axis=1)
    vals = psi(orbits.words.ravel(), orbits.points.reshape(-1, orbits.points.shape[2]))
    return vals.reshape(-1, n).sum(axis=1)


def _partitioned_logsumexp(values: np.ndarray, leading: np.ndarray) -> float:
    """log-sum-exp reduced per leading symbol, then across symbols in order."""
    parts = [logsumexp(values[leading == s]) for s in np.unique(leading)]
    return float(logsumexp(np.array(parts)))


def variation_bound(sys: SkewSystem, psi: PotentialSpec, orbits: CylinderOrbits) -> float:
    """Bound on ``|(1/n) S_n psi(z) - (1/n) S_n psi(anchor)|`` for ``z`` in the cylinder.

    Uses the Lipschitz constant of ``psi`` against the max-norm spread of the
    cylinder at each time: base width of the suffix cylinder, fiber spread
    ``sup_contraction**k`` times the fiber diameter.
    """
    if psi.evaluator is None or psi.holder_modulus == 0:
        return 0.0
    n = orbits.depth
    fiber = sys.fiber_diameter * sys.sup_contraction ** np.arange(n)
    spread = np.maximum(orbits.base_width, fiber)
    return float(psi.holder_modulus * spread.sum() / n)


def pressure_partition_sum(sys: SkewSystem, psi: PotentialSpec, n: int,
                           budget: int = DEFAULT_WORD_BUDGET,
                           orbits: Optional[CylinderOrbits] = None) -> PressureEstimate:
    """``(1/n) log sum_w exp(S_n psi(anchor_w))`` over periodically admissible words of length n."""
    if n < 2:
        raise ValidationError("partition-sum depth must be at least 2")
    if psi.evaluator is None and (orbits is None or orbits.depth != n):
        # locally constant: the sums depend on the word alone, no orbit points needed
        words = periodic_words(sys.transitions, n, budget)
        sums = psi.locally_constant[words].sum(axis=1)
        return PressureEstimate(_partitioned_logsumexp(sums, words[:, 0]) / n, "partition_sum", n, 0.0, 0.0)
    if orbits is None or orbits.depth != n:
        orbits = cylinder_orbits(sys, n, budget)
    sums = _birkhoff_sums(psi, orbits)
    value = _partitioned_logsumexp(sums, orbits.words[:, 0]) / n
    return PressureEstimate(value, "partition_sum", n, 0.0, variation_bound(sys, psi, orbits))


def pressure_spectral(ts: TransitionStructure, phi: Sequence[float]) -> PressureEstimate:
    """log of the spectral radius of ``M[i, j] = A[i, j] exp(phi[j])``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (ts.alphabet_size,) or not np.all(np.isfinite(phi)):
        raise ValidationError("potential table must hold one finite value per symbol")
    ts.require_irreducible()
    top = phi.max()
    weighted = ts.admissible * np.exp(phi - top)[None, :]
    return PressureEstimate(float(top + math.log(perron_root(weighted))), "spectral", 0, 0.0, 0.0)


def epsilon_pressure(sys: SkewSystem, psi: PotentialSpec, n: int, eps: float,
                     budget: int = DEFAULT_WORD_BUDGET, grid_budget: int = DEFAULT_GRID_BUDGET,
                     orbits: Optional[CylinderOrbits] = None) -> float:
    """Finite-scale proxy for the eps-pressure.

    The depth-n cylinder anchors are grouped into dynamical cells, i.e. by the
    eps-grid cell of each of their first ``n`` iterates. One representative per
    nonempty cell (the one with the largest Birkhoff sum) forms a grid-based
    (n, eps)-spanning set of the anchor skeleton of the basic set, and the
    result is ``(1/n) log`` of its spanning sum. Any spanning set bounds the
    infimum from above, so this is an upper-flavoured proxy.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if n < 1:
        raise ValidationError("depth must be at least 1")
    if orbits is None or orbits.depth != n:
        orbits = cylinder_orbits(sys, n, budget)
    pts = orbits.points
    extent = max(1.0, float(np.max(np.abs(pts))))
    cells_per_axis = math.ceil(extent / eps)
    if float(cells_per_axis) ** pts.shape[2] > grid_budget:
        raise BudgetExceededError(
            f"eps={eps:g} needs {cells_per_axis}^{pts.shape[2]} grid cells, over the budget {grid_budget}")
    codes = np.floor(pts / eps).astype(np.int64).reshape(len(pts), -1)
    _, cell = np.unique(codes, axis=0, return_inverse=True)
    cell = cell.ravel()
    sums = _birkhoff_sums(psi, orbits)
    best = np.full(cell.max() + 1, -np.inf)
    np.maximum.at(best, cell, sums)
    return float(logsumexp(best) / n)


# --- Bowen roots -----------------------------------------------------------

OmegaLike = Union[float, Sequence[float], Callable]


def omega_table(sys: SkewSystem, omega: OmegaLike) -> Optional[np.ndarray]:
    """Per-symbol table for constant or tabulated omega, None when point-dependent."""
    if isinstance(omega, numbers.Real):
        table = np.full(sys.alphabet_size, float(omega))
    elif callable(omega):
        return None
    else:
        table = np.asarray(omega, dtype=float)
        if table.shape != (sys.alphabet_size,):
            raise ValidationError(f"omega table needs {sys.alphabet_size} entries")
    if np.any(table < 1.0):
        raise ValidationError("omega must be >= 1 everywhere")
    return table


def log_omega_potential(omega: Callable) -> PotentialSpec:
    """``log omega`` for a point-dependent omega with a ``lipschitz`` attribute."""
    lip = float(getattr(omega, "lipschitz", 0.0))
    return PotentialSpec(lambda s, p: np.log(omega(p)), None, lip, "log_omega")


@dataclass(frozen=True)
class BowenRoot:
    t: float
    residual: float
    bracket: Tuple[float, float]
    bracket_pressures: Tuple[float, float]
    clamped: bool
    method: str
    depth: int
    variation_bound: float = 0.0

    @property
    def certified(self) -> bool:
        """Monotonicity certificate: ``P(t_lo) >= 0 >= P(t_hi)`` with ``t_lo <= t_hi``."""
        (a, b), (pa, pb) = self.bracket, self.bracket_pressures
        return a <= b and pa >= 0.0 >= pb


class PressureCurve:
    """``t -> P(t Phi^s - log omega)`` with the word sums cached."""

    def __init__(self, sys: SkewSystem, omega: OmegaLike = 1.0, depth: int = DEFAULT_ROOT_DEPTH,
                 budget: int = DEFAULT_WORD_BUDGET):
        phi = sys.stable_potential.locally_constant
        if phi.max() >= 0:
            raise ValidationError("stable potential must be negative (fiber maps must contract)")
        self.sys = sys
        self.phi = phi
        self.table = omega_table(sys, omega)
        self.depth = 0
        self.variation = 0.0
        if self.table is None:
            if depth < 2:
                raise ValidationError("partition-sum depth must be at least 2")
            orbits = cylinder_orbits(sys, depth, budget)
            log_om = log_omega_potential(omega)
            om = np.exp(log_om(orbits.words.ravel(), orbits.points.reshape(-1, orbits.points.shape[2])))
            if np.any(om < 1.0 - 1e-12):
                raise ValidationError("omega must be >= 1 everywhere")
            self.s_phi = phi[orbits.words].sum(axis=1)
            self.s_log_omega = _birkhoff_sums(log_om, orbits)
            self.leading = orbits.words[:, 0]
            self.depth = depth
            self.variation = variation_bound(sys, log_om, orbits)
            self.method = "partition_sum"
        else:
            self.method = "spectral"

    def __call__(self, t: float) -> float:
        if self.table is None:
            return _partitioned_logsumexp(t * self.s_phi - self.s_log_omega, self.leading) / self.depth
        return pressure_spectral(self.sys.transitions, t * self.phi - np.log(self.table)).value


def bisect_decreasing(f: Callable[[float], float], tol: float = BISECTION_TOL,
                      pressure_tol: float = PRESSURE_TOL):
    """Root of a strictly decreasing function on ``[0, inf)``.

    Returns ``(t, residual, (lo, hi), (f(lo), f(hi)), clamped)``; ``clamped``
    is set when ``f(0) < 0`` and the root is reported as 0.
    """
    f0 = f(0.0)
    if abs(f0) <= pressure_tol:
        return 0.0, abs(f0), (0.0, 0.0), (f0, f0), False
    if f0 < 0:
        return 0.0, abs(f0), (0.0, 0.0), (f0, f0), True
    lo, flo, hi = 0.0, f0, 1.0
    fhi = f(hi)
    for _ in range(MAX_DOUBLINGS):
        if fhi <= 0:
            break
        lo, flo = hi, fhi
        hi *= 2.0
        fhi = f(hi)
    else:
        raise BracketError(f"no sign change of the pressure up to t={hi:g}; stable data may not contract")
    t, ft = hi, fhi
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm >= 0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        t, ft = mid, fm
        if hi - lo <= tol and abs(fm) <= pressure_tol:
            break
    if abs(flo) < abs(ft):
        t, ft = lo, flo
    if abs(fhi) < abs(ft):
        t, ft = hi, fhi
    return t, abs(ft), (lo, hi), (flo, fhi), False


def bowen_root(sys: SkewSystem, omega: OmegaLike = 1.0, tol: float = BISECTION_TOL,
               depth: int = DEFAULT_ROOT_DEPTH, pressure_tol: float = PRESSURE_TOL,
               budget: int = DEFAULT_WORD_BUDGET) -> BowenRoot:
    """Zero of ``t -> P(t Phi^s - log omega)`` by bracketing and bisection.

    ``omega`` is a constant, a per-symbol table (spectral path) or a callable
    on phase points such as an ``OmegaMinorant`` (partition sums at ``depth``).
    """
    curve = PressureCurve(sys, omega, depth, budget)
    t, res, bracket, pb, clamped = bisect_decreasing(curve, tol, pressure_tol)
    return BowenRoot(float(t), float(res), bracket, pb, clamped, curve.method, curve.depth, curve.variation)


def similarity_dimension(ratios: Sequence[float]) -> float:
    """Unique ``s`` with ``sum |ratio_i|**s = 1``."""
    r = np.abs(np.asarray(list(ratios), dtype=float))
    if r.size == 0:
        raise ValidationError("need at least one ratio")
    if np.any((r <= 0) | (r >= 1)):
        raise ValidationError("ratios must lie in (0, 1)")
    logs = np.log(r)
    # f(s) = log sum r^s, strictly decreasing with f(0) = log(len(r)) >= 0
    f = lambda s: float(logsumexp(s * logs))
    t, _, _, _, _ = bisect_decreasing(f, tol=0.0, pressure_tol=1e-15)
    return t


def variational_check(ts: TransitionStructure, phi: Sequence[float], p) -> float:
    """``P(phi) - (h(mu) + int phi dmu)`` for a Bernoulli or Markov measure.

    ``p`` is a probability vector (Bernoulli measure, full shift only) or a
    row-stochastic matrix supported on the admissible transitions.
    """
    phi = np.asarray(phi, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValidationError("weights must be nonnegative")
    if p.ndim == 1:
        if not ts.admissible.all():
            raise ValidationError("Bernoulli weights need the full shift")
        if p.shape != phi.shape or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError("Bernoulli weights must be a probability vector over the alphabet")
        entropy = -float(np.sum(xlogy(p, p)))
        integral = float(p @ phi)
    else:
        if p.shape != ts.admissible.shape or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValidationError("Markov weights must be a row-stochastic matrix")
        if np.any((p > 0) & ~ts.admissible):
            raise ValidationError("Markov weights charge a forbidden transition")
        vals, vecs = np.linalg.eig(p.T)
        pi = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        pi = pi / pi.sum()
        entropy = -float(np.sum(pi[:, None] * xlogy(p, p)))
        integral = float(pi @ phi)
    return pressure_spectral(ts, phi).value - (entropy + integral)
