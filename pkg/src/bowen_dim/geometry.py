"""Stable-slice approximants, box counting and log-log regression."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .errors import BudgetExceededError, EscapeError, ValidationError
from .systems import SkewSystem

MERGE_TOL = 1e-12
COUPLING_FACTOR = 4.0
DEFAULT_IMAGE_BUDGET = 10**7
# grid snapping slack, in units of the cell size
SNAP = 1e-9
SMALL_SPAN = 4


@dataclass(frozen=True)
class SliceApprox:
    """Depth-``n`` outer approximant of the stable slice over ``anchor``.

    ``lo``/``hi`` are ``(N, d)`` corner arrays. One-dimensional slices are
    merged at ``MERGE_TOL`` and sorted; rectangles are kept as generated.
    ``resolution`` bounds the diameter of every composed image (zero for an
    exactly known set).
    """

    dimension: int
    lo: np.ndarray
    hi: np.ndarray
    depth: int
    anchor: Optional[float]
    resolution: float
    n_images: int = 0

    @property
    def pieces(self) -> List[Tuple]:
        if self.dimension == 1:
            return [(float(a), float(b)) for a, b in zip(self.lo[:, 0], self.hi[:, 0])]
        return [tuple(zip(map(float, a), map(float, b))) for a, b in zip(self.lo, self.hi)]

    @property
    def measure(self) -> float:
        if self.dimension == 1:
            return float(np.sum(self.hi - self.lo))
        return float(np.sum(np.prod(self.hi - self.lo, axis=1)))

    @classmethod
    def from_pieces(cls, pieces, depth: int = 0, anchor=None, resolution: float = 0.0):
        """Exact set given as intervals ``(a, b)`` or rectangles ``((a, b), (c, d))``."""
        pieces = list(pieces)
        if not pieces:
            return cls(1, np.zeros((0, 1)), np.zeros((0, 1)), depth, anchor, resolution, 0)
        arr = np.asarray(pieces, dtype=float)
        if arr.ndim == 2:
            lo, hi = arr[:, :1], arr[:, 1:]
            lo, hi = _merge_1d(lo[:, 0], hi[:, 0])
            return cls(1, lo[:, None], hi[:, None], depth, anchor, resolution, len(pieces))
        return cls(2, arr[:, :, 0], arr[:, :, 1], depth, anchor, resolution, len(pieces))


@dataclass(frozen=True)
class BackwardImages:
    """Composed fiber maps along every admissible backward word of length n.

    ``preimages`` holds the deepest base points; the image of the fiber box
    under the word ``w`` is ``offset[w] + scale[w] * box``.
    """

    preimages: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    first_symbol: np.ndarray

    def boxes(self, fiber_box):
        a = self.offset + self.scale[:, None] * fiber_box[None, :, 0]
        b = self.offset + self.scale[:, None] * fiber_box[None, :, 1]
        return np.minimum(a, b), np.maximum(a, b)


def check_anchor(sys: SkewSystem, x: float, n: int):
    if sys.symbol_of(x)[0] < 0:
        raise EscapeError(f"anchor {x!r} lies outside every base branch (escape time 0)", 0)
    k = sys.escape_time(x, n)
    if k is not None:
        raise EscapeError(f"anchor {x!r} leaves the surviving base set at step {k}", k)


def backward_images(sys: SkewSystem, x: float, n: int, budget: int = DEFAULT_IMAGE_BUDGET) -> BackwardImages:
    d = sys.fiber_dimension
    z = np.array([float(x)])
    offset = np.zeros((1, d))
    scale = np.ones(1)
    first = np.full(1, -1)
    adm = sys.transitions.admissible
    for step in range(n):
        sym = sys.symbol_of(z)
        if np.any(sym < 0):
            raise EscapeError(f"backward chain left the base domains at step {step}", step)
        rows, preds = np.nonzero(adm[:, sym].T)
        if len(rows) > budget:
            raise BudgetExceededError(f"depth {n} slice needs more than {budget} composed images")
        zp = sys.base_inverse(preds, z[rows])
        offset = offset[rows] + scale[rows, None] * sys.fiber_offset(preds, zp)
        scale = scale[rows] * sys.fiber_scale(preds)
        first = preds if step == 0 else first[rows]
        z = zp
    return BackwardImages(z, offset, scale, first)


def _merge_1d(lo, hi, tol: float = MERGE_TOL):
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    if len(lo) == 0:
        return lo, hi
    reach = np.maximum.accumulate(hi)
    starts = np.concatenate([[True], lo[1:] > reach[:-1] + tol])
    idx = np.flatnonzero(starts)
    ends = np.concatenate([idx[1:] - 1, [len(lo) - 1]])
    return lo[idx], reach[ends]


def stable_slice_approx(sys: SkewSystem, anchor: float, n: int,
                        budget: int = DEFAULT_IMAGE_BUDGET, check: bool = True) -> SliceApprox:
    """Union of ``h^n_w(fiber box)`` over admissible backward words ending at ``anchor``."""
    if n < 0:
        raise ValidationError("depth must be nonnegative")
    if check:
        check_anchor(sys, anchor, n)
    box = sys.fiber_box
    resolution = sys.sup_contraction ** n * sys.fiber_diameter
    if n == 0:
        return SliceApprox(sys.fiber_dimension, box[None, :, 0].copy(), box[None, :, 1].copy(),
                           0, float(anchor), resolution, 1)
    imgs = backward_images(sys, anchor, n, budget)
    lo, hi = imgs.boxes(box)
    if sys.fiber_dimension == 1:
        mlo, mhi = _merge_1d(lo[:, 0], hi[:, 0])
        return SliceApprox(1, mlo[:, None], mhi[:, None], n, float(anchor), resolution, len(lo))
    return SliceApprox(2, lo, hi, n, float(anchor), resolution, len(lo))


def is_refinement(fine: SliceApprox, coarse: SliceApprox, tol: float = MERGE_TOL) -> bool:
    """True when every piece of ``fine`` lies inside some piece of ``coarse``."""
    if fine.dimension != coarse.dimension:
        return False
    if fine.dimension == 1:
        idx = np.searchsorted(coarse.lo[:, 0], fine.lo[:, 0] + tol, side="right") - 1
        ok = idx >= 0
        idx = np.clip(idx, 0, None)
        ok &= fine.hi[:, 0] <= coarse.hi[idx, 0] + tol
        ok &= fine.lo[:, 0] >= coarse.lo[idx, 0] - tol
        return bool(np.all(ok))
    for a, b in zip(fine.lo, fine.hi):
        inside = np.all(coarse.lo <= a + tol, axis=1) & np.all(coarse.hi >= b - tol, axis=1)
        if not inside.any():
            return False
    return True


class Count(int):
    """Box count carrying a flag for scales below the merge tolerance."""

    below_merge_tol: bool = False

    def __new__(cls, value, below_merge_tol=False):
        obj = super().__new__(cls, value)
        obj.below_merge_tol = below_merge_tol
        return obj


def _cell_ranges(lo, hi, eps):
    k0 = np.floor(lo / eps + SNAP).astype(np.int64)
    k1 = np.ceil(hi / eps - SNAP).astype(np.int64) - 1
    return k0, np.maximum(k0, k1)


def box_count(s: SliceApprox, eps: float) -> Count:
    """Number of half-open grid cells ``[k eps, (k+1) eps)`` met by the pieces.

    A cell counts when it meets a piece in a set of positive length (area),
    or holds a degenerate piece; endpoints within ``1e-9`` cells of a grid line
    are snapped to it.
    """
    if eps <= 0:
        raise ValidationError("scale must be positive")
    flag = eps < MERGE_TOL
    if len(s.lo) == 0:
        return Count(0, flag)
    k0, k1 = _cell_ranges(s.lo, s.hi, eps)
    if s.dimension == 1:
        order = np.argsort(k0[:, 0], kind="stable")
        a, b = k0[order, 0], k1[order, 0]
        prev = np.concatenate([[a[0] - 1], np.maximum.accumulate(b)[:-1]])
        fresh = b - np.maximum(a, prev + 1) + 1
        return Count(int(np.sum(np.maximum(fresh, 0))), flag)
    span = k1 - k0 + 1
    small = np.all(span <= SMALL_SPAN, axis=1)
    cells = []
    ks0, ks1 = k0[small], k1[small]
    for di in range(SMALL_SPAN):
        for dj in range(SMALL_SPAN):
            keep = (ks0[:, 0] + di <= ks1[:, 0]) & (ks0[:, 1] + dj <= ks1[:, 1])
            cells.append(np.column_stack([ks0[keep, 0] + di, ks0[keep, 1] + dj]))
    for a, b in zip(k0[~small], k1[~small]):
        ii, jj = np.meshgrid(np.arange(a[0], b[0] + 1), np.arange(a[1], b[1] + 1), indexing="ij")
        cells.append(np.column_stack([ii.ravel(), jj.ravel()]))
    allc = np.concatenate(cells)
    return Count(len(np.unique(allc, axis=0)), flag)


@dataclass(frozen=True)
class BoxCountLadder:
    entries: Tuple[Tuple[float, int], ...]
    slope: float
    stderr: float
    intercept: float
    method: str = "regression"

    def rows(self):
        """CSV rows ``(epsilon, count, log_inv_eps, log_count)``."""
        return [(e, n, -math.log(e), math.log(n) if n > 0 else float("-inf")) for e, n in self.entries]


def default_ladder(sys: SkewSystem, depth: int, base: float = 2.0, coarsest: int = 3) -> List[float]:
    """Geometric ladder from ``base**-coarsest`` down to the depth-coupled limit."""
    limit = COUPLING_FACTOR * sys.sup_contraction ** depth * sys.fiber_diameter
    finest = int(math.floor(math.log(1.0 / limit) / math.log(base)))
    return [base ** -k for k in range(coarsest, finest + 1)]


def box_dimension(s: SliceApprox, ladder: Sequence[float]) -> BoxCountLadder:
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``."""
    ladder = [float(e) for e in ladder]
    if len(ladder) < 4:
        raise ValidationError("box-dimension ladder needs at least 4 scales")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValidationError("box-dimension ladder must be strictly decreasing")
    if ladder[-1] < COUPLING_FACTOR * s.resolution:
        raise ValidationError(
            f"smallest scale {ladder[-1]:.3g} is below {COUPLING_FACTOR:g} x approximant resolution "
            f"{s.resolution:.3g}; increase the depth or coarsen the ladder")
    counts = [box_count(s, e) for e in ladder]
    if any(c == 0 for c in counts):
        raise ValidationError("empty slice has no box dimension")
    x = np.log(1.0 / np.array(ladder))
    y = np.log(np.array(counts, dtype=float))
    if np.ptp(y) == 0:
        slope, stderr, intercept = 0.0, 0.0, float(y[0])
    else:
        fit = stats.linregress(x, y)
        slope, stderr, intercept = float(fit.slope), float(fit.stderr), float(fit.intercept)
    return BoxCountLadder(tuple(zip(ladder, [int(c) for c in counts])), slope, stderr, intercept)


def canonical_fiber_points(sys: SkewSystem, x, depth: Optional[int] = None) -> np.ndarray:
    """A fiber point near the slice over each base point in ``x``.

    Follows the lowest-index predecessor backwards ``depth`` times from the
    centre of the fiber box; the result is within ``sup_contraction**depth``
    times the fiber diameter of the true slice.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if depth is None:
        depth = int(math.ceil(math.log(1e-13) / math.log(sys.sup_contraction)))
    first_pred = sys.transitions.admissible.argmax(axis=0)
    z = x.copy()
    offset = np.zeros((len(x), sys.fiber_dimension))
    scale = np.ones(len(x))
    for _ in range(depth):
        sym = sys.symbol_of(z)
        if np.any(sym < 0):
            raise EscapeError("base point outside the branch domains", 0)
        k = first_pred[sym]
        z = sys.base_inverse(k, z)
        offset = offset + scale[:, None] * sys.fiber_offset(k, z)
        scale = scale * sys.fiber_scale(k)
    centre = sys.fiber_box.mean(axis=1)
    return offset + scale[:, None] * centre[None, :]


def surviving_anchors(sys: SkewSystem, count: int, rng, depth: Optional[int] = None) -> List[float]:
    """Midpoints of ``count`` distinct random admissible cylinders.

    Cylinder depth defaults to the float horizon, so every anchor survives
    every escape test the package performs.
    """
    from .symbolic import word_array

    depth = sys.float_horizon + 1 if depth is None else depth
    ts = sys.transitions
    total = ts.count_words(depth)
    if total < count:
        raise ValidationError(f"only {total} cylinders of depth {depth}, cannot pick {count} anchors")
    anchors, seen = [], set()
    while len(anchors) < count:
        word = [int(rng.integers(ts.alphabet_size))]
        for _ in range(depth - 1):
            word.append(int(rng.choice(ts.successors(word[-1]))))
        if tuple(word) in seen:
            continue
        seen.add(tuple(word))
        lo, hi = sys.cylinder(word)
        anchors.append(0.5 * (lo + hi))
    return anchors
