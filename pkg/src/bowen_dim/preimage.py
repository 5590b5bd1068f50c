"""Preimage multiplicity on depth-n approximants and continuous minorants.

Membership of a phase point in the depth-n approximant is decided by
walking the admissible backward words over its base coordinate and pruning
every composed fiber image that is already farther than ``tol`` from the
fiber coordinate. The images are nested (each fiber map sends the invariant
fiber box into itself), so a pruned image can never come back within range.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import BudgetExceededError, ValidationError
from .symbolic import DEFAULT_WORD_BUDGET
from .systems import SkewSystem


def _as_point(point) -> np.ndarray:
    p = np.asarray(point, dtype=float).ravel()
    if p.size < 2:
        raise ValidationError("a phase point needs a base and at least one fiber coordinate")
    return p


def _box_distance(y, lo, hi) -> np.ndarray:
    """Max-norm distance from ``y`` to each box ``[lo_i, hi_i]``."""
    gap = np.maximum(lo - y[None, :], y[None, :] - hi)
    return np.max(np.maximum(gap, 0.0), axis=1)


@dataclass(frozen=True)
class Membership:
    """Outcome of a depth-n membership query.

    ``distance`` is the fiber distance to the approximant when it is at most
    ``tol``; otherwise it is a certified lower bound exceeding ``tol``.
    ``escape_time`` is set when the base coordinate leaves the surviving set.
    """

    inside: bool
    distance: float
    escape_time: Optional[int] = None

    def __bool__(self) -> bool:
        return self.inside


def slice_distance(sys: SkewSystem, x: float, y, n: int, tol: float,
                   budget: int = DEFAULT_WORD_BUDGET) -> float:
    """Distance from ``y`` to the depth-n slice approximant over ``x``, pruned at ``tol``."""
    y = np.asarray(y, dtype=float).ravel()
    box = sys.fiber_box
    adm = sys.transitions.admissible
    z = np.array([float(x)])
    offset = np.zeros((1, sys.fiber_dimension))
    scale = np.ones(1)
    best_pruned = np.inf
    for _ in range(n):
        sym = sys.symbol_of(z)
        rows, preds = np.nonzero(adm[:, sym].T)
        if len(rows) > budget:
            raise BudgetExceededError(f"membership query needs more than {budget} live images")
        zp = sys.base_inverse(preds, z[rows])
        offset = offset[rows] + scale[rows, None] * sys.fiber_offset(preds, zp)
        scale = scale[rows] * sys.fiber_scale(preds)
        z = zp
        a = offset + scale[:, None] * box[None, :, 0]
        b = offset + scale[:, None] * box[None, :, 1]
        dist = _box_distance(y, np.minimum(a, b), np.maximum(a, b))
        keep = dist <= tol
        if not keep.all():
            best_pruned = min(best_pruned, float(dist[~keep].min()))
        if not keep.any():
            return best_pruned
        z, offset, scale = z[keep], offset[keep], scale[keep]
    a = offset + scale[:, None] * box[None, :, 0]
    b = offset + scale[:, None] * box[None, :, 1]
    return float(_box_distance(y, np.minimum(a, b), np.maximum(a, b)).min())


def lambda_membership(sys: SkewSystem, point, n: int, tol: float,
                      budget: int = DEFAULT_WORD_BUDGET) -> Membership:
    """Is the fiber coordinate within ``tol`` of the depth-n slice over the base coordinate?"""
    if n < 1:
        raise ValidationError("membership depth must be at least 1")
    if tol < 0:
        raise ValidationError("tolerance must be nonnegative")
    p = _as_point(point)
    x, y = p[0], p[1:]
    if sys.symbol_of(x)[0] < 0:
        return Membership(False, np.inf, 0)
    k = sys.escape_time(x, n)
    if k is not None:
        return Membership(False, np.inf, k)
    d = slice_distance(sys, x, y, n, tol, budget)
    return Membership(bool(d <= tol), float(d))


@dataclass(frozen=True)
class Candidate:
    symbol: int
    preimage: Tuple[float, ...]
    distance: float


@dataclass(frozen=True)
class PreimageReport:
    """Preimages of ``point`` within ``tolerance`` of the depth-(n-1) approximant.

    Each candidate's ``distance`` is measured in the fiber over ``point``: the
    preimage's own slice distance times the branch's fiber contraction, i.e.
    the distance from ``point`` to that branch's part of the depth-n slice.
    """

    point: Tuple[float, ...]
    depth: int
    tolerance: float
    count: int
    candidates: Tuple[Candidate, ...]
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "depth": self.depth,
            "tolerance": self.tolerance,
            "count": self.count,
            "candidates": [{"symbol": c.symbol, "preimage": list(c.preimage), "distance": c.distance}
                           for c in self.candidates],
            "warning": self.warning,
        }


def default_tolerance(sys: SkewSystem, n: int) -> float:
    return sys.sup_contraction ** n


def _branch_preimage(sys: SkewSystem, k: int, x: float, y: np.ndarray, n: int, tol: float,
                     budget: int) -> Candidate:
    z = float(sys.base_inverse(k, x))
    yp = sys.fiber_inverse([k], z, y)[0]
    s = abs(float(sys.fiber_scale(k)))
    if n > 1:
        d = s * slice_distance(sys, z, yp, n - 1, tol / s, budget)
    else:
        box = sys.fiber_box
        d = s * float(_box_distance(yp, box[None, :, 0], box[None, :, 1])[0])
    return Candidate(int(k), (z, *map(float, yp)), float(d))


def count_preimages(sys: SkewSystem, point, n: int, tol: Optional[float] = None,
                    budget: int = DEFAULT_WORD_BUDGET) -> PreimageReport:
    """Count preimages of ``point`` that stay in the depth-(n-1) approximant.

    Every branch whose base image contains the base coordinate contributes
    one candidate (fiber maps are invertible in ``y``); it counts when its
    distance is at most ``tol`` (default ``sup_contraction**n``).
    """
    if n < 1:
        raise ValidationError("depth must be at least 1")
    tol = default_tolerance(sys, n) if tol is None else float(tol)
    p = _as_point(point)
    x, y = p[0], p[1:]
    sym = int(sys.symbol_of(x)[0])
    if sym < 0:
        raise ValidationError(f"base coordinate {x!r} lies outside every branch domain")
    cands = tuple(_branch_preimage(sys, int(k), x, y, n, tol, budget)
                  for k in sys.transitions.predecessors(sym))
    count = sum(c.distance <= tol for c in cands)
    warning = None
    if count == 0:
        warning = "no preimage within tolerance: point is not consistent with the depth-n approximant"
    return PreimageReport(tuple(map(float, p)), n, tol, int(count), cands, warning)


def preimage_mass_identity(sys: SkewSystem, point, n: int, tol: Optional[float] = None,
                           cached: Optional[PreimageReport] = None,
                           budget: int = DEFAULT_WORD_BUDGET) -> float:
    """``|sum over counted preimages of 1/Delta - 1|``.

    The preimages are recounted by independent per-branch queries and each
    contributes ``1/Delta`` with ``Delta`` taken from ``cached`` (computed
    here when absent). A nonzero residual means the cached count disagrees
    with the recount.
    """
    tol = default_tolerance(sys, n) if tol is None else float(tol)
    if cached is None:
        cached = count_preimages(sys, point, n, tol, budget)
    if cached.count < 1:
        raise ValidationError("mass identity needs a point with at least one preimage")
    p = _as_point(point)
    x, y = p[0], p[1:]
    sym = int(sys.symbol_of(x)[0])
    recount = 0
    for k in sys.transitions.predecessors(sym):
        c = _branch_preimage(sys, int(k), x, y, n, tol, budget)
        recount += c.distance <= tol
    return abs(recount / cached.count - 1.0)


# --- sampling --------------------------------------------------------------

def sample_points(sys: SkewSystem, n: int, count: int, rng, steps: int = 1) -> np.ndarray:
    """Phase points of the depth-n approximant, by forward iteration of construction points.

    A construction point sits over the midpoint of a random admissible base
    cylinder, at a uniformly random position inside the composed image of a
    random backward word of length n. It is then pushed forward ``steps``
    times, which keeps it inside the depth-n approximant.
    """
    if count < 1 or n < 1:
        raise ValidationError("need a positive count and depth")
    if steps < 0:
        raise ValidationError("steps must be nonnegative")
    ts = sys.transitions
    depth = sys.float_horizon + 1 + steps
    box = sys.fiber_box
    out = np.empty((count, 1 + sys.fiber_dimension))
    for i in range(count):
        word = [int(rng.integers(ts.alphabet_size))]
        for _ in range(depth - 1):
            word.append(int(rng.choice(ts.successors(word[-1]))))
        lo, hi = sys.cylinder(word)
        x = 0.5 * (lo + hi)
        z, offset, scale = x, np.zeros(sys.fiber_dimension), 1.0
        sym = word[0]
        for _ in range(n):
            k = int(rng.choice(ts.predecessors(sym)))
            z = float(sys.base_inverse(k, z))
            offset = offset + scale * sys.fiber_offset(k, z)[0]
            scale = scale * float(sys.fiber_scale(k))
            sym = k
        u = rng.uniform(box[:, 0], box[:, 1])
        pt = np.concatenate([[x], offset + scale * u])[None, :]
        for _ in range(steps):
            pt = sys.apply(pt)
        out[i] = pt[0]
    return out


def usc_statistic(points, counts, h: float) -> float:
    """Fraction of ordered sample pairs within max-distance ``h`` with ``Delta(near) <= Delta(centre)``.

    Returns 1.0 when no pair is that close.
    """
    pts = np.asarray(points, dtype=float)
    counts = np.asarray(counts)
    pairs = cKDTree(pts).query_pairs(h, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return 1.0
    i, j = pairs[:, 0], pairs[:, 1]
    ok = np.count_nonzero(counts[j] <= counts[i]) + np.count_nonzero(counts[i] <= counts[j])
    return ok / (2 * len(pairs))


# --- minorants -------------------------------------------------------------

@dataclass(frozen=True)
class OmegaMinorant:
    """Piecewise-linear ``omega >= 1`` of one phase coordinate.

    Evaluation interpolates linearly between ``breakpoints`` and is constant
    beyond the first and last one. ``lipschitz`` is the declared constant.
    """

    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    lipschitz: float
    floor: float = 1.0
    axis: int = 1
    samples: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.breakpoints) == 0 or len(self.breakpoints) != len(self.values):
            raise ValidationError("minorant needs matching nonempty breakpoints and values")
        if any(b > a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValidationError("breakpoints must be sorted")
        if self.floor < 1.0 or min(self.values) < self.floor:
            raise ValidationError("minorant values must be >= floor >= 1")

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.interp(pts[:, self.axis], self.breakpoints, self.values)

    def to_dict(self) -> dict:
        return {"axis": self.axis, "lipschitz": self.lipschitz, "floor": self.floor,
                "breakpoints": list(self.breakpoints), "values": list(self.values), "samples": self.samples}

    @classmethod
    def from_dict(cls, d: dict) -> "OmegaMinorant":
        return cls(tuple(d["breakpoints"]), tuple(d["values"]), float(d["lipschitz"]),
                   float(d.get("floor", 1.0)), int(d.get("axis", 1)), int(d.get("samples", 0)))


def _cone_envelope(u, delta, lip, grid):
    return np.min(delta[None, :] + lip * np.abs(grid[:, None] - u[None, :]), axis=1)


def build_omega_minorant(samples: Sequence[Tuple[Sequence[float], float]], modulus: float,
                         axis: int = 1) -> OmegaMinorant:
    """Largest ``modulus``-Lipschitz function of coordinate ``axis`` below every sample.

    The result is clamped to ``[1, max Delta]``. The unclamped envelope
    ``min_i(Delta_i + L |u - u_i|)`` is a tent between consecutive sample
    locations, so it is exact on the breakpoints made of the sample
    locations, the tent apexes and the crossings with the two clamp levels.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("need at least one sample")
    if modulus < 0:
        raise ValidationError("modulus must be nonnegative")
    u = np.array([float(np.asarray(p, dtype=float).ravel()[axis]) for p, _ in samples])
    delta = np.array([float(d) for _, d in samples])
    if np.any(delta < 1):
        raise ValidationError("sampled multiplicities must be >= 1")
    cap = float(delta.max())
    order = np.lexsort((delta, u))
    u, delta = u[order], delta[order]
    keep = np.concatenate([[True], u[1:] != u[:-1]])  # smallest value at a repeated location
    u, delta = u[keep], delta[keep]
    env = _cone_envelope(u, delta, modulus, u)
    grid = [u]
    if modulus > 0 and len(u) > 1:
        # apex of min(env_i + L (v - u_i), env_{i+1} - L (v - u_{i+1}))
        apex = 0.5 * (u[:-1] + u[1:]) + (env[1:] - env[:-1]) / (2 * modulus)
        grid.append(np.clip(apex, u[:-1], u[1:]))
    grid = np.unique(np.concatenate(grid))
    vals = _cone_envelope(u, delta, modulus, grid)
    extra = []
    for level in (1.0, cap):
        lo, hi = vals[:-1], vals[1:]
        cross = (lo - level) * (hi - level) < 0
        t = (level - lo[cross]) / (hi[cross] - lo[cross])
        extra.append(grid[:-1][cross] + t * (grid[1:][cross] - grid[:-1][cross]))
    grid = np.unique(np.concatenate([grid, *extra]))
    vals = np.clip(_cone_envelope(u, delta, modulus, grid), 1.0, cap)
    return OmegaMinorant(tuple(map(float, grid)), tuple(map(float, vals)), float(modulus),
                         1.0, axis, len(samples))


def select_modulus(samples, validation, candidates: Sequence[float], axis: int = 1,
                   slack: float = 1e-12) -> float:
    """Largest candidate modulus whose minorant stays below every held-out sample.

    ``validation`` is a list of ``(point, Delta)`` pairs not used to build the
    minorant. Zero is always admissible (the envelope is then ``min Delta``,
    which a held-out ``Delta`` can undercut only if it is smaller).
    """
    validation = list(validation)
    pts = np.array([np.asarray(p, dtype=float).ravel() for p, _ in validation])
    dv = np.array([float(d) for _, d in validation])
    best = 0.0
    for L in sorted(candidates):
        om = build_omega_minorant(samples, L, axis)
        if np.all(om(pts) <= dv + slack):
            best = float(L)
        else:
            break
    return best


def omega_staircase(samples, moduli: Sequence[float], axis: int = 1) -> List[OmegaMinorant]:
    """Minorants for increasing moduli: a pointwise nondecreasing sequence."""
    return [build_omega_minorant(samples, L, axis) for L in sorted(moduli)]
