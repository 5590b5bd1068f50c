"""Skew-product systems with expanding base and conformal contracting fibers.

Every system is piecewise affine: each symbol ``k`` owns a base branch that
maps its domain affinely onto an image interval, and a fiber map

    h_k(x, y) = c_k + l_k * x + a_k * sin(2 pi x) + s_k * y

acting on each fiber coordinate with the same signed contraction ``s_k``, so
the stable potential is ``log|s_k|`` on the cylinder of ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .intervals import Interval, sin2pi
from .symbolic import PotentialSpec, TransitionStructure

BASE_TOL = 1e-12
DEFAULT_EPS0 = 0.05
MAX_Z_COUPLING = 0.05


@dataclass(frozen=True)
class BaseBranch:
    """Increasing affine expanding map of ``domain`` onto ``image``."""

    domain: Tuple[float, float]
    image: Tuple[float, float]

    def __post_init__(self):
        (a, b), (c, d) = self.domain, self.image
        if not (0.0 <= a < b <= 1.0 and 0.0 <= c < d <= 1.0):
            raise ValidationError(f"branch intervals must be nondegenerate subintervals of [0,1]: {self}")
        if self.slope <= 1.0:
            raise ValidationError(f"base branch on {self.domain} is not expanding (slope {self.slope})")

    @property
    def slope(self) -> float:
        return (self.image[1] - self.image[0]) / (self.domain[1] - self.domain[0])

    @property
    def expansion_bounds(self) -> Tuple[float, float]:
        return (self.slope, self.slope)

    def forward(self, x):
        return self.image[0] + self.slope * (np.asarray(x, dtype=float) - self.domain[0])

    def inverse(self, u):
        return self.domain[0] + (np.asarray(u, dtype=float) - self.image[0]) / self.slope


@dataclass(frozen=True)
class FiberMap:
    """Fiber map of one branch: ``y -> const + linear*x + sine*sin(2 pi x) + scale*y``."""

    symbol: int
    scale: float
    const: Tuple[float, ...]
    linear: Tuple[float, ...]
    sine: float = 0.0

    def __post_init__(self):
        if not 0.0 < abs(self.scale) < 1.0:
            raise ValidationError(f"fiber map {self.symbol} must contract with nonzero derivative, got {self.scale}")

    @property
    def contraction_bounds(self) -> Tuple[float, float]:
        return (abs(self.scale), abs(self.scale))

    def offset(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (np.asarray(self.const)[None, :] + np.outer(x, self.linear)
                + self.sine * np.sin(2 * np.pi * x)[:, None])

    def apply(self, x, y):
        y = np.asarray(y, dtype=float).reshape(len(np.atleast_1d(x)), -1)
        return self.offset(x) + self.scale * y

    def inverse(self, x, y):
        y = np.asarray(y, dtype=float).reshape(len(np.atleast_1d(x)), -1)
        return (y - self.offset(x)) / self.scale

    def stable_derivative(self, x):
        return np.full(np.shape(np.atleast_1d(x)), self.scale)

    def offset_enclosure(self, base: Interval) -> list:
        out = []
        wave = self.sine * sin2pi(base) if self.sine else Interval(0.0, 0.0)
        for c, l in zip(self.const, self.linear):
            out.append(Interval(c, c) + l * base + wave)
        return out


@dataclass(frozen=True)
class SkewSystem:
    name: str
    base: Tuple[BaseBranch, ...]
    fibers: Tuple[FiberMap, ...]
    transitions: TransitionStructure
    params: dict = field(default_factory=dict, compare=False)
    fiber_box: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        m = len(self.base)
        if m == 0 or len(self.fibers) != m or self.transitions.alphabet_size != m:
            raise ValidationError("need one base branch and one fiber map per symbol")
        dims = {len(f.const) for f in self.fibers}
        if len(dims) != 1 or dims.pop() not in (1, 2):
            raise ValidationError("fiber dimension must be 1 or 2 and equal across branches")
        order = sorted(range(m), key=lambda k: self.base[k].domain[0])
        for a, b in zip(order, order[1:]):
            if self.base[a].domain[1] >= self.base[b].domain[0]:
                raise ValidationError(f"base domains of symbols {a} and {b} overlap")
        derived = self._geometric_transitions()
        if not np.array_equal(derived, self.transitions.admissible):
            raise ValidationError("transition structure disagrees with branch geometry")
        self.transitions.require_irreducible()
        object.__setattr__(self, "fiber_box", self._invariant_box())
        # vectorised copies of the branch data
        arrays = dict(
            dom_lo=np.array([b.domain[0] for b in self.base]),
            dom_hi=np.array([b.domain[1] for b in self.base]),
            img_lo=np.array([b.image[0] for b in self.base]),
            img_hi=np.array([b.image[1] for b in self.base]),
            slope=np.array([b.slope for b in self.base]),
            scale=np.array([f.scale for f in self.fibers]),
            const=np.array([f.const for f in self.fibers], dtype=float),
            linear=np.array([f.linear for f in self.fibers], dtype=float),
            sine=np.array([f.sine for f in self.fibers], dtype=float),
        )
        for key, value in arrays.items():
            value.setflags(write=False)
            object.__setattr__(self, "_" + key, value)

    def _geometric_transitions(self):
        m = len(self.base)
        a = np.zeros((m, m), dtype=bool)
        for k, bk in enumerate(self.base):
            for l, bl in enumerate(self.base):
                a[k, l] = bk.image[0] <= bl.domain[0] + BASE_TOL and bl.domain[1] <= bk.image[1] + BASE_TOL
        return a

    def _invariant_box(self):
        """Smallest box containing ``[0,1]^d`` mapped into itself by every fiber map."""
        d = self.fiber_dimension
        box = [Interval(0.0, 1.0) for _ in range(d)]
        for _ in range(10_000):
            grown = list(box)
            for br, fm in zip(self.base, self.fibers):
                offsets = fm.offset_enclosure(Interval(*br.domain))
                for j in range(d):
                    grown[j] = grown[j].hull(offsets[j] + fm.scale * box[j])
            if all(abs(g.lo - b.lo) <= 1e-15 and abs(g.hi - b.hi) <= 1e-15 for g, b in zip(grown, box)):
                break
            box = grown
        return np.array([[iv.lo, iv.hi] for iv in box])

    # --- structure -----------------------------------------------------
    @property
    def alphabet_size(self) -> int:
        return len(self.base)

    @property
    def fiber_dimension(self) -> int:
        return len(self.fibers[0].const)

    @property
    def fiber_diameter(self) -> float:
        return float(np.max(self.fiber_box[:, 1] - self.fiber_box[:, 0]))

    @property
    def sup_contraction(self) -> float:
        return float(np.max(np.abs(self._scale)))

    @property
    def inf_contraction(self) -> float:
        return float(np.min(np.abs(self._scale)))

    @property
    def inf_expansion(self) -> float:
        return float(np.min(self._slope))

    @property
    def sup_expansion(self) -> float:
        return float(np.max(self._slope))

    @property
    def float_horizon(self) -> int:
        """Forward steps a float base point can be iterated before roundoff dominates.

        After ``k`` steps the position error is about ``eps * slope**k``; it
        must stay well below the narrowest branch domain.
        """
        width = float(np.min(self._dom_hi - self._dom_lo))
        return max(1, int(math.floor(math.log(width / (64 * np.finfo(float).eps)) / math.log(self.sup_expansion))))

    @property
    def stable_potential(self) -> PotentialSpec:
        return PotentialSpec.from_table(np.log(np.abs(self._scale)), name="stable_potential")

    @property
    def symbol_labels(self):
        return self.transitions.labels or tuple(str(k) for k in range(self.alphabet_size))

    # --- base dynamics -------------------------------------------------
    def symbol_of(self, x) -> np.ndarray:
        """Index of the branch domain containing each base point, -1 outside."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x[:, None] >= self._dom_lo[None, :] - BASE_TOL) & (x[:, None] <= self._dom_hi[None, :] + BASE_TOL)
        sym = np.where(inside.any(axis=1), inside.argmax(axis=1), -1)
        return sym

    def base_forward(self, symbols, x):
        symbols = np.asarray(symbols)
        return self._img_lo[symbols] + self._slope[symbols] * (np.asarray(x, dtype=float) - self._dom_lo[symbols])

    def base_inverse(self, symbols, u):
        symbols = np.asarray(symbols)
        return self._dom_lo[symbols] + (np.asarray(u, dtype=float) - self._img_lo[symbols]) / self._slope[symbols]

    def fixed_point(self, symbol: int) -> float:
        """Fixed point of the base branch ``symbol`` (requires ``symbol -> symbol``)."""
        if not self.transitions.admissible[symbol, symbol]:
            raise ValidationError(f"symbol {symbol} cannot follow itself, its branch has no fixed point")
        b = self.base[symbol]
        return (b.slope * b.domain[0] - b.image[0]) / (b.slope - 1.0)

    def cylinder(self, word) -> Tuple[float, float]:
        """Base interval of points following ``word`` for ``len(word)`` steps."""
        word = list(word)
        if not self.transitions.is_admissible(word):
            raise ValidationError(f"word {word} is not admissible")
        lo, hi = self.base[word[-1]].domain
        for k in reversed(word[:-1]):
            lo, hi = float(self.base_inverse(k, lo)), float(self.base_inverse(k, hi))
        return lo, hi

    def escape_time(self, x, n: int) -> Optional[int]:
        """First iterate index ``k < n`` outside the branch domains, or None.

        Only the float-resolvable horizon is examined; beyond it a float base
        point carries no information about its itinerary.
        """
        x = float(x)
        for k in range(min(n, self.float_horizon)):
            s = self.symbol_of(x)[0]
            if s < 0:
                return k
            x = float(self.base_forward(s, x))
        return None

    # --- fiber dynamics ------------------------------------------------
    def fiber_offset(self, symbols, x) -> np.ndarray:
        symbols = np.atleast_1d(np.asarray(symbols))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return (self._const[symbols] + self._linear[symbols] * x[:, None]
                + (self._sine[symbols] * np.sin(2 * np.pi * x))[:, None])

    def fiber_scale(self, symbols) -> np.ndarray:
        return self._scale[np.asarray(symbols)]

    def fiber_apply(self, symbols, x, y) -> np.ndarray:
        symbols = np.atleast_1d(np.asarray(symbols))
        y = np.asarray(y, dtype=float).reshape(len(symbols), -1)
        return self.fiber_offset(symbols, x) + self._scale[symbols][:, None] * y

    def fiber_inverse(self, symbols, x, y) -> np.ndarray:
        symbols = np.atleast_1d(np.asarray(symbols))
        y = np.asarray(y, dtype=float).reshape(len(symbols), -1)
        return (y - self.fiber_offset(symbols, x)) / self._scale[symbols][:, None]

    def apply(self, points) -> np.ndarray:
        """One step of the skew map on ``(N, 1+d)`` phase points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        sym = self.symbol_of(points[:, 0])
        if np.any(sym < 0):
            raise ValidationError("phase point outside the branch domains")
        out = np.empty_like(points)
        out[:, 0] = self.base_forward(sym, points[:, 0])
        out[:, 1:] = self.fiber_apply(sym, points[:, 0], points[:, 1:])
        return out

    def derivative_check(self, rng, samples: int = 100, step: float = 1e-6) -> float:
        """Max |central difference - stable_derivative| over sampled (branch, x, y)."""
        worst = 0.0
        d = self.fiber_dimension
        for _ in range(samples):
            k = int(rng.integers(self.alphabet_size))
            x = rng.uniform(*self.base[k].domain)
            y = rng.uniform(self.fiber_box[:, 0], self.fiber_box[:, 1])
            for j in range(d):
                e = np.zeros(d)
                e[j] = step
                num = (self.fibers[k].apply(x, y + e) - self.fibers[k].apply(x, y - e))[0, j] / (2 * step)
                worst = max(worst, abs(num - self.fibers[k].stable_derivative(x)[0]))
        return worst


# --- constructions ---------------------------------------------------------

def _full_shift_base(m: int, intervals: Optional[Sequence[Tuple[float, float]]] = None):
    if intervals is None:
        intervals = [((k + 0.1) / m, (k + 0.9) / m) for k in range(m)]
    if len(intervals) != m:
        raise ValidationError(f"need {m} base intervals, got {len(intervals)}")
    return tuple(BaseBranch(tuple(map(float, iv)), (0.0, 1.0)) for iv in intervals)


def build_ifs(ratios: Sequence[float], offsets: Sequence[float]) -> SkewSystem:
    """Self-similar IFS ``y -> ratio_i * y + offset_i`` over a full-shift base."""
    ratios = [float(r) for r in ratios]
    offsets = [float(a) for a in offsets]
    if not ratios or len(ratios) != len(offsets):
        raise ValidationError("need one offset per contraction ratio")
    for r in ratios:
        if not 0.0 < abs(r) < 1.0:
            raise ValidationError(f"contraction ratio {r} must satisfy 0 < |ratio| < 1")
    m = len(ratios)
    fibers = tuple(FiberMap(k, r, (a,), (0.0,)) for k, (r, a) in enumerate(zip(ratios, offsets)))
    return SkewSystem("ifs", _full_shift_base(m), fibers, TransitionStructure.full_shift(m),
                      params={"ratios": ratios, "offsets": offsets})


EXAMPLE2_LABELS = ("11", "12", "21", "22")
EXAMPLE2_DEFAULT_PSI = ((0.0, 1.0), (1.0, -1.0), (1.0, 0.0))


def build_example2(alpha: float, s: Sequence[float] = (0.5, 0.5, 0.5, 0.5),
                   psi: Sequence[Tuple[float, float]] = EXAMPLE2_DEFAULT_PSI,
                   eps0: float = DEFAULT_EPS0, half_width: Optional[float] = None) -> SkewSystem:
    """Skew product with a variable number of fiber overlaps.

    ``psi`` holds three affine offsets ``(const, slope)`` for psi_1, psi_2,
    psi_3, each required to lie within ``eps0`` in C^1 of ``x``, ``1 - x`` and
    ``1``. Symbols are ordered 11, 12, 21, 22 where ``ij`` means the point sits
    in ``I_i`` and is mapped into ``I_j``.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 0.5:
        raise ValidationError(f"alpha={alpha} must lie in (0, 0.5) so that I_1 and I_2 are disjoint")
    eps = alpha ** 2 / 2 if half_width is None else float(half_width)
    if not 0.0 < eps < alpha ** 2:
        raise ValidationError(f"interval half-width {eps} must satisfy 0 < eps(alpha) < alpha^2")
    if not 0.0 < eps0 <= 0.25:
        raise ValidationError("eps0 must lie in (0, 0.25]")
    s = [float(v) for v in s]
    if len(s) != 4:
        raise ValidationError("need four contraction ratios s_1..s_4")
    for i, v in enumerate(s, start=1):
        if not 0.5 - eps0 < v < 0.5 + eps0:
            raise ValidationError(f"s_{i}={v} violates |s_i - 1/2| < eps0={eps0}")
    if len(psi) != 3:
        raise ValidationError("need three affine fiber offsets psi_1, psi_2, psi_3")
    for i, ((c, l), (c0, l0)) in enumerate(zip(psi, EXAMPLE2_DEFAULT_PSI), start=1):
        dc, dl = float(c) - c0, float(l) - l0
        c1_dist = max(abs(dc), abs(dc + dl)) + abs(dl)
        if c1_dist >= eps0:
            raise ValidationError(f"psi_{i} is {c1_dist:.3g} from its linear model in C^1, needs < eps0={eps0}")

    big = [(0.5 - eps, 0.5 + eps), (1.0 - alpha - eps, 1.0 - alpha + eps)]
    if big[0][1] >= big[1][0]:
        raise ValidationError("I_1 and I_2 overlap")
    outer = [BaseBranch(iv, (0.0, 1.0)) for iv in big]
    branches = []
    for i in range(2):
        for j in range(2):
            lo, hi = (float(v) for v in outer[i].inverse(np.array(big[j])))
            branches.append(BaseBranch((lo, hi), big[j]))
    (c1, l1), (c2, l2), (c3, l3) = ((float(c), float(l)) for c, l in psi)
    fibers = (
        FiberMap(0, s[0], (c1,), (l1,)),    # I_11: psi_1(x) + s_1 y
        FiberMap(1, -s[2], (c3,), (l3,)),   # I_12: psi_3(x) - s_3 y
        FiberMap(2, s[1], (c2,), (l2,)),    # I_21: psi_2(x) + s_2 y
        FiberMap(3, s[3], (0.0,), (0.0,)),  # I_22: s_4 y
    )
    a = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1]], dtype=bool)
    return SkewSystem("example2", tuple(branches), fibers, TransitionStructure(a, EXAMPLE2_LABELS),
                      params={"alpha": alpha, "s": s, "psi": [list(p) for p in psi],
                              "eps0": eps0, "half_width": eps})


@dataclass(frozen=True)
class HorseshoeParams:
    """Parameters of a translated horseshoe with overlaps.

    ``tau`` is an ``(m, 2)`` array of translations; ``contraction`` is the
    common derivative of both stable coordinate maps (conformal case).
    """

    m: int
    contraction: float
    tau: Tuple[Tuple[float, float], ...]
    base_intervals: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 3:
            raise ValidationError(f"m={self.m} must be an integer >= 3")
        if not 0.0 < self.contraction < 0.5:
            raise ValidationError(f"contraction {self.contraction} must satisfy 0 < lambda < 1/2")
        tau = tuple(tuple(float(v) for v in row) for row in self.tau)
        if len(tau) != self.m or any(len(row) != 2 for row in tau):
            raise ValidationError(f"tau must have shape ({self.m}, 2)")
        object.__setattr__(self, "tau", tau)
        if self.base_intervals is not None:
            ivs = tuple(tuple(float(v) for v in iv) for iv in self.base_intervals)
            for lo, hi in ivs:
                if not 0.0 < lo < hi < 1.0:
                    raise ValidationError("base intervals must be compact subintervals of (0,1)")
            object.__setattr__(self, "base_intervals", ivs)

    @classmethod
    def conformal(cls, m: int, tau=None, base_intervals=None) -> "HorseshoeParams":
        if tau is None:
            tau = [(0.0, 0.0)] * m
        return cls(m, 1.0 / m, tuple(map(tuple, tau)), base_intervals)


def generic_tau(m: int, contraction: Optional[float] = None, margin: float = 0.05):
    """A fixed admissible translation table with no rational coincidences.

    Entries follow the irrational rotations by the golden ratio and by
    ``sqrt(2)``, rescaled into ``[margin, 1 - contraction - margin]``.
    """
    lam = 1.0 / m if contraction is None else float(contraction)
    room = 1.0 - lam - 2 * margin
    if room <= 0:
        raise ValidationError("contraction leaves no room for translations")
    rot = ((1 + math.sqrt(5)) / 2, math.sqrt(2))
    return tuple(tuple(margin + room * ((k + 1) * r % 1.0) for r in rot) for k in range(m))


def build_example1(p: HorseshoeParams, z_coupling: float = 0.0) -> SkewSystem:
    """Translated horseshoe ``(gamma(x,z)+tau_i1, eta(y,z)+tau_i2, psi(z))``.

    ``gamma(x, z) = lambda*x + kappa*sin(2 pi z)`` and likewise for ``eta``; the
    coupling leaves the stable derivatives equal to ``lambda``. The expanding
    ``psi`` maps each base interval affinely onto [0, 1].
    """
    kappa = float(z_coupling)
    if abs(kappa) > MAX_Z_COUPLING:
        raise ValidationError(f"z_coupling {kappa} exceeds the small-perturbation bound {MAX_Z_COUPLING}")
    base = _full_shift_base(p.m, p.base_intervals)
    fibers = tuple(FiberMap(k, p.contraction, p.tau[k], (0.0, 0.0), kappa) for k in range(p.m))
    return SkewSystem("example1", base, fibers, TransitionStructure.full_shift(p.m),
                      params={"m": p.m, "contraction": p.contraction, "tau": [list(t) for t in p.tau],
                              "z_coupling": kappa})


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    margin: float
    worst_branch: int
    images: Tuple[Tuple[Tuple[float, float], Tuple[float, float]], ...]


def check_admissible(p: HorseshoeParams, z_coupling: float = 0.0) -> AdmissibilityReport:
    """Interval-arithmetic test that every branch image lies strictly inside (0,1)^2."""
    base = _full_shift_base(p.m, p.base_intervals)
    margins, images = [], []
    for k, br in enumerate(base):
        wave = z_coupling * sin2pi(Interval(*br.domain))
        axes = []
        for j in range(2):
            iv = p.contraction * Interval(0.0, 1.0) + p.tau[k][j] + wave
            axes.append((iv.lo, iv.hi))
            margins.append((min(iv.lo, 1.0 - iv.hi), k))
        images.append(tuple(axes))
    margin, worst = min(margins)
    return AdmissibilityReport(margin > 0.0, float(margin), int(worst), tuple(images))
