"""Finite-depth checks of the stable-dimension claims, packaged as reports.

Each check measures both sides of one claim, records the evidence tables it
used, and returns a ``VerificationReport``. ``margin`` is always
``rhs - lhs``. Upper bounds on the stable Hausdorff dimension are not
measurable directly; they are checked through the stable upper box
dimension of the slice approximant, which dominates the Hausdorff dimension,
and every report records that substitution in its metadata.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BoxCountLadder, box_dimension, default_ladder, stable_slice_approx, surviving_anchors
from .preimage import count_preimages, sample_points
from .pressure import BowenRoot, PressureCurve, bowen_root
from .systems import SkewSystem

ANALYTIC_MARGIN = 0.03
GEOMETRIC_MARGIN = 0.08
DENSITY_THRESHOLD = 0.95
CONSTANCY_MARGIN = 0.05

DIMENSION_SUBSTITUTION = (
    "stable Hausdorff dimension bounded through the stable upper box dimension of the "
    "depth-n slice approximant (box dimension dominates Hausdorff dimension)"
)

LADDER_HEADER = ("epsilon", "count", "log_inv_eps", "log_count")
PRESSURE_HEADER = ("t", "pressure")


@dataclass(frozen=True)
class Quantity:
    value: float
    uncertainty: float
    method: str
    provenance: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "uncertainty": self.uncertainty, "method": self.method,
                "provenance": dict(self.provenance)}


@dataclass
class VerificationReport:
    claim: str
    inputs: Dict[str, object]
    lhs: Quantity
    rhs: Quantity
    margin: float
    verdict: str
    tolerance: float
    evidence: Dict[str, Tuple[Tuple[str, ...], List[tuple]]] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "inputs": self.inputs,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "margin": self.margin,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "artifacts": list(self.artifacts),
            "metadata": dict(self.metadata),
        }


def _verdict(margin: float, uncertainty: float) -> str:
    return "pass" if margin >= -uncertainty else "fail"


def _metadata(**extra) -> dict:
    meta = {"dimension_substitution": DIMENSION_SUBSTITUTION}
    meta.update(extra)
    return meta


def system_inputs(sys: SkewSystem, **extra) -> dict:
    d = {"system": sys.name, "params": _jsonable(sys.params)}
    d.update(_jsonable(extra))
    return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return repr(obj)


# --- shared measurements ---------------------------------------------------

def slice_slopes(sys: SkewSystem, anchors: Sequence[float], depth: int,
                 ladder: Optional[Sequence[float]] = None) -> List[BoxCountLadder]:
    ladder = default_ladder(sys, depth) if ladder is None else list(ladder)
    return [box_dimension(stable_slice_approx(sys, a, depth), ladder) for a in anchors]


def _ladder_evidence(fits: Sequence[BoxCountLadder]) -> dict:
    return {f"ladder_anchor{i}": (LADDER_HEADER, fit.rows()) for i, fit in enumerate(fits)}


def pressure_evidence(sys: SkewSystem, omega, root: BowenRoot, points: int = 21) -> dict:
    curve = PressureCurve(sys, omega, depth=max(root.depth, 2))
    hi = max(2.0 * root.t, 1.0)
    ts = np.linspace(0.0, hi, points)
    return {"pressure_curve": (PRESSURE_HEADER, [(float(t), float(curve(t))) for t in ts])}


def _root_quantity(sys: SkewSystem, root: BowenRoot, omega_desc) -> Quantity:
    # partition-sum variation bound translated into root uncertainty via inf |Phi^s|
    inf_phi = float(np.min(np.abs(sys.stable_potential.locally_constant)))
    unc = root.residual / inf_phi + root.variation_bound / inf_phi
    return Quantity(root.t, unc, root.method,
                    {"depth": root.depth, "bracket": list(root.bracket), "clamped": root.clamped,
                     "omega": omega_desc})


def _omega_desc(omega):
    if hasattr(omega, "to_dict"):
        return omega.to_dict()
    return _jsonable(omega)


def sample_multiplicities(sys: SkewSystem, depth: int, sample_size: int, rng) -> Tuple[np.ndarray, np.ndarray]:
    pts = sample_points(sys, depth, sample_size, rng)
    counts = np.array([count_preimages(sys, p, depth).count for p in pts])
    return pts, counts


def _anchors(sys: SkewSystem, anchors, rng, count: int = 1) -> List[float]:
    if anchors is None:
        return surviving_anchors(sys, count, rng)
    return [float(a) for a in anchors]


# --- checks ----------------------------------------------------------------

def check_upper_bound(sys: SkewSystem, anchors: Sequence[float], depth: int,
                      ladder: Optional[Sequence[float]] = None, omega=1.0,
                      tolerance: float = GEOMETRIC_MARGIN, root_depth: int = 12) -> VerificationReport:
    """Largest slice slope over the anchors against the Bowen root ``t_omega``."""
    fits = slice_slopes(sys, anchors, depth, ladder)
    worst = max(range(len(fits)), key=lambda i: fits[i].slope)
    root = bowen_root(sys, omega, depth=root_depth)
    lhs = Quantity(fits[worst].slope, fits[worst].stderr, "regression",
                   {"depth": depth, "anchor": float(anchors[worst]),
                    "epsilons": [e for e, _ in fits[worst].entries]})
    rhs = _root_quantity(sys, root, _omega_desc(omega))
    margin = rhs.value - lhs.value
    evidence = _ladder_evidence(fits)
    evidence.update(pressure_evidence(sys, omega, root))
    return VerificationReport(
        "theorem1", system_inputs(sys, anchors=list(anchors), depth=depth), lhs, rhs, margin,
        _verdict(margin, tolerance + rhs.uncertainty), tolerance, evidence,
        metadata=_metadata(slopes=[f.slope for f in fits], stderrs=[f.stderr for f in fits]))


def check_box_constancy(sys: SkewSystem, anchors: Sequence[float], depth: int,
                        ladder: Optional[Sequence[float]] = None) -> VerificationReport:
    """Spread of slice slopes across at least five anchors."""
    if len(anchors) < 5:
        raise ValueError("box-constancy check needs at least 5 anchors")
    fits = slice_slopes(sys, anchors, depth, ladder)
    slopes = np.array([f.slope for f in fits])
    pooled = float(math.sqrt(np.mean([f.stderr ** 2 for f in fits])))
    spread = float(slopes.max() - slopes.min())
    allowed = 2.0 * pooled + CONSTANCY_MARGIN
    lhs = Quantity(spread, 0.0, "regression", {"depth": depth, "statistic": "max pairwise slope difference"})
    rhs = Quantity(allowed, 0.0, "regression", {"pooled_stderr": pooled, "margin": CONSTANCY_MARGIN})
    margin = allowed - spread
    return VerificationReport(
        "prop_box_constancy", system_inputs(sys, anchors=list(anchors), depth=depth), lhs, rhs, margin,
        _verdict(margin, 0.0), CONSTANCY_MARGIN, _ladder_evidence(fits),
        metadata=_metadata(slopes=slopes.tolist()))


def _density_report(claim, sys, depth, counts, value, anchors, fits, applicable, reason, extra):
    fraction = float(np.mean(counts == value))
    lhs = Quantity(DENSITY_THRESHOLD, 0.0, "sampled_fraction", {"threshold": True})
    rhs = Quantity(fraction, 0.0, "sampled_fraction",
                   {"depth": depth, "samples": int(len(counts)), "delta_value": int(value)})
    margin = fraction - DENSITY_THRESHOLD
    verdict = _verdict(margin, 0.0) if applicable else "inconclusive"
    meta = _metadata(applicable=applicable, reason=reason,
                     delta_histogram={str(int(k)): int(v) for k, v in zip(*np.unique(counts, return_counts=True))},
                     slopes=[f.slope for f in fits], **extra)
    return VerificationReport(
        claim, system_inputs(sys, depth=depth, anchors=list(anchors), sample_size=int(len(counts))),
        lhs, rhs, margin, verdict, DENSITY_THRESHOLD, _ladder_evidence(fits), metadata=meta)


def check_injectivity_criterion(sys: SkewSystem, depth: int, sample_size: int, rng,
                                anchors: Optional[Sequence[float]] = None,
                                ladder: Optional[Sequence[float]] = None,
                                applicability_tol: float = ANALYTIC_MARGIN) -> VerificationReport:
    """Fraction of sampled points with exactly one preimage, when the slope reaches ``t_1``.

    The criterion applies only when the measured slope is within
    ``applicability_tol`` of the ``omega = 1`` root; otherwise the report is
    inconclusive (not applicable). Applicability uses the worst anchor.
    """
    anchors = _anchors(sys, anchors, rng, count=3)
    fits = slice_slopes(sys, anchors, depth, ladder)
    t1 = bowen_root(sys, 1.0).t
    gap = max(abs(f.slope - t1) for f in fits)
    applicable = gap <= applicability_tol
    _, counts = sample_multiplicities(sys, depth, sample_size, rng)
    reason = "slope reaches t_1" if applicable else f"slope differs from t_1 by {gap:.4f} > {applicability_tol}"
    return _density_report("cor_inj", sys, depth, counts, 1, anchors, fits, applicable, reason,
                           {"t1": t1, "slope_gap": gap})


def check_locally_constant(sys: SkewSystem, depth: int, sample_size: int, rng,
                           anchors: Optional[Sequence[float]] = None,
                           ladder: Optional[Sequence[float]] = None,
                           tolerance: float = GEOMETRIC_MARGIN) -> VerificationReport:
    """Slope against ``t_Delta`` when the sampled multiplicity is constant per symbol.

    ``margin = t_Delta - slope``; the claim is an equality, so the verdict is
    pass iff ``|margin| <= tolerance``. When some symbol region shows more
    than one multiplicity the premise fails and the report is inconclusive.
    """
    anchors = _anchors(sys, anchors, rng)
    pts, counts = sample_multiplicities(sys, depth, sample_size, rng)
    symbols = sys.symbol_of(pts[:, 0])
    table = np.ones(sys.alphabet_size)
    constant = True
    for k in range(sys.alphabet_size):
        vals = np.unique(counts[symbols == k])
        if len(vals) > 1:
            constant = False
        if len(vals) >= 1:
            table[k] = vals.min()
    fits = slice_slopes(sys, anchors, depth, ladder)
    slope = float(np.mean([f.slope for f in fits]))
    stderr = float(math.sqrt(np.mean([f.stderr ** 2 for f in fits])))
    root = bowen_root(sys, table.tolist())
    lhs = Quantity(slope, stderr, "regression", {"depth": depth, "anchors": len(fits)})
    rhs = _root_quantity(sys, root, table.tolist())
    margin = rhs.value - lhs.value
    verdict = ("pass" if abs(margin) <= tolerance + rhs.uncertainty else "fail") if constant else "inconclusive"
    evidence = _ladder_evidence(fits)
    evidence.update(pressure_evidence(sys, table.tolist(), root))
    return VerificationReport(
        "cor_locconst", system_inputs(sys, depth=depth, anchors=list(anchors), sample_size=sample_size),
        lhs, rhs, margin, verdict, tolerance, evidence,
        metadata=_metadata(delta_table=table.tolist(), delta_constant_per_symbol=constant,
                           slopes=[f.slope for f in fits]))


def check_max_density(sys: SkewSystem, depth: int, sample_size: int, rng,
                      anchors: Optional[Sequence[float]] = None,
                      ladder: Optional[Sequence[float]] = None,
                      reach_tol: float = ANALYTIC_MARGIN) -> VerificationReport:
    """Density of the minimal multiplicity ``d`` when the slope reaches ``t_d``.

    The predicate is vacuous (report inconclusive) unless every anchor's
    slope is within ``reach_tol`` of ``t_d``. When it applies, the verdict
    needs both the sampled fraction with ``Delta = d`` at least 0.95 and a
    slope spread across anchors of at most 0.05.
    """
    anchors = _anchors(sys, anchors, rng, count=3)
    _, counts = sample_multiplicities(sys, depth, sample_size, rng)
    d = int(counts.min())
    td = bowen_root(sys, float(d)).t
    fits = slice_slopes(sys, anchors, depth, ladder)
    slopes = np.array([f.slope for f in fits])
    gap = float(np.max(np.abs(slopes - td)))
    applicable = gap <= reach_tol
    spread = float(slopes.max() - slopes.min())
    reason = "slope reaches t_d" if applicable else f"slope differs from t_d by {gap:.4f} > {reach_tol}"
    report = _density_report("prop_max_density", sys, depth, counts, d, anchors, fits, applicable, reason,
                             {"t_d": td, "d": d, "slope_spread": spread, "slope_gap": gap})
    if applicable and spread > CONSTANCY_MARGIN:
        report.verdict = "fail"
    return report
