"""Command-line front end: ``bowen-dim <subcommand> [flags]``.

Exit codes: 0 on success, 1 when a verification report fails, 2 on any
configuration, budget or output error. Every sampling step draws from a
generator keyed by ``(seed, module, operation index)``, so a run is
reproducible from its config and seed alone. ``BOWEN_DIM_THREADS`` caps the
number of worker processes used by ``verify --claim all``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config, load_omega, merge_overrides, parse_floats
from .errors import BowenDimError
from .geometry import box_dimension, default_ladder, stable_slice_approx, surviving_anchors
from .preimage import (OmegaMinorant, build_omega_minorant, count_preimages, preimage_mass_identity,
                       sample_points, select_modulus, usc_statistic)
from .pressure import PressureCurve, bowen_root, cylinder_orbits, epsilon_pressure, pressure_partition_sum
from .report import emit_report, emit_result, summary_line
from .symbolic import PotentialSpec
from .verify import (ANALYTIC_MARGIN, GEOMETRIC_MARGIN, LADDER_HEADER, PRESSURE_HEADER, check_box_constancy,
                     check_injectivity_criterion, check_locally_constant, check_max_density, check_upper_bound)

CLAIMS = ("theorem1", "prop_box_constancy", "cor_inj", "cor_locconst", "prop_max_density")
MODULUS_CANDIDATES = tuple([0.0] + [10.0 ** (k / 2) for k in range(-12, 7)])


def make_rng(seed: int, module: str, op_index: int = 0) -> np.random.Generator:
    """Generator keyed by ``(seed, module, op_index)``; stable across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(module.encode()), int(op_index)]))


def worker_count(jobs: int) -> int:
    cap = os.environ.get("BOWEN_DIM_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError as exc:
            raise ConfigError(f"BOWEN_DIM_THREADS must be a positive integer, got {cap!r}") from exc
    return max(1, min(jobs, limit))


# --- argument parsing ------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run")
    g.add_argument("--config", help="INI file; flags override its values")
    g.add_argument("--system", choices=("example1", "example2", "ifs"))
    g.add_argument("--depth", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--sample-size", dest="sample_size", type=int)
    g.add_argument("--anchors", type=int, help="number of random surviving anchors")
    g.add_argument("--epsilon-ladder", dest="epsilon_ladder", help="comma-separated decreasing scales")
    g.add_argument("--omega", help="number, per-symbol table, 'minorant' or a minorant JSON file")
    g.add_argument("--word-budget", dest="word_budget", type=int)
    g.add_argument("--grid-budget", dest="grid_budget", type=int)
    g.add_argument("--image-budget", dest="image_budget", type=int)
    s = p.add_argument_group("system parameters")
    s.add_argument("--ratios")
    s.add_argument("--offsets")
    s.add_argument("--alpha", type=float)
    s.add_argument("--s", dest="s_values", metavar="S")
    s.add_argument("--eps0", type=float)
    s.add_argument("--m", type=int)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--tau", help="flattened (m, 2) translations")
    s.add_argument("--z-coupling", dest="z_coupling", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="bowen-dim", description="Stable-slice dimension estimates")
    sub = parser.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("pressure", parents=[common], help="pressure of t*Phi^s - log omega")
    pr.add_argument("--t", type=float, default=1.0)
    sub.add_parser("root", parents=[common], help="Bowen root t_omega")
    bd = sub.add_parser("boxdim", parents=[common], help="box-counting slope of stable slices")
    bd.add_argument("--anchor", type=float, action="append", help="base anchor (repeatable)")
    sub.add_parser("preimages", parents=[common], help="sampled preimage counts and minorant")
    ve = sub.add_parser("verify", parents=[common], help="run verification claims")
    ve.add_argument("--claim", choices=CLAIMS + ("all",), default="theorem1")
    sub.add_parser("report", parents=[common], help="rebuild summary.txt from report files")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    ladder = None
    if args.epsilon_ladder is not None:
        ladder = parse_floats(args.epsilon_ladder)
    overrides = dict(system=args.system, depth=args.depth, seed=args.seed, output_dir=args.output_dir,
                     sample_size=args.sample_size, anchors=args.anchors, epsilon_ladder=ladder,
                     omega=args.omega, word_budget=args.word_budget, grid_budget=args.grid_budget,
                     image_budget=args.image_budget)
    params = dict(ratios=args.ratios, offsets=args.offsets, alpha=args.alpha, s=args.s_values,
                  eps0=args.eps0, m=args.m, z_coupling=args.z_coupling, tau=args.tau)
    params["lambda"] = args.lam
    return merge_overrides(cfg, overrides, params)


# --- pipeline pieces -------------------------------------------------------

def resolve_omega(cfg: RunConfig, system):
    """The omega object for bowen_root plus a JSON-friendly description."""
    kind, value = load_omega(cfg.omega)
    if kind in ("constant", "table"):
        return value, value
    if kind == "file":
        if "breakpoints" not in value:
            raise ConfigError("omega file must hold a serialized minorant (breakpoints, values, lipschitz)")
        om = OmegaMinorant.from_dict(value)
        return om, om.to_dict()
    om = sampled_minorant(cfg, system)[0]
    return om, om.to_dict()


def sampled_minorant(cfg: RunConfig, system):
    """Minorant from a construction sample, modulus chosen on a held-out sample."""
    pts = sample_points(system, cfg.depth, cfg.sample_size, make_rng(cfg.seed, "preimage", 0))
    counts = [count_preimages(system, p, cfg.depth).count for p in pts]
    vpts = sample_points(system, cfg.depth, cfg.sample_size, make_rng(cfg.seed, "preimage", 1))
    vcounts = [count_preimages(system, p, cfg.depth).count for p in vpts]
    samples = list(zip(pts, counts))
    modulus = select_modulus(samples, list(zip(vpts, vcounts)), MODULUS_CANDIDATES)
    return build_omega_minorant(samples, modulus), pts, np.array(counts), modulus


def anchors_for(cfg: RunConfig, system, count: Optional[int] = None) -> List[float]:
    return surviving_anchors(system, count or cfg.anchors, make_rng(cfg.seed, "geometry", 0))


def ladder_for(cfg: RunConfig, system) -> List[float]:
    return cfg.epsilon_ladder if cfg.epsilon_ladder is not None else default_ladder(system, cfg.depth)


def run_claim(cfg: RunConfig, claim: str):
    system = cfg.validate()
    ladder = ladder_for(cfg, system)
    rng = make_rng(cfg.seed, "verify", CLAIMS.index(claim))
    if claim == "theorem1":
        omega, _ = resolve_omega(cfg, system)
        tol = ANALYTIC_MARGIN if cfg.system == "ifs" else GEOMETRIC_MARGIN
        return check_upper_bound(system, anchors_for(cfg, system), cfg.depth, ladder, omega, tol)
    if claim == "prop_box_constancy":
        return check_box_constancy(system, anchors_for(cfg, system, max(cfg.anchors, 5)), cfg.depth, ladder)
    anchors = anchors_for(cfg, system, 3)
    if claim == "cor_inj":
        return check_injectivity_criterion(system, cfg.depth, cfg.sample_size, rng, anchors, ladder)
    if claim == "cor_locconst":
        return check_locally_constant(system, cfg.depth, cfg.sample_size, rng, anchors, ladder)
    return check_max_density(system, cfg.depth, cfg.sample_size, rng, anchors, ladder)


def _curve_rows(system, omega, t_max: float, depth: int, points: int = 21):
    curve = PressureCurve(system, omega, depth=depth)
    return [(float(t), float(curve(t))) for t in np.linspace(0.0, t_max, points)]


# --- subcommands -----------------------------------------------------------

def cmd_pressure(cfg: RunConfig, system, args) -> int:
    omega, desc = resolve_omega(cfg, system)
    curve = PressureCurve(system, omega, depth=cfg.depth, budget=cfg.word_budget)
    phi = system.stable_potential.scaled(args.t)
    if callable(omega):
        log_om = PotentialSpec(lambda s, p: np.log(omega(p)), None, omega.lipschitz, "log_omega")
    else:
        table = np.full(system.alphabet_size, float(omega)) if np.isscalar(omega) else np.asarray(omega, float)
        log_om = PotentialSpec.from_table(np.log(table), "log_omega")
    psi = phi.plus(log_om.scaled(-1.0))
    orbits = cylinder_orbits(system, cfg.depth, cfg.word_budget)
    part = pressure_partition_sum(system, psi, cfg.depth, orbits=orbits)
    ladder = ladder_for(cfg, system)
    eps_rows = [(float(e), epsilon_pressure(system, psi, cfg.depth, e, grid_budget=cfg.grid_budget, orbits=orbits))
                for e in ladder]
    payload = {
        "command": "pressure", "config": cfg.to_dict(), "t": args.t, "omega": desc,
        "pressure": {"value": curve(args.t), "method": curve.method, "depth": curve.depth},
        "partition_sum": {"value": part.value, "method": part.method, "depth": part.depth,
                          "variation_bound": part.variation_bound},
        "epsilon_pressure": [{"epsilon": e, "value": v, "method": "epsilon_grid", "depth": cfg.depth}
                             for e, v in eps_rows],
    }
    emit_result("pressure", payload, {"curve": (PRESSURE_HEADER, _curve_rows(system, omega, 2.0, cfg.depth))},
                cfg.output_dir)
    print(f"P = {curve(args.t):.12f} ({curve.method})")
    print(f"partition sum at depth {cfg.depth}: {part.value:.12f} (variation bound {part.variation_bound:.3g})")
    return 0


def cmd_root(cfg: RunConfig, system, args) -> int:
    omega, desc = resolve_omega(cfg, system)
    root = bowen_root(system, omega, depth=cfg.depth, budget=cfg.word_budget)
    payload = {"command": "root", "config": cfg.to_dict(), "omega": desc,
               "t": root.t, "residual": root.residual, "bracket": list(root.bracket),
               "bracket_pressures": list(root.bracket_pressures), "clamped": root.clamped,
               "method": root.method, "depth": root.depth, "variation_bound": root.variation_bound}
    rows = _curve_rows(system, omega, max(2.0 * root.t, 1.0), max(cfg.depth, 2))
    emit_result("root", payload, {"curve": (PRESSURE_HEADER, rows)}, cfg.output_dir)
    print(f"t = {root.t:.9f}")
    return 0


def cmd_boxdim(cfg: RunConfig, system, args) -> int:
    anchors = args.anchor if args.anchor else anchors_for(cfg, system)
    ladder = ladder_for(cfg, system)
    evidence, results = {}, []
    for i, a in enumerate(anchors):
        fit = box_dimension(stable_slice_approx(system, a, cfg.depth, cfg.image_budget), ladder)
        evidence[f"ladder_anchor{i}"] = (LADDER_HEADER, fit.rows())
        results.append({"anchor": a, "slope": fit.slope, "stderr": fit.stderr, "method": fit.method,
                        "depth": cfg.depth, "epsilons": list(ladder)})
        print(f"anchor {a:.12g}: slope = {fit.slope:.6f} +- {fit.stderr:.6f}")
    emit_result("boxdim", {"command": "boxdim", "config": cfg.to_dict(), "anchors": results}, evidence,
                cfg.output_dir)
    return 0


def cmd_preimages(cfg: RunConfig, system, args) -> int:
    om, pts, counts, modulus = sampled_minorant(cfg, system)
    residual = max(preimage_mass_identity(system, p, cfg.depth) for p in pts[: min(len(pts), 50)])
    values, freq = np.unique(counts, return_counts=True)
    hist = {str(int(v)): int(f) for v, f in zip(values, freq)}
    h = 4.0 * system.sup_contraction ** cfg.depth
    payload = {"command": "preimages", "config": cfg.to_dict(), "depth": cfg.depth,
               "tolerance": system.sup_contraction ** cfg.depth, "histogram": hist,
               "usc_fraction": usc_statistic(pts, counts, max(h, 1e-3)),
               "mass_identity_max_residual": residual, "minorant": om.to_dict(), "modulus": modulus}
    header = ("x",) + tuple(f"y{j + 1}" for j in range(system.fiber_dimension)) + ("delta",)
    rows = [tuple(float(v) for v in p) + (int(c),) for p, c in zip(pts, counts)]
    emit_result("preimages", payload, {"samples": (header, rows)}, cfg.output_dir)
    with open(Path(cfg.output_dir) / "minorant.json", "w") as fh:
        json.dump(om.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print("Delta histogram: " + ", ".join(f"{k}: {v}" for k, v in hist.items()))
    print(f"minorant modulus = {modulus:g}, max value = {max(om.values):.6f}")
    return 0


def cmd_verify(cfg: RunConfig, system, args) -> int:
    claims = CLAIMS if args.claim == "all" else (args.claim,)
    workers = worker_count(len(claims))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_claim, [cfg] * len(claims), claims))
    else:
        reports = [run_claim(cfg, c) for c in claims]
    emit_report(reports, cfg.output_dir, run_info=cfg.to_dict())
    for r in reports:
        print(summary_line(r.to_dict()))
    return 1 if any(r.verdict == "fail" for r in reports) else 0


def cmd_report(cfg: RunConfig, system, args) -> int:
    out = Path(cfg.output_dir)
    found = []
    for path in sorted(out.glob("*.json")):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from exc
        if isinstance(d, dict) and "claim" in d and "verdict" in d:
            rank = CLAIMS.index(d["claim"]) if d["claim"] in CLAIMS else len(CLAIMS)
            found.append((rank, path.name, summary_line(d)))
    # same order as a verify run writes them
    lines = [line for _, _, line in sorted(found)]
    if not lines:
        raise ConfigError(f"no claim reports found in {out}")
    with open(out / "summary.txt", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 1 if any(": fail " in line for line in lines) else 0


COMMANDS = {"pressure": cmd_pressure, "root": cmd_root, "boxdim": cmd_boxdim,
            "preimages": cmd_preimages, "verify": cmd_verify, "report": cmd_report}


def run_subcommand(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports unknown flags with exit status 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(args)
        system = cfg.validate()
        return COMMANDS[args.command](cfg, system, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
    except BowenDimError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
    return 2


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))
