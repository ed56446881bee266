"""Command-line frontend: ``interlink <command> [flags]``.

Every command prints one JSON document (or writes it to ``--out``) holding
the result, the effective configuration under ``"config"``, the theorem
anchors it relies on under ``"basis"``, and a timestamp. Exit codes: 0 ok,
2 bad arguments, 3 domain error, 4 inconclusive verification.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bounds import SPHERES, ZERO_SECTION, QuadrupleSpec, bound_report, cotangent_bounds
from .dynamics import INCONCLUSIVE, SearchConfig, chord_search, default_search, verify_interlinking
from .errors import ArgumentError, DomainError
from .hamiltonians import parse_hamiltonian
from .manifolds import FlatTorus, RoundSphere, spectrum_to_json
from .pbopt import (
    FiberRamp,
    OptimizerConfig,
    RadialRamp,
    critical_tau,
    deformed_form,
    estimate_pb_upper,
    pfaffian,
    poisson_bracket,
    random_smooth_function,
    verify_degeneracy_identity,
    wedge_identity_residual,
)
from .wfh import wfh_barcode

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_INCONCLUSIVE = 0, 2, 3, 4

BASIS = {
    "distance": ["Theorem6.1"],
    "spectrum": ["Theorem6.2"],
    "barcode": ["Theorem6.2", "StructureTheorem"],
    "bounds": ["TheoremB", "Theorem6.1", "Theorem1.11"],
    "chords": ["TheoremA"],
    "verify": ["TheoremA", "TheoremB", "Theorem6.1", "Theorem1.11"],
    "pb-estimate": ["Definition1.2", "Claim5.1", "Theorem6.1"],
    "identity-check": ["Lemma5.1"],
}


# ---------------------------------------------------------------------------
# parsing helpers


def _floats(text: str) -> list[float]:
    parts = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not parts:
        raise ArgumentError(f"expected numbers, got {text!r}")
    try:
        return [float(t) for t in parts]
    except ValueError as exc:
        raise ArgumentError(f"bad number in {text!r}") from exc


def parse_metric(text: str | None, n: int) -> np.ndarray:
    """``"2"``, ``"2,0.5;0.5,1"``, row-major ``"2,0.5,0.5,1"`` or a JSON nested list."""
    if text is None:
        return np.eye(n)
    text = text.strip()
    if text.startswith("["):
        try:
            G = np.atleast_2d(np.asarray(json.loads(text), dtype=float))
        except (ValueError, TypeError) as exc:
            raise ArgumentError(f"bad metric {text!r}") from exc
    else:
        G = np.array([_floats(row) for row in text.split(";")])
    if G.shape == (1, 1) and n > 1:
        G = G[0, 0] * np.eye(n)
    elif G.shape == (1, n * n):
        G = G.reshape(n, n)
    if G.shape != (n, n):
        raise ArgumentError(f"metric must be {n}x{n}, got shape {G.shape}")
    return G


def build_manifold(args):
    name = args.manifold.lower()
    if name == "s2":
        if args.metric is not None:
            raise ArgumentError("--metric applies to tori only")
        return RoundSphere(args.radius)
    m = re.fullmatch(r"t(\d+)", name)
    if not m or int(m.group(1)) < 1:
        raise ArgumentError(f"unknown manifold {args.manifold!r}; use t1, t2, ... or s2")
    n = int(m.group(1))
    return FlatTorus(parse_metric(args.metric, n))


def build_points(args, M):
    if isinstance(M, RoundSphere) and args.theta is not None:
        return M.point_at_angle(args.theta)
    if args.x is None or args.y is None:
        raise ArgumentError("both --x and --y are required" + (" (or --theta)" if isinstance(M, RoundSphere) else ""))
    x, y = np.array(_floats(args.x)), np.array(_floats(args.y))
    dim = 3 if isinstance(M, RoundSphere) else M.n
    if x.size != dim or y.size != dim:
        raise ArgumentError(f"points must have {dim} coordinates")
    return x, y


def build_quadruple(args, M, x, y) -> QuadrupleSpec:
    if args.a is None:
        raise ArgumentError("--a is required")
    if args.variant == SPHERES and args.b is None:
        raise ArgumentError("--b is required for the spheres variant")
    return QuadrupleSpec(M, tuple(x), tuple(y), args.a, args.b if args.variant == SPHERES else None, args.variant)


def build_search(args, base: SearchConfig) -> SearchConfig:
    return SearchConfig(
        r_max=args.rmax if args.rmax is not None else base.r_max,
        n_radii=args.n_radii,
        n_directions=args.n_directions,
        tol_q=args.tol_q,
        threads=args.threads,
    )


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``/``-inf``/``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def canonical_json(doc: dict) -> str:
    """Serialization used for reproducibility comparisons (timestamp removed)."""
    doc = {k: v for k, v in doc.items() if k != "timestamp"}
    return json.dumps(to_jsonable(doc), sort_keys=True, separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# commands


def cmd_distance(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    return {"d": M.distance(x, y), "manifold": M.to_dict()}


def cmd_spectrum(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    _need(args, "cutoff")
    records = M.geodesic_spectrum(x, y, args.cutoff)
    return {"manifold": M.to_dict(), "cutoff": args.cutoff, "geodesics": spectrum_to_json(records)}


def cmd_barcode(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    _need(args, "cutoff")
    out = wfh_barcode(M, x, y, args.cutoff).to_dict()
    out["manifold"] = M.to_dict()
    return out


def cmd_bounds(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    quad = build_quadruple(args, M, x, y)
    out = bound_report(quad).to_dict()
    if quad.variant == SPHERES:
        pb_shell, pb_core = cotangent_bounds(M, x, y, quad.a, quad.b)
        out["cotangent_bounds"] = {"spheres": pb_shell, "zero_section": pb_core}
    return out


def _hamiltonian(args, M):
    if not isinstance(M, FlatTorus):
        raise ArgumentError("Hamiltonian dynamics is implemented on flat tori only")
    if args.ham is None:
        raise ArgumentError("--ham is required")
    return parse_hamiltonian(args.ham, M.metric)


def cmd_chords(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    H = _hamiltonian(args, M)
    _need(args, "tmax")
    result = chord_search(H, x, y, args.tmax, build_search(args, SearchConfig()))
    if args.csv and result.trajectory is not None:
        result.trajectory.write_csv(args.csv)
    return {
        "hamiltonian": H.to_dict(),
        "T_max": args.tmax,
        "chord": None if result.chord is None else result.chord.to_dict(),
        "search_stats": result.stats,
    }


def cmd_verify(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    H = _hamiltonian(args, M)
    quad = build_quadruple(args, M, x, y)
    search = build_search(args, default_search(H, quad))
    report = verify_interlinking(H, quad, search, margin=args.margin, tol_t=args.tol_t, samples=args.samples)
    out = report.to_dict()
    out.pop("basis", None)
    return out, (EXIT_INCONCLUSIVE if report.verdict == INCONCLUSIVE else EXIT_OK)


def cmd_pb_estimate(args):
    M = build_manifold(args)
    x, y = build_points(args, M)
    quad = build_quadruple(args, M, x, y)
    cfg = OptimizerConfig(restarts=args.restarts, max_evals=args.max_evals, seed=args.seed, threads=args.threads)
    out = estimate_pb_upper(quad, cfg).to_dict()
    out["optimizer"] = cfg.to_dict()
    return out


def identity_check(seed: int, draws: int) -> dict:
    """Residuals of the deformed-form identities on random smooth functions."""
    rng = np.random.default_rng(seed)
    pf_max = wedge_max = 0.0
    for i in range(draws):
        n = 1 + i % 2
        F, G = random_smooth_function(rng, n), random_smooth_function(rng, n)
        q, p = rng.uniform(0, 1, n), rng.normal(size=n)
        tau = float(rng.uniform(-1.0, 1.0))
        pf_max = max(pf_max, verify_degeneracy_identity(F, G, tau, q, p))
        wedge_max = max(wedge_max, wedge_identity_residual(F, G, q, p))
    # constructed example: ramps at the point where their bracket peaks
    degeneracy = []
    for x, y, a, b, weights in ((0.0, 0.3, 1.0, 2.0, np.ones(8)), (0.2, 0.9, 0.5, 1.5, [1, 3, 2, 0.5, 1, 4])):
        F = FiberRamp(x, y, weights)
        G = RadialRamp(a, b, weights)
        u_star, f_peak = F.rise.argmax_slope()
        r_star, g_peak = G.ramp.argmax_slope()
        # the rise is steeper than the fall, so this is the global peak;
        # p takes the sign making the bracket positive
        q_star = x + F.orientation * u_star
        p_star = F.orientation * r_star
        qv, pv = np.array([q_star]), np.array([p_star])
        peak = float(poisson_bracket(F, G, qv, pv))
        predicted = 1.0 / (f_peak * g_peak)
        found = critical_tau(F, G, qv, pv)
        degeneracy.append({
            "point": [q_star, p_star],
            "max_bracket": f_peak * g_peak,
            "bracket_at_point": peak,
            "predicted_tau": predicted,
            "found_tau": found,
            "pfaffian_at_predicted": pfaffian(deformed_form(F, G, predicted, qv, pv)),
        })
    return {
        "seed": seed,
        "draws": draws,
        "max_pfaffian_residual": pf_max,
        "max_wedge_residual": wedge_max,
        "degeneracy": degeneracy,
    }


def cmd_identity_check(args):
    return identity_check(args.seed, args.draws)


COMMANDS = {
    "distance": cmd_distance,
    "spectrum": cmd_spectrum,
    "barcode": cmd_barcode,
    "bounds": cmd_bounds,
    "chords": cmd_chords,
    "verify": cmd_verify,
    "pb-estimate": cmd_pb_estimate,
    "identity-check": cmd_identity_check,
}


def _need(args, name):
    if getattr(args, name) is None:
        raise ArgumentError(f"--{name} is required for {args.command}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("geometry")
    g.add_argument("--manifold", default="t1", help="t1, t2, ... (flat torus) or s2 (round sphere)")
    g.add_argument("--metric", help='torus metric: "2", "2,0.5;0.5,1", "2,0.5,0.5,1" or a JSON matrix')
    g.add_argument("--radius", type=float, default=1.0, help="sphere radius")
    g.add_argument("--x", help="base point, comma separated")
    g.add_argument("--y", help="target point, comma separated")
    g.add_argument("--theta", type=float, help="s2 only: x = north pole, y at this polar angle")
    g.add_argument("--cutoff", type=float)
    g.add_argument("--a", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--variant", choices=[SPHERES, ZERO_SECTION], default=SPHERES)
    d = common.add_argument_group("dynamics")
    d.add_argument("--ham", help='Hamiltonian, e.g. "radial:r^2" or a JSON object')
    d.add_argument("--tmax", type=float)
    d.add_argument("--rmax", type=float)
    d.add_argument("--n-radii", type=int, default=48)
    d.add_argument("--n-directions", type=int, default=48)
    d.add_argument("--tol-q", type=float, default=1e-7)
    d.add_argument("--margin", type=float, default=0.05)
    d.add_argument("--tol-t", type=float, default=1e-2)
    d.add_argument("--samples", type=int, default=4096)
    d.add_argument("--csv", help="write the best chord trajectory as CSV")
    o = common.add_argument_group("optimizer")
    o.add_argument("--restarts", type=int, default=4)
    o.add_argument("--max-evals", type=int, default=3000)
    o.add_argument("--draws", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--threads", type=int)
    common.add_argument("--out", help="write JSON here instead of stdout")

    parser = _Parser(prog="interlink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"interlink {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv=None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except ArgumentError as exc:
        print(f"interlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = COMMANDS[args.command](args)
        code = EXIT_OK
        if isinstance(result, tuple):
            result, code = result
    except ArgumentError as exc:
        print(f"interlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"interlink: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    config = {k: v for k, v in sorted(vars(args).items())}
    doc = {"command": args.command, **result, "config": config, "basis": BASIS[args.command],
           "timestamp": datetime.now(timezone.utc).isoformat()}
    text = json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
