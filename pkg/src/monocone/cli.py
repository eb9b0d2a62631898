"""Command-line front end.

Usage: ``monocone <command> <family-file> [options]``.  Map indices and
supports are 1-based on the command line and in every report.

Exit codes: 0 success, 1 usage error, 2 invalid family file, 3 numeric
non-convergence under ``--strict``, 4 budget exceeded under ``--strict``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import __version__, kernels
from .errors import BudgetExceeded, DimensionTooLarge, EvalOverflow, FamilyFormatError
from .expr import classify
from .family import Family, format_family, parse_family
from .inclusion import GreedyMaxNorm, GreedyMinNorm, PeriodicWord, RandomUniform, lyapunov_exponent
from .joint import (
    DEFAULT_BUDGET,
    Stable,
    check_selectable_stability,
    gsr_lower,
    jsr_bounds,
    partial_jsr,
    subradius_bounds,
)
from .norms import barabanov_norm_eval, extremal_norm_eval
from .spectral import cone_spectral_radius
from .structure import (
    PREORDER_CAP,
    boundedness_probe,
    graph_irreducibility,
    invariant_faces,
    is_irreducible,
    is_primitive,
    mask_of,
    part_preorder,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NONCONVERGED = 3
EXIT_BUDGET = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- value conversion --------------------------------------------------------------

def _jsonable(v):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isfinite(f):
            return f
        return "nan" if math.isnan(f) else ("inf" if f > 0 else "-inf")
    if isinstance(v, (set, frozenset)):
        return sorted(_jsonable(x) for x in v)
    return v


def _word_text(family: Family, word) -> str:
    return family.word_names(word)


def _support_1(support) -> list:
    return sorted(int(i) + 1 for i in support)


def _seq(pairs) -> list:
    return [[int(m), float(v)] for m, v in pairs]


def _floats(text: str, what: str) -> list:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _digest(family: Family) -> dict:
    text = format_family(family)
    return {
        "n": family.n,
        "maps": [
            {
                "name": f.name,
                "subadditive_certified": classify(f).subadditive_certified,
                "contains_min": classify(f).contains_min,
                "contains_geo": classify(f).contains_geo,
            }
            for f in family.maps
        ],
        "subadditive_certified": family.subadditive_certified,
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
    }


# -- commands -------------------------------------------------------------------------
# Each returns (result dict, flags dict); flags carry "converged" and "budget_exceeded".


def _cmd_radius(fam: Family, a):
    if a.map is None:
        if len(fam) != 1:
            raise UsageError("--map NAME is required when the family has more than one map")
        k = 0
    else:
        try:
            k = fam.index(a.map)
        except KeyError:
            raise UsageError(f"no map named {a.map!r}; known maps: {', '.join(fam.names)}") from None
    br = cone_spectral_radius(fam.maps[k], tol=a.tol, max_iter=a.max_iter)
    res = {
        "map": fam.maps[k].name,
        "lower": br.lower,
        "upper": br.upper,
        "width": br.width,
        "lower_vector": br.lower_vector,
        "upper_norm_root": br.upper_norm_root,
        "upper_n": br.upper_n,
        "upper_cw": br.upper_cw,
        "iterations_used": br.iterations_used,
    }
    return res, {"converged": br.converged, "budget_exceeded": False}


def _bounds_payload(fam: Family, rep) -> dict:
    return {
        "lower": rep.lower,
        "lower_word": _word_text(fam, rep.lower_word),
        "lower_vector": rep.lower_vector,
        "upper": rep.upper,
        "upper_m": rep.upper_m,
        "upper_word": _word_text(fam, rep.upper_word),
        "alpha_seq": _seq(rep.alpha_raw),
        "alpha_root_seq": _seq(rep.alpha_seq),
        "gamma_seq": _seq(rep.gamma_seq),
        "visited_count": rep.visited_count,
        "pruned_count": rep.pruned_count,
    }


def _gap_closed(lower: float, upper: float, tol: float) -> bool:
    return upper - lower <= tol * max(1.0, upper)


def _cmd_jsr(fam: Family, a):
    try:
        rep = jsr_bounds(fam, a.max_len, a.tol, a.budget)
    except BudgetExceeded as exc:
        return _bounds_payload(fam, exc.partial), {"converged": False, "budget_exceeded": True}
    res = _bounds_payload(fam, rep)
    g_val, g_word, _ = gsr_lower(fam, a.max_len, a.budget)
    res["gsr_lower"] = g_val
    res["gsr_lower_word"] = _word_text(fam, g_word)
    return res, {"converged": _gap_closed(rep.lower, rep.upper, a.tol), "budget_exceeded": False}


def _cmd_partial(fam: Family, a):
    if not a.support:
        raise UsageError("--support is required, for example --support 1,3")
    try:
        idx = [int(t) for t in a.support.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"--support must list 1-based indices, got {a.support!r}") from None
    if not idx or any(not 1 <= i <= fam.n for i in idx):
        raise UsageError(f"--support indices must lie in 1..{fam.n}")
    J = [i - 1 for i in idx]
    try:
        rep = partial_jsr(fam, J, a.max_len, a.tol, a.budget)
        exceeded = False
    except BudgetExceeded as exc:
        rep, exceeded = exc.partial, True
    res = _bounds_payload(fam, rep)
    res["support"] = _support_1(J)
    res["estimate_seq"] = _seq(rep.estimate_seq)
    converged = (not exceeded) and _gap_closed(rep.lower, rep.upper, a.tol)
    return res, {"converged": converged, "budget_exceeded": exceeded}


def _cmd_subradius(fam: Family, a):
    try:
        rep = subradius_bounds(fam, a.max_len, a.budget)
        exceeded = False
    except BudgetExceeded as exc:
        rep, exceeded = exc.partial, True
    res = {
        "r_star_upper": rep.r_star_upper,
        "best_word": _word_text(fam, rep.best_word),
        "beta_seq": _seq(rep.beta_seq),
        "gamma_seq": _seq(rep.gamma_seq),
        "visited_count": rep.visited_count,
        "pruned_count": rep.pruned_count,
    }
    return res, {"converged": True, "budget_exceeded": exceeded}


def _cmd_stability(fam: Family, a):
    try:
        out = check_selectable_stability(fam, a.max_len, a.budget)
        exceeded = False
    except BudgetExceeded as exc:
        out, exceeded = exc.partial, True
    if isinstance(out, Stable):
        res = {"verdict": "Stable", "word": _word_text(fam, out.word), "length": len(out.word), "norm": out.norm}
    else:
        res = {
            "verdict": "Unknown",
            "best_word": _word_text(fam, out.best_word),
            "best_norm_seen": out.best_norm_seen,
        }
    return res, {"converged": True, "budget_exceeded": exceeded}


def _cmd_structure(fam: Family, a):
    irreducible, face = is_irreducible(fam)
    strong, edges = graph_irreducibility(fam)
    primitive, witness = is_primitive(fam)
    res = {
        "irreducible": irreducible,
        "irreducibility_witness": _support_1(face) if face is not None else None,
        "invariant_faces": [_support_1(f) for f in invariant_faces(fam)],
        "graph_strongly_connected": strong,
        "graph_edges": [[i + 1, j + 1] for i, j in edges],
        "primitive": primitive,
        "primitivity_witness": _support_1(witness) if witness is not None else None,
    }
    if fam.n <= PREORDER_CAP:
        po = part_preorder(fam)
        singles = [frozenset([i]) for i in range(fam.n)]
        res["part_preorder_singletons"] = [[bool(po.geq(s, t)) for t in singles] for s in singles]
        res["reachable_from_full"] = sorted(_support_1(
            [i for i in range(fam.n) if (m >> i) & 1]) for m in po.reach(mask_of(range(fam.n))))
    return res, {"converged": True, "budget_exceeded": False}


def _parse_x(fam: Family, text):
    if text is None:
        return np.ones(fam.n)
    x = _floats(text, "--x")
    if len(x) != fam.n:
        raise UsageError(f"--x needs {fam.n} entries, got {len(x)}")
    return np.asarray(x)


def _cmd_norm(fam: Family, a):
    x = _parse_x(fam, a.x)
    try:
        ev = extremal_norm_eval(fam, x, a.level, a.budget)
    except BudgetExceeded:
        return {"x": x, "level": a.level}, {"converged": False, "budget_exceeded": True}
    res = {
        "x": x,
        "level": a.level,
        "value": ev.value,
        "achieving_word": _word_text(fam, ev.achieving_word),
        "level_values": _seq(ev.level_values),
        "diverging": ev.diverging,
    }
    return res, {"converged": not ev.diverging, "budget_exceeded": False}


def _cmd_barabanov(fam: Family, a):
    x = _parse_x(fam, a.x)
    try:
        ev = barabanov_norm_eval(fam, x, a.outer, a.inner, a.budget)
    except BudgetExceeded:
        return {"x": x}, {"converged": False, "budget_exceeded": True}
    res = {
        "x": x,
        "outer": a.outer,
        "inner": a.inner,
        "value": ev.value,
        "achieving_word": _word_text(fam, ev.achieving_word),
        "achieving_map": fam.maps[ev.achieving_map].name if ev.achieving_map is not None else None,
        "map_values": {f.name: v for f, v in zip(fam.maps, ev.map_values)},
        "residual": ev.residual,
        "level_values": _seq(ev.level_values),
        "diverging": ev.diverging,
    }
    return res, {"converged": not ev.diverging, "budget_exceeded": False}


def _parse_policy(fam: Family, text: str, seed: int):
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind == "periodic":
        names = arg.replace(",", " ").split()
        if not names:
            raise UsageError("periodic policy needs map names, for example periodic:g or periodic:f,g")
        try:
            return PeriodicWord(tuple(fam.index(nm) for nm in names))
        except KeyError as exc:
            raise UsageError(f"unknown map {exc.args[0]!r} in policy") from None
    if kind == "random":
        return RandomUniform(int(arg) if arg else seed)
    if kind in ("greedy-max", "greedymax"):
        return GreedyMaxNorm()
    if kind in ("greedy-min", "greedymin"):
        return GreedyMinNorm()
    raise UsageError(f"unknown policy {text!r}; use periodic:NAMES, random[:SEED], greedy-max or greedy-min")


def _cmd_simulate(fam: Family, a):
    if a.steps < 1:
        raise UsageError("--steps must be >= 1")
    policy = _parse_policy(fam, a.policy, a.seed)
    est = lyapunov_exponent(fam, policy, a.steps)
    res = {"policy": a.policy, "steps": a.steps, "estimate": est.estimate, "series": est.series}
    return res, {"converged": True, "budget_exceeded": False}


def _cmd_probe(fam: Family, a):
    if a.depth < 1:
        raise UsageError("--depth must be >= 1")
    try:
        pr = boundedness_probe(fam, a.depth, a.budget)
    except BudgetExceeded:
        return {"depth": a.depth}, {"converged": False, "budget_exceeded": True}
    res = {
        "depth": a.depth,
        "max_norm_per_length": [[m + 1, v] for m, v in enumerate(pr.max_norm_per_length)],
        "growth_classification": pr.growth_classification,
    }
    return res, {"converged": True, "budget_exceeded": False}


COMMANDS = {
    "radius": (_cmd_radius, "bracket the cone spectral radius of one map"),
    "jsr": (_cmd_jsr, "certified bounds on the joint spectral radius"),
    "partial": (_cmd_partial, "joint spectral radius restricted to a part"),
    "subradius": (_cmd_subradius, "upper bound on the joint spectral subradius"),
    "stability": (_cmd_stability, "search for a composition with norm below 1"),
    "structure": (_cmd_structure, "irreducibility, primitivity and the part preorder"),
    "norm": (_cmd_norm, "truncated extremal norm of a vector"),
    "barabanov": (_cmd_barabanov, "truncated Barabanov norm of a vector"),
    "simulate": (_cmd_simulate, "Lyapunov exponent of a switching policy"),
    "probe": (_cmd_probe, "boundedness probe of the semigroup"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--max-len", type=int, default=12, help="longest word length (default 12)")
    g.add_argument("--tol", type=float, default=1e-6, help="convergence tolerance (default 1e-6)")
    g.add_argument("--budget", type=int, default=int(DEFAULT_BUDGET), help="frontier node budget (default 5000000)")
    g.add_argument("--scale", type=float, default=None, help="multiply every map by C > 0 before analysis")
    g.add_argument("--json", action="store_true", help="print one JSON object on stdout")
    g.add_argument("--seed", type=int, default=0, help="seed for randomized policies (default 0)")
    g.add_argument("--strict", action="store_true", help="nonzero exit on non-convergence or budget exhaustion")
    g.add_argument("--threads", type=int, default=0, help="cap on worker threads (default: all cores)")

    parser = _Parser(prog="monocone", description="Spectral analysis of finite families of monotone homogeneous maps.")
    parser.add_argument("--version", action="version", version=f"monocone {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    subs = {}
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.add_argument("file", help="family file")
        subs[name] = sp
    subs["radius"].add_argument("--map", default=None, help="name of the map to analyze")
    subs["radius"].add_argument("--max-iter", type=int, default=10000, help="iteration cap (default 10000)")
    subs["partial"].add_argument("--support", default=None, help="1-based support, e.g. 1,3")
    subs["norm"].add_argument("--x", default=None, help="comma-separated vector (default all ones)")
    subs["norm"].add_argument("--level", type=int, default=8, help="truncation level (default 8)")
    subs["barabanov"].add_argument("--x", default=None, help="comma-separated vector (default all ones)")
    subs["barabanov"].add_argument("--outer", type=int, default=6)
    subs["barabanov"].add_argument("--inner", type=int, default=6)
    subs["simulate"].add_argument("--policy", default="greedy-min",
                                  help="periodic:NAMES, random[:SEED], greedy-max or greedy-min")
    subs["simulate"].add_argument("--steps", type=int, default=200)
    subs["probe"].add_argument("--depth", type=int, default=12)
    return parser


# -- output ---------------------------------------------------------------------------

def _human(report: dict) -> str:
    lines = [f"{report['command']} {report['file']}"]
    fam = report["family"]
    lines.append(f"family: n={fam['n']} maps={','.join(m['name'] for m in fam['maps'])} "
                 f"subadditive_certified={fam['subadditive_certified']}")
    for key, val in report["result"].items():
        if isinstance(val, list) and len(val) > 20:
            lines.append(f"{key}: [{len(val)} entries, see --json]")
        else:
            lines.append(f"{key}: {val}")
    fl = report["flags"]
    lines.append(f"converged: {fl['converged']}  budget_exceeded: {fl['budget_exceeded']}")
    lines.append(f"wall_time_s: {report['wall_time_s']:.3f}")
    return "\n".join(lines)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help and --version
            return int(exc.code or 0)
        if args.max_len < 1 or args.budget < 1 or not args.tol > 0:
            raise UsageError("--max-len and --budget must be positive and --tol must be > 0")
        if args.scale is not None and not (math.isfinite(args.scale) and args.scale > 0):
            raise UsageError("--scale must be a finite positive number")
        try:
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None
    except UsageError as exc:
        print(str(exc), file=stderr)
        return EXIT_USAGE

    try:
        fam = parse_family(text)
    except FamilyFormatError as exc:
        print(f"{args.file}:{exc.line}:{exc.column}: {exc.message}", file=stderr)
        return EXIT_PARSE
    if args.scale is not None:
        fam = fam.scaled(args.scale)
    if args.threads > 0:
        kernels.set_threads(args.threads)

    t0 = time.perf_counter()
    try:
        result, flags = COMMANDS[args.command][0](fam, args)
    except UsageError as exc:
        print(f"monocone {args.command}: error: {exc}", file=stderr)
        return EXIT_USAGE
    except (DimensionTooLarge, EvalOverflow) as exc:
        print(f"monocone {args.command}: {exc}", file=stderr)
        return EXIT_USAGE
    wall = time.perf_counter() - t0

    report = {
        "command": args.command,
        "argv": argv,
        "file": args.file,
        "family": _digest(fam),
        "options": {
            "max_len": args.max_len,
            "tol": args.tol,
            "budget": args.budget,
            "scale": args.scale,
            "seed": args.seed,
            "strict": args.strict,
        },
        "result": result,
        "flags": flags,
        "wall_time_s": wall,
    }
    report = _jsonable(report)
    if args.json:
        print(json.dumps(report), file=stdout)
        print(_human(report), file=stderr)
    else:
        print(_human(report), file=stdout)

    if args.strict:
        if flags["budget_exceeded"]:
            return EXIT_BUDGET
        if not flags["converged"]:
            return EXIT_NONCONVERGED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
