"""Command-line entry point: verify, audit, solve, simulate, dump.

Every command first builds one versioned JSON document (config snapshot,
scenario digests, results).  ``--format json`` prints that document; the
text format is rendered from it, so no number appears only in text.

Exit codes: 0 success, 1 condition failure or infeasibility, 2 internal or
usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, audit, dump, simulate, solver
from . import scenario as sc
from .linalg import DEFAULT_TOL, ContractError, Operator, ToleranceConfig
from .spin import SPIN_7_2, SpinSubset, m_label

SCHEMA = "tripledetect.report/1"
VARIANTS = ("literal", "repaired", "both")

# Environment overrides; explicit flags take precedence.
ENV_TOLERANCES = {
    "abs_tol": "TRIPLEDETECT_ABS_TOL",
    "rel_tol": "TRIPLEDETECT_REL_TOL",
    "audit_warn_tol": "TRIPLEDETECT_WARN_TOL",
}

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def resolve_tolerances(
    abs_tol: float | None = None,
    rel_tol: float | None = None,
    warn_tol: float | None = None,
    env: dict[str, str] | None = None,
) -> ToleranceConfig:
    """Defaults, then environment, then flags.

    A loose ``abs_tol`` above the default warn threshold raises that
    threshold to match unless the threshold was set explicitly.
    """
    env = os.environ if env is None else env
    vals = DEFAULT_TOL.as_dict()
    explicit_warn = False
    for key, name in ENV_TOLERANCES.items():
        if name in env:
            try:
                vals[key] = float(env[name])
            except ValueError:
                raise UsageError(f"{name}={env[name]!r} is not a number") from None
            explicit_warn |= key == "audit_warn_tol"
    for key, flag in (("abs_tol", abs_tol), ("rel_tol", rel_tol), ("audit_warn_tol", warn_tol)):
        if flag is not None:
            vals[key] = flag
            explicit_warn |= key == "audit_warn_tol"
    if vals["abs_tol"] > vals["audit_warn_tol"] and not explicit_warn:
        vals["audit_warn_tol"] = vals["abs_tol"]
    try:
        return ToleranceConfig(**vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def digest(A: Operator | np.ndarray) -> str:
    data = A.data if isinstance(A, Operator) else A
    arr = np.round(np.asarray(data, dtype=complex), 12) + 0.0
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


def scenario_digests(s: sc.PaperScenario) -> dict[str, str]:
    return {name: digest(getattr(s, name))
            for name in ("E_I", "G_I", "L_I", "T_II", "Y_II", "W_II")} | {
        "psi": digest(s.psi.data)}


def _variants(v: str) -> list[str]:
    return ["literal", "repaired"] if v == "both" else [v]


def _scenarios(variant: str, tol: ToleranceConfig) -> dict[str, sc.PaperScenario]:
    lit = sc.literal_scenario(tol)
    out = {}
    for v in _variants(variant):
        out[v] = lit if v == "literal" else solver.repair_scenario(lit, tol)
    return out


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, str, int)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(obj) + 0.0
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return str(obj)


def encode(doc: dict) -> str:
    return json.dumps(_to_jsonable(doc), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _document(args, tol: ToleranceConfig, results: dict, digests: dict) -> dict:
    config = {
        "command": args.command,
        "variant": args.variant,
        "tolerances": tol.as_dict(),
        "format": args.format,
    }
    for key in ("seed", "trials", "psi", "ranks", "enumerate", "enumerate_all"):
        if hasattr(args, key):
            config[key] = getattr(args, key)
    return {
        "schema": SCHEMA,
        "version": __version__,
        "config": config,
        "digests": digests,
        "results": results,
    }


# -- commands ----------------------------------------------------------------

def _entry_row(e: dict) -> str:
    return (f"  {e['id']:<34} {e['measured']:<24.17g} {e['comparison']:>2} "
            f"{e['threshold']:<10.3g} {e['verdict']:<13} {e['description']}")


def cmd_verify(args, tol, scen) -> tuple[dict, int]:
    results = {}
    for v, s in scen.items():
        rep = audit.evaluate_conditions(s, tol)
        results[v] = {
            "all_conditions_pass": rep.all_conditions_pass(),
            "failing": [e.id for e in rep.failing()],
            "entries": [e.to_dict() for e in rep.entries],
            "notes": s.notes,
        }
    deciding = "repaired" if "repaired" in results else args.variant
    code = EXIT_OK if results[deciding]["all_conditions_pass"] else EXIT_FAIL
    results = {"variants": results, "deciding_variant": deciding, "exit_code": code}
    return results, code


def text_verify(doc: dict) -> str:
    out = []
    for v, r in doc["results"]["variants"].items():
        out.append(f"variant {v}: " + ("all conditions pass" if r["all_conditions_pass"]
                                       else "FAILING " + ", ".join(r["failing"])))
        out += [_entry_row(e) for e in r["entries"]]
        out.append("")
    res = doc["results"]
    out.append(f"decided by {res['deciding_variant']}: exit {res['exit_code']}")
    return "\n".join(out)


def cmd_audit(args, tol, scen) -> tuple[dict, int]:
    results = {}
    for v, s in scen.items():
        rep = audit.full_report(s, tol)
        results[v] = {
            "entries": [e.to_dict() for e in rep.entries],
            "findings": [e.id for e in rep.entries if e.verdict == audit.INFO],
            "failing": [e.id for e in rep.failing()],
        }
    return {"variants": results}, EXIT_OK


def text_audit(doc: dict) -> str:
    out = []
    for v, r in doc["results"]["variants"].items():
        out.append(f"variant {v}: {len(r['findings'])} informational findings, "
                   f"{len(r['failing'])} failing conditions")
        for e in r["entries"]:
            out.append(_entry_row(e))
            for k, val in sorted(e["details"].items()):
                out.append(f"      {k}: {json.dumps(_to_jsonable(val), sort_keys=True)}")
        out.append("")
    return "\n".join(out)


def _parse_ranks(text: str | None) -> list[int | None] | None:
    if text is None or text == "auto":
        return None
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--ranks takes three comma-separated values")
    try:
        return [None if p in ("", "auto") else int(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad --ranks value {text!r}") from None


def _solve_psi(which: str):
    return sc.build_Psi_literal() if which == "printed" else solver.product_state()


def cmd_solve(args, tol, scen) -> tuple[dict, int]:
    psi = _solve_psi(args.psi)
    ranks = _parse_ranks(args.ranks)
    results: dict[str, Any] = {
        "subsets": [str(s) for s in sc.PRINTED_SUBSETS],
        "masks": [s.mask for s in sc.PRINTED_SUBSETS],
    }
    code = EXIT_OK
    try:
        tr = solver.solve_triple(psi, sc.PRINTED_SUBSETS, ranks, tol)
    except solver.InfeasibleError as exc:
        results["feasible"] = False
        results["message"] = str(exc)
        results["solutions"] = []
        code = EXIT_FAIL
    except solver.RankError as exc:
        results["feasible"] = False
        results["message"] = str(exc)
        results["solutions"] = []
        code = EXIT_FAIL
    else:
        ok = tr.report.all_conditions_pass()
        results["feasible"] = True
        results["all_conditions_pass"] = ok
        results["solutions"] = [
            dict(s.to_dict(), slot=name, digest=digest(s.R_I))
            for name, s in zip(solver.SLOT_NAMES, tr.solutions)
        ]
        results["entries"] = [e.to_dict() for e in tr.report.conditions]
        results["reproduces_printed_E_I"] = bool(
            np.allclose(tr.solutions[0].R_I.data, sc.build_E()[0].data, atol=tol.abs_tol))
        if not ok:
            results["message"] = "derived triple fails " + ", ".join(
                e.id for e in tr.report.failing())
            code = EXIT_FAIL

    if args.enumerate or args.enumerate_all:
        first = None if args.enumerate_all else [sc.T_SUBSET]
        sols = solver.enumerate_solutions(psi, SPIN_7_2, ranks, first=first, tol=tol)
        printed = [s.mask for s in sc.PRINTED_SUBSETS]
        results["enumeration"] = {
            "first_slot": "any" if first is None else str(sc.T_SUBSET),
            "count": len(sols),
            "contains_printed_triple": any(s.contains(printed) for s in sols),
            "inert_mask": sols[0].inert_mask if sols else 0,
            "classes": [list(s.masks) for s in sols],
        }
        if not sols:
            results.setdefault("message", "enumeration found no solution")
            code = EXIT_FAIL
    return results, code


def _mask_str(mask: int) -> str:
    return str(SpinSubset(SPIN_7_2, mask))


def text_solve(doc: dict) -> str:
    r = doc["results"]
    out = [f"state: {doc['config']['psi']}",
           "subsets: " + "  ".join(f"{n}<-{s}" for n, s in zip("TYW", r["subsets"]))]
    if not r["feasible"]:
        out.append(f"no solution: {r['message']}")
    else:
        for s in r["solutions"]:
            out.append(f"  {s['slot']}_I  rank {s['rank']} (fixed {s['fixed_rank']}), "
                       f"freedom {s['freedom_dim']}, subset {s['subset']}, digest {s['digest']}")
            for k, v in sorted(s["certificates"].items()):
                out.append(f"      {k}: {json.dumps(_to_jsonable(v), sort_keys=True)}")
        out.append(f"  E_I equals the printed slit projector: {r['reproduces_printed_E_I']}")
        out += [_entry_row(e) for e in r["entries"]]
        if "message" in r:
            out.append(r["message"])
    en = r.get("enumeration")
    if en is not None:
        out.append(f"enumeration (first slot {en['first_slot']}): {en['count']} classes, "
                   f"contains the printed triple: {en['contains_printed_triple']}, "
                   f"inert channels {_mask_str(en['inert_mask'])}")
        for masks in en["classes"]:
            out.append("  " + "  ".join(_mask_str(m) for m in masks))
    return "\n".join(out)


def outcome_spins(detectors: Sequence[SpinSubset]) -> dict[str, list[str]]:
    """Which S_z values produce each joint outcome."""
    out = {}
    for bits in simulate.outcome_order(len(detectors)):
        ms = [m for m in SPIN_7_2.labels
              if all((m in d) == bool(b) for d, b in zip(detectors, bits))]
        out["".join(map(str, bits))] = [m_label(m) for m in ms]
    return out


def cmd_simulate(args, tol, scen) -> tuple[dict, int]:
    psi = sc.build_Psi_literal()
    dets = list(sc.build_detectors())
    exact = simulate.exact_joint_distribution(psi, dets, tol)
    results: dict[str, Any] = {
        "detectors": ["T", "Y", "W"],
        "outcome_spins": outcome_spins(sc.PRINTED_SUBSETS),
        "exact": exact.to_dict(),
        "exact_sum": float(exact.probabilities.sum()),
    }
    if args.trials > 0:
        cfg = simulate.SamplerConfig(seed=args.seed, n_trials=args.trials)
        sampled = simulate.sample(psi, dets, cfg, tol)
        results["sampled"] = sampled.to_dict()
        results["total_variation"] = sampled.total_variation(exact)
    results["inference"] = {
        v: [row.to_dict() for row in simulate.detection_inference_table(psi, s, tol)]
        for v, s in scen.items()
    }
    return results, EXIT_OK


def text_simulate(doc: dict) -> str:
    r = doc["results"]
    sampled = r.get("sampled")
    out = ["outcome (t,y,w)  spins            exact probability"
           + ("      count      frequency" if sampled else "")]
    for k, row in enumerate(r["exact"]["outcomes"]):
        key = "".join(map(str, row["bits"]))
        line = f"  ({','.join(key)})        {','.join(r['outcome_spins'][key]) or '-':<16} " \
               f"{row['probability']:<22.17g}"
        if sampled:
            srow = sampled["outcomes"][k]
            line += f" {srow['count']:>9}  {srow['probability']:.17g}"
        out.append(line)
    out.append(f"exact sum: {r['exact_sum']!r}")
    if sampled:
        out.append(f"sampled n={sampled['n_trials']} seed={sampled['seed']} "
                   f"generator={sampled['generator']}: total variation {r['total_variation']!r}")
    for v, rows in r["inference"].items():
        out.append(f"inference table ({v}):")
        for row in rows:
            verdict = "inference" if row["inference"] else "no inference"
            out.append(f"  {row['detector']} -> {row['property']}: "
                       f"P(detector=1) {row['p_detector']!r}, "
                       f"P(property=1) {row['p_property']!r}, "
                       f"residual {row['residual']!r}: {verdict}")
    return "\n".join(out)


def cmd_dump(args, tol, scen) -> tuple[dict, int]:
    lit = scen.get("literal") or sc.literal_scenario(tol)
    entries = dump.build_entries(lit, scen.get("repaired"), tol)
    return {"schema": dump.DUMP_SCHEMA, "entries": entries}, EXIT_OK


def dump_header(doc: dict) -> dict[str, str]:
    cfg = doc["config"]
    tols = cfg["tolerances"]
    return {
        "schema": doc["results"]["schema"],
        "report_schema": doc["schema"],
        "version": doc["version"],
        "variant": cfg["variant"],
        "tolerances": " ".join(f"{k}={tols[k]!r}" for k in sorted(tols)),
        "digests": " ".join(f"{k}={v}" for k, v in doc["digests"].items()),
    }


def text_dump(doc: dict) -> str:
    return dump.render_text(dump_header(doc), doc["results"]["entries"])


def parse_dump(text: str) -> dict:
    """Rebuild the report document from a dump in either format."""
    if text.lstrip().startswith("{"):
        return json.loads(text)
    header, entries = dump.parse_text(text)
    tols = dict(kv.split("=", 1) for kv in header["tolerances"].split())
    digests = dict(kv.split("=", 1) for kv in header["digests"].split()) if header["digests"] else {}
    return {
        "schema": header["report_schema"],
        "version": header["version"],
        "config": {
            "command": "dump",
            "variant": header["variant"],
            "tolerances": {k: float(v) for k, v in tols.items()},
            "format": "text",
        },
        "digests": digests,
        "results": {"schema": header["schema"], "entries": entries},
    }


COMMANDS: dict[str, tuple[Callable, Callable[[dict], str]]] = {
    "verify": (cmd_verify, text_verify),
    "audit": (cmd_audit, text_audit),
    "solve": (cmd_solve, text_solve),
    "simulate": (cmd_simulate, text_simulate),
    "dump": (cmd_dump, text_dump),
}


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return encode(doc)
    text = COMMANDS[doc["config"]["command"]][1](doc)
    return text if text.endswith("\n") else text + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--variant", choices=VARIANTS, default="both",
                        help="scenario variant (default: both)")
    common.add_argument("--abs-tol", type=float, help="absolute tolerance "
                        f"(env {ENV_TOLERANCES['abs_tol']}, default {DEFAULT_TOL.abs_tol})")
    common.add_argument("--rel-tol", type=float, help="relative tolerance "
                        f"(env {ENV_TOLERANCES['rel_tol']}, default {DEFAULT_TOL.rel_tol})")
    common.add_argument("--warn-tol", type=float, help="audit warning threshold "
                        f"(env {ENV_TOLERANCES['audit_warn_tol']}, "
                        f"default {DEFAULT_TOL.audit_warn_tol})")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")

    p = argparse.ArgumentParser(prog="tripledetect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="evaluate the ten problem conditions")
    sub.add_parser("audit", parents=[common], help="full structural audit of the printed data")
    ps = sub.add_parser("solve", parents=[common], help="derive properties from detector subsets")
    ps.add_argument("--psi", choices=("printed", "product"), default="printed")
    ps.add_argument("--ranks", default="auto",
                    help="three comma-separated ranks, or 'auto' (default)")
    ps.add_argument("--enumerate", action="store_true",
                    help="enumerate solution triples with T as the first detector")
    ps.add_argument("--enumerate-all", action="store_true",
                    help="enumerate over every first detector (slow)")
    pm = sub.add_parser("simulate", parents=[common], help="joint T, Y, W outcome statistics")
    pm.add_argument("--seed", type=int, default=simulate.DEFAULT_SEED)
    pm.add_argument("--trials", type=int, default=0)
    sub.add_parser("dump", parents=[common], help="every vector and operator with provenance")
    return p


def run(argv: Sequence[str] | None = None, env: dict[str, str] | None = None,
        stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        tol = resolve_tolerances(args.abs_tol, args.rel_tol, args.warn_tol, env)
        if getattr(args, "trials", 0) < 0:
            raise UsageError("--trials must be non-negative")
        cmd, _ = COMMANDS[args.command]
        scen = _scenarios(args.variant, tol)
        results, code = cmd(args, tol, scen)
        digests = {f"{v}.{k}": d for v, s in scen.items()
                   for k, d in scenario_digests(s).items()}
        doc = _document(args, tol, results, digests)
        text = render(doc, args.format)
    except UsageError as exc:
        print(f"tripledetect: error: {exc}", file=stderr)
        return EXIT_ERROR
    except (ContractError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"tripledetect: internal error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_ERROR
    try:
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except OSError as exc:
        print(f"tripledetect: cannot write output: {exc}", file=stderr)
        return EXIT_ERROR
    if code == EXIT_FAIL and "message" in results:
        print(f"tripledetect: {results['message']}", file=stderr)
    return code


def main() -> None:
    sys.exit(run())
