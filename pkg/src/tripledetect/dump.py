"""Flat listing of every scenario vector and operator.

Each entry carries a name, the exact coefficient as a sympy string (or None
for numerically derived data), the floating value, and a short source tag.
The text form is one line per entry::

    Psi[psi1⊗|7/2>] = -1/32  # -0.03125 | printed state

and parses back into the same document, so dump -> parse -> dump is
byte-identical.
"""
from __future__ import annotations

import re
from typing import Any, Iterable, Sequence

import numpy as np
import sympy as sp

from . import scenario as sc
from .linalg import DEFAULT_TOL, Operator, ToleranceConfig
from .spin import SPIN_7_2, ket_label

DUMP_SCHEMA = "tripledetect.dump/1"
NO_EXACT = "?"

_LINE = re.compile(r"^(?P<name>.+?) = (?P<exact>.*?)  # (?P<value>\S+) \| (?P<source>.*)$")
_HEADER = re.compile(r"^# (?P<key>[a-z_]+): (?P<value>.*)$")


def _value(z) -> float | list[float]:
    z = complex(z)
    # adding 0.0 folds -0.0 into 0.0 so equal dumps stay byte-identical
    if z.imag == 0:
        return float(z.real) + 0.0
    return [float(z.real) + 0.0, float(z.imag) + 0.0]


def entry(name: str, exact: sp.Expr | str | None, value, source: str) -> dict[str, Any]:
    return {
        "name": name,
        "exact": None if exact is None else str(exact),
        "value": _value(value),
        "source": source,
    }


def _printed_vector(prefix: str, pv: sc.PrintedVector, source: str) -> list[dict]:
    return [
        entry(f"{prefix}[psi{i + 1}]", c, complex(c), source)
        for i, c in sc.vector_entries(pv.exact)
    ]


def _operator(name: str, A: Operator, source: str, exact: bool = False,
              tol: float = 0.0) -> list[dict]:
    out = []
    for i, j in zip(*np.nonzero(np.abs(A.data) > tol)):
        z = A.data[i, j]
        ex = sp.nsimplify(z.real) if exact and z.imag == 0 else None
        out.append(entry(f"{name}[{i},{j}]", ex, z, source))
    return out


def _flatten(prefix: str, obj, source: str) -> list[dict]:
    if isinstance(obj, dict):
        return [e for k in obj for e in _flatten(f"{prefix}.{k}", obj[k], source)]
    if isinstance(obj, bool):
        return [entry(prefix, "true" if obj else "false", float(obj), source)]
    if isinstance(obj, int):
        return [entry(prefix, str(obj), float(obj), source)]
    return [entry(prefix, None, obj, source)]


def printed_entries() -> list[dict]:
    out = []
    for i, row in enumerate(sc.psi_exact()):
        for k, c in enumerate(row):
            if c != 0:
                out.append(entry(f"Psi[{sc.composite_label(i, SPIN_7_2.labels[k])}]",
                                 c, complex(c), "printed state"))
    for m, c in zip(SPIN_7_2.labels, sc.S_PRINTED):
        out.append(entry(f"s[{ket_label(m)}]", c, complex(c), "printed S_x eigenstate"))
    for m in SPIN_7_2.labels:
        pv = sc.CHANNELS_PRINTED.get(m)
        if pv is not None:
            out += _printed_vector(f"channel[{pv.name}]", pv, "printed channel vector")
    for pv in sc.G_VECTORS_LITERAL:
        out += _printed_vector(f"G[{pv.name}]", pv, "printed G vector, verbatim")
    out += _printed_vector("G_psi3_reading[psi^(1)]", sc.G_VECTORS_PSI3_READING[0],
                           "printed G vector, third slot read as psi3")
    for pv in sc.L_VECTORS:
        out += _printed_vector(f"L[{pv.name}]", pv, "printed L vector")
    return out


def operator_entries(s: sc.PaperScenario) -> list[dict]:
    out = _operator("E_I", s.E_I, "projector onto psi1..psi5", exact=True)
    out += _operator("L_I", s.L_I, "sum of dyads of the printed L vectors",
                     tol=DEFAULT_TOL.abs_tol)
    for name in ("T_II", "Y_II", "W_II"):
        out += _operator(name, getattr(s, name), "spin subset projector", exact=True)
    return out


def repaired_entries(s: sc.PaperScenario, tol: ToleranceConfig) -> list[dict]:
    src = "solver: derived from the Y detector, rank 3, not commuting with E_I, L_I"
    out = _operator("G_I.repaired", s.G_I, src, tol=tol.abs_tol)
    out += _flatten("G_I.repaired.certificate", s.notes["G_certificates"], "solver certificate")
    out += _flatten("G_I.repaired.certificate.freedom_dim", s.notes["G_freedom_dim"],
                    "solver certificate")
    return out


def build_entries(
    literal: sc.PaperScenario, repaired: sc.PaperScenario | None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> list[dict]:
    out = printed_entries() + operator_entries(literal)
    if repaired is not None:
        out += repaired_entries(repaired, tol)
    return out


def _fmt_value(v) -> str:
    if isinstance(v, list):
        return repr(complex(v[0], v[1]))
    return repr(v)


def _parse_value(s: str):
    if s.startswith("("):
        z = complex(s)
        return [z.real, z.imag]
    return float(s)


def render_text(header: dict[str, str], entries: Iterable[dict]) -> str:
    lines = [f"# {k}: {v}" for k, v in header.items()]
    for e in entries:
        exact = NO_EXACT if e["exact"] is None else e["exact"]
        lines.append(f"{e['name']} = {exact}  # {_fmt_value(e['value'])} | {e['source']}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> tuple[dict[str, str], list[dict]]:
    header, entries = {}, []
    for n, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        h = _HEADER.match(line)
        if h and not entries:
            header[h["key"]] = h["value"]
            continue
        m = _LINE.match(line)
        if m is None:
            raise ValueError(f"line {n} is not a dump entry: {line!r}")
        exact = None if m["exact"] == NO_EXACT else m["exact"]
        entries.append({"name": m["name"], "exact": exact,
                        "value": _parse_value(m["value"]), "source": m["source"]})
    return header, entries


def lookup(entries: Sequence[dict], name: str) -> dict:
    for e in entries:
        if e["name"] == name:
            return e
    raise KeyError(name)
