"""Batch front end: ``hypotor run spec.json`` writes a JSON report and plot-ready CSV.

Spec files are JSON. Every number that feeds a decision is an exact string:
a rational ``"p/q"``, a coordinate list over ``{1} + basis symbols``, or a
``{"name": "p/q"}`` map with ``"1"`` for the rational part. Bare JSON floats
are rejected with their line and column.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from . import __version__
from .classify import SCHEMA, classify_MN, lambda_lattice_membership, profile_coefficients
from .construct import (
    BumpSpec,
    TrigPoly,
    TubeOperatorSpec,
    apply_operator,
    averages,
    build_homogeneous_singular,
    build_pair,
    bump_mass,
    find_eta_sequence,
    kronecker_approximate,
    modes_csv_rows,
    smoothness_diagnostic,
)
from .errors import (
    HypotorError,
    NoneWithinBudget,
    PreconditionError,
    RefinementExhausted,
    SpecParseError,
    TooFewPoints,
)
from .exactnum import Basis, ExactComplex, ExactReal, LiouvilleSymbol, OpaqueSymbol, SqrtSymbol
from .symbol import OperatorSpec, SearchBudget, find_witness, fit_exponent, scan_shells

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_REFINEMENT = 4
EXIT_NONE_WITHIN_BUDGET = 5
EXIT_INTERNAL = 1

SPEC_VERSION = "hypotor-spec/1"
RATIONAL_RE = re.compile(r"^[+-]?\d+(/\d+)?$")
_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?|true|false|null')


# -- located JSON --------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    """A JSON scalar with its source position."""

    value: Any
    raw: str
    line: int
    col: int

    def fail(self, msg: str):
        raise SpecParseError(msg, self.line, self.col)


def _no_dupes(pairs):
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        raise ValueError(f"duplicate key in object: {keys}")
    return dict(pairs)


def load_located(text: str):
    """Parse JSON, replacing every scalar by a :class:`Lit` carrying line/column."""
    try:
        data = json.loads(text, object_pairs_hook=_no_dupes)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, exc.lineno, exc.colno) from None
    except ValueError as exc:
        raise SpecParseError(str(exc)) from None
    starts = [0] + [i + 1 for i, ch in enumerate(text) if ch == "\n"]
    tokens = iter(_TOKEN.finditer(text))

    def pos(offset):
        lo, hi = 0, len(starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - starts[lo] + 1

    def walk(node):
        if isinstance(node, dict):
            out = {}
            for k, v in node.items():
                next(tokens)
                out[k] = walk(v)
            return out
        if isinstance(node, list):
            return [walk(x) for x in node]
        m = next(tokens)
        line, col = pos(m.start())
        return Lit(node, m.group(0), line, col)

    return walk(data)


def _plain(node):
    if isinstance(node, dict):
        return {k: _plain(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_plain(x) for x in node]
    return node.value if isinstance(node, Lit) else node


# -- literal parsing -----------------------------------------------------------


def _need(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SpecParseError(f"{where}: missing field '{key}'")
    return obj[key]


def _rational_lit(node) -> str:
    if not isinstance(node, Lit):
        raise SpecParseError("expected an exact rational string")
    v = node.value
    if isinstance(v, bool) or v is None:
        node.fail(f"expected an exact rational, got {node.raw}")
    if isinstance(v, float) or (isinstance(v, int) and not RATIONAL_RE.match(node.raw)):
        node.fail(f"floating-point literal {node.raw} is not allowed; write an exact string such as \"p/q\"")
    if isinstance(v, int):
        node.fail(f"numeric literal {node.raw} must be quoted as an exact string")
    if not isinstance(v, str) or not RATIONAL_RE.match(v.strip()):
        node.fail(f"malformed exact literal {node.raw}")
    if "/" in v and int(v.split("/")[1]) == 0:
        node.fail(f"zero denominator in {node.raw}")
    return v.strip()


def _int_lit(node, where: str, minimum: int | None = None) -> str:
    if not isinstance(node, Lit):
        raise SpecParseError(f"{where}: expected an integer")
    v = node.value
    if isinstance(v, bool) or isinstance(v, float):
        node.fail(f"{where}: expected an integer, got {node.raw}")
    s = str(v).strip()
    if not re.fullmatch(r"[+-]?\d+", s):
        node.fail(f"{where}: expected an integer, got {node.raw}")
    if minimum is not None and int(s) < minimum:
        node.fail(f"{where}: must be >= {minimum}")
    return str(int(s))


def _real_lit(node, names: list[str]):
    """Normalized real literal: a rational string or a name -> rational map."""
    if isinstance(node, Lit):
        return _rational_lit(node)
    if isinstance(node, list):
        if len(node) != 1 + len(names):
            raise SpecParseError(f"coordinate vector needs {1 + len(names)} entries, got {len(node)}")
        return {k: _rational_lit(v) for k, v in zip(["1"] + names, node)}
    if isinstance(node, dict):
        out = {}
        for k, v in node.items():
            if k != "1" and k not in names:
                raise SpecParseError(f"unknown basis symbol '{k}'")
            out[k] = _rational_lit(v)
        return out
    raise SpecParseError("malformed real literal")


def _complex_lit(node, names):
    if isinstance(node, dict) and set(node) <= {"re", "im"} and node:
        return {
            "re": _real_lit(node.get("re", Lit("0", '"0"', 0, 0)), names),
            "im": _real_lit(node.get("im", Lit("0", '"0"', 0, 0)), names),
        }
    return {"re": _real_lit(node, names), "im": "0"}


def _to_real(lit, basis: Basis) -> ExactReal:
    if isinstance(lit, str):
        return basis.rational(Fraction(lit))
    x = basis.rational(Fraction(lit.get("1", "0")))
    for k, v in lit.items():
        if k != "1":
            x = x + basis.gen(k) * Fraction(v)
    return x


def _to_complex(lit, basis: Basis) -> ExactComplex:
    return ExactComplex(_to_real(lit["re"], basis), _to_real(lit["im"], basis))


# -- spec files ----------------------------------------------------------------


BUDGET_FIELDS = {
    "classify": ({}, {"r_max": 2, "convergent_depth": 1}),
    "profile": ({}, {}),
    "scan": ({"r_max": 2}, {}),
    "fit": ({"r_max": 2}, {}),
    "witness": ({"r_max": 2, "convergent_depth": 1}, {}),
    "approx": ({"bound": 0}, {}),
    "membership": ({"bound": 0}, {}),
    "construct": ({"n_max": 4, "grid": 64, "convergent_depth": 1}, {}),
}
TUBE_TASKS = {"construct"}


@dataclass(frozen=True)
class SpecFile:
    """Normalized spec: plain JSON-compatible data with exact literals as strings."""

    data: dict

    def __eq__(self, other):
        return isinstance(other, SpecFile) and json.dumps(self.data, sort_keys=True) == json.dumps(
            other.data, sort_keys=True
        )

    def __hash__(self):
        return hash(json.dumps(self.data, sort_keys=True))


def parse_spec(text: str) -> SpecFile:
    root = load_located(text)
    if not isinstance(root, dict):
        raise SpecParseError("spec must be a JSON object")
    version = _need(root, "version", "spec")
    if not isinstance(version, Lit) or version.value != SPEC_VERSION:
        (version.fail if isinstance(version, Lit) else (lambda m: (_ for _ in ()).throw(SpecParseError(m))))(
            f"unsupported version; expected {SPEC_VERSION}"
        )
    out: dict = {"version": SPEC_VERSION, "basis": [], "operators": {}, "tasks": []}
    names: list[str] = []
    for i, decl in enumerate(root.get("basis", [])):
        where = f"basis[{i}]"
        name = _need(decl, "name", where)
        kind = _need(decl, "kind", where)
        nm, kd = name.value, kind.value
        if not isinstance(nm, str) or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", nm) or nm in ("re", "im"):
            name.fail(f"{where}: invalid symbol name {name.raw}")
        if nm in names:
            name.fail(f"{where}: duplicate symbol {nm}")
        d = {"name": nm, "kind": kd}
        if kd == "sqrt":
            d["radicand"] = _int_lit(_need(decl, "radicand", where), where + ".radicand", 2)
        elif kd == "liouville":
            d["base"] = _int_lit(_need(decl, "base", where), where + ".base", 2)
            d["depth"] = _int_lit(_need(decl, "depth", where), where + ".depth", 1)
        elif kd == "opaque":
            d["lo"] = _rational_lit(_need(decl, "lo", where))
            d["hi"] = _rational_lit(_need(decl, "hi", where))
            tag = decl.get("tag")
            d["tag"] = tag.value if isinstance(tag, Lit) else "unknown"
        else:
            kind.fail(f"{where}: unknown basis kind {kind.raw}")
        names.append(nm)
        out["basis"].append(d)
    ops = root.get("operators", {})
    if not isinstance(ops, dict):
        raise SpecParseError("'operators' must be an object")
    for oname, op in ops.items():
        where = f"operators.{oname}"
        typ = _need(op, "type", where)
        if typ.value == "constant":
            alphas = _need(op, "alphas", where)
            if not isinstance(alphas, list) or not alphas:
                raise SpecParseError(f"{where}: 'alphas' must be a nonempty list")
            out["operators"][oname] = {
                "type": "constant",
                "alphas": [_complex_lit(a, names) for a in alphas],
                "lambda": _complex_lit(_need(op, "lambda", where), names),
            }
        elif typ.value == "tube":
            cs = _need(op, "c", where)
            out["operators"][oname] = {
                "type": "tube",
                "c": [_fourier_table(t, names, f"{where}.c[{j}]") for j, t in enumerate(cs)],
                "lambda": _fourier_table(_need(op, "lambda", where), names, f"{where}.lambda"),
            }
        else:
            typ.fail(f"{where}: unknown operator type {typ.raw}")
    seen = set()
    for i, task in enumerate(root.get("tasks", [])):
        where = f"tasks[{i}]"
        tid = _need(task, "id", where)
        if tid.value in seen:
            tid.fail(f"{where}: duplicate task id {tid.raw}")
        seen.add(tid.value)
        kind = _need(task, "kind", where)
        if kind.value not in BUDGET_FIELDS:
            kind.fail(f"{where}: unknown task kind {kind.raw}")
        opn = _need(task, "op", where)
        if opn.value not in out["operators"]:
            opn.fail(f"{where}: unknown operator {opn.raw}")
        is_tube = out["operators"][opn.value]["type"] == "tube"
        if is_tube != (kind.value in TUBE_TASKS):
            kind.fail(f"{where}: task kind {kind.value} does not apply to operator {opn.value}")
        t = {"id": tid.value, "kind": kind.value, "op": opn.value}
        required, optional = BUDGET_FIELDS[kind.value]
        budget = task.get("budget")
        if required and budget is None:
            raise SpecParseError(f"{where}: task kind {kind.value} needs a budget with {sorted(required)}")
        if budget is not None:
            b = {}
            for key, node in budget.items():
                if key not in required and key not in optional:
                    node.fail(f"{where}.budget: unknown field {key}") if isinstance(node, Lit) else None
                    raise SpecParseError(f"{where}.budget: unknown field {key}")
                b[key] = _int_lit(node, f"{where}.budget.{key}", {**required, **optional}[key])
            for key in required:
                if key not in b:
                    raise SpecParseError(f"{where}.budget: missing '{key}'")
            if kind.value == "construct" and int(b["grid"]) & (int(b["grid"]) - 1):
                raise SpecParseError(f"{where}.budget.grid: must be a power of two")
            t["budget"] = b
        if kind.value == "witness":
            t["j"] = _int_lit(_need(task, "j", where), where + ".j", 1)
        if kind.value == "approx":
            t["z"] = _complex_lit(_need(task, "z", where), names)
            t["eps"] = _rational_lit(_need(task, "eps", where))
            if Fraction(t["eps"]) <= 0:
                task["eps"].fail(f"{where}.eps: must be positive")
        if "required" in task:
            t["required"] = bool(task["required"].value)
        out["tasks"].append(t)
    return SpecFile(out)


def _fourier_table(node, names, where):
    if not isinstance(node, list):
        raise SpecParseError(f"{where}: Fourier table must be a list of {{k, coeff}} entries")
    rows, modes = [], set()
    for i, ent in enumerate(node):
        k = _int_lit(_need(ent, "k", f"{where}[{i}]"), f"{where}[{i}].k")
        if k in modes:
            raise SpecParseError(f"{where}: duplicate mode {k}")
        modes.add(k)
        rows.append({"k": k, "coeff": _complex_lit(_need(ent, "coeff", f"{where}[{i}]"), names)})
    return rows


def render_spec(spec: SpecFile) -> str:
    return json.dumps(spec.data, indent=2) + "\n"


def build_basis(spec: SpecFile) -> Basis:
    syms = []
    for d in spec.data["basis"]:
        if d["kind"] == "sqrt":
            syms.append(SqrtSymbol(d["name"], int(d["radicand"])))
        elif d["kind"] == "liouville":
            syms.append(LiouvilleSymbol(d["name"], int(d["base"]), int(d["depth"])))
        else:
            syms.append(OpaqueSymbol(d["name"], Fraction(d["lo"]), Fraction(d["hi"]), d["tag"]))
    return Basis(syms)


def build_operator(spec: SpecFile, name: str, basis: Basis):
    op = spec.data["operators"][name]
    if op["type"] == "constant":
        return OperatorSpec(tuple(_to_complex(a, basis) for a in op["alphas"]), _to_complex(op["lambda"], basis))

    def table(rows):
        return TrigPoly.of({int(r["k"]): _to_complex(r["coeff"], basis) for r in rows}, basis)

    return TubeOperatorSpec(tuple(table(t) for t in op["c"]), table(op["lambda"]))


# -- tasks ---------------------------------------------------------------------


def _budget(task, key, default=None):
    b = task.get("budget") or {}
    return int(b[key]) if key in b else default


def _run_task(spec: SpecFile, task: dict) -> dict:
    basis = build_basis(spec)
    op = build_operator(spec, task["op"], basis)
    kind = task["kind"]
    if kind == "profile":
        return {"profile": profile_coefficients(op).to_json()}
    if kind == "classify":
        b = None
        if task.get("budget"):
            b = SearchBudget(_budget(task, "r_max", 2), _budget(task, "convergent_depth", 32))
        return {"classification": classify_MN(op, b).to_json()}
    if kind == "scan":
        recs = scan_shells(op, _budget(task, "r_max"))
        return {"shells": [r.csv_row() for r in recs], "N": op.N}
    if kind == "fit":
        recs = scan_shells(op, _budget(task, "r_max"))
        fit = fit_exponent(recs)
        return {
            "fit": {"C_hat": fit.C_hat, "M_hat": fit.M_hat, "residual": fit.residual, "R_used": fit.R_used,
                    "points": len(fit.points)},
            "shells": [r.csv_row() for r in recs],
            "N": op.N,
        }
    if kind == "witness":
        b = SearchBudget(_budget(task, "r_max"), _budget(task, "convergent_depth"))
        cert = find_witness(op, int(task["j"]), b)
        if cert is None:
            raise NoneWithinBudget(f"no witness for j={task['j']} within budget")
        return {"witness": cert.to_json(), "verified": cert.verify(op)}
    if kind == "approx":
        z = _to_complex(task["z"], op.basis)
        hit = kronecker_approximate(op.alphas, z, Fraction(task["eps"]), _budget(task, "bound"))
        if hit is None:
            raise NoneWithinBudget("no lattice point within eps inside the bound")
        return {"approximation": hit.to_json()}
    if kind == "membership":
        sol = lambda_lattice_membership(op, _budget(task, "bound"))
        if sol is None:
            raise NoneWithinBudget("lambda is not an integer combination within the bound")
        return {"membership": list(sol)}
    if kind == "construct":
        return _construct(op, task)
    raise PreconditionError(f"unknown task kind {kind}")


def _construct(tube: TubeOperatorSpec, task: dict) -> dict:
    grid = _budget(task, "grid")
    budget = SearchBudget(0, _budget(task, "convergent_depth"))
    seq = find_eta_sequence(tube, _budget(task, "n_max"), budget)
    out: dict = {
        "averages": [a.to_json() for a in averages(tube)],
        "sequence": seq.to_json(),
    }
    if seq.exact:
        mu = build_homogeneous_singular(tube, seq, grid)
        res = apply_operator(tube, mu)
        out["branch"] = "homogeneous-singular"
        out["mu"] = mu.to_json()
        out["residual"] = {"max_relative": res.max_relative, "per_mode": res.csv_rows()}
        out["smoothness"] = {"mu": smoothness_diagnostic(mu).to_json()}
        out["modes"] = modes_csv_rows(None, mu)
        return out
    bump = BumpSpec()
    f, u, tns = build_pair(tube, seq, bump, grid)
    res = apply_operator(tube, u)
    mass = bump_mass(bump, tns[-1])
    bounds = []
    for e, fm, um in zip(seq.entries, f.modes, u.modes):
        bounds.append({
            "n": e.n,
            "f_sup_below_threshold": bool(fm.sup_abs(f.grid) <= e.threshold),
            "u_at_tn_above_half_mass": bool(um.abs_at_ref() >= mass / 2),
        })
    out.update({
        "branch": "pair",
        "t_n": [repr(t) for t in tns],
        "bump_mass": repr(mass),
        "f": f.to_json(),
        "u": u.to_json(),
        "residual": {"max_relative": res.max_relative, "per_mode": res.csv_rows()},
        "bounds": bounds,
        "smoothness": {"f": smoothness_diagnostic(f).to_json(), "u": smoothness_diagnostic(u).to_json()},
        "modes": modes_csv_rows(f, u),
    })
    return out


_ERRORS = (
    (SpecParseError, EXIT_PARSE, "parse-error"),
    (NoneWithinBudget, EXIT_NONE_WITHIN_BUDGET, "none-within-budget"),
    (RefinementExhausted, EXIT_REFINEMENT, "refinement-exhausted"),
    (PreconditionError, EXIT_PRECONDITION, "precondition-violation"),
    (TooFewPoints, EXIT_PRECONDITION, "precondition-violation"),
)


def _execute(args) -> tuple[dict, float]:
    spec, task = args
    start = time.perf_counter()
    entry = {"id": task["id"], "kind": task["kind"], "op": task["op"], "budget": task.get("budget")}
    try:
        entry["status"] = "ok"
        entry["outcome"] = _run_task(spec, task)
    except HypotorError as exc:
        for cls, _, status in _ERRORS:
            if isinstance(exc, cls):
                entry["status"] = status
                break
        else:
            entry["status"] = "error"
        entry["outcome"] = None
        entry["message"] = str(exc)
    except Exception as exc:  # keep the rest of the batch alive
        entry["status"] = "internal-error"
        entry["outcome"] = None
        entry["message"] = f"{type(exc).__name__}: {exc}"
    return entry, time.perf_counter() - start


def run(spec_path: str | Path, only: list[str] | None = None, out_dir: str | Path = ".",
        parallel: bool = False) -> tuple[dict, int]:
    """Execute the tasks of a spec file and write ``report.json`` plus CSV tables."""
    text = Path(spec_path).read_text()
    spec = parse_spec(text)
    tasks = [t for t in spec.data["tasks"] if not only or t["id"] in only]
    if only:
        missing = sorted(set(only) - {t["id"] for t in tasks})
        if missing:
            raise SpecParseError(f"--only names unknown task ids: {missing}")
    start = time.perf_counter()
    if parallel and len(tasks) > 1:
        with ProcessPoolExecutor() as pool:
            results = list(pool.map(_execute, [(spec, t) for t in tasks]))
    else:
        results = [_execute((spec, t)) for t in tasks]
    entries = [r[0] for r in results]
    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "spec_version": SPEC_VERSION,
        "spec_file": Path(spec_path).name,
        "tasks": entries,
        "wall_clock": {
            "total_seconds": round(time.perf_counter() - start, 6),
            "tasks": {e["id"]: round(r[1], 6) for e, r in zip(entries, results)},
        },
    }
    code = EXIT_OK
    by_status = {status: c for _, c, status in _ERRORS}
    for t, e in zip(tasks, entries):
        if e["status"] == "ok":
            continue
        if e["status"] == "none-within-budget" and not t.get("required", False):
            continue
        code = by_status.get(e["status"], EXIT_INTERNAL)
        break
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")
    for which in ("shells", "modes", "fits"):
        try:
            (out / f"{which}.csv").write_text(render_csv(report, which))
        except PreconditionError:
            pass
    return report, code


def render_csv(report: dict, which: str) -> str:
    """Bit-stable CSV for ``shells``, ``modes`` or ``fits`` gathered from all tasks."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = []
    if which == "shells":
        header = ["task", "r", "min_sq_lo", "min_sq_hi", "tau", "xi", "is_zero"]
        for e in report["tasks"]:
            oc = e.get("outcome") or {}
            for r in oc.get("shells", []):
                n = oc["N"]
                rows.append([e["id"], r[0], decimal_bound(r[1], False), decimal_bound(r[2], True), r[3], " ".join(r[4 : 4 + n]), r[4 + n]])
    elif which == "modes":
        header = ["task", "n", "eta", "sup_f", "sup_u", "u_at_tn"]
        for e in report["tasks"]:
            oc = e.get("outcome") or {}
            for r in oc.get("modes", []):
                rows.append([e["id"], r[0], " ".join(r[1:-3]), r[-3], r[-2], r[-1]])
    elif which == "fits":
        header = ["task", "C_hat", "M_hat", "residual", "R_used"]
        for e in report["tasks"]:
            fit = (e.get("outcome") or {}).get("fit")
            if fit:
                rows.append([e["id"], repr(fit["C_hat"]), repr(fit["M_hat"]), repr(fit["residual"]), fit["R_used"]])
    else:
        raise PreconditionError(f"unknown table {which}")
    if not rows:
        raise PreconditionError(f"report has no {which} table")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def decimal_bound(q: Fraction | str, up: bool, digits: int = 17) -> str:
    """Scientific-notation decimal of ``q`` rounded outward (down if not ``up``)."""
    q = Fraction(q)
    if q == 0:
        return "0"
    e = int((abs(q.numerator).bit_length() - q.denominator.bit_length()) * 0.30102999566398120)
    while abs(q) >= Fraction(10) ** (e + 1):
        e += 1
    while abs(q) < Fraction(10) ** e:
        e -= 1
    scaled = q * Fraction(10) ** (digits - 1 - e)
    n = -((-scaled.numerator) // scaled.denominator) if up else scaled.numerator // scaled.denominator
    if len(str(abs(n))) > digits:
        e += 1
        n = -(-n // 10) if up else n // 10
    sign, mant = ("-" if n < 0 else ""), str(abs(n))
    return f"{sign}{mant[0]}.{mant[1:]}e{e:+d}"


def strip_wall_clock(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "wall_clock"}


# -- entry point ---------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hypotor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hypotor {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the tasks of a spec file")
    p_run.add_argument("spec", help="path to a spec JSON file")
    p_run.add_argument("--only", nargs="+", metavar="ID", help="run only these task ids")
    p_run.add_argument("--out", default=".", help="output directory (default: current directory)")
    p_run.add_argument("--parallel", action="store_true", help="run independent tasks in worker processes")
    p_chk = sub.add_parser("check", help="parse and validate a spec file without running it")
    p_chk.add_argument("spec")
    args = parser.parse_args(argv)
    try:
        if args.command == "check":
            spec = parse_spec(Path(args.spec).read_text())
            print(f"ok: {len(spec.data['tasks'])} task(s)")
            return EXIT_OK
        report, code = run(args.spec, args.only, args.out, args.parallel)
    except SpecParseError as exc:
        print(f"hypotor: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"hypotor: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for e in report["tasks"]:
        line = f"{e['id']}: {e['status']}"
        if e.get("message"):
            line += f" ({e['message']})"
        print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
