"""Formula serialization: lossless JSON and lossy DIMACS CNF.

JSON layout::

    {"schema": "regsat-formula/1",
     "params": {"n": 5, "d": 2, "k": 3},
     "slots": [[var, copy, sign], ...]}

``slots`` is row-major by (clause, position) with 1-based ``var`` and
``copy``.  DIMACS drops copy indices; on import they are reassigned in
order of occurrence.
"""

from __future__ import annotations

import json

import numpy as np

from regsat.analytic.core import ModelParams
from regsat.errors import DomainError, FormatError
from regsat.model import Formula

SCHEMA = "regsat-formula/1"


def formula_to_dict(formula: Formula) -> dict:
    p = formula.params
    slots = np.stack([formula.var.astype(np.int64) + 1, formula.copy.astype(np.int64) + 1,
                      formula.sign.astype(np.int64)], axis=1)
    return {"schema": SCHEMA, "params": {"n": p.n, "d": p.d, "k": p.k},
            "slots": slots.tolist()}


def to_json(formula: Formula) -> bytes:
    return json.dumps(formula_to_dict(formula), separators=(",", ":")).encode()


def formula_from_dict(obj: dict) -> Formula:
    if obj.get("schema", SCHEMA) != SCHEMA:
        raise FormatError(f"unsupported formula schema {obj.get('schema')!r}")
    try:
        par = obj["params"]
        params = ModelParams(int(par["n"]), int(par["d"]), int(par["k"]))
        slots = np.asarray(obj["slots"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed formula JSON: {exc}") from exc
    if slots.shape != (params.slots, 3):
        raise FormatError(f"expected {params.slots} slot triples, got shape {slots.shape}")
    try:
        formula = Formula.from_slots(params, slots[:, 0] - 1, slots[:, 1] - 1, slots[:, 2])
    except DomainError as exc:
        raise FormatError(str(exc)) from exc
    if np.any(formula.inv < 0):
        raise FormatError("slot table is not a bijection onto the literal clones")
    return formula


def from_json(data) -> Formula:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return formula_from_dict(obj)


def to_dimacs(formula: Formula) -> str:
    p = formula.params
    lines = [f"c regular k-SAT n={p.n} d={p.d} k={p.k} (copy indices dropped)",
             f"p cnf {p.n} {p.m}"]
    lines += [" ".join(str(x) for x in clause) + " 0" for clause in formula.clauses()]
    return "\n".join(lines) + "\n"


def from_dimacs(text: str, d: int | None = None) -> Formula:
    """Parse DIMACS CNF into a regular formula.

    All clauses must share one width ``k`` and every variable must occur
    exactly ``d`` times with each sign.  ``d`` defaults to ``km / 2n``.
    """
    n = m = None
    literals: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise FormatError(f"bad problem line {line!r}")
            n, m = int(parts[2]), int(parts[3])
            continue
        try:
            literals.extend(int(tok) for tok in line.split())
        except ValueError as exc:
            raise FormatError(f"bad clause line {line!r}") from exc
    if n is None:
        raise FormatError("missing 'p cnf' header")
    clauses, cur = [], []
    for lit in literals:
        if lit == 0:
            clauses.append(cur)
            cur = []
        else:
            cur.append(lit)
    if cur:
        raise FormatError("last clause is not 0-terminated")
    if len(clauses) != m:
        raise FormatError(f"header declares {m} clauses, found {len(clauses)}")
    widths = {len(c) for c in clauses}
    if len(widths) != 1:
        raise FormatError(f"clauses have mixed widths {sorted(widths)}")
    k = widths.pop()
    if d is None:
        if (k * m) % (2 * n):
            raise FormatError(f"k*m={k * m} is not a multiple of 2n={2 * n}")
        d = k * m // (2 * n)
    flat = np.array([lit for c in clauses for lit in c], dtype=np.int64)
    if np.any(np.abs(flat) > n):
        bad = int(np.abs(flat)[np.abs(flat) > n][0])
        raise FormatError(f"x{bad} exceeds declared variable count {n}")
    var = np.abs(flat) - 1
    sign = np.sign(flat)
    for v in range(n):
        npos = int(np.sum((var == v) & (sign > 0)))
        nneg = int(np.sum((var == v) & (sign < 0)))
        if npos != d or nneg != d:
            raise FormatError(f"x{v + 1} occurs {npos} times positively and {nneg} times "
                              f"negatively; regular degree d={d} required")
    try:
        params = ModelParams(n, d, k)
    except DomainError as exc:
        raise FormatError(str(exc)) from exc
    copy = np.zeros_like(var)
    seen: dict[tuple[int, int], int] = {}
    for idx, (v, s) in enumerate(zip(var.tolist(), sign.tolist())):
        copy[idx] = seen.get((v, s), 0)
        seen[(v, s)] = copy[idx] + 1
    return Formula.from_slots(params, var, copy, sign)


def load_formula(path) -> Formula:
    """Read JSON or DIMACS, chosen by content."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data.lstrip().startswith(b"{"):
        return from_json(data)
    return from_dimacs(data.decode())


def save_formula(formula: Formula, path, fmt: str = "json") -> None:
    if fmt == "json":
        payload = to_json(formula)
    elif fmt == "dimacs":
        payload = to_dimacs(formula).encode()
    else:
        raise DomainError(f"unknown formula format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(payload)
