#!/usr/bin/env python3
"""LP-format MILP solver backed by scipy's HiGHS bindings.

Usage: lp_milp.py MODEL.lp OUTPUT.sol [TIME_LIMIT_S]

Reads a CPLEX-style LP file (Minimize / Subject To / Bounds / Generals /
Binaries sections), solves it, and writes a HiGHS-style solution file.
"""

import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix


def tokenize(text):
    # Strip comments, join continuation lines inside sections.
    lines = []
    for raw in text.splitlines():
        line = raw.split("\\")[0].rstrip()
        if line.strip():
            lines.append(line)
    return lines


SECTION_RE = re.compile(
    r"^(minimize|maximize|subject to|st|s\.t\.|bounds|generals|general|"
    r"binaries|binary|end)\s*$",
    re.IGNORECASE,
)


def split_sections(lines):
    sections = {}
    current = None
    for line in lines:
        m = SECTION_RE.match(line.strip())
        if m:
            name = m.group(1).lower()
            if name in ("st", "s.t.", "subject to"):
                name = "subject to"
            if name in ("general",):
                name = "generals"
            if name in ("binary",):
                name = "binaries"
            current = name
            sections.setdefault(current, [])
        elif current is not None:
            sections[current].append(line)
    return sections


TERM_RE = re.compile(r"([+-]?)\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.]*)")


def parse_terms(expr):
    terms = []
    for sign, coeff, name in TERM_RE.findall(expr):
        value = float(coeff) if coeff else 1.0
        if sign == "-":
            value = -value
        terms.append((name, value))
    return terms


def parse_expression_rows(rows):
    """Joins wrapped constraint lines: a new constraint starts at 'name:'."""
    joined = []
    for line in rows:
        if re.match(r"^\s*[\w.]+\s*:", line) or not joined:
            joined.append(line.strip())
        else:
            joined[-1] += " " + line.strip()
    return joined


def main():
    if len(sys.argv) < 3:
        print(__doc__)
        return 2
    lp_path, sol_path = sys.argv[1], sys.argv[2]
    time_limit = float(sys.argv[3]) if len(sys.argv) > 3 else 600.0

    with open(lp_path) as fh:
        sections = split_sections(tokenize(fh.read()))

    sense = 1.0
    if "maximize" in sections:
        sense = -1.0
        objective_rows = sections["maximize"]
    else:
        objective_rows = sections.get("minimize", [])

    names = []
    index = {}

    def var_index(name):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    obj_expr = " ".join(objective_rows)
    obj_expr = obj_expr.split(":", 1)[-1]
    objective_terms = parse_terms(obj_expr)
    for name, _ in objective_terms:
        var_index(name)

    constraint_rows = parse_expression_rows(sections.get("subject to", []))
    constraints = []
    for row in constraint_rows:
        body = row.split(":", 1)[-1]
        m = re.search(r"(<=|>=|=)", body)
        if not m:
            continue
        op = m.group(1)
        lhs, rhs = body.split(op, 1)
        terms = parse_terms(lhs)
        rhs_value = float(rhs)
        for name, _ in terms:
            var_index(name)
        constraints.append((terms, op, rhs_value))

    lower = {}
    upper = {}
    for raw in sections.get("bounds", []):
        line = raw.strip()
        if not line:
            continue
        m = re.match(r"^([\w.]+)\s+free$", line, re.IGNORECASE)
        if m:
            lower[var_index(m.group(1))] = -np.inf
            upper[var_index(m.group(1))] = np.inf
            continue
        m = re.match(r"^([\w.]+)\s*=\s*([-\d.eE+]+)$", line)
        if m:
            idx = var_index(m.group(1))
            lower[idx] = upper[idx] = float(m.group(2))
            continue
        m = re.match(r"^([-\d.eE+]+)\s*<=\s*([\w.]+)\s*<=\s*([-\d.eE+]+)$", line)
        if m:
            idx = var_index(m.group(2))
            lower[idx] = float(m.group(1))
            upper[idx] = float(m.group(3))
            continue
        m = re.match(r"^([\w.]+)\s*<=\s*([-\d.eE+]+)$", line)
        if m:
            upper[var_index(m.group(1))] = float(m.group(2))
            continue
        m = re.match(r"^([-\d.eE+]+)\s*<=\s*([\w.]+)$", line)
        if m:
            lower[var_index(m.group(2))] = float(m.group(1))
            continue
        raise ValueError(f"unparseable bounds line: {line}")

    integrality_names = set()
    for sec in ("generals", "binaries"):
        for raw in sections.get(sec, []):
            for name in raw.split():
                integrality_names.add(name)
                var_index(name)
                if sec == "binaries":
                    lower.setdefault(index[name], 0.0)
                    upper.setdefault(index[name], 1.0)

    n = len(names)
    c = np.zeros(n)
    for name, coeff in objective_terms:
        c[index[name]] += sense * coeff

    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for i, v in lower.items():
        lb[i] = v
    for i, v in upper.items():
        ub[i] = v

    integrality = np.zeros(n)
    for name in integrality_names:
        integrality[index[name]] = 1

    rows, cols, data = [], [], []
    con_lb, con_ub = [], []
    for row_id, (terms, op, rhs_value) in enumerate(constraints):
        for name, coeff in terms:
            rows.append(row_id)
            cols.append(index[name])
            data.append(coeff)
        if op == "<=":
            con_lb.append(-np.inf)
            con_ub.append(rhs_value)
        elif op == ">=":
            con_lb.append(rhs_value)
            con_ub.append(np.inf)
        else:
            con_lb.append(rhs_value)
            con_ub.append(rhs_value)

    kwargs = {
        "c": c,
        "integrality": integrality,
        "bounds": Bounds(lb, ub),
        "options": {"time_limit": time_limit, "mip_rel_gap": 1e-9},
    }
    if constraints:
        a = csr_matrix((data, (rows, cols)), shape=(len(constraints), n))
        kwargs["constraints"] = LinearConstraint(a, con_lb, con_ub)

    result = milp(**kwargs)

    if result.status == 0:
        status = "Optimal"
    elif result.status == 1:
        status = "Time limit reached"
    elif result.status == 2:
        status = "Infeasible"
    elif result.status == 3:
        status = "Unbounded"
    else:
        status = "Not solved"

    with open(sol_path, "w") as out:
        out.write("Model status\n%s\n\n" % status)
        out.write("# Primal solution values\n")
        if result.x is not None:
            objective = float(sense * np.dot(c, result.x))
            out.write("Feasible\n")
            out.write("Objective %.17g\n" % objective)
            out.write("# Columns %d\n" % n)
            for name, value in zip(names, result.x):
                out.write("%s %.17g\n" % (name, value))
            out.write("# Rows %d\n" % len(constraints))
        else:
            out.write("None\n")
            out.write("Objective 0\n")
            out.write("# Columns 0\n")
            out.write("# Rows 0\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
