"""Dense linear programming for desk-scale relaxations.

A two-phase tableau simplex with Dantzig pricing that falls back to Bland's
rule after a run of degenerate pivots, which keeps it fast in the common case
and cycle-free in the degenerate one.  Deterministic: entering ties break to
the lowest column, ratio ties to the lowest basis index.

The solver boundary is the module-level ``solve(lp)``; anything with that
signature (returning an LpOutcome) can replace it in the tightener.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearProgram",
    "LpOutcome",
    "MalformedLpError",
    "solve",
    "write_lp_text",
]

_RATIO_TOL = 1e-9
_COST_TOL = 1e-9
_BLAND_AFTER = 40  # consecutive degenerate pivots before anti-cycling kicks in


class MalformedLpError(ValueError):
    """Structurally invalid program (dimension mismatch, non-finite data)."""


@dataclass
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float | None = None
    point: np.ndarray | None = None

    @property
    def is_optimal(self):
        return self.status == "optimal"


class LinearProgram:
    """min/max c.x subject to linear rows and variable bounds.

    Single-owner mutable while being built; solve() never mutates it.
    """

    def __init__(self):
        self.lower = []
        self.upper = []
        self.rows = []
        self.comps = []
        self.rhs = []
        self.objective = None
        self.sense = "min"

    @property
    def n_vars(self):
        return len(self.lower)

    @property
    def n_rows(self):
        return len(self.rows)

    def add_variable(self, lb=-math.inf, ub=math.inf):
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise MalformedLpError(f"bad bounds [{lb}, {ub}]")
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        return len(self.lower) - 1

    def add_variables(self, lbs, ubs):
        return [self.add_variable(lb, ub) for lb, ub in zip(lbs, ubs, strict=True)]

    def add_constraint(self, row, comp, rhs):
        row = np.asarray(row, dtype=float)
        if row.shape != (self.n_vars,):
            raise MalformedLpError(
                f"constraint has {row.shape} coefficients, expected ({self.n_vars},)"
            )
        if comp not in ("<=", ">=", "=="):
            raise MalformedLpError(f"comparator must be <=, >= or ==: {comp!r}")
        if not np.isfinite(row).all() or not math.isfinite(rhs):
            raise MalformedLpError("non-finite constraint data")
        self.rows.append(row)
        self.comps.append(comp)
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def set_objective(self, coeffs, sense="min"):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_vars,):
            raise MalformedLpError("objective length does not match variable count")
        if sense not in ("min", "max"):
            raise MalformedLpError(f"sense must be 'min' or 'max': {sense!r}")
        self.objective = coeffs
        self.sense = sense


def _pivot_loop(T, basis, allowed):
    """Run simplex iterations on the tableau in place.

    Returns "optimal" or "unbounded".  The cost row is T[-1]; allowed masks
    columns that may enter.
    """
    n_cols = T.shape[1] - 1
    degenerate_run = 0
    bland = False
    for _ in range(20000 + 40 * T.shape[0] * 2):
        costs = T[-1, :n_cols]
        if bland:
            cand = np.flatnonzero(allowed & (costs < -_COST_TOL))
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
        else:
            masked = np.where(allowed, costs, np.inf)
            j = int(np.argmin(masked))
            if masked[j] >= -_COST_TOL:
                return "optimal"
        col = T[:-1, j]
        pos = col > _RATIO_TOL
        if not pos.any():
            return "unbounded"
        ratios = np.full(col.shape, np.inf)
        ratios[pos] = T[:-1, -1][pos] / col[pos]
        best = ratios.min()
        tied = np.flatnonzero(ratios <= best + 1e-12)
        r = int(tied[np.argmin(basis[tied])])
        if best <= _RATIO_TOL:
            degenerate_run += 1
            if degenerate_run > _BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
        piv = T[r, j]
        T[r] /= piv
        colv = T[:, j].copy()
        colv[r] = 0.0
        T -= np.outer(colv, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j
    raise RuntimeError("simplex iteration limit exceeded")


def solve(lp):
    """Two-phase dense simplex.  Deterministic for identical input."""
    if lp.objective is None:
        raise MalformedLpError("objective not set")
    n = lp.n_vars
    lower = np.asarray(lp.lower)
    upper = np.asarray(lp.upper)

    # Shift every variable onto s >= 0 columns: finite-lb vars anchor at the
    # lower bound, upper-only vars anchor (negated) at the upper bound, free
    # vars split into a difference of two columns.
    col_of = []  # per variable: (columns, signs, anchor)
    ncols = 0
    range_rows = []  # (column, width) for doubly bounded vars
    for jv in range(n):
        lb, ub = lower[jv], upper[jv]
        if math.isfinite(lb):
            col_of.append(((ncols,), (1.0,), lb))
            if math.isfinite(ub):
                range_rows.append((ncols, ub - lb))
            ncols += 1
        elif math.isfinite(ub):
            col_of.append(((ncols,), (-1.0,), ub))
            ncols += 1
        else:
            col_of.append(((ncols, ncols + 1), (1.0, -1.0), 0.0))
            ncols += 2

    def to_cols(row):
        out = np.zeros(ncols)
        shift = 0.0
        for jv in range(n):
            v = row[jv]
            if v == 0.0:
                continue
            cols, signs, anchor = col_of[jv]
            for c, s in zip(cols, signs):
                out[c] += v * s
            shift += v * anchor
        return out, shift

    A_rows, b_vec, comps = [], [], []
    for row, comp, rhs in zip(lp.rows, lp.comps, lp.rhs):
        arow, shift = to_cols(row)
        A_rows.append(arow)
        b_vec.append(rhs - shift)
        comps.append(comp)
    for c, width in range_rows:
        arow = np.zeros(ncols)
        arow[c] = 1.0
        A_rows.append(arow)
        b_vec.append(width)
        comps.append("<=")

    m = len(A_rows)
    A = np.array(A_rows) if m else np.zeros((0, ncols))
    b = np.array(b_vec)
    comps = list(comps)
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            comps[i] = {"<=": ">=", ">=": "<=", "==": "=="}[comps[i]]

    # slack (+1) for <=, surplus (-1) for >=; artificials for >= and ==
    n_slack = m
    art_rows = [i for i in range(m) if comps[i] != "<="]
    n_art = len(art_rows)
    width = ncols + n_slack + n_art + 1
    T = np.zeros((m + 1, width))
    T[:m, :ncols] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    art_cols = []
    k_art = 0
    for i in range(m):
        sl = ncols + i
        T[i, sl] = 1.0 if comps[i] != ">=" else -1.0
        if comps[i] == "==":
            T[i, sl] = 0.0
        if comps[i] == "<=":
            basis[i] = sl
        else:
            ac = ncols + n_slack + k_art
            T[i, ac] = 1.0
            basis[i] = ac
            art_cols.append(ac)
            k_art += 1

    allowed = np.ones(width - 1, dtype=bool)
    # equality rows carry a zeroed slack column that must never enter
    for i in range(m):
        if comps[i] == "==":
            allowed[ncols + i] = False

    cobj = np.asarray(lp.objective, dtype=float)
    sign = 1.0 if lp.sense == "min" else -1.0
    c_cols, c_shift = to_cols(sign * cobj)

    if n_art:
        # phase 1: drive the artificial basis out
        for i in range(m):
            if basis[i] >= ncols + n_slack:
                T[-1] -= T[i]
        T[-1, ncols + n_slack : ncols + n_slack + n_art] = 0.0
        status = _pivot_loop(T, basis, allowed)
        if status != "optimal" or T[-1, -1] < -1e-7:
            return LpOutcome("infeasible")
        # pivot any artificial still basic (at zero) out if possible
        for i in range(m):
            if basis[i] >= ncols + n_slack:
                row = T[i, : ncols + n_slack]
                cand = np.flatnonzero(np.abs(row) > 1e-7)
                cand = [j for j in cand if allowed[j]]
                if cand:
                    j = int(cand[0])
                    piv = T[i, j]
                    T[i] /= piv
                    colv = T[:, j].copy()
                    colv[i] = 0.0
                    T -= np.outer(colv, T[i])
                    T[:, j] = 0.0
                    T[i, j] = 1.0
                    basis[i] = j
        for ac in range(ncols + n_slack, ncols + n_slack + n_art):
            allowed[ac] = False

    # phase 2 cost row
    T[-1, :] = 0.0
    T[-1, :ncols] = c_cols
    for i in range(m):
        if T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status = _pivot_loop(T, basis, allowed)
    if status == "unbounded":
        return LpOutcome("unbounded")

    s_vals = np.zeros(width - 1)
    s_vals[basis] = T[:m, -1]
    x = np.empty(n)
    for jv in range(n):
        cols, signs, anchor = col_of[jv]
        x[jv] = anchor + sum(s * s_vals[c] for c, s in zip(cols, signs))
    np.clip(x, lower, upper, out=x)
    return LpOutcome("optimal", value=float(cobj @ x), point=x)


def write_lp_text(lp, fh):
    """Fixed-format LP text export: objective, constraint rows, bounds."""

    def term(c, j):
        return f"{'+' if c >= 0 else '-'} {abs(c):.17g} x{j} "

    fh.write("Minimize\n" if lp.sense == "min" else "Maximize\n")
    obj = lp.objective if lp.objective is not None else np.zeros(lp.n_vars)
    fh.write(" obj: " + "".join(term(c, j) for j, c in enumerate(obj) if c) + "\n")
    fh.write("Subject To\n")
    for i, (row, comp, rhs) in enumerate(zip(lp.rows, lp.comps, lp.rhs)):
        body = "".join(term(c, j) for j, c in enumerate(row) if c) or "0 "
        op = {"<=": "<=", ">=": ">=", "==": "="}[comp]
        fh.write(f" c{i}: {body}{op} {rhs:.17g}\n")
    fh.write("Bounds\n")
    for j, (lb, ub) in enumerate(zip(lp.lower, lp.upper)):
        lo = f"{lb:.17g}" if math.isfinite(lb) else "-inf"
        hi = f"{ub:.17g}" if math.isfinite(ub) else "+inf"
        fh.write(f" {lo} <= x{j} <= {hi}\n")
    fh.write("End\n")
