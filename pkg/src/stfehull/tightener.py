"""LP cutting-plane tightening of per-neuron preactivation bounds.

For each target neuron the relaxation keeps every layer below it: affine rows,
plus the linear pieces of the exact one-dimensional activation envelopes as
initial over/under-estimators, with variable bounds carrying the interval caps.
Rounds then separate the incumbent against each earlier neuron's graph hull  in
"env" mode (full-dimensional envelopes) or "hest" mode (one-dimensional
composition estimators) and re-solve until the bound stalls, the round budget
runs out, or no cut is violated.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .activations import ConcaveEnvelope1D, ConvexEnvelope1D, Interval
from .envelope import LOWER_BOUNDS_Y, RawInstance, SeparationOracle
from .lp import LinearProgram, solve
from .network import interval_propagate, postactivation_box

__all__ = [
    "RelaxationState",
    "NeuronBound",
    "BoundsReport",
    "InconsistentBoundsError",
    "build_base_relaxation",
    "cut_round",
    "tighten_neuron",
    "tighten_all",
    "MAX_ROUNDS",
    "STALL_TOL",
]

MAX_ROUNDS = 20
STALL_TOL = 1e-5
DEGENERATE_BASELINE = 1e-12


class InconsistentBoundsError(RuntimeError):
    """The relaxation went infeasible, i.e. upstream bounds were invalid."""


@dataclass
class RelaxationState:
    """One target neuron's LP relaxation plus the bookkeeping cuts need."""

    lp: LinearProgram
    net: object
    target_layer: int
    target_neuron: int
    direction: str
    input_vars: list
    a_vars: dict  # layer -> list of variable ids
    h_vars: dict  # layer -> list of variable ids
    target_var: int
    oracles: list  # (layer, neuron, SeparationOracle)
    incumbent: np.ndarray | None = None
    cuts: list = field(default_factory=list)

    def prev_block(self, layer):
        return self.input_vars if layer == 0 else self.h_vars[layer - 1]


def _activation_rows(lp, a_var, h_var, act, pre_iv):
    """Initial estimator rows linking one neuron's pre/post variables.

    Upper side: the linear pieces of the concave envelope (leading secant and
    any affine function pieces); lower side: pieces of the convex envelope.
    Constant caps/floors are already carried by the h variable's bounds.
    """
    n = lp.n_vars
    if pre_iv.width == 0.0:
        return
    for slope, intercept in ConcaveEnvelope1D(act, pre_iv).linear_pieces():
        row = np.zeros(n)
        row[h_var] = 1.0
        row[a_var] = -slope
        lp.add_constraint(row, "<=", intercept)
    for slope, intercept in ConvexEnvelope1D(act, pre_iv).linear_pieces():
        row = np.zeros(n)
        row[h_var] = 1.0
        row[a_var] = -slope
        lp.add_constraint(row, ">=", intercept)


def build_base_relaxation(net, bounds, layer, neuron, direction="lower"):
    """Base LP over all variables up to the target neuron's preactivation.

    ``bounds`` are valid preactivation intervals for layers below ``layer``
    (0-based hidden layer index); ``direction`` picks the objective sense.
    """
    if direction not in ("lower", "upper"):
        raise ValueError(f"direction must be 'lower' or 'upper': {direction!r}")
    for k in range(layer):
        if np.any(bounds.pre[k][:, 0] > bounds.pre[k][:, 1]):
            raise InconsistentBoundsError(f"layer {k} has an empty bound interval")

    lp = LinearProgram()
    input_vars = lp.add_variables(net.input_box[:, 0], net.input_box[:, 1])
    post_boxes = {}
    a_vars, h_vars = {}, {}
    for k in range(layer):
        pre = bounds.pre[k]
        a_vars[k] = lp.add_variables(pre[:, 0], pre[:, 1])
        post = postactivation_box(net.layers[k], pre)
        post_boxes[k] = post
        h_vars[k] = lp.add_variables(post[:, 0], post[:, 1])
    target_var = lp.add_variable()

    def affine_rows(k, out_vars, rows_sel=None):
        W, b = net.layers[k].W, net.layers[k].b
        prev = input_vars if k == 0 else h_vars[k - 1]
        sel = range(W.shape[0]) if rows_sel is None else rows_sel
        for j_out, j_row in zip(out_vars, sel):
            row = np.zeros(lp.n_vars)
            row[j_out] = -1.0
            row[list(prev)] = W[j_row]
            lp.add_constraint(row, "==", -b[j_row])

    for k in range(layer):
        affine_rows(k, a_vars[k])
        act = net.layers[k].act
        for j in range(len(a_vars[k])):
            _activation_rows(
                lp, a_vars[k][j], h_vars[k][j], act, Interval(*bounds.pre[k][j])
            )
    affine_rows(layer, [target_var], [neuron])

    obj = np.zeros(lp.n_vars)
    obj[target_var] = 1.0
    lp.set_objective(obj, "min" if direction == "lower" else "max")

    oracles = []
    for k in range(layer):
        box = net.input_box if k == 0 else post_boxes[k - 1]
        for eta in range(net.layers[k].size):
            raw = RawInstance(net.layers[k].W[eta], net.layers[k].b[eta], net.layers[k].act, box)
            oracles.append((k, eta, SeparationOracle(raw)))
    return RelaxationState(
        lp=lp,
        net=net,
        target_layer=layer,
        target_neuron=neuron,
        direction=direction,
        input_vars=input_vars,
        a_vars=a_vars,
        h_vars=h_vars,
        target_var=target_var,
        oracles=oracles,
    )


def cut_round(state, mode="env"):
    """Separate the incumbent against every earlier neuron's graph, adding at
    most one cut per neuron; returns the number of cuts added."""
    if state.incumbent is None:
        raise RuntimeError("no incumbent: solve the relaxation first")
    point = state.incumbent
    added = 0
    for k, eta, oracle in state.oracles:
        block = state.prev_block(k)
        x_hat = point[list(block)]
        y_hat = point[state.h_vars[k][eta]]
        cut = oracle.query(x_hat, y_hat, mode=mode)
        if cut is None:
            continue
        row = np.zeros(state.lp.n_vars)
        row[list(block)] = cut.normal[:-1]
        row[state.h_vars[k][eta]] = cut.normal[-1]
        comp = ">=" if cut.sense == LOWER_BOUNDS_Y else "<="
        state.lp.add_constraint(row, comp, cut.offset)
        state.cuts.append((k, eta, cut))
        added += 1
    return added


def _improvement(direction, initial, tightened):
    delta = tightened - initial if direction == "lower" else initial - tightened
    if abs(initial) < DEGENERATE_BASELINE:
        return delta, True
    return delta / abs(initial), False


@dataclass
class NeuronBound:
    layer: int  # 1-based hidden layer
    neuron: int
    direction: str
    initial: float
    tightened: float
    improvement: float
    rounds: int
    cuts: int
    stalled: bool
    improvement_absolute: bool = False  # |initial| below threshold; not in CSV


@dataclass
class BoundsReport:
    rows: list

    CSV_FIELDS = (
        "layer",
        "neuron",
        "direction",
        "initial",
        "tightened",
        "improvement",
        "rounds",
        "cuts",
        "stalled",
    )

    def write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(self.CSV_FIELDS)
        for r in self.rows:
            writer.writerow(
                [
                    r.layer,
                    r.neuron,
                    r.direction,
                    format(r.initial, ".17g"),
                    format(r.tightened, ".17g"),
                    format(r.improvement, ".17g"),
                    r.rounds,
                    r.cuts,
                    "true" if r.stalled else "false",
                ]
            )

    def to_csv(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @classmethod
    def read_csv(cls, fh):
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != cls.CSV_FIELDS:
            raise ValueError(f"unexpected CSV header: {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(
                NeuronBound(
                    layer=int(rec["layer"]),
                    neuron=int(rec["neuron"]),
                    direction=rec["direction"],
                    initial=float(rec["initial"]),
                    tightened=float(rec["tightened"]),
                    improvement=float(rec["improvement"]),
                    rounds=int(rec["rounds"]),
                    cuts=int(rec["cuts"]),
                    stalled=rec["stalled"] == "true",
                )
            )
        return cls(rows)

    def by_key(self):
        return {(r.layer, r.neuron, r.direction): r for r in self.rows}


def tighten_neuron(
    net,
    bounds,
    layer,
    neuron,
    direction,
    mode="env",
    max_rounds=MAX_ROUNDS,
    stall_tol=STALL_TOL,
    solver=solve,
    baseline=None,
):
    """Alternate solve / cut rounds for one bound; returns (bound, report row).

    The bound is the final LP optimum, valid because every row of the
    relaxation is valid for the true network trace set.  ``baseline`` is the
    initial bound the improvement is measured against (defaults to the bound
    currently recorded in ``bounds``).
    """
    state = build_base_relaxation(net, bounds, layer, neuron, direction)
    out = solver(state.lp)
    if out.status == "infeasible":
        raise InconsistentBoundsError("base relaxation infeasible")
    if out.status != "optimal":
        raise RuntimeError(f"unexpected LP status {out.status}")
    prev = out.value
    rounds = 0
    total_cuts = 0
    stalled = False
    while rounds < max_rounds:
        state.incumbent = out.point
        added = cut_round(state, mode=mode)
        if added == 0:
            break
        rounds += 1
        total_cuts += added
        out = solver(state.lp)
        if out.status == "infeasible":
            raise InconsistentBoundsError("relaxation infeasible after cuts")
        if out.status != "optimal":
            raise RuntimeError(f"unexpected LP status {out.status}")
        if abs(out.value - prev) <= stall_tol:
            prev = out.value
            stalled = True
            break
        prev = out.value
    bound = prev
    if baseline is None:
        col = 0 if direction == "lower" else 1
        baseline = float(bounds.pre[layer][neuron, col])
    imp, absolute = _improvement(direction, baseline, bound)
    row = NeuronBound(
        layer=layer + 1,
        neuron=neuron,
        direction=direction,
        initial=baseline,
        tightened=bound,
        improvement=imp,
        rounds=rounds,
        cuts=total_cuts,
        stalled=stalled,
        improvement_absolute=absolute,
    )
    return bound, row


def tighten_all(net, mode="env", threads=1, max_rounds=MAX_ROUNDS, solver=solve):
    """Sweep every hidden neuron, both bound directions, layer by layer.

    The first hidden layer's preactivations are affine in the box-constrained
    input, where interval arithmetic is already exact, so those rows are
    reported untightened.  Deeper layers consume the tightened bounds (and the
    activation-image boxes re-derived from them).  Deterministic for a given
    network and mode; threads only parallelize within a layer.
    """
    base = interval_propagate(net)
    bounds = base.copy()
    rows = []
    for k in range(net.n_hidden):
        size = net.layers[k].size
        if k == 0:
            for v in range(size):
                for direction, col in (("lower", 0), ("upper", 1)):
                    init = float(base.pre[0][v, col])
                    rows.append(
                        NeuronBound(
                            layer=1,
                            neuron=v,
                            direction=direction,
                            initial=init,
                            tightened=init,
                            improvement=0.0,
                            rounds=0,
                            cuts=0,
                            stalled=False,
                            improvement_absolute=abs(init) < DEGENERATE_BASELINE,
                        )
                    )
            continue
        tasks = [(v, d) for v in range(size) for d in ("lower", "upper")]

        def run(task, _k=k):
            v, direction = task
            col = 0 if direction == "lower" else 1
            return tighten_neuron(
                net,
                bounds,
                _k,
                v,
                direction,
                mode=mode,
                max_rounds=max_rounds,
                solver=solver,
                baseline=float(base.pre[_k][v, col]),
            )
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(run, tasks))
        else:
            results = [run(t) for t in tasks]
        new_pre = bounds.pre[k].copy()
        for (v, direction), (bound, row) in zip(tasks, results):
            col = 0 if direction == "lower" else 1
            new_pre[v, col] = bound
            rows.append(row)
        bounds.pre[k] = new_pre
        if k + 1 < len(net.layers):
            interval_propagate(net, from_layer=k + 1, bounds=bounds)
    return BoundsReport(rows)
