"""Command-line interface.

Subcommands: ``envelope eval``, ``separate``, ``tighten``, ``gap-report``,
``make-net``, ``surface``.  All numeric output is printed with 17 significant
digits so golden files are stable across platforms.  Exit codes: 0 success,
1 usage error, 2 input-data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import network as net_mod
from .activations import ACTIVATION_TAGS, EnvelopeError, make_activation
from .envelope import (
    RawInstance,
    classify,
    conc_env,
    conc_env_supergrad,
    h_overestimator,
    normalize,
    separate,
)
from .gapstats import GapReport, gap_report
from .lp import MalformedLpError
from .network import MalformedNetworkError, NetworkDimensionError, UnknownActivationError
from .tightener import InconsistentBoundsError, tighten_all

__all__ = ["run", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _g17(x):
    return format(float(x), ".17g")


def _parse_floats(text):
    try:
        return np.array([float(tok) for tok in text.split(",") if tok != ""])
    except ValueError:
        raise _UsageError(f"expected comma-separated numbers: {text!r}") from None


def _parse_box(text, n):
    if text is None:
        return np.column_stack([np.zeros(n), np.ones(n)])
    rows = []
    for part in text.split(";"):
        pair = _parse_floats(part)
        if pair.shape != (2,):
            raise _UsageError(f"box coordinate must be 'lo,hi': {part!r}")
        rows.append(pair)
    if len(rows) != n:
        raise _UsageError(f"box has {len(rows)} coordinates, expected {n}")
    return np.array(rows)


def _parse_act(tag, params_text):
    params = {}
    if params_text:
        for item in params_text.split(","):
            if "=" not in item:
                raise _UsageError(f"activation parameter must be name=value: {item!r}")
            name, value = item.split("=", 1)
            try:
                params[name.strip()] = float(value)
            except ValueError:
                raise _UsageError(f"bad activation parameter value: {item!r}") from None
    return make_activation(tag, **params)


def _instance_from_args(args):
    w = _parse_floats(args.w)
    box = _parse_box(args.box, len(w))
    act = _parse_act(args.act, args.act_params)
    return RawInstance(w, args.b, act, box)


def _add_instance_flags(p):
    p.add_argument("-w", required=True, help="comma-separated weights")
    p.add_argument("-b", type=float, required=True, help="bias")
    p.add_argument("--act", required=True, choices=ACTIVATION_TAGS)
    p.add_argument("--act-params", default=None, help="e.g. alpha=1.5 or eps=0.1")
    p.add_argument("--box", default=None, help="per-coordinate 'lo,hi;lo,hi;...' (default unit box)")


def _build_parser():
    p = _Parser(prog="stfehull", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    env = sub.add_parser("envelope", help="envelope queries")
    env_sub = env.add_subparsers(dest="subcommand", required=True)
    ev = env_sub.add_parser("eval", help="envelope value and supergradient at a point")
    _add_instance_flags(ev)
    ev.add_argument("point", help="comma-separated point in the box")

    sp = sub.add_parser("separate", help="hull membership / cutting plane at a point")
    _add_instance_flags(sp)
    sp.add_argument("--point", required=True)
    sp.add_argument("-y", type=float, required=True)
    sp.add_argument("--mode", choices=("env", "hest"), default="env")

    tg = sub.add_parser("tighten", help="cutting-plane activation-bound tightening")
    tg.add_argument("--net", required=True, help=".nn.json network file")
    tg.add_argument("--mode", choices=("env", "hest"), default="env")
    tg.add_argument("--out", required=True, help="CSV output path")
    tg.add_argument("--threads", type=int, default=None)

    gp = sub.add_parser("gap-report", help="Monte Carlo total-gap estimate")
    _add_instance_flags(gp)
    gp.add_argument("--samples", type=int, required=True)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--format", choices=("json", "csv"), default="json")

    mk = sub.add_parser("make-net", help="write a reproducible random network")
    mk.add_argument("--layers", required=True, help="comma-separated sizes incl. input/output")
    mk.add_argument("--act", required=True, choices=ACTIVATION_TAGS)
    mk.add_argument("--act-params", default=None)
    mk.add_argument("--seed", type=int, required=True)
    mk.add_argument("--out", required=True, help="output .nn.json path")

    sf = sub.add_parser("surface", help="CSV grid of f, h, envelope, region for a 2-D instance")
    _add_instance_flags(sf)
    sf.add_argument("--grid", type=int, default=41)
    sf.add_argument("--out", default=None, help="CSV path (default stdout)")
    return p


def _cmd_envelope_eval(args, out):
    raw = _instance_from_args(args)
    x = _parse_floats(args.point)
    inst, remap = normalize(raw)
    t = remap.to_unit(x)
    value = conc_env(inst, t)
    g = conc_env_supergrad(inst, t)
    alpha, _ = remap.map_gradient(g)
    doc = {
        "value": value,
        "supergradient": [float(a) for a in alpha],
        "function": raw.value(x),
        "h_overestimator": h_overestimator(inst, t),
    }
    out.write(json.dumps(doc, sort_keys=True, default=float) + "\n")
    return EXIT_OK


def _cmd_separate(args, out):
    raw = _instance_from_args(args)
    x = _parse_floats(args.point)
    cut = separate(raw, x, args.y, mode=args.mode)
    if cut is None:
        out.write(json.dumps({"inside": True}) + "\n")
    else:
        doc = {
            "inside": False,
            "sense": cut.sense,
            "normal": [float(v) for v in cut.normal],
            "offset": cut.offset,
            "violation": cut.violation,
        }
        out.write(json.dumps(doc, sort_keys=True, default=float) + "\n")
    return EXIT_OK


def _cmd_tighten(args, out):
    net = net_mod.load_json(args.net)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("STFE_HULL_THREADS", "1"))
    report = tighten_all(net, mode=args.mode, threads=max(1, threads))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        report.write_csv(fh)
    out.write(f"wrote {len(report.rows)} rows to {args.out}\n")
    return EXIT_OK


def _cmd_gap_report(args, out):
    raw = _instance_from_args(args)
    rep = gap_report(raw, args.samples, args.seed)
    if args.format == "json":
        out.write(rep.to_json() + "\n")
    else:
        out.write(",".join(GapReport.CSV_FIELDS) + "\n")
        out.write(rep.to_csv_row() + "\n")
    return EXIT_OK


def _cmd_make_net(args, out):
    sizes = [int(v) for v in _parse_floats(args.layers)]
    params = {}
    if args.act_params:
        params = {
            kv.split("=")[0].strip(): float(kv.split("=")[1]) for kv in args.act_params.split(",")
        }
    net = net_mod.make_random_net(sizes, args.act, args.seed, act_params=params)
    net_mod.save_json(net, args.out)
    out.write(f"wrote {args.out}\n")
    return EXIT_OK


def _cmd_surface(args, out):
    raw = _instance_from_args(args)
    if raw.n != 2:
        raise _UsageError("surface needs a 2-D instance")
    inst, remap = normalize(raw)
    n = args.grid
    lines = ["x1,x2,f,h,conc,region"]
    for i in range(n):
        for j in range(n):
            x = np.array(
                [
                    raw.box[0, 0] + (raw.box[0, 1] - raw.box[0, 0]) * i / (n - 1),
                    raw.box[1, 0] + (raw.box[1, 1] - raw.box[1, 0]) * j / (n - 1),
                ]
            )
            t = remap.to_unit(x)
            label = classify(inst, t)
            region = "R" + label.kind if label.index is None else f"R{label.index + 1}"
            lines.append(
                ",".join(
                    [
                        _g17(x[0]),
                        _g17(x[1]),
                        _g17(raw.value(x)),
                        _g17(h_overestimator(inst, t)),
                        _g17(conc_env(inst, t)),
                        region,
                    ]
                )
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        out.write(f"wrote {args.out}\n")
    else:
        out.write(text)
    return EXIT_OK


_COMMANDS = {
    ("envelope", "eval"): _cmd_envelope_eval,
    ("separate", None): _cmd_separate,
    ("tighten", None): _cmd_tighten,
    ("gap-report", None): _cmd_gap_report,
    ("make-net", None): _cmd_make_net,
    ("surface", None): _cmd_surface,
}


def run(argv, out=None, err=None):
    """Parse and execute; returns the process exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = _COMMANDS[(args.command, getattr(args, "subcommand", None))]
        return handler(args, out)
    except _UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (EnvelopeError, MalformedLpError, InconsistentBoundsError, ArithmeticError) as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (
        MalformedNetworkError,
        NetworkDimensionError,
        UnknownActivationError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
