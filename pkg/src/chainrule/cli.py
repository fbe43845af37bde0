"""Command-line front end: ``chainrule {scan,heatmap,check,divergence,stein}``.

Every output starts with ``#`` comment lines recording the version and the
full run configuration. Numbers are written with 10 significant digits, so a
repeated run with the same configuration produces byte-identical output
whatever ``--workers`` is.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from typing import Iterator, TextIO

import numpy as np

from . import __version__
from . import chain_checks as cc
from . import channel_div as cd
from .channels import Channel, parse_channel

BASES = {"2": 2.0, "e": math.e}
DEFAULT_E = "gad:0.3:0"
DEFAULT_F = "gad:0.5:0.9"


class UsageError(Exception):
    """Bad user input; reported on stderr with exit status 2."""


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.10g}"


def _config(args: argparse.Namespace) -> dict:
    skip = {"func", "out", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _header(args: argparse.Namespace) -> list[str]:
    cfg = _config(args)
    return [f"# chainrule {__version__}",
            "# " + " ".join(f"{k}={v}" for k, v in cfg.items())]


@contextmanager
def _output(path: str | None) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _channel(spec: str, flag: str) -> Channel:
    try:
        return parse_channel(spec)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        raise UsageError(f"{flag}: {exc}") from None


def _pair(args) -> tuple[Channel, Channel]:
    e = _channel(args.channel_e, "--channel-e")
    f = _channel(args.channel_f, "--channel-f")
    if (e.dim_in, e.dim_out) != (f.dim_in, f.dim_out):
        raise UsageError(f"--channel-f: dimensions ({f.dim_in}->{f.dim_out}) differ from "
                         f"--channel-e ({e.dim_in}->{e.dim_out})")
    return e, f


def _ansatz(e: Channel, f: Channel, args) -> cd.InputAnsatz:
    base = cd._default_ansatz(e, f)
    if base.kind == "diag-1param":
        return cd.InputAnsatz("diag-1param", resolution=args.resolution)
    return cd.InputAnsatz("general-multistart", restarts=args.restarts, seed=args.seed)


def cmd_scan(args) -> int:
    e, f = _pair(args)
    if e.dim_in != 2:
        raise UsageError("--channel-e: scan needs qubit-input channels")
    base = BASES[args.log_base]
    ps, vals = cd.scan(e, f, args.resolution, base=base)
    lines = _header(args) + ["p,value"]
    lines += [f"{fmt(p)},{fmt(v)}" for p, v in zip(ps, vals)]
    try:
        rep = cd.channel_rel_entropy(e, f, cd.InputAnsatz("diag-1param", args.resolution), base=base)
        lines.append(f"# optimizer,{fmt(rep.argmax_state[0, 0].real)},{fmt(rep.value)}")
    except ValueError as exc:
        # the one-parameter family is only an optimizer for Z-covariant pairs
        lines.append(f"# optimizer,unavailable,{exc}")
    _write(args, lines)
    return 0


def cmd_heatmap(args) -> int:
    grid = np.round(np.linspace(args.gamma_min, args.gamma_max, args.grid_points), 12)
    gaps = cd.heatmap(grid, grid, beta1=args.beta1, beta2=args.beta2,
                      resolution=args.resolution, base=BASES[args.log_base], workers=args.workers)
    lines = _header(args) + ["gamma1,gamma2,gap"]
    for i, g1 in enumerate(grid):
        for j, g2 in enumerate(grid):
            lines.append(f"{fmt(g1)},{fmt(g2)},{fmt(gaps[i, j])}")
    _write(args, lines)
    return 0


def cmd_check(args) -> int:
    names = args.suites.split(",") if args.suites else None
    try:
        results = cc.run_suites(args.seed, names, workers=args.workers)
    except ValueError as exc:
        raise UsageError(f"--suites: {exc}") from None
    lines = [json.dumps({"config": _config(args), "version": __version__}, sort_keys=True)]
    failed = []
    for suite, res in results.items():
        for r in res:
            lines.append(json.dumps(r.to_json(), sort_keys=True))
            if not r.passed:
                failed.append((suite, r))
        n_fail = sum(not r.passed for r in res)
        print(f"{suite}: {len(res) - n_fail}/{len(res)} passed", file=sys.stderr)
    _write(args, lines)
    for suite, r in failed:
        inst = {k: v for k, v in r.instance.items() if k != "data"}
        print(f"FAILED {suite}/{r.name}: {json.dumps(inst, sort_keys=True)}", file=sys.stderr)
    return 1 if failed else 0


def cmd_divergence(args) -> int:
    e, f = _pair(args)
    base = BASES[args.log_base]
    if args.kind == "dmax":
        value = cd.channel_dmax(e, f, base=base)
        out = {"kind": "dmax", "value": fmt(value), "certified": True}
    else:
        ansatz = _ansatz(e, f, args)
        fn = cd.channel_rel_entropy if args.kind == "rel" else cd.bs_channel_rel_entropy
        rep = fn(e, f, ansatz, base=base)
        state = rep.argmax_state
        out = {
            "kind": args.kind,
            "value": fmt(rep.value),
            "certified": rep.certified,
            "iterations": rep.iterations,
            "ansatz": {"kind": ansatz.kind, "resolution": ansatz.resolution,
                       "restarts": ansatz.restarts, "seed": ansatz.seed},
            "argmax_state": [[[fmt(z.real), fmt(z.imag)] for z in row] for row in state],
        }
    lines = _header(args) + [json.dumps(out, sort_keys=True)]
    _write(args, lines)
    return 0


def cmd_stein(args) -> int:
    e, f = _pair(args)
    base = BASES[args.log_base]
    if args.p is not None:
        rho_r = np.diag([args.p, 1.0 - args.p])
    else:
        rho_r = cd.channel_rel_entropy(e, f, _ansatz(e, f, args), base=base).argmax_state
    try:
        rates, single = cd.stein_rates(e, f, rho_r, args.eps, args.n_max, base=base)
    except ValueError as exc:
        raise UsageError(f"--n-max: {exc}") from None
    lines = _header(args) + ["n,rate"]
    lines += [f"{n},{fmt(r)}" for n, r in rates]
    lines.append(f"# single_letter,{fmt(single)}")
    _write(args, lines)
    return 0


def _write(args, lines: list[str]) -> None:
    with _output(args.out) as fh:
        fh.write("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-base", choices=sorted(BASES), default="2")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--workers", type=int, default=1)

    channels = argparse.ArgumentParser(add_help=False)
    channels.add_argument("--channel-e", default=DEFAULT_E,
                          help="gad:G:B, identity:D, replacer:<state.json> or a channel JSON file")
    channels.add_argument("--channel-f", default=DEFAULT_F)

    p = argparse.ArgumentParser(prog="chainrule", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan", parents=[common, channels], help="D over rho_R = diag(p, 1-p)")
    s.add_argument("--resolution", type=int, default=1001)
    s.set_defaults(func=cmd_scan)

    h = sub.add_parser("heatmap", parents=[common], help="two-copy gap over a GAD grid")
    h.add_argument("--resolution", type=int, default=101,
                   help="two-copy grid points per unit (101: step 0.01)")
    h.add_argument("--grid-points", type=int, default=9)
    h.add_argument("--gamma-min", type=float, default=0.1)
    h.add_argument("--gamma-max", type=float, default=0.9)
    h.add_argument("--beta1", type=float, default=0.0)
    h.add_argument("--beta2", type=float, default=0.9)
    h.set_defaults(func=cmd_heatmap)

    c = sub.add_parser("check", parents=[common], help="run the chain-rule property suites")
    c.add_argument("--suites", help=f"comma-separated subset of {','.join(cc.SUITES)}")
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("divergence", parents=[common, channels], help="one channel divergence")
    d.add_argument("--kind", choices=["rel", "bs", "dmax"], default="rel")
    d.add_argument("--resolution", type=int, default=1001)
    d.add_argument("--restarts", type=int, default=32)
    d.set_defaults(func=cmd_divergence)

    t = sub.add_parser("stein", parents=[common, channels], help="finite-n Stein rates")
    t.add_argument("--eps", type=float, default=0.05)
    t.add_argument("--n-max", type=int, default=5)
    t.add_argument("--p", type=float, help="input diag(p, 1-p); default: the optimizer")
    t.add_argument("--resolution", type=int, default=1001)
    t.add_argument("--restarts", type=int, default=32)
    t.set_defaults(func=cmd_stein)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
