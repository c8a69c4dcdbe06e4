"""Command-line interface: ``dualdiv <subcommand> ...``.

Samples are plain text, one number per line.  Results go to stdout (or
``--output``) as JSON or CSV; failures exit nonzero with a JSON error object on
stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import harness
from .criterion import DualCriterion
from .divergence import PowerDivergence
from .estimators import SELECTIONS, SearchBox, dphi_estimate, mdpde, mdphi_estimate, mle
from .exceptions import DualDivError
from .models import MODEL_NAMES, get_model
from .robustness import Target, influence_profile
from .testing import TestConfig, test_statistic

DEFAULT_ESTIMATORS = tuple(
    [{"kind": "dphi", "alpha": a, "gamma": g} for a in (1.5, 1.9) for g in (-2.0, -1.5, -1.0, -0.5, -0.1)]
    + [{"kind": "mdpde", "beta": b} for b in (0.1, 0.5, 1.0, 1.5, 2.0, 2.5)]
    + [{"kind": "mle"}]
)
DEFAULT_SIM = {"model": "normal-scale", "model_params": {}, "theta0": 1.0, "n": 100, "n_s": 5000,
               "contamination": None, "estimators": list(DEFAULT_ESTIMATORS)}
FAST_NS = 1000


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _emit(text: str, output: str | None):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(obj, output):
    _emit(json.dumps(obj, indent=2, default=_json_default) + "\n", output)


def read_sample(path: str) -> np.ndarray:
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        vals = []
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                vals.append(float(line))
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: not a number: {line!r}") from exc
    finally:
        if fh is not sys.stdin:
            fh.close()
    if not vals:
        raise CliError(f"{path}: empty sample")
    return np.asarray(vals)


def _model(args):
    params = {}
    if getattr(args, "mean", None) is not None:
        params["mean"] = args.mean
    if getattr(args, "sigma", None) is not None:
        params["sigma"] = args.sigma
    return get_model(args.model, **params)


def _box(args, model, alpha):
    if args.box is None and args.grid_points is None:
        return None
    lo, hi = args.box if args.box is not None else model.default_box(alpha)
    return SearchBox(lo, hi, args.grid_points or 200)


def _add_model(p, with_box=False):
    p.add_argument("--model", choices=MODEL_NAMES, default="normal-scale")
    p.add_argument("--mean", type=float, help="known mean (normal-scale)")
    p.add_argument("--sigma", type=float, help="known standard deviation (normal-location)")
    if with_box:
        p.add_argument("--box", type=float, nargs=2, metavar=("LO", "HI"))
        p.add_argument("--grid-points", type=int)


def _add_output(p, formats=("json",)):
    p.add_argument("--output", "-o", help="output path (default stdout)")
    if len(formats) > 1:
        p.add_argument("--format", choices=formats, default=formats[0])


# -- subcommands ---------------------------------------------------------------

def cmd_estimate(args):
    model = _model(args)
    x = read_sample(args.sample)
    if args.estimator == "dphi":
        c = DualCriterion(PowerDivergence(args.gamma), model, args.alpha)
        res = dphi_estimate(c, x, _box(args, model, args.alpha), args.selection)
        out = res.as_dict() | {"divergence_estimate": res.criterion_value}
    elif args.estimator == "mdphi":
        box = _box(args, model, float(np.median(np.abs(x))) or 1.0)
        out = mdphi_estimate(PowerDivergence(args.gamma), model, x, box).as_dict()
    elif args.estimator == "mdpde":
        out = mdpde(model, args.beta, x, _box(args, model, 1.0) if args.box else None).as_dict()
    else:
        out = mle(model, x, _box(args, model, 1.0) if args.box else None).as_dict()
    _emit_json(out, args.output)


def cmd_influence(args):
    model = _model(args)
    prof = influence_profile(DualCriterion(PowerDivergence(args.gamma), model, args.alpha), args.theta0,
                             Target(args.target))
    xs = np.linspace(args.x_min, args.x_max, args.points)
    vals = prof.influence(xs)
    lines = ["x,IF"] + [f"{a!r},{float(b)!r}" for a, b in zip(xs.tolist(), np.atleast_1d(vals).tolist())]
    _emit("\n".join(lines) + "\n", args.output)


def cmd_are(args):
    model = _model(args)
    prof = influence_profile(DualCriterion(PowerDivergence(args.gamma), model, args.alpha), args.theta0)
    ges = prof.gross_error_sensitivity()
    _emit_json({"model": args.model, "gamma": args.gamma, "alpha": args.alpha, "theta0": args.theta0,
                "S": prof.denominator_S, "asymptotic_variance": prof.asymptotic_variance, "are": prof.are,
                "gross_error_sensitivity": ges.value if math.isfinite(ges.value) else "inf",
                "classification": ges.classification.value}, args.output)


def cmd_test(args):
    model = _model(args)
    x = read_sample(args.sample)
    cfg = TestConfig(DualCriterion(PowerDivergence(args.gamma), model, args.alpha), args.theta0,
                     args.level, x.size, args.selection)
    _emit_json(test_statistic(cfg, x).as_dict(), args.output)


def _parse_contamination(text):
    if text is None or text == "none":
        return None
    if isinstance(text, dict):
        d = dict(text)
        mode = d.pop("mode")
        return harness.FixedCount(**d) if mode == "fixed" else harness.Mixture(**d)
    parts = text.split(":")
    try:
        if parts[0] == "fixed":
            return harness.FixedCount(int(parts[1]), *(float(p) for p in parts[2:3]))
        if parts[0] == "mixture":
            return harness.Mixture(*(float(p) for p in parts[1:4]))
    except (IndexError, ValueError) as exc:
        raise CliError(f"bad contamination spec {text!r}") from exc
    raise CliError(f"bad contamination spec {text!r}; use fixed:K[:X] or mixture:EPS[:X[:DELTA]]")


def _parse_estimator(text: str) -> dict:
    parts = text.split(":")
    try:
        if parts[0] == "dphi":
            return {"kind": "dphi", "gamma": float(parts[1]), "alpha": float(parts[2])}
        if parts[0] == "mdpde":
            return {"kind": "mdpde", "beta": float(parts[1])}
        if parts[0] == "mle" and len(parts) == 1:
            return {"kind": "mle"}
    except (IndexError, ValueError) as exc:
        raise CliError(f"bad estimator spec {text!r}") from exc
    raise CliError(f"bad estimator spec {text!r}; use dphi:GAMMA:ALPHA, mdpde:BETA or mle")


def _sim_config(args) -> dict:
    conf = dict(DEFAULT_SIM)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            conf.update(json.load(fh))
    if args.fast:
        conf["n_s"] = FAST_NS
    for key in ("n", "n_s", "theta0", "model"):
        v = getattr(args, key, None)
        if v is not None:
            conf[key] = v
    if args.contamination is not None:
        conf["contamination"] = args.contamination
    if getattr(args, "estimator", None):
        conf["estimators"] = [_parse_estimator(e) for e in args.estimator]
    return conf


def _mc_config(conf: dict, seed: int, threads, estimators=()) -> harness.McConfig:
    model = get_model(conf["model"], **conf.get("model_params", {}))
    return harness.McConfig(model, float(conf["theta0"]), int(conf["n"]), int(conf["n_s"]), seed,
                            tuple(estimators), _parse_contamination(conf.get("contamination")), threads)


def cmd_simulate(args):
    conf = _sim_config(args)
    specs = [harness.EstimatorSpec.from_dict(d) for d in conf["estimators"]]
    cfg = _mc_config(conf, args.seed, args.threads, specs)
    harness.report(harness.run_mc(cfg), args.format, args.output or "-")


def cmd_level_curve(args):
    conf = _sim_config(args)
    cfg = _mc_config(conf, args.seed, args.threads)
    model = cfg.model
    test = TestConfig(DualCriterion(PowerDivergence(args.gamma), model, args.alpha), cfg.theta0,
                      0.05, cfg.n, args.selection)
    pts = harness.level_curve(cfg, test, args.levels or harness.DEFAULT_LEVELS)
    harness.report(pts, args.format, args.output or "-")


def cmd_adaptive_alpha(args):
    model = _model(args)
    x = read_sample(args.sample)
    res = harness.adaptive_alpha(PowerDivergence(args.gamma), model, x, args.alphas, selection=args.selection)
    _emit_json(res.as_dict(), args.output)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualdiv", description="Dual phi-divergence estimation, robustness and tests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="point estimate from a sample file")
    _add_model(e, with_box=True)
    e.add_argument("sample", help="sample file, one number per line ('-' for stdin)")
    e.add_argument("--estimator", choices=("dphi", "mdphi", "mle", "mdpde"), default="dphi")
    e.add_argument("--gamma", type=float, default=-0.5)
    e.add_argument("--alpha", type=float, default=1.5)
    e.add_argument("--beta", type=float, default=0.1)
    e.add_argument("--selection", choices=SELECTIONS, default="global")
    _add_output(e)
    e.set_defaults(func=cmd_estimate)

    i = sub.add_parser("influence", help="influence function curve as CSV (x, IF)")
    _add_model(i)
    i.add_argument("--gamma", type=float, required=True)
    i.add_argument("--alpha", type=float, required=True)
    i.add_argument("--theta0", type=float, default=1.0)
    i.add_argument("--target", choices=[t.value for t in Target], default=Target.ESTIMATOR_T.value)
    i.add_argument("--x-min", type=float, default=-10.0)
    i.add_argument("--x-max", type=float, default=10.0)
    i.add_argument("--points", type=int, default=401)
    _add_output(i)
    i.set_defaults(func=cmd_influence)

    a = sub.add_parser("are", help="asymptotic variance, ARE and gross-error sensitivity")
    _add_model(a)
    a.add_argument("--gamma", type=float, required=True)
    a.add_argument("--alpha", type=float, required=True)
    a.add_argument("--theta0", type=float, default=1.0)
    _add_output(a)
    a.set_defaults(func=cmd_are)

    t = sub.add_parser("test", help="divergence test of theta = theta0")
    _add_model(t)
    t.add_argument("sample")
    t.add_argument("--gamma", type=float, required=True)
    t.add_argument("--alpha", type=float, required=True)
    t.add_argument("--theta0", type=float, default=1.0)
    t.add_argument("--level", type=float, default=0.05)
    t.add_argument("--selection", choices=SELECTIONS, default="pilot")
    _add_output(t)
    t.set_defaults(func=cmd_test)

    for name, func, helptext in (("simulate", cmd_simulate, "Monte Carlo bias/MSE table"),
                                 ("level-curve", cmd_level_curve, "empirical test levels")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--seed", type=int, required=True, help="base seed (mandatory)")
        s.add_argument("--config", help="JSON config file; flags override it")
        s.add_argument("--model", choices=MODEL_NAMES)
        s.add_argument("--theta0", type=float)
        s.add_argument("--n", type=int)
        s.add_argument("--ns", dest="n_s", type=int)
        s.add_argument("--fast", action="store_true", help=f"n_s = {FAST_NS}")
        s.add_argument("--contamination", help="none, fixed:K[:X] or mixture:EPS[:X[:DELTA]]")
        s.add_argument("--threads", type=int, help="worker processes (default DUALDIV_THREADS, 0 = all CPUs)")
        _add_output(s, ("csv", "json"))
        s.set_defaults(func=func)
        if name == "simulate":
            s.add_argument("--estimator", action="append", help="dphi:GAMMA:ALPHA, mdpde:BETA or mle (repeatable)")
        else:
            s.add_argument("--gamma", type=float, required=True)
            s.add_argument("--alpha", type=float, required=True)
            s.add_argument("--levels", type=float, nargs="+")
            s.add_argument("--selection", choices=SELECTIONS, default="pilot")

    d = sub.add_parser("adaptive-alpha", help="escort minimising the leave-one-out maximal bias")
    _add_model(d)
    d.add_argument("sample")
    d.add_argument("--gamma", type=float, required=True)
    d.add_argument("--alphas", type=float, nargs="+", required=True)
    d.add_argument("--selection", choices=SELECTIONS, default="pilot")
    _add_output(d)
    d.set_defaults(func=cmd_adaptive_alpha)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (CliError, DualDivError, ValueError, OSError, KeyError, TypeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
