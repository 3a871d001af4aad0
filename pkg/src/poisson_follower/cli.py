"""Command-line front end: ``poisson-follower <command> [options]``.

Every command is deterministic given ``--seed``.  With ``--out PATH`` the
artifact goes to PATH and a run manifest to ``PATH.manifest.json``; without
it the artifact goes to stdout.  Exit status is 0 on success, 2 on invalid
arguments and 1 on runtime failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import os
import sys

import numpy as np

from . import asymptotics, frequency_integrals as fi, percolation_diag as pd
from .dynamics import run
from .errors import FollowerError, InsufficientData, InvalidArgument, Unsupported
from .export import (SCHEMAS, RunManifest, configuration_envelope, dump_json,
                     read_key_values, trajectory_summary, write_configuration_csv,
                     write_trajectory_csv)
from .follower_graph import build_graph
from .frequency_stats import TABLE_KINDS, estimate_frequencies, write_estimates
from .phenomena import PhenomenonKind, detect_all, write_events_csv
from .sampler import ExperimentPlan, Window, core_region, sample_poisson

COMMANDS = ("sample", "simulate", "detect", "frequencies", "integrate", "stable", "percolation")


class UsageError(Exception):
    pass


def parse_window(text: str) -> tuple:
    try:
        w, h = (float(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like WxH, got {text!r}") from None
    if not (w > 0 and h > 0):
        raise argparse.ArgumentTypeError("window sides must be positive")
    return w, h


def parse_kinds(text: str) -> list:
    try:
        return [PhenomenonKind.parse(k) for k in text.split(",") if k.strip()]
    except Unsupported as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="poisson-follower",
                                  description="Poisson follower dynamics toolkit.")
    top.add_argument("--config", help="file of key = value defaults (flags override)")
    sub = top.add_subparsers(dest="command", required=True, metavar="command")

    def command(name, help, window="142x142", fmt="csv", steps=1, replicas=40):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="file of key = value defaults (flags override)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--intensity", type=float, default=1.0)
        p.add_argument("--window", type=parse_window, default=window, help="WxH")
        p.add_argument("--torus", action="store_true", help="periodic boundary")
        p.add_argument("--margin", type=float, default=None,
                       help="guard margin (default 5/sqrt(intensity))")
        p.add_argument("--steps", type=int, default=steps)
        p.add_argument("--replicas", type=_positive_int, default=replicas)
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=fmt)
        return p

    command("sample", "draw a Poisson configuration", window="10x10")
    command("simulate", "run the dynamics and export positions", window="20x20", steps=10)
    command("detect", "list phenomena between consecutive steps", window="20x20")
    p = command("frequencies", "replica estimates of phenomenon frequencies", fmt="json")
    p.add_argument("--kinds", type=parse_kinds, default=list(TABLE_KINDS))
    p = command("integrate", "frequency integrals", fmt="json")
    p.add_argument("--domain", choices=("order0", "D", "D1", "D2", "D3", "type1"),
                   default="order0")
    p.add_argument("--method", choices=("closed_form", "quadrature", "monte_carlo"),
                   default="monte_carlo")
    p.add_argument("--mc-samples", type=_positive_int, default=fi.DEFAULT_SAMPLES)
    p.add_argument("--sigma", type=float, default=fi.DEFAULT_SIGMA)
    command("stable", "long-run leader/follower statistics", window="100x100",
            fmt="json", steps=60)
    p = command("percolation", "lattice open/closed diagnostics", fmt="json", replicas=10)
    p.add_argument("--a", type=float, default=1.0, help="half side of the lattice squares")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--step", type=int, choices=(0, 1), default=0)
    p.add_argument("--separation", type=_positive_int, default=10)
    return top


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_key_values(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, p in sub.choices.items():
        dests = {a.dest for a in p._actions}
        unknown = set(values) - dests
        if unknown and name in argv:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        p.set_defaults(**{k: v for k, v in values.items() if k in dests})


def _window(args) -> Window:
    w, h = args.window
    return Window(0.0, w, 0.0, h, "torus" if args.torus else "guard_margin")


def _plan(args) -> ExperimentPlan:
    return ExperimentPlan(seed=args.seed, replicas=args.replicas, window=_window(args),
                          intensity=args.intensity, guard_margin=args.margin,
                          steps=args.steps)


def _params(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k == "kinds":
            v = [x.value for x in v]
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _sample(args):
    return sample_poisson(_window(args), args.intensity, args.seed)


def cmd_sample(args, manifest):
    cfg = _sample(args)
    with _output(args.out) as fh:
        if args.format == "json":
            doc = configuration_envelope(cfg)
            doc["points"] = [{"id": i, "x": x, "y": y}
                             for i, (x, y) in zip(cfg.ids.tolist(), cfg.xy.tolist())]
            dump_json(doc, fh)
        else:
            write_configuration_csv(cfg, fh)
    if args.out and args.format == "csv":
        with open(args.out + ".envelope.json", "w") as fh:
            dump_json(configuration_envelope(cfg), fh)


def cmd_simulate(args, manifest):
    traj = run(_sample(args), args.steps)
    with _output(args.out) as fh:
        if args.format == "json":
            doc = trajectory_summary(traj)
            doc["manifest"] = manifest.finish().to_dict()
            dump_json(doc, fh)
        else:
            write_trajectory_csv(traj, fh)


def cmd_detect(args, manifest):
    traj = run(_sample(args), max(args.steps, 1))
    events = []
    for n in range(traj.first_step, traj.last_step):
        events += detect_all(traj.graph_at(n), traj.graph_at(n + 1),
                             traj.config_at(n), traj.config_at(n + 1))
    with _output(args.out) as fh:
        if args.format == "json":
            dump_json({"schema": "poisson_follower.events/1", "manifest": manifest.finish().to_dict(),
                       "events": [{"step": e.step, "kind": e.kind.value, "agents": e.agents,
                                   "party_ids": e.party_ids, "tag": e.tag} for e in events]}, fh)
        else:
            write_events_csv(events, fh)


def cmd_frequencies(args, manifest):
    est = estimate_frequencies(_plan(args), args.kinds, workers=args.threads)
    if args.out:
        write_estimates(est, args.out, args.format, manifest.finish().to_dict())
        return
    if args.format == "json":
        dump_json({"schema": "poisson_follower.frequencies/1", "manifest": manifest.finish().to_dict(),
                   "estimates": [e.to_dict() for e in est]}, sys.stdout)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["kind", "mean", "ci95_lo", "ci95_hi", "std_error", "replicas",
                    "points_per_replica_mean"])
        for e in est:
            w.writerow([e.kind.value, e.mean, *e.ci95, e.std_error, e.replicas,
                        e.points_per_replica_mean])


def _integral(args):
    if args.domain == "order0":
        if args.method == "closed_form":
            v = fi.density_order0_closed_form()
            return {"domain": "order0", "value": v, "std_error": 0.0, "samples": 0,
                    "seed": None}
        return fi.density_order0_numeric(args.mc_samples, args.seed, args.method).to_dict()
    if args.method != "monte_carlo":
        raise Unsupported(f"domain {args.domain} supports only --method monte_carlo")
    if args.domain == "type1":
        parts = {d: fi.estimate_integral(d, args.mc_samples, args.seed + k, args.sigma)
                 for k, d in enumerate(("D", "D1", "D2", "D3"))}
        res = fi.frequency_order1_type1(parts).to_dict()
        res["seed"] = args.seed
        res["parts"] = {d: r.to_dict() for d, r in parts.items()}
        return res
    return fi.estimate_integral(args.domain, args.mc_samples, args.seed, args.sigma).to_dict()


def cmd_integrate(args, manifest):
    doc = _integral(args)
    with _output(args.out) as fh:
        if args.format == "json":
            doc = {"schema": SCHEMAS["integral"], **doc, "manifest": manifest.finish().to_dict()}
            dump_json(doc, fh)
        else:
            w = csv.writer(fh)
            w.writerow(["domain", "value", "std_error", "samples", "seed"])
            w.writerow([doc["domain"], repr(doc["value"]), repr(doc["std_error"]),
                        doc["samples"], doc["seed"]])


def cmd_stable(args, manifest):
    plan = _plan(args)
    cfg = _sample(args)
    traj = run(cfg, args.steps)
    rep = asymptotics.limit_report(traj, mask=plan.core().contains(cfg.xy))
    doc = {"schema": SCHEMAS["stable"], **rep.to_dict(),
           "stable_party_fraction": asymptotics.stable_party_fraction(traj),
           "manifest": manifest.finish().to_dict()}
    with _output(args.out) as fh:
        if args.format == "json":
            dump_json(doc, fh)
        else:
            w = csv.writer(fh)
            keys = [k for k in doc if k not in ("schema", "manifest")]
            w.writerow(keys)
            w.writerow([doc[k] for k in keys])


def _classify(args, plan):
    cfg = _sample(args)
    if args.step == 0:
        return pd.classify_step0(cfg, build_graph(cfg), args.a, args.epsilon, plan.core())
    return pd.classify_step1(run(cfg, 1), args.a, args.epsilon, plan.core())


def cmd_percolation(args, manifest):
    plan = _plan(args)
    cls = _classify(args, plan)
    tail, tail_se = pd.empirical_contraction_tail(plan, args.step, args.a, args.epsilon,
                                                  workers=args.threads)
    summary = {
        "schema": SCHEMAS["percolation"], "a": args.a, "epsilon": args.epsilon,
        "step": args.step, "cells": int(cls.reasons.size),
        **pd.cluster_statistics(cls),
        "p0_analytic": pd.p0_analytic(args.a, args.epsilon),
        "p0_exact": pd.p0_exact(args.a, args.epsilon),
        "empirical_contraction_tail": tail, "empirical_contraction_tail_se": tail_se,
        "metadata": cls.metadata,
    }
    if args.step == 0:
        closed, closed_se = pd.empirical_closed_fraction(plan, args.a, args.epsilon,
                                                         workers=args.threads)
        summary.update(closed_fraction=closed, closed_fraction_se=closed_se,
                       closed_probability_bound=pd.closed_probability_bound(args.a, args.epsilon),
                       closed_probability_union_bound=pd.closed_probability_union_bound(
                           args.a, args.epsilon))
    try:
        summary["correlation"], summary["correlation_se"] = pd.state_correlation(
            cls, args.separation)
    except (InsufficientData, InvalidArgument):
        summary["correlation"] = None
    summary["manifest"] = manifest.finish().to_dict()
    if args.format == "json":
        with _output(args.out) as fh:
            dump_json(summary, fh)
        return
    with _output(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "state", "reasons"])
        i0, j0 = cls.origin
        for (i, j), r in np.ndenumerate(cls.reasons):
            cell = (i0 + i, j0 + j)
            w.writerow([cell[0], cell[1], "open" if r == 0 else "closed",
                        " ".join(cls.reasons_of(cell))])
    if args.out:
        with open(args.out + ".summary.json", "w") as fh:
            dump_json(summary, fh)


HANDLERS = {"sample": cmd_sample, "simulate": cmd_simulate, "detect": cmd_detect,
            "frequencies": cmd_frequencies, "integrate": cmd_integrate,
            "stable": cmd_stable, "percolation": cmd_percolation}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, InvalidArgument, OSError) as exc:
        print(f"poisson-follower: {exc}", file=sys.stderr)
        return 2
    args.config = None
    manifest = RunManifest(args.command, _params(args), args.seed)
    try:
        HANDLERS[args.command](args, manifest)
    except InsufficientData as exc:
        print(f"poisson-follower: {exc}", file=sys.stderr)
        return 1
    except (InvalidArgument, Unsupported) as exc:
        print(f"poisson-follower: {exc}", file=sys.stderr)
        return 2
    except (FollowerError, ArithmeticError, MemoryError, OSError) as exc:
        print(f"poisson-follower: {exc}", file=sys.stderr)
        return 1
    if args.out:
        manifest.finish().write(args.out + ".manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
