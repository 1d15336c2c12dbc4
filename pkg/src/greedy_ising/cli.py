"""Command-line entry point: simulate, learn, sweep, diagnose."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .diagnostics import check_theorem1, theory_constants
from .errors import GreedyIsingError
from .greedy import GreedyConfig, run_greedy
from .harness import (
    CALIBRATED_THRESHOLD_C,
    coerce_config,
    fmt,
    greedy_threshold,
    parse_config_text,
    run_sweep,
)
from .ising import (
    GibbsSettings,
    IsingModel,
    SampleMatrix,
    TOPOLOGIES,
    assign_couplings,
    gibbs_sample,
    make_star,
    seed_stream,
)
from .losses import NodeConditionalLogisticLoss
from .structure import CombineRule, learn_structure, learn_structure_l1


def _model_from_sidecar(data: SampleMatrix):
    meta = data.metadata.get("model")
    return IsingModel.from_dict(meta) if meta else None


def cmd_simulate(args):
    if args.topology == "star":
        skeleton = make_star(args.p, args.hub_degree)
    else:
        skeleton = TOPOLOGIES[args.topology](args.p)
    model = assign_couplings(skeleton, args.omega, seed_stream(args.seed, 0))
    settings = GibbsSettings(args.burn_in, args.thin, args.seed)
    data = gibbs_sample(model, args.n, settings, rng=seed_stream(args.seed, 1))
    data.metadata.update({"omega": args.omega, "seed": args.seed, "graph": args.topology})
    data.save(args.out)
    print(f"wrote {data.n} x {data.p} samples to {args.out} (d={model.max_degree}, "
          f"{len(model.edges)} edges)")
    return 0


def cmd_learn(args):
    data = SampleMatrix.load(args.data)
    rule = CombineRule(args.rule)
    if args.method == "greedy":
        eps = args.eps if args.eps is not None else greedy_threshold(args.c, data.n, data.p)
        edges, _ = learn_structure(data, GreedyConfig(eps, args.nu), rule)
        print(f"method: greedy\neps: {fmt(eps)}")
    else:
        const = args.l1_constant if args.l1_constant == "sweep" else float(args.l1_constant)
        edges, _, const = learn_structure_l1(data, const, rule)
        print(f"method: l1\nl1_constant: {fmt(const)}")
    if args.out:
        edges.save(args.out)
    else:
        sys.stdout.write(edges.to_text())
    model = _model_from_sidecar(data)
    if model is not None:
        cmp = edges.compare(model.edges)
        print(f"missed: {len(cmp.missed)}\nextra: {len(cmp.extra)}\nexact: {str(cmp.exact).lower()}")
    return 0


def cmd_sweep(args):
    raw = {}
    if args.config:
        raw.update(parse_config_text(Path(args.config).read_text()))
    flags = {
        "topology": args.topology, "p": args.p, "omega": args.omega, "betas": args.betas,
        "trials": args.trials, "methods": args.methods, "c": args.c, "nu": args.nu,
        "l1_constant": args.l1_constant, "seed": args.seed, "rule": args.rule,
        "hub_degree": args.hub_degree, "burn_in": args.burn_in, "thin": args.thin,
        "workers": args.workers, "output_dir": args.out,
        "timings": "true" if args.timings else None,
    }
    raw.update({k: v for k, v in flags.items() if v is not None})
    config = coerce_config(raw)
    if config.output_dir is None:
        config = coerce_config({**raw, "output_dir": "sweep-out"})
    result = run_sweep(config)
    sys.stdout.write(result.results_csv())
    print(f"outputs in {config.output_dir}")
    return 0


def cmd_diagnose(args):
    data = SampleMatrix.load(args.data)
    model = _model_from_sidecar(data)
    if model is None:
        print("error: data sidecar has no model; diagnose needs the true parameters",
              file=sys.stderr)
        return 2
    loss = NodeConditionalLogisticLoss(data, args.node)
    eps = args.eps if args.eps is not None else greedy_threshold(args.c, data.n, data.p)
    result = run_greedy(loss, GreedyConfig(eps, args.nu))
    theta_star = loss.true_parameter(model)
    consts = theory_constants(loss, theta_star, rng=np.random.default_rng(args.seed),
                              theta_hat=result.theta_hat)
    report = check_theorem1(result, theta_star, consts, eps, args.nu)
    print(f"node: {args.node}")
    print(f"n: {data.n}")
    print(f"p: {data.p}")
    print(f"curvature_certification: {'exact' if consts.exact else 'local'}")
    sys.stdout.write(report.to_text())
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="greedy-ising", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw an Ising model and Gibbs samples to CSV")
    s.add_argument("--topology", choices=sorted(TOPOLOGIES), default="chain")
    s.add_argument("--p", type=int, default=16)
    s.add_argument("--hub-degree", type=int, default=None)
    s.add_argument("--omega", type=float, default=0.5)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burn-in", type=int, default=200)
    s.add_argument("--thin", type=int, default=10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("learn", help="estimate the edge set from a data CSV")
    s.add_argument("data")
    s.add_argument("--method", choices=("greedy", "l1"), default="greedy")
    s.add_argument("--c", type=float, default=CALIBRATED_THRESHOLD_C)
    s.add_argument("--eps", type=float, default=None, help="absolute stopping threshold")
    s.add_argument("--nu", type=float, default=0.5)
    s.add_argument("--l1-constant", default="sweep")
    s.add_argument("--rule", choices=("or", "and"), default="or")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("sweep", help="success probability vs. beta over seeded trials")
    s.add_argument("--config", default=None, help="key=value file; flags override it")
    s.add_argument("--topology", choices=sorted(TOPOLOGIES), default=None)
    s.add_argument("--p", default=None)
    s.add_argument("--hub-degree", default=None)
    s.add_argument("--omega", default=None)
    s.add_argument("--betas", default=None, help="comma-separated, increasing")
    s.add_argument("--trials", default=None)
    s.add_argument("--methods", default=None, help="comma-separated subset of greedy,l1")
    s.add_argument("--c", default=None)
    s.add_argument("--nu", default=None)
    s.add_argument("--l1-constant", default=None)
    s.add_argument("--seed", default=None)
    s.add_argument("--rule", default=None)
    s.add_argument("--burn-in", default=None)
    s.add_argument("--thin", default=None)
    s.add_argument("--workers", default=None)
    s.add_argument("--timings", action="store_true", help="record wall times in results.csv")
    s.add_argument("--out", default=None, help="output directory")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("diagnose", help="curvature constants and guarantee check for one node")
    s.add_argument("data")
    s.add_argument("--node", type=int, default=0)
    s.add_argument("--c", type=float, default=CALIBRATED_THRESHOLD_C)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--nu", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0, help="seed for random probe points")
    s.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GreedyIsingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
