"""Command line entry point: ``dwls gen | run | bounds | verify``.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import checks
from .bounds import network_bounds
from .harness import ExperimentConfig, GeneratorError, generate, run_experiment
from .network import SensorNetwork, ValidationError, validate
from .linalg import NotSPDError, SingularBlockError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class _BadInput(ValueError):
    pass


def _load_valid(path: str) -> SensorNetwork:
    try:
        net = SensorNetwork.load(path)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise _BadInput(f"cannot read network from {path}: {exc}") from exc
    validate(net).raise_if_failed()
    return net


def cmd_gen(args) -> int:
    cfg = ExperimentConfig(nodes=args.nodes, degree=args.degree, family=args.family,
                           seed=args.seed, ring_size=args.ring_size)
    net = generate(cfg)
    validate(net).raise_if_failed()
    net.save(args.out)
    print(f"wrote {net!r} to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    net = _load_valid(args.graph)
    probes = "all" if args.probe is None else args.probe
    cfg = ExperimentConfig(rounds=args.rounds, probes=probes, graph_path=args.graph)
    res = run_experiment(cfg, args.out_dir, network=net)
    hit = res.rounds_to(args.tol)
    jac = res.rounds_to(args.tol, 2)
    print(f"DWLS reaches {args.tol:g} at round {hit}; block-Jacobi at round {jac}")
    print(f"wrote convergence.csv, depth_cov.csv, depth_est.csv to {args.out_dir}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    net = _load_valid(args.graph)
    if args.probe not in net.nodes:
        raise _BadInput(f"probe {args.probe} is not a node of the network")
    cov, est = network_bounds(net, [args.probe], sampled=net.is_sampled)[args.probe]
    doc = {"covariance": cov.to_dict(), "estimate": est.to_dict() if est else None}
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    kw = {} if args.trials is None else {"trials": args.trials}
    res = checks.SUITES[args.suite](rng, **kw)
    print(res.summary())
    for f in res.failures[:20]:
        print("  " + f)
    return EXIT_OK if res.ok else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwls", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded network and write it as JSON")
    g.add_argument("--nodes", type=int, default=60)
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--family", default="ring-of-trees",
                   choices=["ring-of-trees", "random-regular", "grid", "tree"])
    g.add_argument("--ring-size", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run DWLS, centralized WLS and block-Jacobi; write CSVs")
    r.add_argument("--graph", required=True)
    r.add_argument("--rounds", type=int, default=20)
    r.add_argument("--out-dir", required=True)
    r.add_argument("--probe", type=int, nargs="*", default=None,
                   help="nodes to evaluate in the depth files (default: all)")
    r.add_argument("--tol", type=float, default=1e-6)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="print accuracy constants at a probe node as JSON")
    b.add_argument("--graph", required=True)
    b.add_argument("--probe", type=int, default=1)
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("verify", help="run a randomized invariant suite")
    v.add_argument("--suite", required=True, choices=sorted(checks.SUITES))
    v.add_argument("--trials", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, _BadInput, GeneratorError, NotSPDError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, SingularBlockError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
