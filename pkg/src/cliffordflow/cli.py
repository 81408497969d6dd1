"""Command line entry point: ``cliffordflow <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import algebra as ga
from . import flow
from . import io as fio
from . import motors as mo
from .cfa import init_weights, network_forward
from .checks import run_checks


def _config(args) -> fio.RunConfig:
    path = getattr(args, "config", None)
    return fio.load_config(path) if path else fio.RunConfig()


def _seed(args, cfg: fio.RunConfig) -> int:
    seed = getattr(args, "seed", None)
    return cfg.seed if seed is None else seed


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_check_algebra(args) -> int:
    cfg = _config(args)
    results = run_checks(_seed(args, cfg))
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  max error {r.error:.3e} (tol {r.tolerance:.0e})")
    if args.dump_cayley:
        Path(args.dump_cayley).write_text(json.dumps(ga.cayley_table(), indent=1) + "\n")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_interpolate(args) -> int:
    cfg = _config(args)
    a = fio.read_pdb(args.src).frames()
    b = fio.read_pdb(args.dst).frames()
    out = flow.geodesic_interpolate(a, b, args.t)
    fio.write_pdb(args.out, fio.BackboneChain.from_frames(out, cfg.ideal))
    return 0


def cmd_init_weights(args) -> int:
    cfg = _config(args)
    weights = init_weights(_seed(args, cfg), cfg.model)
    fio.save_weights(args.out, weights, cfg.model)
    counts = weights.parameter_counts()
    print(f"wrote {counts['total']} parameters ({counts['cfa']} in CFA blocks) to {args.out}")
    return 0


def cmd_forward(args) -> int:
    cfg = _config(args)
    frames = fio.read_pdb(args.src).frames()
    weights = fio.load_weights(args.weights, cfg.model)
    t0 = time.perf_counter()
    pred = network_forward(frames, args.t, weights, cfg.model)
    elapsed = time.perf_counter() - t0
    # check against a seeded random rigid motion of the input
    rng = np.random.default_rng(_seed(args, cfg))
    g = mo.random_frames(rng, 1, scale=10.0)
    gN = mo.Frames(np.repeat(g.rots, len(frames), 0), np.repeat(g.trans, len(frames), 0))
    moved = network_forward(gN.compose(frames), args.t, weights, cfg.model)
    expected = gN.compose(pred)
    report = {
        "residues": len(frames),
        "t": args.t,
        "seconds": round(elapsed, 3),
        "rotation_equivariance_error": float(np.abs(moved.rots - expected.rots).max()),
        "translation_equivariance_error_angstrom": float(np.abs(moved.trans - expected.trans).max()),
    }
    _emit(report)
    if args.out:
        fio.write_pdb(args.out, fio.BackboneChain.from_frames(pred, cfg.ideal))
    return 0


def cmd_sample(args) -> int:
    from .sampling import sample_backbone

    cfg = _config(args)
    if args.length < 2:
        raise ValueError("--length must be at least 2")
    steps = cfg.n_steps if args.steps is None else args.steps
    weights = fio.load_weights(args.weights, cfg.model)
    frames = sample_backbone(weights, cfg.model, args.length, steps, _seed(args, cfg))
    fio.write_pdb(args.out, fio.BackboneChain.from_frames(frames, cfg.ideal))
    return 0


def cmd_loss(args) -> int:
    cfg = _config(args)
    xt = fio.read_pdb(args.xt).frames()
    target = flow.conditional_vector_field(xt, fio.read_pdb(args.target).frames(), args.t)
    pred = flow.conditional_vector_field(xt, fio.read_pdb(args.pred).frames(), args.t)
    _emit(
        {
            "loss": flow.fm_loss(pred, target, cfg.rot_loss_weight, cfg.trans_loss_weight),
            "rotation_term": flow.fm_loss(pred, target, cfg.rot_loss_weight, 0.0),
            "translation_term": flow.fm_loss(pred, target, 0.0, cfg.trans_loss_weight),
        }
    )
    return 0


def cmd_ot(args) -> int:
    priors = [fio.read_pdb(p).frames() for p in args.priors]
    targets = [fio.read_pdb(p).frames() for p in args.targets]
    plan = flow.minibatch_ot(priors, targets)
    _emit(
        {
            "permutation": plan.permutation.tolist(),
            "cost": plan.cost,
            "cost_matrix": flow.ot_cost_matrix(priors, targets).tolist(),
        }
    )
    return 0


def cmd_rmsd(args) -> int:
    a = fio.read_pdb(args.a).atoms
    b = fio.read_pdb(args.b).atoms
    if args.atoms == "ca":
        a, b = a[:, 1], b[:, 1]
    else:
        a, b = a.reshape(-1, 3), b.reshape(-1, 3)
    rmsd, frame = flow.kabsch_rmsd(a, b)
    _emit({"rmsd": rmsd, "rotation": frame.rots[0].tolist(), "translation": frame.trans[0].tolist()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS so a value given before the subcommand is not reset by the subparser
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides the config)")

    parser = argparse.ArgumentParser(prog="cliffordflow", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-algebra", parents=[common], help="run the algebra and layer self-tests")
    p.add_argument("--dump-cayley", metavar="PATH", help="also write the product table as JSON")
    p.set_defaults(func=cmd_check_algebra)

    p = sub.add_parser("interpolate", parents=[common], help="geodesic interpolation between two backbones")
    p.add_argument("--from", dest="src", required=True)
    p.add_argument("--to", dest="dst", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("forward", parents=[common], help="one network pass with an equivariance check")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out", help="write the predicted backbone here")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("sample", parents=[common], help="generate a backbone from the prior")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("loss", parents=[common], help="flow-matching loss of a predicted endpoint")
    p.add_argument("--xt", required=True, help="backbone at flow time t")
    p.add_argument("--target", required=True, help="true endpoint")
    p.add_argument("--pred", required=True, help="predicted endpoint")
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("ot", parents=[common], help="minibatch optimal transport pairing")
    p.add_argument("--priors", nargs="+", required=True)
    p.add_argument("--targets", nargs="+", required=True)
    p.set_defaults(func=cmd_ot)

    p = sub.add_parser("rmsd", parents=[common], help="Kabsch-aligned RMSD of two backbones")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--atoms", choices=("ca", "backbone"), default="ca")
    p.set_defaults(func=cmd_rmsd)

    p = sub.add_parser("init-weights", parents=[common], help="write seeded random weights")
    p.add_argument("--out", required=True, help="output path (.json selects the debug form)")
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cliffordflow {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
