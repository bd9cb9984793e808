"""Command-line entry point: ``sphereshadow {synth,train,eval,infer,selftest,transform}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import __version__

log = logging.getLogger("sphereshadow")


def cmd_synth(args) -> int:
    from .data import synth_dataset

    manifest = synth_dataset(args.out, args.count, args.size, args.seed, test_count=args.test_count)
    print(manifest.path)
    return 0


def cmd_train(args) -> int:
    from .config import load_config
    from .train import train

    cfg = load_config(args.config)
    if args.iterations is not None:
        cfg.iterations = args.iterations
    if args.seed is not None:
        cfg.seed = args.seed
    start = time.perf_counter()

    def progress(step, report):
        if step % cfg.log_interval == 0 and not args.quiet:
            print(f"step {step:6d}  total {report.total:.6f}  ({time.perf_counter() - start:.1f}s)", flush=True)

    train(cfg, progress)
    print(os.path.join(cfg.checkpoint_dir, "final.ckpt"))
    return 0


def cmd_eval(args) -> int:
    from .data import read_manifest
    from .evaluate import evaluate
    from .metrics import reports_csv, reports_table
    from .train import load_model

    net = load_model(args.checkpoint)
    reports = evaluate(net, read_manifest(args.manifest))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(reports_csv(reports))
    print(reports_table(reports))
    return 0


def deshadow_path(image_path: str) -> str:
    root, _ = os.path.splitext(image_path)
    return root + ".deshadow.png"


def cmd_infer(args) -> int:
    from .data import load_image, save_image
    from .evaluate import restore_image
    from .train import load_model

    net = load_model(args.checkpoint)
    img = load_image(args.image)
    if img.shape[0] == 1:
        img = img.repeat(3, axis=0)
    ir = None
    if args.infrared:
        ir = load_image(args.infrared)
        if ir.shape[0] == 3:
            ir = ir.mean(axis=0, keepdims=True)
    out = restore_image(net, img, ir)
    path = args.out or deshadow_path(args.image)
    save_image(path, out)
    print(path)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(radius=args.r, pole_tol=args.pole_tol, seed=args.seed)
    for res in results:
        print(res.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed")
    return 1 if failed else 0


def cmd_transform(args) -> int:
    import numpy as np

    from .autodiff import load_checkpoint, save_checkpoint
    from .sphere import SphericalConfig, spherical_transform

    tensors = load_checkpoint(args.tensor)
    if args.key not in tensors:
        raise ValueError(f"{args.tensor}: no tensor named {args.key!r} (have {sorted(tensors)})")
    x = tensors[args.key]
    n = x.shape[0]
    params = load_checkpoint(args.params) if args.params else tensors
    if (args.weight is None) != (args.bias is None):
        raise ValueError("--weight and --bias must be given together")
    if args.weight is None:
        weight, bias = np.eye(n - 1), np.zeros(n - 1)
    else:
        for key in (args.weight, args.bias):
            if key not in params:
                raise ValueError(f"no tensor named {key!r} in the parameter file")
        weight, bias = params[args.weight], params[args.bias]
    cfg = SphericalConfig(radius=args.r, pole_tol=args.pole_tol)
    out = spherical_transform(x, weight, bias, cfg).data
    if args.out:
        save_checkpoint(args.out, {"output": out})
    print(np.array2string(out, precision=17, floatmode="maxprec", threshold=sys.maxsize))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphereshadow", description="Weakly supervised shadow removal on CPU.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output folder")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-count", type=int, default=None, help="held-out images (default count // 10)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train from a key = value config file")
    p.add_argument("config")
    p.add_argument("--iterations", type=int, default=None, help="override the config")
    p.add_argument("--seed", type=int, default=None, help="override the config")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--csv", default=None, help="also write the report as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="remove shadows from one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--mask", default=None, help="accepted for symmetry with training data; unused by the network")
    p.add_argument("--infrared", default=None, help="real infrared image instead of the proxy")
    p.add_argument("--out", default=None, help="default: <image>.deshadow.png")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("selftest", help="sphere-geometry property suite")
    p.add_argument("--r", type=float, default=1.0, help="sphere radius")
    p.add_argument("--pole-tol", type=float, default=1e-6, help="series-branch threshold near the pole")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("transform", help="map a stored tensor through the sphere transform")
    p.add_argument("--tensor", required=True, help="checkpoint-format file holding the input")
    p.add_argument("--key", default="input", help="name of the (channels, ...) input tensor")
    p.add_argument("--params", default=None, help="file holding W and b (default: the input file)")
    p.add_argument("--weight", default=None, help="name of W; identity when omitted")
    p.add_argument("--bias", default=None, help="name of b")
    p.add_argument("--r", type=float, default=1.0, help="sphere radius")
    p.add_argument("--pole-tol", type=float, default=1e-6)
    p.add_argument("--out", default=None, help="also save the result under the name 'output'")
    p.set_defaults(func=cmd_transform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
