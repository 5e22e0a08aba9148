"""Command-line entry point: ``nimnormals {estimate,synth,eval,bench}``.

Every failure prints one line ``nimnormals: error: <message>`` to stderr and
exits with status 1.  Reports are written as one JSON object per line.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import io as nio
from .errors import NimError
from .evaluation import angular_error, benchmark, get_estimator
from .geometry import CameraIntrinsics, DepthImage
from .synth import NoiseSpec, SceneSpec, apply_noise, render_scene

PROG = "nimnormals"
log = logging.getLogger(PROG)


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliError(message)


def _depth_spec(args, path: str) -> nio.DepthFileSpec:
    fmt = args.format or ("pfm" if path.lower().endswith(".pfm") else "png16")
    return nio.DepthFileSpec(fmt, args.scale, not args.keep_zero)


def _encoding(args, path: str) -> str:
    return args.encoding or ("pfm3" if path.lower().endswith(".pfm") else "rgb8")


def _load_inputs(args) -> tuple[DepthImage, CameraIntrinsics]:
    K, size = nio.read_intrinsics(args.intrinsics)
    Z = nio.read_depth(args.depth, _depth_spec(args, args.depth))
    if size is not None and size != (Z.width, Z.height):
        raise CliError(
            f"intrinsics declare {size[0]}x{size[1]} but depth image is {Z.width}x{Z.height}"
        )
    return Z, K


def cmd_estimate(args) -> int:
    Z, K = _load_inputs(args)
    estimator = get_estimator(args.method, args.window)
    normals = estimator(Z, K, args.threads)
    nio.write_normal_map(normals, args.out, _encoding(args, args.out))
    log.info("wrote %s (%d valid pixels)", args.out, int(normals.valid.sum()))
    return 0


def cmd_synth(args) -> int:
    cfg = nio.read_kv(args.config)
    spec = SceneSpec.from_mapping(cfg)
    noise = NoiseSpec.from_mapping(cfg)
    if args.seed is not None:
        noise = NoiseSpec(noise.model, noise.sigma, args.seed)
    Z, gt = render_scene(spec)
    Z = apply_noise(Z, noise)
    nio.write_depth(args.out_depth, Z, _depth_spec(args, args.out_depth))
    nio.write_normal_map(gt, args.out_normals, _encoding(args, args.out_normals))
    if args.out_intrinsics:
        nio.write_intrinsics(args.out_intrinsics, spec.intrinsics, (spec.width, spec.height))
    return 0


def cmd_eval(args) -> int:
    est = nio.read_normal_map(args.est)
    gt = nio.read_normal_map(args.gt)
    report = angular_error(est, gt)
    _emit(report.to_json(), args.out)
    return 0


def cmd_bench(args) -> int:
    if args.scene:
        spec = SceneSpec.from_mapping(nio.read_kv(args.scene))
        Z, _ = render_scene(spec)
        K = spec.intrinsics
    elif args.depth and args.intrinsics:
        Z, K = _load_inputs(args)
    else:
        raise CliError("bench needs --scene, or both --depth and --intrinsics")
    report = benchmark(
        args.method, Z, K, iterations=args.iterations, threads=args.threads,
        window=args.window, budget_ms=args.budget_ms,
    )
    _emit(report.to_json(), args.out)
    if args.enforce_budget and report.within_budget is False:
        raise CliError(f"median {report.median_ms:.2f} ms exceeds budget {args.budget_ms} ms")
    return 0


def _emit(line: str, out: str | None) -> None:
    if out:
        nio.atomic_write(out, (line + "\n").encode())
    else:
        print(line)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _add_depth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["png16", "pfm"], help="depth file format (default: by extension)")
    p.add_argument("--scale", type=float, default=nio.DEFAULT_PNG16_SCALE,
                   help="png16 raw units per meter (default: %(default)s)")
    p.add_argument("--keep-zero", action="store_true", help="treat png16 raw 0 as a valid depth")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Surface normals from depth images.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate a normal map from a depth image")
    p.add_argument("--depth", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--out", required=True)
    _add_depth_flags(p)
    p.add_argument("--encoding", choices=["rgb8", "pfm3"], help="output encoding (default: by extension)")
    p.add_argument("--method", choices=["nim", "planefit"], default="nim")
    p.add_argument("--window", type=_positive_int, default=1, help="plane-fit window radius")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="render a synthetic scene to depth + ground-truth normals")
    p.add_argument("--config", required=True)
    p.add_argument("--out-depth", required=True)
    p.add_argument("--out-normals", required=True)
    p.add_argument("--out-intrinsics")
    _add_depth_flags(p)
    p.add_argument("--encoding", choices=["rgb8", "pfm3"])
    p.add_argument("--seed", type=int, help="override the config's noise seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="angular error of an estimated normal map against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time an estimator")
    p.add_argument("--scene")
    p.add_argument("--depth")
    p.add_argument("--intrinsics")
    _add_depth_flags(p)
    p.add_argument("--method", choices=["nim", "planefit"], default="nim")
    p.add_argument("--window", type=_positive_int, default=1)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--budget-ms", type=float, default=50.0)
    p.add_argument("--enforce-budget", action="store_true", help="exit 1 if the median exceeds the budget")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format=f"{PROG}: %(message)s")
        return args.func(args)
    except (CliError, NimError, OSError, ValueError) as exc:
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"{PROG}: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
