"""Command-line front door.

Every subcommand is a thin shell over one library call. Successful runs
print a single JSON summary line on stdout; failures print a single JSON
error line on stderr and exit 1 (usage errors exit 2).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import SpikecamError
from .image import load_png, save_png
from .niqe import fit_niqe_model, load_niqe_model, niqe_score, save_niqe_model
from .pipeline import build_dataset, default_registry, external_image_entry, ReconRegistry, select_hq
from .reconstruct import save_voxels, tfi, tfp, voxelize
from .simulate import SimConfig, simulate
from .stream import firing_rate, read_spk, write_spk


class UsageError(SpikecamError):
    """Invalid flag combination; maps to exit code 2."""


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _frames_from_dir(path: Path):
    files = sorted(path.glob("*.png"))
    if not files:
        raise SpikecamError(f"no .png frames found in {path}")
    return [load_png(f) for f in files]


def _cmd_simulate(args) -> int:
    frames = _frames_from_dir(Path(args.frames)) * args.repeat
    cfg = SimConfig(theta=args.theta, light_scale=args.light_scale,
                    dark_rate=args.dark_rate, seed=args.seed)
    stream = simulate(frames, cfg)
    write_spk(args.output, stream, cfg.theta)
    _emit({"k": stream.k, "h": stream.h, "w": stream.w,
           "spikes": stream.count_spikes(), "out": str(args.output)})
    return 0


def _cmd_reconstruct(args) -> int:
    if args.method == "tfp" and args.window is None:
        raise UsageError("--window is required for method tfp")
    if args.method == "tfi" and args.window is not None:
        raise UsageError("--window applies only to method tfp")
    stream, theta = read_spk(args.input)
    if args.method == "tfp":
        image = tfp(stream, args.window, theta)
    else:
        image = tfi(stream, theta)
    save_png(image, args.output)
    _emit({"method": args.method, "h": image.h, "w": image.w,
           "mean": round(float(image.values.mean()), 6), "out": str(args.output)})
    return 0


def _cmd_voxelize(args) -> int:
    stream, _theta = read_spk(args.input)
    grid = voxelize(stream, args.bins)
    save_voxels(grid, args.output)
    _emit({"c": grid.c, "h": grid.h, "w": grid.w,
           "total": int(grid.values.sum()), "out": str(args.output)})
    return 0


def _cmd_inspect(args) -> int:
    stream, theta = read_spk(args.input)
    rate = firing_rate(stream)
    _emit({"k": stream.k, "h": stream.h, "w": stream.w, "theta": theta,
           "spikes": stream.count_spikes(),
           "mean_rate": round(float(rate.values.mean()), 6)})
    return 0


def _cmd_niqe_fit(args) -> int:
    corpus = [load_png(p) for p in sorted(Path(args.corpus).glob("*.png"))]
    model = fit_niqe_model(corpus, patch_size=args.patch_size)
    save_niqe_model(model, args.output)
    _emit({"images": len(corpus), "f": model.f,
           "patch_size": model.patch_size, "out": str(args.output)})
    return 0


def _cmd_niqe_score(args) -> int:
    model = load_niqe_model(args.model)
    score = niqe_score(load_png(args.input), model)
    _emit({"image": str(args.input), "score": round(score, 6)})
    return 0


def _registry_with_externs(window, externs) -> ReconRegistry:
    registry = default_registry(window=window)
    entries = list(registry.entries)
    for spec in externs or ():
        name, _, path = spec.partition("=")
        if not name or not path:
            raise SpikecamError(f"--extern expects NAME=PATH, got {spec!r}")
        entries.append(external_image_entry(name, path))
    return ReconRegistry(tuple(entries))


def _cmd_select_hq(args) -> int:
    stream, _theta = read_spk(args.input)
    model = load_niqe_model(args.model)
    registry = _registry_with_externs(args.window, args.extern)
    image, chosen, scores = select_hq(stream, registry, model)
    save_png(image, args.output)
    _emit({"chosen": chosen,
           "scores": {k: round(v, 6) for k, v in scores.items()},
           "out": str(args.output)})
    return 0


def _cmd_build_dataset(args) -> int:
    model = load_niqe_model(args.model)
    registry = _registry_with_externs(args.window, args.extern)
    clips = []
    root = Path(args.clips)
    for spk in sorted(root.glob("*/*.spk")):
        stream, _theta = read_spk(spk)
        clips.append((stream, spk.parent.name))
    manifest = build_dataset(clips, registry, model, args.output,
                             bins=args.bins, workers=args.threads)
    _emit({"clips": len(manifest.items), "out": str(Path(args.output) / "manifest.json")})
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spikecam", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", metavar="FILE",
                        help="JSON file of flag defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a spike stream from PNG frames")
    p.add_argument("--frames", required=True, help="directory of .png frames, sorted by name")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--light-scale", type=float, default=1.0)
    p.add_argument("--dark-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1, help="repeat the frame sequence N times")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct an image from a .spk file")
    p.add_argument("--method", choices=("tfp", "tfi"), required=True)
    p.add_argument("--window", type=int, help="exposure window (tfp only)")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("voxelize", help="bin a .spk file into a voxel tensor")
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("inspect", help="print header and spike statistics")
    p.add_argument("-i", "--input", required=True)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("niqe", help="blind quality model")
    nsub = p.add_subparsers(dest="niqe_command", required=True)
    pf = nsub.add_parser("fit", help="fit a pristine model from a directory of PNGs")
    pf.add_argument("--corpus", required=True)
    pf.add_argument("--patch-size", type=int, default=96)
    pf.add_argument("-o", "--output", required=True)
    pf.set_defaults(func=_cmd_niqe_fit)
    ps = nsub.add_parser("score", help="score one PNG against a model")
    ps.add_argument("-i", "--input", required=True)
    ps.add_argument("--model", required=True)
    ps.set_defaults(func=_cmd_niqe_score)

    p = sub.add_parser("select-hq", help="pick the best reconstruction by quality score")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--window", type=int, help="tfp window; defaults to the full stream")
    p.add_argument("--extern", action="append", metavar="NAME=PATH",
                   help="add a precomputed candidate image (repeatable)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_select_hq)

    p = sub.add_parser("build-dataset", help="export a labeled dataset from <label>/*.spk clips")
    p.add_argument("--clips", required=True, help="directory with <label>/<clip>.spk files")
    p.add_argument("--model", required=True)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--window", type=int, help="tfp window; defaults to the full stream")
    p.add_argument("--extern", action="append", metavar="NAME=PATH")
    p.add_argument("--threads", type=int, default=1, help="parallel clip workers")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_build_dataset)

    return parser


def _walk_actions(parser: argparse.ArgumentParser):
    for action in parser._actions:  # noqa: SLF001 - argparse offers no public walk
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield from _walk_actions(sub)
        elif action.dest != "help":
            yield action


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Load JSON flag defaults; explicit flags still win over config values."""
    with open(path) as f:
        values = json.load(f)
    if not isinstance(values, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    dests = set()
    for action in _walk_actions(parser):
        dests.add(action.dest)
        if action.dest in values:
            # subparsers parse into a fresh namespace, so the default must
            # live on the owning action itself
            action.default = values[action.dest]
            action.required = False
    unknown = set(values) - dests
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    try:
        known, rest = pre.parse_known_args(argv)
        parser = _parser()
        if known.config:
            _apply_config(parser, known.config)
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(json.dumps({"error": f"usage: {exc}"}), file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": f"usage: {exc}"}), file=sys.stderr)
        return 2
    except (SpikecamError, OSError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
