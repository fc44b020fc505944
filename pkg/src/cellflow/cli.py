"""Command-line interface: flow extraction, patch dataset building,
schedule/sampling demos, morphometry statistics, and the annotation service.

Exit codes: 0 success, 1 environment or I/O failure, 2 bad user input.
Every randomized subcommand takes an explicit --seed; reruns with the same
flags and inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import load_annotation_file
from .config import Config, ConfigError, load_config
from .containers import read_patch_file, write_flow_file, write_patch_file
from .diffusion import (
    ConstantDenoiser,
    FixedTensorDenoiser,
    TrainingConfig,
    ZeroDenoiser,
    make_schedule,
    sample,
    schedule_csv,
)
from .errors import CellflowError
from .flow import FlowParams, video_flow
from .patches import (
    PatchSpec,
    SourceVideo,
    export_dataset,
    extract_patches,
    fill_flow_channels,
    load_frames_dir,
    normalize_per_channel,
)
from .server import make_server
from .stats import aggregate_distributions, export_report, two_sample_ttest


def _flow_params(config: Config, args) -> FlowParams:
    params = config.flow
    if args.brightness_weight is not None:
        params = replace(params, brightness_weight=args.brightness_weight)
    if args.iterations is not None:
        params = replace(params, iterations=args.iterations)
    return params


def _load_video(directory, culture: str = "") -> SourceVideo:
    frames = load_frames_dir(directory)
    return SourceVideo(frames=tuple(frames), culture_meta={"culture": culture})


def cmd_flow(args) -> int:
    config = load_config(args.config)
    params = _flow_params(config, args)
    video = _load_video(args.input_dir)
    fields = video_flow(video.frames, params)
    write_flow_file(args.output, fields)
    for k, f in enumerate(fields):
        print(f"pair {k}: mean|u|={np.abs(f.u).mean():.6f} mean|v|={np.abs(f.v).mean():.6f}")
    print(f"wrote {len(fields)} flow fields to {args.output}")
    return 0


def cmd_patchify(args) -> int:
    config = load_config(args.config)
    spec = config.patches
    if args.patch_size is not None:
        spec = replace(spec, patch_size=args.patch_size)
    if args.overlap is not None:
        spec = replace(spec, overlap_fraction=args.overlap)
    if args.frames is not None:
        spec = replace(spec, frame_count=args.frames)
    if args.stride is not None:
        spec = replace(spec, frame_stride=args.stride)
    params = _flow_params(config, args)

    video = _load_video(args.input_dir, culture=args.culture)
    samples = []
    for start in args.start_frame or [0]:
        batch = extract_patches(
            video, spec, start_frame=start,
            literal_step=args.literal_step, min_variance=args.min_variance,
        )
        for patch in batch:
            patch = fill_flow_channels(patch, params)
            if not args.no_normalize:
                patch = normalize_per_channel(patch)
            samples.append(patch)
    summary = export_dataset(samples, args.output_dir)
    print(f"wrote {summary['count']} samples to {args.output_dir}")
    return 0


def cmd_schedule(args) -> int:
    if args.training_config:
        cfg = TrainingConfig()
        print(f"learning_rate={cfg.learning_rate}")
        print(f"adam_beta1={cfg.adam_beta1}")
        print(f"adam_beta2={cfg.adam_beta2}")
        print(f"loss={cfg.loss}")
        return 0
    config = load_config(args.config)
    steps = args.steps if args.steps is not None else config.schedule_steps
    kind = args.kind if args.kind is not None else config.schedule_kind
    text = schedule_csv(make_schedule(steps, kind))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {steps + 1}-row schedule to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _parse_denoiser(spec: str, shape):
    if spec == "zero":
        return ZeroDenoiser()
    if spec.startswith("constant:"):
        return ConstantDenoiser(float(spec.split(":", 1)[1]))
    if spec.startswith("oracle:"):
        tensor, _meta = read_patch_file(spec.split(":", 1)[1])
        if tensor.shape != shape:
            raise ValueError(
                f"oracle tensor shape {tensor.shape} != requested shape {shape}"
            )
        return FixedTensorDenoiser(tensor.astype(np.float64))
    raise ValueError(
        f"unknown denoiser {spec!r}; expected zero, constant:<value>, or oracle:<file>"
    )


def cmd_sample(args) -> int:
    config = load_config(args.config)
    steps = args.steps if args.steps is not None else config.schedule_steps
    kind = args.kind if args.kind is not None else config.schedule_kind
    shape = (args.frames, args.size, args.size, 3)
    denoiser = _parse_denoiser(args.denoiser, shape)
    schedule = make_schedule(steps, kind)
    rng = np.random.default_rng(args.seed)
    tensor = sample(denoiser, schedule, shape, rng).astype(np.float32)
    metadata = {
        "culture": "synthesized", "x": 0, "y": 0, "start_frame": 0,
        "frame_stride": 1, "normalized": False, "flipped_h": False, "flipped_v": False,
    }
    write_patch_file(args.output, tensor, metadata)
    print(f"sampled {shape} tensor (T={steps}, {kind}, seed={args.seed}) -> {args.output}")
    return 0


_LABEL_HEADINGS = (("neuron", "Neuron"), ("dead_cell", "Dead Cell"))


def _fmt_stats(values) -> str:
    if not values:
        return "n/a"
    arr = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return f"{med:.3f} (IQR {q3 - q1:.3f}, n={arr.size})"


def cmd_stats(args) -> int:
    sets = [load_annotation_file(p) for p in args.annotations]
    dists = aggregate_distributions(sets)
    if args.json:
        print(json.dumps({
            "areas": dists.areas,
            "perimeters": dists.perimeters,
            "neurite_lengths": dists.neurite_lengths,
            "neurite_directions": dists.neurite_directions,
        }))
        return 0
    print(f"{'Distribution':<14}{'Neuron':>28}{'Dead Cell':>28}")
    for title, mapping in (("Area", dists.areas), ("Perimeter", dists.perimeters)):
        row = [_fmt_stats(mapping.get(label, [])) for label, _ in _LABEL_HEADINGS]
        print(f"{title:<14}{row[0]:>28}{row[1]:>28}")
    print(f"{'Length':<14}{_fmt_stats(dists.neurite_lengths):>28}{'--':>28}")
    return 0


def _fmt_p(report) -> str:
    if report is None:
        return "n/a"
    return f"{report.p_value:.3e}"


def cmd_ttest(args) -> int:
    config = load_config(args.config)
    dists_a = aggregate_distributions([load_annotation_file(p) for p in args.group_a])
    dists_b = aggregate_distributions([load_annotation_file(p) for p in args.group_b])

    def compare(name, values_a, values_b, units):
        if len(values_a) < 2 or len(values_b) < 2:
            return None
        return two_sample_ttest(
            values_a, values_b, variant=args.variant,
            name_a=f"group_a.{name}", name_b=f"group_b.{name}", units=units,
        )

    reports = {}
    for label, _ in _LABEL_HEADINGS:
        reports[("area", label)] = compare(
            f"area.{label}", dists_a.areas.get(label, []),
            dists_b.areas.get(label, []), "um^2",
        )
        reports[("perimeter", label)] = compare(
            f"perimeter.{label}", dists_a.perimeters.get(label, []),
            dists_b.perimeters.get(label, []), "um",
        )
    reports[("length", "neuron")] = compare(
        "length", dists_a.neurite_lengths, dists_b.neurite_lengths, "um"
    )

    print(f"{'Distribution':<14}{'Neuron':>14}{'Dead Cell':>14}   ({args.variant} p-values)")
    for title, key in (("Area", "area"), ("Perimeter", "perimeter")):
        cols = [_fmt_p(reports[(key, label)]) for label, _ in _LABEL_HEADINGS]
        print(f"{title:<14}{cols[0]:>14}{cols[1]:>14}")
    print(f"{'Length':<14}{_fmt_p(reports[('length', 'neuron')]):>14}{'--':>14}")
    for (key, label), report in reports.items():
        if report is not None and report.significant:
            print(f"significant at 5%: {key}/{label} (p={report.p_value:.4g})")

    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (key, label), report in reports.items():
            if report is None:
                continue
            export_report(report, out / f"{key}_{label}.{args.format}",
                          fmt=args.format, seed=args.seed)
        print(f"wrote reports to {out}")
    return 0


def cmd_serve(args) -> int:
    config = load_config(args.config)
    port = args.port if args.port is not None else config.port
    try:
        server = make_server(
            args.frames_dir, args.annotations_dir, port=port,
            px_per_micron=config.px_per_micron,
            contrast_cutoff=config.contrast_cutoff,
        )
    except OSError as exc:
        print(f"cannot bind port {port}: {exc}", file=sys.stderr)
        return 1
    host, bound_port = server.server_address[:2]
    print(f"serving on http://{host}:{bound_port} (Ctrl-C to stop)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellflow",
        description="Dense flow, patch datasets, diffusion schedules, and cell morphometry.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="TOML config file (or set CELLFLOW_CONFIG)")

    def add_flow_flags(p):
        p.add_argument("--brightness-weight", type=float, default=None,
                       help="brightness-constancy weight (default 1.0)")
        p.add_argument("--iterations", type=int, default=None,
                       help="solver rounds (default 10)")

    p = sub.add_parser("flow", help="compute dense flow for a frame directory")
    add_config(p)
    p.add_argument("input_dir", help="directory of ordered grayscale PNG frames")
    p.add_argument("-o", "--output", required=True, help="output CFLO path")
    add_flow_flags(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("patchify", help="build patch-video training samples")
    add_config(p)
    p.add_argument("input_dir", help="directory of ordered grayscale PNG frames")
    p.add_argument("-o", "--output-dir", required=True, help="output dataset directory")
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--overlap", type=float, default=None, help="overlap fraction in [0,1)")
    p.add_argument("--frames", type=int, default=None, help="frames per sample")
    p.add_argument("--stride", type=int, default=None, help="source-frame skip")
    p.add_argument("--start-frame", type=int, action="append", default=None,
                   help="time stamp(s) to sample at; repeatable")
    p.add_argument("--literal-step", action="store_true",
                   help="advance origins by overlap*patch_size with no tail snap")
    p.add_argument("--no-normalize", action="store_true",
                   help="skip per-channel min-max normalization")
    p.add_argument("--min-variance", type=float, default=None,
                   help="drop patches whose video-channel variance is below this")
    p.add_argument("--culture", default="", help="culture label recorded in metadata")
    add_flow_flags(p)
    p.set_defaults(func=cmd_patchify)

    p = sub.add_parser("schedule", help="dump a diffusion schedule as CSV")
    add_config(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--kind", choices=["cosine", "linear-log-snr"], default=None)
    p.add_argument("-o", "--output", help="CSV path (stdout if omitted)")
    p.add_argument("--training-config", action="store_true",
                   help="print recorded optimizer constants and exit")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sample", help="run the ancestral sampler with a toy denoiser")
    add_config(p)
    p.add_argument("--denoiser", required=True,
                   help="zero | constant:<value> | oracle:<cvid file>")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--kind", choices=["cosine", "linear-log-snr"], default=None)
    p.add_argument("--frames", type=int, default=10, help="tensor frame count K")
    p.add_argument("--size", type=int, default=16, help="tensor spatial size N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output CVID path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stats", help="summarize annotation measurements")
    p.add_argument("annotations", nargs="+", help="annotation JSON files")
    p.add_argument("--json", action="store_true", help="dump raw distributions as JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ttest", help="compare two annotation groups, Table-2 style")
    add_config(p)
    p.add_argument("--group-a", nargs="+", required=True, help="annotation JSON files")
    p.add_argument("--group-b", nargs="+", required=True, help="annotation JSON files")
    p.add_argument("--variant", choices=["welch", "pooled"], default="welch")
    p.add_argument("-o", "--output-dir", help="directory for per-distribution reports")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed for reports")
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    add_config(p)
    p.add_argument("frames_dir", help="directory holding one subdirectory of PNGs per video")
    p.add_argument("annotations_dir", help="writable directory for annotation JSON")
    p.add_argument("--port", type=int, default=None,
                   help=f"port (or CELLFLOW_PORT; default {8571})")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CellflowError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
