"""Command-line entry points.

Every PipelineConfig field is exposed as a flag of the same name; flags
override the --config file, which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import mlkit
from .config import ConfigError, PipelineConfig
from .pipeline import ModelBundle, Pipeline
from .pose import RigidTemplate
from .service import serve as serve_http
from .stream import StreamScript, read_stream, simulate, write_stream
from .training import train_gate_model, train_mouth_model, train_pose_model

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    for f in dataclasses.fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, action="store_true", default=None)
        else:
            p.add_argument(flag, dest=f.name, type=type(f.default), default=None)


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(PipelineConfig)
        if getattr(args, f.name, None) is not None
    }
    if overrides:
        cfg = PipelineConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _build_pipeline(cfg: PipelineConfig) -> Pipeline:
    cfg.resolve_paths(need_models=True)
    template = RigidTemplate.load(cfg.template_path())
    return Pipeline(cfg, ModelBundle.load(cfg), template=template)


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    cfg.resolve_paths(need_models=False)
    script = StreamScript.load(args.script)
    template = RigidTemplate.load(cfg.template_path())
    frames, truth = simulate(script, template, cfg.intrinsics, seed=cfg.seed)
    n = write_stream(frames, args.out)
    if args.truth:
        truth.save(args.truth)
    print(f"wrote {n} frames to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    pipe = _build_pipeline(cfg)
    pipe.run(read_stream(args.input))
    out = Path(args.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = pipe.write_report(out)
    events_path = args.events or str(out / "events.jsonl")
    pipe.write_events(events_path)
    print(f"report: {paths['json']}  csv: {paths['csv']}  events: {events_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _load_config(args)
    pipe = _build_pipeline(cfg)
    frames = read_stream(args.input)
    print(f"serving on http://127.0.0.1:{cfg.port} (replay speed {cfg.replay_speed or 'max'})")
    serve_http(
        pipe, frames, cfg.port, speed=cfg.replay_speed, feedback_log=cfg.feedback_log or None
    )
    return EXIT_OK


def _cmd_train(args, trainer, label: str) -> int:
    cfg = _load_config(args)
    cfg.resolve_paths(need_models=False)
    template = RigidTemplate.load(cfg.template_path())
    model, acc = trainer(cfg, template, seed=cfg.seed)
    mlkit.save_model(model, args.out)
    print(f"{label} model -> {args.out} (training accuracy {acc:.3f})")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.report) as f:
        rep = json.load(f)
    periods = rep.get("periods", [])
    if args.csv:
        from .session import PeriodStats, write_report_csv

        stats = [
            PeriodStats(
                start=p["start"],
                end=p["end"],
                blink_count=p["blinks"],
                yawn_count=p["yawns"],
                pose_proportion=p["pose"],
                present_fraction=p["present"],
                status=p["status"],
            )
            for p in periods
        ]
        write_report_csv(stats, args.csv)
        print(f"csv -> {args.csv}")
    if args.png:
        _plot_report(periods, args.png)
        print(f"png -> {args.png}")
    if not args.csv and not args.png:
        for p in periods:
            print(
                f"{p['start']:>8.0f}s blinks={p['blinks']:<3d} yawns={p['yawns']:<2d} "
                f"present={p['present']:.2f} status={p['status']}"
            )
    return EXIT_OK


def _plot_report(periods, out_path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    labels = ["C1", "C2", "C3", "C4", "C5"]
    starts = [p["start"] / 60.0 for p in periods]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 4.5))
    bottom = np.zeros(len(periods))
    for lbl in labels:
        share = np.array([p["pose"].get(lbl, 0.0) for p in periods])
        ax1.bar(starts, share, width=9.0, bottom=bottom, label=lbl)
        bottom += share
    ax1.set_xlabel("minute")
    ax1.set_ylabel("pose share")
    ax1.set_title("head pose proportions per period")
    ax1.legend(ncol=5, fontsize=8)
    ax2.plot(starts, [p["blinks"] for p in periods], marker="o", label="blinks")
    ax2.plot(starts, [p["yawns"] for p in periods], marker="s", label="yawns")
    for p, x in zip(periods, starts):
        ax2.annotate(p["status"][:1].upper(), (x, 0.5), fontsize=7, ha="center")
    ax2.set_xlabel("minute")
    ax2.set_title("events and status per period")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergowatch", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scripted stream to JSONL + ground truth")
    p.add_argument("--script", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("run", help="run the pipeline over a stream file")
    p.add_argument("--input", required=True)
    p.add_argument("--report-dir", default="out")
    p.add_argument("--events")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="replay a stream behind the live HTTP service")
    p.add_argument("--input", required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_serve)

    for name, trainer, label in (
        ("train-gate", train_gate_model, "gate"),
        ("train-pose", train_pose_model, "pose"),
        ("train-mouth", train_mouth_model, "mouth"),
    ):
        p = sub.add_parser(name, help=f"train the {label} model from scripted streams")
        p.add_argument("--out", required=True)
        _add_config_flags(p)
        p.set_defaults(fn=_make_train(trainer, label))

    p = sub.add_parser("report", help="render a report JSON to csv/png/text")
    p.add_argument("--report", required=True)
    p.add_argument("--csv")
    p.add_argument("--png")
    p.set_defaults(fn=cmd_report)
    return ap


def _make_train(trainer, label):
    return lambda args: _cmd_train(args, trainer, label)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"file not found: {e.filename or e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # surface anything else as a runtime failure
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
