"""Command-line entry point: `eigen run`, `eigen score`, `eigen resume`."""

from __future__ import annotations

import argparse
import logging
import sys

from . import imaging, fitness, pipeline
from .errors import (ConfigError, EigenError, FormatError, IoError,
                     ProtocolError, SidecarError, SpawnError)
from .flow import flow_between
from . import predictor as pred

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SIDECAR = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigen",
        description="Evolve candidate motion-illusion images and score "
                    "existing ones with a frame-predictor + optical-flow evaluator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the evolution loop")
    run_p.add_argument("--config", help="flat key = value config file")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--generations", type=int, dest="max_generations")
    run_p.add_argument("--out", dest="output_dir")
    run_p.add_argument("--predictor",
                       help="identity | shift:dx,dy | drift:gain | external:cmd")
    run_p.add_argument("--mode", choices=pipeline.MODES)
    run_p.add_argument("--diagnostics", action="store_true", default=None)

    score_p = sub.add_parser("score", help="score one existing PNG image")
    score_p.add_argument("--image", required=True)
    score_p.add_argument("--predictor", default="drift:1.0")
    score_p.add_argument("--config")
    score_p.add_argument("--overlay", help="write a flow overlay PNG here")

    resume_p = sub.add_parser("resume", help="continue a checkpointed run")
    resume_p.add_argument("--checkpoint", required=True)
    return parser


def _cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("seed", "max_generations", "output_dir", "predictor", "mode",
                  "diagnostics")}
    if args.config:
        cfg = pipeline.load_config(args.config, overrides)
    else:
        cfg = pipeline.build_config({}, overrides)
    reports = pipeline.run(cfg)
    if reports:
        print(f"finished at generation {reports[-1].generation} "
              f"with best fitness {reports[-1].best_total:.3f}")
    return EXIT_OK


def _cmd_score(args) -> int:
    img = imaging.load_png(args.image)
    overrides = {"predictor": args.predictor,
                 "width": img.width, "height": img.height}
    if args.config:
        cfg = pipeline.load_config(args.config, overrides)
    else:
        cfg = pipeline.build_config({}, overrides)
    predict_fn, close = pipeline.make_predict_fn(cfg)
    try:
        req = pred.make_static_sequence(img, cfg.sequence_length, cfg.extension)
        resp = predict_fn(req)
        if cfg.flow_pair == "pred_pred":
            a, b = resp.predicted[0], resp.predicted[1]
        else:
            a, b = img, resp.predicted[0]
        field = flow_between(a, b, cfg.flow_params())
        sc = fitness.score(field, cfg.fitness_params())
    finally:
        close()
    print(sc.to_json())
    if args.overlay:
        imaging.save_png(imaging.render_overlay(img, field), args.overlay)
    return EXIT_OK


def _cmd_resume(args) -> int:
    reports = pipeline.resume(args.checkpoint)
    if reports:
        print(f"finished at generation {reports[-1].generation} "
              f"with best fitness {reports[-1].best_total:.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "score":
            return _cmd_score(args)
        return _cmd_resume(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoError, FormatError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SpawnError, ProtocolError, SidecarError) as e:
        print(f"predictor error: {e}", file=sys.stderr)
        return EXIT_SIDECAR
    except EigenError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
