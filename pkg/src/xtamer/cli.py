"""Command-line entry points.

Subcommands: gen-data, train-cnn, train-som, simulate, serve, report.
Every subcommand takes --seed, --config and --out; the config file is one
JSON document with optional "dataset", "cnn", "som" and "session" sections
whose keys mirror the corresponding constructor parameters. Flags override
config values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from xtamer.encoder import CnnEncoder
from xtamer.faces import generate_dataset, load_dataset
from xtamer.session import (
    InteractionRecord,
    Session,
    SessionConfig,
    summarize_records,
    write_report,
)
from xtamer.som import SelfOrganizingMap


def _load_config(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    if not isinstance(doc, dict):
        raise SystemExit(f"config {path} must hold a JSON object")
    return doc


def _merge(section: dict, **flag_overrides) -> dict:
    out = dict(section)
    for key, value in flag_overrides.items():
        if value is not None:
            out[key] = value
    return out


def cmd_gen_data(args) -> int:
    cfg = _merge(_load_config(args.config).get("dataset", {}),
                 n_images=args.images, noise_level=args.noise,
                 n_identities=args.identities, seed=args.seed)
    cfg.setdefault("seed", 0)
    cfg.setdefault("n_images", 1001)
    entries = generate_dataset(args.out, **cfg)
    print(f"wrote {len(entries)} images + manifest.tsv to {args.out}")
    return 0


def cmd_train_cnn(args) -> int:
    cfg = _merge(_load_config(args.config).get("cnn", {}),
                 epochs=args.epochs, learning_rate=args.lr,
                 batch_size=args.batch_size, seed=args.seed)
    images, labels = load_dataset(args.data)
    encoder = CnnEncoder(**cfg)
    print(f"pretraining on {len(images)} images "
          f"(epochs={encoder.epochs}, lr={encoder.learning_rate})")
    encoder.fit(images, labels)
    for h in encoder.history_:
        print(f"epoch {h['epoch']:3d}  loss {h['loss']:.4f}  accuracy {h['accuracy']:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "cnn.xtc"
    encoder.save(path)
    print(f"saved {path}")
    return 0


def cmd_train_som(args) -> int:
    cfg = _merge(_load_config(args.config).get("som", {}),
                 n_iter=args.iterations, learning_rate=args.lr,
                 radius=args.radius, seed=args.seed)
    encoder = CnnEncoder.load(args.cnn)
    images, labels = load_dataset(args.data)
    features = encoder.transform(images)
    som = SelfOrganizingMap(**cfg).fit(features)
    _, purity = som.label_map(features, labels)
    qe = som.quantization_error(features)
    print(f"trained {som.rows}x{som.cols} map on {len(features)} features  "
          f"quantization error {qe:.6f}  purity {purity:.4f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "som.xtc"
    som.save(path)
    print(f"saved {path}")
    return 0


def _session_config(args) -> SessionConfig:
    section = _merge(_load_config(args.config).get("session", {}),
                     seed=args.seed, epochs=getattr(args, "epochs", None),
                     interactions_per_epoch=getattr(args, "interactions", None),
                     user=getattr(args, "profile", None),
                     cnn_checkpoint=getattr(args, "cnn", None))
    return SessionConfig.from_dict(section)


def _load_cnn(config: SessionConfig) -> CnnEncoder:
    if config.cnn_checkpoint is None:
        raise SystemExit("no CNN checkpoint: set session.cnn_checkpoint "
                         "in the config or pass --cnn")
    return CnnEncoder.load(config.cnn_checkpoint)


def cmd_simulate(args) -> int:
    config = _session_config(args)
    cnn = _load_cnn(config)
    out = Path(args.out)
    checkpoints = sorted(out.glob("checkpoint_epoch_*.xtc")) if out.exists() else []
    if args.resume and checkpoints:
        session = Session.resume(checkpoints[-1], cnn, out_dir=out)
        print(f"resumed from {checkpoints[-1].name} "
              f"({len(session.epoch_summaries)} epochs done)")
    else:
        session = Session(config, cnn, out_dir=out)
        config.save(out / "config.json")
    if session.phase == "calibrating":
        purity = session.calibrate()
        print(f"calibrated: SOM purity {purity:.4f} on "
              f"{config.calibration_samples * 7} labeled presentations")
    while len(session.epoch_summaries) < config.epochs:
        summary = session.run_epoch()
        print(f"epoch {summary['epoch']:3d}  avg_cost {summary['avg_cost']:.4f}  "
              f"accuracy {summary['accuracy']:.4f}")
    session.phase = "idle"
    print(f"session artifacts in {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from xtamer.service import create_app

    config = _session_config(args)
    app = create_app(_load_cnn(config), config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    config_path = out / "config.json"
    per_epoch = args.interactions
    if per_epoch is None and config_path.exists():
        per_epoch = SessionConfig.load(config_path).interactions_per_epoch
    per_epoch = per_epoch or 100
    log_path = out / "session.jsonl"
    if not log_path.exists():
        raise SystemExit(f"no session log at {log_path}")
    records = [InteractionRecord.from_json_line(ln)
               for ln in log_path.read_text(encoding="ascii").splitlines()]
    summaries = summarize_records(records, per_epoch)
    write_report(out / "report.tsv", summaries)
    print("epoch\tavg_cost\taccuracy")
    for s in summaries:
        print(f"{s['epoch']}\t{s['avg_cost']:.12g}\t{s['accuracy']:.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xtamer",
                                     description="Interactive expression-learning engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-data", help="render a synthetic labeled face dataset")
    common(p)
    p.add_argument("--images", type=int, default=None, help="total image count")
    p.add_argument("--noise", type=float, default=None, help="pixel noise std")
    p.add_argument("--identities", type=int, default=None, help="distinct identities")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-cnn", help="pretrain the CNN on a dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory (with manifest.tsv)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(func=cmd_train_cnn)

    p = sub.add_parser("train-som", help="train a SOM over CNN features of a dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--cnn", required=True, help="CNN checkpoint path")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.set_defaults(func=cmd_train_som)

    p = sub.add_parser("simulate", help="run a closed-loop simulated session")
    common(p)
    p.add_argument("--profile", default=None, help="user profile JSON path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--interactions", type=int, default=None,
                   help="interactions per epoch")
    p.add_argument("--cnn", default=None, help="CNN checkpoint path override")
    p.add_argument("--resume", action="store_true",
                   help="continue from the latest checkpoint in --out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="serve the HTTP API for the trainer UI")
    common(p)
    p.add_argument("--cnn", default=None, help="CNN checkpoint path override")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="recompute the per-epoch report from a session log")
    common(p)
    p.add_argument("--interactions", type=int, default=None,
                   help="interactions per epoch (default: from config.json)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
