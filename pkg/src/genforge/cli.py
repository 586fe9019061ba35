"""Command-line entry point: phantom, preprocess, train, sample, reconstruct,
evaluate, study-serve, gradcheck.

Every run takes a single --seed that drives all randomness, writes a config
snapshot next to its outputs, and reports failures as machine-readable JSON
on stderr (exit 1; usage errors exit 2).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import GenforgeError
from .gradcheck import REL_TOLERANCE, run_all
from .imageset import Volume, clip_percentile, load_set, normalize_max, save_set, trim_volume
from .metrics import evaluate_all
from .models import build_model, load_model, reconstruct, sample, save_model, train
from .phantom import phantom_generate

ARCH_FLAGS = {
    "vanilla-vae": "vanilla_vae",
    "dfc-vae": "dfc_vae",
    "intro-vae": "intro_vae",
    "style-gan": "style_gan",
}


def _write_config_snapshot(out: Path, subcommand: str, args: argparse.Namespace) -> None:
    snapshot = {"subcommand": subcommand}
    snapshot.update(
        {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None}
    )
    target = out if out.is_dir() else out.parent
    target.mkdir(parents=True, exist_ok=True)
    stem = out.name if not out.is_dir() else "run"
    (target / f"{stem}.config.json").write_text(json.dumps(snapshot, indent=2, default=str))


def _cmd_phantom(args) -> int:
    image_set = phantom_generate(args.n, args.size, args.seed)
    out = Path(args.out)
    save_set(image_set, out)
    _write_config_snapshot(out, "phantom", args)
    print(json.dumps({"written": str(out), "n": args.n, "size": args.size}))
    return 0


def _cmd_preprocess(args) -> int:
    image_set = load_set(args.input)
    if args.discard_top or args.discard_bottom:
        volume = Volume(image_set.images)
        image_set = trim_volume(volume, args.discard_top, args.discard_bottom)
    image_set = normalize_max(clip_percentile(image_set, args.clip_percentile))
    out = Path(args.out)
    save_set(image_set, out)
    _write_config_snapshot(out, "preprocess", args)
    print(json.dumps({"written": str(out), "n": len(image_set)}))
    return 0


def _cmd_train(args) -> int:
    data = load_set(args.data)
    overrides = {}
    if args.latent_dim is not None:
        overrides["latent_dim"] = args.latent_dim
    if args.lr is not None:
        overrides["lr"] = args.lr
    model = build_model(ARCH_FLAGS[args.arch], args.size, args.seed, **overrides)
    log = train(model, data, steps=args.steps, batch_size=args.batch, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    log.to_jsonl(out.with_suffix(".log.jsonl"))
    _write_config_snapshot(out, "train", args)
    final = log.entries[-1]
    print(json.dumps({"checkpoint": str(out), "steps": len(log.entries), "final_loss": final["loss"]}))
    return 0


def _cmd_sample(args) -> int:
    model = load_model(args.model)
    image_set = sample(model, args.n, args.seed)
    out = Path(args.out)
    save_set(image_set, out)
    _write_config_snapshot(out, "sample", args)
    print(json.dumps({"written": str(out), "n": args.n, "architecture": model.architecture}))
    return 0


def _cmd_reconstruct(args) -> int:
    model = load_model(args.model)
    data = load_set(args.data)
    image_set = reconstruct(model, data, seed=args.seed, deterministic=args.deterministic)
    out = Path(args.out)
    save_set(image_set, out)
    _write_config_snapshot(out, "reconstruct", args)
    print(json.dumps({"written": str(out), "n": len(image_set)}))
    return 0


def _cmd_evaluate(args) -> int:
    samples = load_set(args.samples)
    originals = load_set(args.originals)
    reconstructions = load_set(args.reconstructions) if args.reconstructions else None
    report = evaluate_all(samples, originals, reconstructions)
    payload = report.to_dict()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2))
    _write_config_snapshot(out, "evaluate", args)
    print(json.dumps(payload))
    return 0


def _cmd_study_serve(args) -> int:
    from .server import serve_forever

    serve_forever(args.data_dir, port=args.port, static_dir=args.static_dir)
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_all(seed=args.seed)
    for record in results:
        flag = "PASS" if record["passed"] else "FAIL"
        print(f"{flag} {record['check']:42s} {record['kind']:8s} error {record['error']:.3e}")
    failed = [r for r in results if not r["passed"]]
    print(
        json.dumps(
            {"checks": len(results), "failed": len(failed), "tolerance": REL_TOLERANCE}
        )
    )
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genforge",
        description="Desk-scale generative models for grayscale images, with "
        "evaluation metrics and a blinded reader-study service.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("phantom", help="generate a deterministic phantom image set")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="IMGSET file or directory for PGM files")
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("preprocess", help="clip, normalize, optionally trim slices")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clip-percentile", type=float, default=95.0)
    p.add_argument("--discard-top", type=int, default=0)
    p.add_argument("--discard-bottom", type=int, default=0)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train one of the four architectures")
    p.add_argument("--arch", choices=sorted(ARCH_FLAGS), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint prefix")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sample", help="draw images from a trained model")
    p.add_argument("--model", required=True, help="checkpoint prefix")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("reconstruct", help="encode-decode a set through a VAE model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="compute the metric report for a sample set")
    p.add_argument("--samples", required=True)
    p.add_argument("--originals", required=True)
    p.add_argument("--reconstructions", default=None)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("study-serve", help="run the blinded reader-study HTTP service")
    p.add_argument("--port", type=int, default=int(os.environ.get("GENFORGE_PORT", 8714)))
    p.add_argument(
        "--data-dir", default=os.environ.get("GENFORGE_DATA_DIR", "study-data")
    )
    p.add_argument("--static-dir", default=None, help="directory with the UI bundle")
    p.set_defaults(func=_cmd_study_serve)

    p = sub.add_parser("gradcheck", help="finite-difference check of all primitives and losses")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GenforgeError as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except OSError as exc:
        json.dump({"error": {"type": "OSError", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
