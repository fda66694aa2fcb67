"""Command-line entry point: ``synth``, ``train``, ``predict`` and ``evaluate``."""
from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, JointSegError
from .metrics import evaluate
from .pipeline import CT_CENTERS, MR_CENTERS, build_index, predict_ensemble, train
from .preprocess import Modality
from .synth import generate_phantom
from .volume_io import LabelMap, read_volume, write_volume

log = logging.getLogger("jointseg")


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointseg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic CT/MR/label phantoms and a manifest")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--count", type=int, default=2)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--spacing", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="joint CT/MR training from a manifest")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--config", default="desk", help="config file, or 'desk' / 'paper'")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[],
                   metavar="KEY=VALUE", help="override a config key (repeatable)")

    p = sub.add_parser("predict", help="segment a volume with an ensemble of checkpoints")
    p.add_argument("--checkpoints", required=True, nargs="+",
                   help="checkpoint files, directories or glob patterns")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--modality", choices=("ct", "mr", "auto"), default="auto")
    p.add_argument("--no-postprocess", action="store_true")

    p = sub.add_parser("evaluate", help="per-class DSC / HD / ASSD report as CSV")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--gt", required=True, type=Path)
    p.add_argument("--out", type=Path, help="CSV path (stdout if omitted)")
    return parser


def cmd_synth(args) -> None:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    lines = []
    for i in range(args.count):
        ct, mr, labels = generate_phantom(rng, args.size, args.spacing)
        stem = f"case{i:03d}"
        write_volume(out / f"{stem}_ct.mhd", ct)
        write_volume(out / f"{stem}_mr.mhd", mr)
        write_volume(out / f"{stem}_labels.mhd", labels)
        lines.append(f"{stem}_ct.mhd\t{stem}_labels.mhd\tct\t{CT_CENTERS[i % 2]}\n")
        lines.append(f"{stem}_mr.mhd\t{stem}_labels.mhd\tmr\t{MR_CENTERS[i % 2]}\n")
    (out / "manifest.tsv").write_text("".join(lines))
    print(f"wrote {args.count} phantom triples to {out}")


def cmd_train(args) -> None:
    overrides = dict(args.overrides)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.iterations is not None:
        overrides["iterations"] = str(args.iterations)
    cfg = load_config(args.config, overrides)
    index = build_index(args.manifest)
    result = train(cfg, index, out_dir=args.out)
    print(f"trained {cfg.iterations} iterations, final loss {result.losses[-1]:.5f}, "
          f"checkpoint {result.checkpoint}")


def _expand_checkpoints(patterns) -> list[Path]:
    found = set()
    for pat in patterns:
        p = Path(pat)
        if p.is_dir():
            found.update(p.glob("*.ckpt"))
            continue
        matches = glob.glob(pat) if glob.has_magic(pat) else [pat]
        for m in map(Path, matches):
            if m.is_dir():
                found.update(m.glob("*.ckpt"))
            elif m.suffix == ".ckpt" or not glob.has_magic(pat):
                found.add(m)
    if not found:
        raise ConfigError(f"no checkpoints match {' '.join(patterns)}")
    return sorted(found)


def cmd_predict(args) -> None:
    checkpoints = _expand_checkpoints(args.checkpoints)
    vol = read_volume(args.input)
    if isinstance(vol, LabelMap):
        raise ConfigError(f"{args.input} is a label map, expected an image")
    modality = None if args.modality == "auto" else Modality.parse(args.modality)
    labels, _ = predict_ensemble(checkpoints, vol, modality, postprocess=not args.no_postprocess)
    write_volume(args.out, labels)
    print(f"wrote {args.out} ({len(checkpoints)} model(s))")


def cmd_evaluate(args) -> None:
    pred, gt = read_volume(args.pred), read_volume(args.gt)
    for path, v in ((args.pred, pred), (args.gt, gt)):
        if not isinstance(v, LabelMap):
            raise ConfigError(f"{path} is not a UInt8 label map")
    csv = evaluate(pred, gt, spacing=gt.spacing).to_csv()
    if args.out is None:
        sys.stdout.write(csv)
    else:
        args.out.write_text(csv)


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (JointSegError, OSError) as e:
        print(f"jointseg {args.command}: error: {' '.join(str(e).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
