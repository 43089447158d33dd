"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 training divergence. Outputs are written only under ``--out``, whose
default comes from ``$LIGOCR_OUT`` (falling back to ``./ligocr-out``).
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .alphabet import AlphabetError, default_alphabet, default_alphabet_text, default_styles, load_alphabet_file
from .ccl import DEFAULT_AREA_FRACTION, Connectivity, strip_small_components, two_pass_label
from .dataset import (AugmentParams, CCSettings, Corpus, CorpusError, generate_corpus, load_corpus, save_corpus,
                      split_corpus)
from .hierarchy import (DEGREES, HierarchyError, HierarchySettings, ModelSettings, desk_settings, evaluate_corpus,
                        load_hierarchy, model_filename, predict, resample, save_hierarchy, train_hierarchy,
                        train_model, write_reports)
from .nn import PRESETS, Model, generic_point, grad_check, save_model, single_threaded, write_history
from .nn.gradcheck import PrecisionError
from .nn.io import ModelFileError
from .nn.train import TrainingDiverged
from .pgm import PGMError, read_pgm

OUT_ENV = "LIGOCR_OUT"
GRADCHECK_TOL = 1e-4

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(cast):
    def parse(text):
        try:
            v = cast(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {cast.__name__} value {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _fraction(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded execution for bit-identical reruns")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default ${OUT_ENV} or ./ligocr-out)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ligocr", description="Synthetic ligature corpus, CNN training and hierarchical recognition.")
    p.add_argument("--version", action="version", version=f"ligocr {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-alphabet", parents=[common], help="write the default alphabet document")

    s = sub.add_parser("gen-dataset", parents=[common], help="build, split and save a corpus")
    s.add_argument("--alphabet", type=Path, help="alphabet document (default: built-in)")
    s.add_argument("--styles", type=_positive(int), default=15)
    s.add_argument("--size", type=int, default=100, help="image side in pixels (>= 16)")
    s.add_argument("--max-degree", type=int, choices=(1, 2, 3), default=3)
    s.add_argument("--val-fraction", type=_fraction, default=0.2)
    s.add_argument("--area-fraction", type=_fraction, default=DEFAULT_AREA_FRACTION)
    s.add_argument("--connectivity", choices=("4", "8"), default="8")
    s.add_argument("--workers", type=_positive(int), default=1)

    s = sub.add_parser("inspect-cc", parents=[common], help="print connected-component stats of a PGM image")
    s.add_argument("image", type=Path)
    s.add_argument("--connectivity", choices=("4", "8"), default="8")
    s.add_argument("--area-fraction", type=_fraction, default=DEFAULT_AREA_FRACTION)

    s = sub.add_parser("train", parents=[common], help="train one network or the whole hierarchy")
    s.add_argument("--corpus", type=Path, required=True)
    s.add_argument("--level", type=int, choices=(0, 1))
    s.add_argument("--degree", type=int, choices=DEGREES)
    s.add_argument("--hierarchy", action="store_true", help="train level 0 and all three level-1 models")
    s.add_argument("--desk", action="store_true",
                   help="with --hierarchy: small-budget per-model settings for 32 px corpora")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--epochs", type=_positive(int))
    s.add_argument("--lr", type=_positive(float))
    s.add_argument("--size", type=int, help="resample the corpus to this side length")
    s.add_argument("--filters", type=_positive(int), help="override the preset filter count")
    s.add_argument("--batch-size", type=_positive(int), default=32)
    s.add_argument("--augment", action="store_true", help="on-the-fly rotation and zoom")

    s = sub.add_parser("eval", parents=[common], help="score a trained hierarchy, write metrics CSVs")
    s.add_argument("--models", type=Path, required=True)
    s.add_argument("--corpus", type=Path, required=True)
    s.add_argument("--split", choices=("train", "val", "all"), default="val")

    s = sub.add_parser("predict", parents=[common], help="classify one PGM image")
    s.add_argument("image", type=Path)
    s.add_argument("--models", type=Path, required=True)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of a preset's gradients")
    s.add_argument("--preset", choices=sorted(PRESETS), default="level0")
    s.add_argument("--size", type=int, default=8)
    s.add_argument("--classes", type=_positive(int), default=3)
    s.add_argument("--filters", type=_positive(int))
    return p


def _out_dir(args) -> Path:
    return args.out if args.out is not None else Path(os.environ.get(OUT_ENV, "ligocr-out"))


def _validate(args) -> None:
    """Flag checks that must pass before anything touches the filesystem."""
    if getattr(args, "size", None) is not None and args.size < (8 if args.command == "gradcheck" else 16):
        raise UsageError(f"--size {args.size} is too small")
    if args.command == "train":
        if args.hierarchy:
            if args.level is not None or args.degree is not None or args.preset is not None:
                raise UsageError("--hierarchy trains all four models; drop --level/--degree/--preset")
        else:
            if args.desk:
                raise UsageError("--desk applies to --hierarchy only")
            if args.level is None:
                raise UsageError("train needs --level (0 or 1) or --hierarchy")
            if args.level == 1 and args.degree is None:
                raise UsageError("--level 1 needs --degree")
            if args.level == 0 and args.degree is not None:
                raise UsageError("--degree applies to --level 1 only")


def _resized(corpus: Corpus, size: int | None) -> Corpus:
    if size is None or size == corpus.manifest.image_px:
        return corpus
    logging.getLogger("ligocr").warning("resampling corpus from %d to %d px", corpus.manifest.image_px, size)
    return Corpus(replace(corpus.manifest, image_px=size), [resample(r, size) for r in corpus.rasters])


def cmd_gen_alphabet(args) -> int:
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "alphabet.txt"
    path.write_text(default_alphabet_text())
    print(path)
    return EXIT_OK


def cmd_gen_dataset(args) -> int:
    alphabet = load_alphabet_file(args.alphabet) if args.alphabet else default_alphabet()
    cc = CCSettings(Connectivity.parse(args.connectivity), args.area_fraction)
    corpus = generate_corpus(alphabet, default_styles(args.styles, seed=args.seed), args.max_degree, args.size,
                             cc, workers=1 if args.deterministic else args.workers)
    corpus = split_corpus(corpus, args.val_fraction, seed=args.seed)
    out = _out_dir(args)
    save_corpus(corpus, out)
    counts = corpus.manifest.class_counts
    print(f"wrote {len(corpus)} samples to {out}: " + ", ".join(f"degree {d}: {counts[d]} classes" for d in counts))
    return EXIT_OK


def cmd_inspect_cc(args) -> int:
    raster = read_pgm(args.image)
    conn = Connectivity.parse(args.connectivity)
    _, stats = two_pass_label(raster, conn)
    print(f"L={len(stats)}")
    print("label,area,min_x,min_y,max_x,max_y")
    for s in stats:
        print(",".join(str(v) for v in (s.label, s.area, *s.bbox)))
    if stats:
        kept = two_pass_label(strip_small_components(raster, conn, args.area_fraction), conn)[1]
        print(f"# after stripping components below {args.area_fraction} of the largest: L={len(kept)}")
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _resized(load_corpus(args.corpus), args.size)
    out = _out_dir(args)
    augment = AugmentParams(seed=args.seed) if args.augment else None
    if args.hierarchy:
        override = dict(epochs=args.epochs, learning_rate=args.lr, filters=args.filters)
        if args.desk:
            # explicit flags still win over the desk values
            base = desk_settings(args.seed)
            patch = {k: v for k, v in override.items() if v is not None}
            settings = replace(base, level0=replace(base.level0, **patch),
                               level1={d: replace(m, **patch) for d, m in base.level1.items()},
                               augment=augment)
        else:
            settings = HierarchySettings(ModelSettings("level0", **override),
                                         {d: ModelSettings(f"degree{d}", **override) for d in DEGREES},
                                         batch_size=args.batch_size, augment=augment, seed=args.seed)
        hm = train_hierarchy(corpus, settings)
        for path in save_hierarchy(hm, out):
            print(path)
        return EXIT_OK
    preset = args.preset or ("level0" if args.level == 0 else f"degree{args.degree}")
    settings = ModelSettings(preset, args.epochs, args.lr, args.filters)
    tm = train_model(corpus, args.level, args.degree, settings, batch_size=args.batch_size, augment=augment,
                     seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    save_model(tm, out / model_filename(tm.name))
    write_history(tm.history, out / f"{tm.name}_history.csv")
    last = tm.history[-1]
    print(f"{tm.name}: {len(tm.history)} epochs, final val_acc {last.val_acc:.4f}, "
          f"best {max(r.val_acc for r in tm.history):.4f}")
    print(out / model_filename(tm.name))
    return EXIT_OK


def cmd_eval(args) -> int:
    hm = load_hierarchy(args.models)
    corpus = _resized(load_corpus(args.corpus), hm.input_px)
    report = evaluate_corpus(hm, corpus, None if args.split == "all" else args.split)
    paths = write_reports(report, _out_dir(args))
    print(f"{'dataset':10s} accuracy precision recall f1")
    for r in report.reports:
        print(f"{r.dataset:10s} {r.accuracy:.4f}   {r.precision:.4f}    {r.recall:.4f} {r.f1:.4f}")
    print(f"joint accuracy {report.joint_accuracy:.4f}; path valid: {report.path_valid}")
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_predict(args) -> int:
    hm = load_hierarchy(args.models)
    pred = predict(hm, read_pgm(args.image))
    fmt = lambda v: "[" + ", ".join(f"{x:.4f}" for x in v) + "]"
    print(f"degree {pred.degree}")
    print(f"class_id {pred.class_id}")
    print(f"class_key {list(pred.class_key) if pred.class_key is not None else None}")
    print(f"level0_probs {fmt(pred.level0_probs)}")
    print(f"level1_probs {fmt(pred.level1_probs)}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    preset = PRESETS[args.preset]
    model = generic_point(Model(preset.layers(args.classes, args.filters), (args.size, args.size, 1),
                                seed=args.seed), args.seed)
    rng = np.random.default_rng(args.seed)
    x = rng.random((2, args.size, args.size, 1))
    y = rng.integers(0, args.classes, 2)
    err = grad_check(model, x, y, seed=args.seed)
    print(f"{err:.3e}")
    return EXIT_OK if err < GRADCHECK_TOL else EXIT_DATA


COMMANDS = {
    "gen-alphabet": cmd_gen_alphabet, "gen-dataset": cmd_gen_dataset, "inspect-cc": cmd_inspect_cc,
    "train": cmd_train, "eval": cmd_eval, "predict": cmd_predict, "gradcheck": cmd_gradcheck,
}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    guard = single_threaded() if args.deterministic else contextlib.nullcontext()
    try:
        with guard:
            return COMMANDS[args.command](args)
    except TrainingDiverged as exc:
        print(f"error: {exc}; try a lower --lr", file=sys.stderr)
        return EXIT_DIVERGED
    except (AlphabetError, CorpusError, PGMError, ModelFileError, HierarchyError, PrecisionError,
            FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
