"""Generate a 32 px corpus, train the desk-scale hierarchy and score it.

    python scripts/run_desk_pipeline.py --out runs/desk --seed 0

Writes the corpus, the four model files with their history CSVs and the
metrics CSVs under ``--out``, and prints per-stage timings.
"""
import argparse
import logging
import time
from pathlib import Path

from ligocr.alphabet import default_alphabet, default_styles
from ligocr.dataset import generate_corpus, save_corpus, split_corpus
from ligocr.hierarchy import desk_settings, evaluate_corpus, save_hierarchy, train_hierarchy, write_reports
from ligocr.nn import single_threaded


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--styles", type=int, default=3)
    ap.add_argument("--size", type=int, default=32)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    start = time.perf_counter()
    with single_threaded():
        corpus = generate_corpus(default_alphabet(), default_styles(args.styles, seed=args.seed), image_px=args.size)
        corpus = split_corpus(corpus, 0.2, seed=args.seed)
        save_corpus(corpus, args.out / "corpus")
        print(f"corpus: {corpus.manifest.class_counts} classes, {len(corpus)} images "
              f"({time.perf_counter() - start:.0f} s)")

        hm = train_hierarchy(corpus, desk_settings(args.seed))
        save_hierarchy(hm, args.out / "models")
        for tm in [hm.level0, *hm.level1.values()]:
            best = max(tm.history, key=lambda r: r.val_acc)
            print(f"{tm.name:8s} best val_acc {best.val_acc:.3f} at epoch {best.epoch}")

        report = evaluate_corpus(hm, corpus, "val")
        write_reports(report, args.out / "eval")
    for r in report.reports:
        print(f"{r.dataset:8s} acc {r.accuracy:.3f}  P {r.precision:.3f}  R {r.recall:.3f}  F1 {r.f1:.3f}")
    print(f"joint accuracy {report.joint_accuracy:.3f}, path valid {report.path_valid}")
    print(f"total {time.perf_counter() - start:.0f} s")


if __name__ == "__main__":
    main()
