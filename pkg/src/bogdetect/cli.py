"""Command-line driver.

Every command takes ``--config FILE`` and any number of
``--override section.key=value``. Artifacts live under ``paths.workdir``::

    data/{train,test}/seq_XXX.txt   skeleton text
    data/{train,test}/seq_XXX.csv   annotations
    topology.yaml
    descriptors/{train,test}/seq_XXX.txt
    codebook.txt
    models/class_XX.txt
    detections/{online,offline}/seq_XXX.csv
    report_{online,offline}.{txt,csv,json}
    sweep_K.csv, sweep_m.csv
    bench.json

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bench import bench_bundle, run_bench
from .classifier import load_model, save_model
from .codebook import load_codebook, save_codebook
from .config import DEFAULT_YAML, ConfigError, PipelineConfig, load_config
from .descriptor import descriptor_matrix
from .evaluation import evaluate_streams
from .io import (
    DETECTION_HEADER,
    DataError,
    detection_row,
    iter_frames,
    load_sequence,
    load_topology,
    read_annotations,
    read_descriptors,
    read_detections,
    save_topology,
    write_annotations,
    write_descriptors,
    write_detections,
    write_sequence,
)
from .pipeline import (
    DetectorBundle,
    detect_stream,
    learn_codebook,
    pooled_mean_ap,
    train_detector,
)
from .skeleton import SkeletonTopology, validate_sequence
from .stream import StreamingDetector
from .sweep import recognition_curve
from .synthetic import generate_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
SPLITS = ("train", "test")

log = logging.getLogger("bogdetect")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- workdir


class Workdir:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = Path(cfg.paths.workdir)

    def data(self, split: str) -> Path:
        return self.root / "data" / split

    def descriptors(self, split: str) -> Path:
        return self.root / "descriptors" / split

    @property
    def codebook(self) -> Path:
        return self.root / "codebook.txt"

    @property
    def models(self) -> Path:
        return self.root / "models"

    def detections(self, mode: str) -> Path:
        return self.root / "detections" / mode

    @property
    def topology_file(self) -> Path:
        return self.root / "topology.yaml"

    def topology(self) -> SkeletonTopology:
        if self.cfg.paths.topology:
            return load_topology(self.cfg.paths.topology)
        if self.topology_file.exists():
            return load_topology(self.topology_file)
        return SkeletonTopology.kinect()

    def sequences(self, split: str) -> list[Path]:
        d = self.data(split)
        if not d.is_dir():
            raise DataError(f"no {split} data directory (run `synth` or populate it)", d)
        files = sorted(p for p in d.iterdir() if p.suffix == ".txt")
        if not files:
            raise DataError(f"no sequences in {d}")
        return files

    def load_corpus(self, split: str, annotated: bool = True):
        topo = self.topology()
        out = []
        for p in self.sequences(split):
            seq = load_sequence(p, self.cfg.paths.input_format, topo)
            check = validate_sequence(seq, topo)
            if not check:
                v = check.violations[0]
                raise DataError(f"frame {v.frame}: {v.message}", p)
            ann_path = p.with_suffix(".csv")
            if annotated and not ann_path.exists():
                raise DataError("missing annotation file", ann_path)
            anns = read_annotations(ann_path) if ann_path.exists() else []
            out.append((p, seq, anns))
        return out

    def load_bundle(self) -> DetectorBundle:
        if not self.codebook.exists():
            raise DataError("no codebook (run `train-codebook`)", self.codebook)
        files = sorted(self.models.glob("class_*.txt")) if self.models.is_dir() else []
        if not files:
            raise DataError("no class models (run `train`)", self.models)
        cb = load_codebook(self.codebook)
        models = tuple(sorted((load_model(f) for f in files), key=lambda m: m.class_id))
        for f, mdl in zip(files, models):
            if mdl.K != cb.K:
                raise DataError(f"model has K={mdl.K}, codebook has K={cb.K}", f)
        c = self.cfg
        return DetectorBundle(
            self.topology(), c.descriptor_params(), cb, models, c.codebook.m, c.smoothing_params()
        )


# ---------------------------------------------------------------- commands


def cmd_synth(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    spec = cfg.synthetic_spec()
    counts = {"train": cfg.synthetic.n_train, "test": cfg.synthetic.n_test}
    for k, split in enumerate(SPLITS):
        d = wd.data(split)
        d.mkdir(parents=True, exist_ok=True)
        for old in d.glob("seq_*"):
            old.unlink()
        corpus = generate_corpus(counts[split], spec, seed=cfg.synthetic.seed * 2 + k)
        for i, (seq, anns) in enumerate(corpus):
            write_sequence(seq, d / f"seq_{i:03d}.txt")
            write_annotations(anns, d / f"seq_{i:03d}.csv")
        print(f"{split}: {len(corpus)} sequences, {sum(len(a) for _, a in corpus)} instances -> {d}")
    save_topology(wd.topology(), wd.topology_file)
    return EXIT_OK


def cmd_extract(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    topo = wd.topology()
    for split in args.splits:
        out = wd.descriptors(split)
        out.mkdir(parents=True, exist_ok=True)
        n = 0
        for p, seq, _ in wd.load_corpus(split, annotated=False):
            write_descriptors(descriptor_matrix(seq, topo, cfg.descriptor_params()), out / p.name)
            n += 1
        print(f"{split}: {n} descriptor files -> {out}")
    return EXIT_OK


def _train_descriptors(wd: Workdir, corpus) -> list[np.ndarray]:
    # reuse `extract` output when present so codebook and models see the same bits
    out = []
    topo = wd.topology()
    for p, seq, _ in corpus:
        f = wd.descriptors("train") / p.name
        if f.exists():
            D = read_descriptors(f)
            if D.shape != (len(seq), topo.descriptor_dim):
                raise DataError(f"descriptor file shape {D.shape} does not match its sequence", f)
        else:
            D = descriptor_matrix(seq, topo, wd.cfg.descriptor_params())
        out.append(D)
    return out


def cmd_train_codebook(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    corpus = wd.load_corpus("train", annotated=False)
    descs = _train_descriptors(wd, corpus)
    n = sum(len(D) for D in descs)
    if cfg.codebook.K > n:
        raise DataError(f"codebook.K={cfg.codebook.K} exceeds the {n} training frames")
    cb = learn_codebook(descs, cfg.train_params())
    wd.root.mkdir(parents=True, exist_ok=True)
    save_codebook(cb, wd.codebook)
    print(f"codebook K={cb.K} D={cb.dim} from {n} frames -> {wd.codebook}")
    return EXIT_OK


def cmd_train(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    if not wd.codebook.exists():
        raise DataError("no codebook (run `train-codebook`)", wd.codebook)
    cb = load_codebook(wd.codebook)
    corpus = wd.load_corpus("train")
    descs = _train_descriptors(wd, corpus)
    bundle = train_detector(
        [(seq, anns) for _, seq, anns in corpus],
        wd.topology(),
        cfg.descriptor_params(),
        cfg.train_params(),
        codebook=cb,
        descriptors=descs,
    )
    wd.models.mkdir(parents=True, exist_ok=True)
    for old in wd.models.glob("class_*.txt"):
        old.unlink()
    for mdl in bundle.models:
        save_model(mdl, wd.models / f"class_{mdl.class_id:02d}.txt")
        print(f"class {mdl.class_id}: bias={mdl.bias:.4f} threshold={mdl.threshold:.4f}")
    return EXIT_OK


def _detect(cfg: PipelineConfig, args, mode: str) -> int:
    wd = Workdir(cfg)
    bundle = wd.load_bundle()
    if mode == "online" and args.stdin:
        return _detect_stdin(bundle, cfg)
    out = wd.detections(mode)
    out.mkdir(parents=True, exist_ok=True)
    total = 0
    for p, seq, _ in wd.load_corpus(args.split, annotated=False):
        events = detect_stream(bundle, seq, mode, cfg.detector.patience)  # type: ignore[arg-type]
        write_detections(events, out / p.with_suffix(".csv").name)
        total += len(events)
    print(f"{mode}: {total} events -> {out}")
    return EXIT_OK


def _detect_stdin(bundle: DetectorBundle, cfg: PipelineConfig) -> int:
    det = StreamingDetector(bundle, cfg.detector.patience)
    out = sys.stdout
    out.write(",".join(DETECTION_HEADER) + "\n")
    out.flush()
    expected = 0
    for frame in iter_frames(sys.stdin, bundle.topo.joint_count, "<stdin>"):
        if frame.index != expected:
            raise DataError(f"frame index {frame.index} where {expected} was expected", "<stdin>")
        if not np.all(np.isfinite(frame.joints)):
            raise DataError(f"non-finite coordinate in frame {frame.index}", "<stdin>")
        expected += 1
        for ev in det.push(frame.joints):
            out.write(detection_row(ev) + "\n")
            out.flush()
    for ev in det.finish():
        out.write(detection_row(ev) + "\n")
        out.flush()
    return EXIT_OK


def cmd_eval(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    det_dir = wd.detections(args.mode)
    pairs = []
    class_ids: set[int] = set()
    models = sorted(wd.models.glob("class_*.txt")) if wd.models.is_dir() else []
    for f in models:
        class_ids.add(load_model(f).class_id)
    for p in wd.sequences(args.split):
        ann_path = p.with_suffix(".csv")
        if not ann_path.exists():
            raise DataError("missing annotation file", ann_path)
        det_path = det_dir / ann_path.name
        if not det_path.exists():
            raise DataError(f"missing detections (run `detect-{args.mode}`)", det_path)
        pairs.append((read_detections(det_path), read_annotations(ann_path)))
    ecfg = cfg.eval_config()
    report = evaluate_streams(pairs, ecfg, sorted(class_ids) or None)
    if ecfg.protocol == "overlap":
        report.mean_ap = pooled_mean_ap(pairs, ecfg.overlap_ratio)
    stem = wd.root / f"report_{args.mode}"
    (stem.with_suffix(".txt")).write_text(report.table() + "\n")
    report.write_csv(stem.with_suffix(".csv"))
    report.write_json(stem.with_suffix(".json"))
    print(report.table())
    return EXIT_OK


def cmd_bench(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    params = replace(cfg.train_params(), K=cfg.bench.K)
    bundle = bench_bundle(wd.topology(), cfg.descriptor_params(), params, cfg.synthetic_spec())
    res = run_bench(bundle, cfg.bench.lengths, cfg.synthetic_spec(), cfg.bench.repeats, cfg.detector.patience)
    wd.root.mkdir(parents=True, exist_ok=True)
    (wd.root / "bench.json").write_text(json.dumps(res.to_dict(), indent=2) + "\n")
    print(res.summary())
    return EXIT_OK


def cmd_sweep(cfg: PipelineConfig, args) -> int:
    wd = Workdir(cfg)
    topo = wd.topology()
    train, test = cfg.recognition_task().data()
    n_frames = sum(len(seq) for seq, _ in train)
    w = cfg.sweep
    todo = []
    if args.which in ("K", "both"):
        Ks = [k for k in w.K_values if k <= n_frames]
        todo.append(("K", Ks, cfg.train_params(), wd.root / "sweep_K.csv"))
    if args.which in ("m", "both"):
        if w.m_sweep_K > n_frames:
            raise DataError(f"sweep.m_sweep_K={w.m_sweep_K} exceeds the {n_frames} training frames")
        ms = [m for m in w.m_values if m <= w.m_sweep_K]
        todo.append(("m", ms, replace(cfg.train_params(), K=w.m_sweep_K), wd.root / "sweep_m.csv"))
    wd.root.mkdir(parents=True, exist_ok=True)
    for param, values, params, path in todo:
        points = recognition_curve(
            train, test, topo, cfg.descriptor_params(), params, param, values, w.seeds
        )
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([param, "mean_accuracy", "std_accuracy"] + [f"seed_{s}" for s in w.seeds])
            for pt in points:
                out.writerow([pt.value, pt.mean, pt.std, *pt.accuracies])
                print(f"{param}={pt.value}: accuracy {pt.mean:.4f} +- {pt.std:.4f}")
        print(f"-> {path}")
    return EXIT_OK


def cmd_config(cfg: PipelineConfig, args) -> int:
    sys.stdout.write(DEFAULT_YAML)
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", "-c", help="YAML configuration file")
    common.add_argument(
        "--override", "-o", action="append", default=[], metavar="KEY=VALUE",
        help="override a config entry, e.g. codebook.K=200 (repeatable)",
    )
    common.add_argument("--verbose", "-v", action="store_true")

    ap = _Parser(prog="bogdetect", description="Online action detection from skeleton streams.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(fn=fn)
        return p

    add("synth", cmd_synth, "generate a synthetic train/test corpus")
    p = add("extract", cmd_extract, "compute per-frame descriptors")
    p.add_argument("--splits", nargs="+", choices=SPLITS, default=list(SPLITS))
    add("train-codebook", cmd_train_codebook, "k-means codebook from training descriptors")
    add("train", cmd_train, "one-vs-all models and thresholds")
    for mode in ("offline", "online"):
        p = add(f"detect-{mode}", lambda c, a, m=mode: _detect(c, a, m), f"{mode} detection")
        p.add_argument("--split", choices=SPLITS, default="test")
        if mode == "online":
            p.add_argument(
                "--stdin", action="store_true",
                help="read skeleton text frames from stdin, write events to stdout as they fire",
            )
    p = add("eval", cmd_eval, "score detections against annotations")
    p.add_argument("--mode", choices=("online", "offline"), default="online")
    p.add_argument("--split", choices=SPLITS, default="test")
    add("bench", cmd_bench, "per-frame cost versus stream length")
    p = add("sweep", cmd_sweep, "recognition accuracy versus K and m")
    p.add_argument("--which", choices=("K", "m", "both"), default="both")
    add("default-config", cmd_config, "print the default configuration")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.override)
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"bogdetect: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"bogdetect: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        print("bogdetect: internal failure", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
