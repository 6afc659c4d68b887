"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import KEYS, ConfigError, RunConfig, dump_config, load_config
from .evaluation import (
    REPORT_HEADER,
    ExperimentCellError,
    attack_count,
    attack_dataset,
    evaluate_detector,
    iter_cells,
    kfold_cv,
    make_topology,
    pu_dataset,
    run_experiment,
)
from .features import ATTACK_LABEL, DatasetError, read_csv, write_csv
from .oneclass import ConvergenceError, DegenerateDataError, DetectorKind, ModelFormatError, fit_detector, load_model, save_model
from .scenario import TopologyError

log = logging.getLogger("puea")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="flat 'key = value' config file")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    for key in KEYS:
        flag = "--" + key.replace("_", "-")
        g.add_argument(flag, dest=f"cfg_{key}", metavar="VALUE", default=argparse.SUPPRESS,
                       help=argparse.SUPPRESS if key not in ("seed", "out", "n_slots") else f"override '{key}'")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = _Parser(prog="puea", description="PUEA detection with one-class classifiers",
                     parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="generate PU and attacker data sets")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="fit and calibrate a detector on PU-only data")
    p.add_argument("dataset", type=Path)
    p.add_argument("--detector", required=True)
    p.add_argument("--model", type=Path, help="model output path (default: OUT/model_<detector>.txt)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a test data set with a saved model")
    p.add_argument("model", type=Path)
    p.add_argument("dataset", type=Path)
    p.add_argument("--report", type=Path, help="CSV to append to (default: OUT/evaluations.csv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", parents=[common], help="k-fold cross-validation on a mixed data set")
    p.add_argument("dataset", type=Path)
    p.add_argument("--detector", required=True)
    p.add_argument("-k", "--folds", type=int, required=True)
    p.add_argument("--report", type=Path, help="CSV output (default: OUT/cv_<detector>_k<k>.csv)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("report", parents=[common], help="run the full experiment grid")
    p.add_argument("--dry-run", action="store_true", help="list grid cells without computing")
    p.set_defaults(func=cmd_report)
    return parser


def config_from_args(args) -> RunConfig:
    overrides = {key: getattr(args, f"cfg_{key}", None) for key in KEYS}
    return load_config(getattr(args, "config", None), **overrides)


def _prepare_out(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


def _detector(name: str) -> DetectorKind:
    try:
        return DetectorKind.parse(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_dataset(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"data set not found: {path}")
    return read_csv(path)


def cell_name(placement, d, sigma2, pct=None) -> str:
    parts = [placement.value, format(d, "g"), format(sigma2, "g")]
    if pct is not None:
        parts.append(format(pct, "g"))
    return "_".join(parts)


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _prepare_out(cfg.out)
    for placement in cfg.placements:
        pdir = _prepare_out(out / placement.value)
        train = None
        for d in cfg.d_list:
            for s2 in cfg.sigma2_attacker:
                topo = make_topology(cfg, placement, d, s2)
                if train is None:
                    train = pu_dataset(cfg, topo)
                    write_csv(train, pdir / "train_pu.csv")
                n_attack = max(attack_count(cfg.n_slots, p) for p in cfg.puea_pct)
                attack = attack_dataset(cfg, topo, n_attack)
                write_csv(attack, pdir / f"attack_{cell_name(placement, d, s2)}.csv")
                for pct in cfg.puea_pct:
                    mix = train.concat(attack.subset(slice(0, attack_count(cfg.n_slots, pct))))
                    write_csv(mix, pdir / f"test_{cell_name(placement, d, s2, pct)}.csv")
        print(f"{placement.value}: wrote {pdir}/train_pu.csv ({len(train)} rows) and "
              f"{len(cfg.d_list) * len(cfg.sigma2_attacker)} attacker cells")
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    kind = _detector(args.detector)
    ds = _load_dataset(args.dataset).require_nonempty()
    if np.any(ds.labels == ATTACK_LABEL):
        raise DatasetError(
            f"{args.dataset}: contains {int(np.sum(ds.labels == ATTACK_LABEL))} attack (-1) rows; "
            "one-class training requires PU-only (+1) data"
        )
    model_path = args.model or cfg.out / f"model_{kind.value}.txt"
    det = fit_detector(kind, ds.X, cfg.detector_params())
    _prepare_out(model_path.parent)
    save_model(det, model_path)
    print(f"trained {kind.label} on {len(ds)} rows; threshold {det.threshold:.6g}; model -> {model_path}")
    return EXIT_OK


def _append_csv(path: Path, header, row) -> None:
    _prepare_out(path.parent)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(header)
        w.writerow(row)


def _pct(v: float) -> str:
    return f"{100.0 * v:.2f}"


def cmd_evaluate(args, cfg: RunConfig) -> int:
    if not args.model.is_file():
        raise FileNotFoundError(f"model file not found: {args.model}")
    det = load_model(args.model)
    ds = _load_dataset(args.dataset).require_nonempty()
    cm, rep = evaluate_detector(det, ds)
    flags = f"  (undefined: {', '.join(sorted(rep.undefined))})" if rep.undefined else ""
    print(f"{det.kind.label}  N={cm.n}  TP={cm.tp} FP={cm.fp} TN={cm.tn} FN={cm.fn}")
    print(f"accuracy {_pct(rep.accuracy)}%  precision {_pct(rep.precision)}%  "
          f"recall {_pct(rep.recall)}%  f1 {_pct(rep.f1)}%{flags}")
    report = args.report or cfg.out / "evaluations.csv"
    _append_csv(
        report,
        ("model", "dataset", "detector", "n", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1"),
        (str(args.model), str(args.dataset), det.kind.label, cm.n, cm.tp, cm.fp, cm.tn, cm.fn,
         _pct(rep.accuracy), _pct(rep.precision), _pct(rep.recall), _pct(rep.f1)),
    )
    return EXIT_OK


def cmd_cv(args, cfg: RunConfig) -> int:
    kind = _detector(args.detector)
    ds = _load_dataset(args.dataset).require_nonempty()
    if not 2 <= args.folds <= len(ds) - 1:
        raise UsageError(f"--folds must lie in [2, {len(ds) - 1}] for {len(ds)} examples, got {args.folds}")
    cv = kfold_cv(ds, args.folds, kind, cfg.detector_params(), cfg.seed)
    report = args.report or cfg.out / f"cv_{kind.value}_k{args.folds}.csv"
    _prepare_out(report.parent)
    with report.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("fold", "size", "accuracy", "precision", "recall", "f1"))
        for i, (size, rep) in enumerate(zip(cv.fold_sizes, cv.per_fold), start=1):
            w.writerow((i, size, _pct(rep.accuracy), _pct(rep.precision), _pct(rep.recall), _pct(rep.f1)))
        m = cv.mean
        w.writerow(("mean", len(ds), _pct(m.accuracy), _pct(m.precision), _pct(m.recall), _pct(m.f1)))
    for i, rep in enumerate(cv.per_fold, start=1):
        print(f"fold {i:>2}  acc {_pct(rep.accuracy)}  prec {_pct(rep.precision)}  "
              f"rec {_pct(rep.recall)}  f1 {_pct(rep.f1)}")
    m = cv.mean
    print(f"{kind.label} k={cv.k} mean  acc {_pct(m.accuracy)}  prec {_pct(m.precision)}  "
          f"rec {_pct(m.recall)}  f1 {_pct(m.f1)}")
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    cells = list(iter_cells(cfg))
    if args.dry_run:
        for cell in cells:
            print(cell.describe())
        print(f"{len(cells)} cells x (holdout + {len(cfg.k_list)} k values)")
        return EXIT_OK
    out = _prepare_out(cfg.out)
    done = [0]

    def progress(cell):
        done[0] += 1
        log.info("[%d/%d] %s", done[0], len(cells), cell.describe())

    report = run_experiment(cfg, progress=progress)
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    table = report.to_table()
    (out / "report.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"wrote {out / 'report.csv'} ({len(report.rows)} rows; columns {','.join(REPORT_HEADER)})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"puea: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, DatasetError, ModelFormatError, DegenerateDataError, ConvergenceError,
            TopologyError, ExperimentCellError, ValueError) as exc:
        print(f"puea: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"puea: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
