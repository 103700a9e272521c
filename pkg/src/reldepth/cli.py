"""Command-line entry point: ``reldepth <subcommand> [flags]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
error, 3 runtime failure. ``RELDEPTH_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional


from . import __version__
from .dataset import (
    AnnotationError,
    STANDARD_THRESHOLDS,
    build_pairs,
    class_distribution,
    filter_valid,
    generate_pairs,
    parse_annotations,
    write_annotations,
)
from .depthmap import (
    AGGREGATORS,
    DepthMapError,
    agreement,
    human_agreement_table,
    load_depth_map,
    load_manifest,
    predictor_classes,
    write_depth_map,
)
from .encoding import FEATURE_GROUP_COMBINATIONS, ConfigurationError, PairFeatureExtractor, group_label, parse_groups
from .evaluation import (
    ExperimentSpec,
    format_table,
    grid_specs,
    reports_to_csv,
    reports_to_json,
    run_experiment,
    run_grid,
)
from .models import ClassifierKind, save_model

logger = logging.getLogger("reldepth")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
DEPTH_COMPARE_THRESHOLDS = (0, 1, 5)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunConfig:
    dataset: Optional[str] = None
    depth_manifest: Optional[str] = None
    thresholds: List[float] = field(default_factory=list)
    groups: List[str] = field(default_factory=list)
    models: List[str] = field(default_factory=list)
    hyperparameters: Dict[str, dict] = field(default_factory=dict)
    folds: int = 5
    seed: int = 0
    out: Optional[str] = None
    n_jobs: int = 1
    lenient: bool = False

    def validate(self, need_dataset=True, need_manifest=False):
        if need_dataset:
            if not self.dataset:
                raise ConfigurationError("dataset: a dataset path is required (--dataset or config key 'dataset')")
            if not Path(self.dataset).is_file():
                raise ConfigurationError(f"dataset: file not found: {self.dataset}")
        if need_manifest:
            if not self.depth_manifest:
                raise ConfigurationError("depth_manifest: required for depth-compare")
            if not Path(self.depth_manifest).is_file():
                raise ConfigurationError(f"depth_manifest: file not found: {self.depth_manifest}")
        for t in self.thresholds:
            if t < 0:
                raise ConfigurationError(f"thresholds: must be >= 0, got {t}")
        if self.folds < 2:
            raise ConfigurationError(f"folds: must be >= 2, got {self.folds}")
        for g in self.groups:
            parse_groups(g)
        for m in self.models:
            try:
                ClassifierKind.parse(m)
            except ValueError as exc:
                raise ConfigurationError(f"models: {exc}") from exc


_CONFIG_KEYS = {"dataset", "depth_manifest", "thresholds", "groups", "models", "folds", "seed", "out", "n_jobs", "lenient"}


def load_config(path) -> RunConfig:
    """Read a flat JSON config; ``"<model>.<param>"`` keys set hyperparameters."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config: file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: invalid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ConfigurationError("config: expected a flat object of key/value pairs")
    cfg = RunConfig()
    for key, value in doc.items():
        if "." in key:
            model, _, param = key.partition(".")
            try:
                kind = ClassifierKind.parse(model).value
            except ValueError as exc:
                raise ConfigurationError(f"{key}: {exc}") from exc
            cfg.hyperparameters.setdefault(kind, {})[param] = value
        elif key in _CONFIG_KEYS:
            if key in ("thresholds", "groups", "models") and not isinstance(value, list):
                value = [value]
            setattr(cfg, key, value)
        else:
            raise ConfigurationError(f"{key}: unknown config key")
    return cfg


def _parse_param(text):
    key, sep, raw = text.partition("=")
    if not sep or "." not in key:
        raise ConfigurationError(f"--param {text!r}: expected MODEL.NAME=VALUE")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if isinstance(value, list):
        value = tuple(value)
    model, _, name = key.partition(".")
    return ClassifierKind.parse(model).value, name, value


def resolve_config(args, default_thresholds, default_groups, default_models) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("dataset", "depth_manifest", "out"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    for name in ("folds", "seed", "n_jobs"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "lenient", False):
        cfg.lenient = True
    if getattr(args, "threshold", None):
        cfg.thresholds = list(args.threshold)
    if getattr(args, "groups", None):
        cfg.groups = list(args.groups)
    if getattr(args, "model", None):
        cfg.models = list(args.model)
    for text in getattr(args, "param", None) or ():
        try:
            kind, name, value = _parse_param(text)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        cfg.hyperparameters.setdefault(kind, {})[name] = value
    cfg.thresholds = [float(t) for t in (cfg.thresholds or default_thresholds)]
    cfg.groups = list(cfg.groups or default_groups)
    cfg.models = list(cfg.models or default_models)
    cfg.hyperparameters = {ClassifierKind.parse(k).value: v for k, v in cfg.hyperparameters.items()}
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _fmt_t(t) -> str:
    return str(int(t)) if float(t).is_integer() else str(t)


class _Outputs:
    """Collects written artifacts for the run manifest."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir) if out_dir else None
        self.files: Dict[str, str] = {}
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        if not self.dir:
            return None
        path = self.dir / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def record(self, name):
        path = self.dir / name
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def manifest(self, command, cfg: RunConfig):
        if not self.dir:
            return
        doc = {
            "command": command,
            "version": __version__,
            "seed": cfg.seed,
            "config": _config_echo(cfg),
            "artifacts": dict(sorted(self.files.items())),
        }
        (self.dir / "run_manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _config_echo(cfg: RunConfig) -> dict:
    doc = asdict(cfg)
    for key in ("dataset", "depth_manifest"):
        if doc[key]:
            data = Path(doc[key]).read_bytes()
            doc[f"{key}_sha256"] = hashlib.sha256(data).hexdigest()
    return doc


def _load_records(cfg):
    return parse_annotations(cfg.dataset, lenient=cfg.lenient)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args):
    cfg = resolve_config(args, STANDARD_THRESHOLDS, [], [])
    cfg.validate()
    records = _load_records(cfg)
    raw = sum(len(generate_pairs(r)) for r in records)
    valid = sum(len(filter_valid(generate_pairs(r))) for r in records)
    summary = {
        "images": len(records),
        "objects": sum(len(r.objects) for r in records),
        "objects_unspecified_depth": sum(1 for r in records for o in r.objects if o.depth is None),
        "raw_pairs": raw,
        "valid_pairs": valid,
        "class_distribution": {},
    }
    lines = [
        f"images: {summary['images']}",
        f"objects: {summary['objects']} ({summary['objects_unspecified_depth']} with unspecified depth)",
        f"raw pairs: {raw}",
        f"valid pairs: {valid}",
    ]
    for t in cfg.thresholds:
        dist = class_distribution(build_pairs(records, t))
        summary["class_distribution"][_fmt_t(t)] = {str(c): n for c, n in dist.counts.items()}
        fr = dist.fractions or {}
        cells = "  ".join(f"{c}: {n} ({100 * fr.get(c, 0):.1f}%)" for c, n in dist.counts.items())
        lines.append(f"T={_fmt_t(t)}  {cells}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    out = _Outputs(cfg.out)
    out.write("ingest_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    out.manifest("ingest", cfg)
    return EXIT_OK


def cmd_features(args):
    cfg = resolve_config(args, [0], [",".join(g.value for g in c) for c in FEATURE_GROUP_COMBINATIONS], [])
    cfg.validate()
    if not cfg.out:
        raise ConfigurationError("out: --out DIR is required for features")
    records = _load_records(cfg)
    out = _Outputs(cfg.out)
    for t in cfg.thresholds:
        pairs = build_pairs(records, t)
        for g in cfg.groups:
            fm = PairFeatureExtractor(groups=g).fit(pairs).transform(pairs)
            name = f"features_{group_label(g).replace('+', '-')}_T{_fmt_t(t)}.csv"
            fm.to_csv(out.dir / name)
            out.record(name)
            print(f"{name}: {fm.shape[0]} rows x {fm.shape[1]} columns")
    out.manifest("features", cfg)
    return EXIT_OK


def _spec_list(cfg):
    return grid_specs(
        groups_list=[parse_groups(g) for g in cfg.groups],
        models=cfg.models,
        thresholds=cfg.thresholds,
        hyperparameters=cfg.hyperparameters,
        seed=cfg.seed,
        folds=cfg.folds,
    )


def cmd_train(args):
    cfg = resolve_config(args, [0], ["geo,sem,per"], ["rf"])
    cfg.validate()
    if len(cfg.thresholds) != 1 or len(cfg.groups) != 1 or len(cfg.models) != 1:
        raise ConfigurationError("train takes exactly one threshold, one feature-group combination and one model")
    records = _load_records(cfg)
    spec = _spec_list(cfg)[0]
    report = run_experiment(spec, records)
    print(format_table([report]), end="")
    out = _Outputs(cfg.out)
    out.write("report.csv", reports_to_csv([report]))
    out.write("report.json", reports_to_json([report]))
    if out.dir:
        pairs = build_pairs(records, spec.threshold)
        pipe = spec.build_pipeline().fit(pairs, [p.relative_class for p in pairs])
        save_model(pipe, out.dir / "model.json", metadata=spec.describe())
        out.record("model.json")
    out.manifest("train", cfg)
    return EXIT_OK


def cmd_grid(args):
    cfg = resolve_config(
        args,
        [0, 2],
        [",".join(g.value for g in c) for c in FEATURE_GROUP_COMBINATIONS],
        [k.value for k in ClassifierKind],
    )
    cfg.validate()
    records = _load_records(cfg)
    specs = _spec_list(cfg)
    logger.info("running %d experiments", len(specs))
    result = run_grid(specs, records, n_jobs=cfg.n_jobs)
    table = format_table(result.reports, result.failures)
    print(table, end="")
    out = _Outputs(cfg.out)
    out.write("grid.csv", reports_to_csv(result.reports))
    out.write("grid.txt", table)
    out.write("grid.json", reports_to_json(result.reports, result.failures))
    out.manifest("grid", cfg)
    return EXIT_OK if not result.failures else EXIT_RUNTIME


def _load_maps(cfg, records):
    paths = load_manifest(cfg.depth_manifest)
    dims = {r.image_id: r.dims for r in records}
    maps = {}
    for image_id, path in paths.items():
        if image_id in dims:
            maps[image_id] = load_depth_map(path, dims[image_id])
    return maps


def cmd_depth_compare(args):
    cfg = resolve_config(args, DEPTH_COMPARE_THRESHOLDS, ["geo,sem,per"], ["rf", "nn"])
    cfg.validate(need_manifest=True)
    records = _load_records(cfg)
    maps = _load_maps(cfg, records)
    wanted = {p.image_id for p in build_pairs(records, 0)}
    missing = sorted(wanted - set(maps))
    if missing:
        raise DepthMapError(f"no depth map for {len(missing)} image(s), e.g. {missing[:3]}")

    human = human_agreement_table(records, maps, cfg.thresholds)
    lines = ["Agreement of depth-map derived relative depth with human annotations", ""]
    header = ["Threshold"] + [_fmt_t(t) for t in cfg.thresholds]
    rows = [["Average"] + [f"{human['mean'][t].accuracy:.4f}" for t in cfg.thresholds],
            ["RWA"] + [f"{human['rwa'][t].accuracy:.4f}" for t in cfg.thresholds]]
    lines += _align([header, *rows])

    model_rows = []
    for t in cfg.thresholds:
        mono = predictor_classes(records, maps, t)
        for g in cfg.groups:
            for m in cfg.models:
                kind = ClassifierKind.parse(m)
                spec = ExperimentSpec(parse_groups(g), kind, t, cfg.hyperparameters.get(kind.value, {}), cfg.seed, cfg.folds)
                report = run_experiment(spec, records)
                model_rows.append({
                    "threshold": t,
                    "feature_group": spec.group_name,
                    "model": kind.abbreviation,
                    "accuracy": report.mean_accuracy,
                    "mono_mean": agreement(report.predictions, mono["mean"]).accuracy,
                    "mono_rwa": agreement(report.predictions, mono["rwa"]).accuracy,
                })
    lines += ["", "Agreement of trained models (out-of-fold predictions) with the depth-map predictor", ""]
    header = ["T/H", "FeatureGroup", "Model", "Accuracy", "Mono-Mean", "Mono-RWA"]
    rows = [[_fmt_t(r["threshold"]), r["feature_group"], r["model"], f"{100 * r['accuracy']:.2f}%",
             f"{100 * r['mono_mean']:.2f}%", f"{100 * r['mono_rwa']:.2f}%"] for r in model_rows]
    lines += _align([header, *rows])
    if set(cfg.thresholds) != set(DEPTH_COMPARE_THRESHOLDS):
        lines += ["", "note: depth-map agreement is conventionally reported at thresholds 0, 1, 5, "
                      "whereas classifier experiments use 0, 2, 5, 10"]
    text = "\n".join(lines) + "\n"
    print(text, end="")

    out = _Outputs(cfg.out)
    doc = {
        "human_agreement": {
            agg: {_fmt_t(t): {"accuracy": s.accuracy, "pairs": s.pair_count, "confusion": s.confusion.tolist()}
                  for t, s in human[agg].items()}
            for agg in AGGREGATORS
        },
        "model_agreement": model_rows,
    }
    out.write("depth_compare.txt", text)
    out.write("depth_compare.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    out.manifest("depth-compare", cfg)
    return EXIT_OK


def _align(rows):
    widths = [max(len(str(x)) for x in col) for col in zip(*rows)]
    return ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() for row in rows]


def cmd_synth(args):
    from .synthetic import make_synthetic_depth_maps, make_synthetic_records

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = make_synthetic_records(args.images, seed=args.seed, label_noise=args.label_noise)
    write_annotations(records, out / "annotations.json")
    if args.depth_maps:
        maps_dir = out / "depth"
        maps_dir.mkdir(exist_ok=True)
        manifest = {}
        for image_id, dm in make_synthetic_depth_maps(records, seed=args.seed, noise=args.map_noise).items():
            write_depth_map(dm, maps_dir / f"{image_id}.txt")
            manifest[image_id] = f"depth/{image_id}.txt"
        (out / "depth_manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    print(f"wrote {len(records)} images to {out}")
    return EXIT_OK


def cmd_version(args):
    print(f"reldepth {__version__}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat JSON config; flags override its values")
    common.add_argument("--dataset", metavar="PATH", help="annotation JSON file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--lenient", action="store_true", help="accept depth 0 (clamped to 1)")

    exp = _Parser(add_help=False)
    exp.add_argument("--threshold", type=float, action="append", metavar="N", help="depth threshold (repeatable)")
    exp.add_argument("--groups", action="append", metavar="geo,sem,per,scene",
                     help="feature-group combination (repeatable)")
    exp.add_argument("--model", action="append", choices=[k.value for k in ClassifierKind], help="classifier (repeatable)")
    exp.add_argument("--folds", type=int, metavar="K")
    exp.add_argument("--param", action="append", metavar="MODEL.NAME=VALUE", help="hyperparameter override")
    exp.add_argument("--n-jobs", dest="n_jobs", type=int, metavar="N")

    parser = _Parser(prog="reldepth", description="Relative depth between object pairs from bounding-box features.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", parents=[common], help="validate and summarise a dataset")
    p.add_argument("--threshold", type=float, action="append", metavar="N")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", parents=[common, exp], help="export feature matrices as CSV")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", parents=[common, exp], help="cross-validate one configuration and save the model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", parents=[common, exp], help="run the feature-group x model x threshold grid")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("depth-compare", parents=[common, exp], help="compare with depth-map derived relative depth")
    p.add_argument("--depth-manifest", dest="depth_manifest", metavar="PATH")
    p.set_defaults(func=cmd_depth_compare)

    p = sub.add_parser("synth", help="write a synthetic dataset (and depth maps) for demos")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--images", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-noise", type=float, default=0.05)
    p.add_argument("--depth-maps", action="store_true")
    p.add_argument("--map-noise", type=float, default=5.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("version", help="print the version")
    p.set_defaults(func=cmd_version)
    return parser


def _configure_logging():
    level = os.environ.get("RELDEPTH_LOG", "WARNING").upper()
    if level.isdigit():
        level = int(level)
    try:
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    except ValueError:
        logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
        logger.warning("RELDEPTH_LOG=%r is not a log level, using WARNING", level)


def dispatch(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"reldepth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"reldepth: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnnotationError, DepthMapError) as exc:
        print(f"reldepth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        logger.debug("runtime failure", exc_info=True)
        print(f"reldepth: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
