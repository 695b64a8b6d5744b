"""Command-line entry point: generate, train, evaluate, predict, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import LogisticRegression, MultinomialNB
from .bnn import BayesianMLPClassifier, decide, histogram_report
from .data import (CleanConfig, Dataset, SchemaError, SplitSpec, SyntheticConfig,
                   TabularEncoder, clean, expand_date, generate_synthetic, load_csv,
                   load_schema, oversample, time_split, write_csv, write_schema)
from .dnn import EmbeddingMLPClassifier
from .metrics import TABLE_ROWS, UNDECIDED, ConfusionMatrix, evaluate, report_from_confusion, table_column
from .persistence import estimator_from_dict, estimator_to_dict
from .trees import DecisionTreeClassifier, GradientBoostingClassifier, RandomForestClassifier

logger = logging.getLogger("propensity")

ARTIFACT_FORMAT = "propensity-model"
ARTIFACT_VERSION = 1
DATE_COLUMN = "due_date"

MODELS = ("bnn", "dnn", "rf", "xgb", "dt", "lr", "mnb")
ALIASES = {"gbm": "xgb"}
TREE_MODELS = ("rf", "xgb", "dt")


class CLIError(Exception):
    """User-facing failure; the message goes to stderr."""


# ---------------------------------------------------------------------------
# model registry
# ---------------------------------------------------------------------------

def _make_estimator(name: str, enc, params: dict, seed: int):
    k = len(enc.cardinalities_)
    if name == "dt":
        est = DecisionTreeClassifier(categorical_features=list(range(k)))
    elif name == "rf":
        est = RandomForestClassifier(categorical_features=list(range(k)), random_state=seed)
    elif name == "xgb":
        est = GradientBoostingClassifier(categorical_features=list(range(k)), random_state=seed)
    elif name == "lr":
        est = LogisticRegression()
    elif name == "mnb":
        est = MultinomialNB()
    elif name == "dnn":
        est = EmbeddingMLPClassifier(cardinalities=list(enc.cardinalities_), random_state=seed)
    elif name == "bnn":
        est = BayesianMLPClassifier(random_state=seed)
    else:
        raise CLIError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
    valid = est.get_params()
    unknown = sorted(set(params) - set(valid))
    if unknown:
        raise CLIError(f"unknown hyperparameter(s) for {name}: {', '.join(unknown)}; "
                       f"valid: {', '.join(sorted(valid))}")
    return est.set_params(**params)


def model_view(name: str, enc) -> np.ndarray:
    """Feature matrix each model family consumes."""
    if name in ("bnn", "lr"):
        return enc.design_matrix()
    if name == "mnb":
        return enc.count_matrix()
    return enc.X


def _training_log(est) -> dict:
    log = {}
    for attr, key in (("log_", None), ("train_loss_", "train_loss"),
                      ("objective_path_", "objective")):
        value = getattr(est, attr, None)
        if value is None:
            continue
        if key is None:
            log.update({k: v for k, v in value.items()})
        else:
            log[key] = np.asarray(value).tolist()
    return log


# ---------------------------------------------------------------------------
# output handling
# ---------------------------------------------------------------------------

class Outputs:
    """Collects files written to temporary names and publishes them together.

    On failure none of the targets is left behind.
    """

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        target = self.dir / name
        tmp = self.dir / f".{name}.partial"
        self.pending.append((tmp, target))
        return tmp

    def __enter__(self):
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise CLIError(f"cannot create output directory {self.dir}: {e}") from e
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for tmp, target in self.pending:
                tmp.replace(target)
        else:
            for tmp, target in self.pending:
                tmp.unlink(missing_ok=True)
        return False


def _write_json(path, obj) -> None:
    def clean_nan(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean_nan(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean_nan(v) for v in x]
        return x

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean_nan(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(round(v, 10))
    return str(v)


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------

def _load(args) -> Dataset:
    data = Path(args.data)
    schema_path = Path(args.schema) if args.schema else data.with_name("schema.json")
    if not schema_path.is_file():
        raise CLIError(f"schema file not found: {schema_path}")
    return load_csv(data, load_schema(schema_path))


def prepare_split(ds: Dataset, split: SplitSpec, rules: CleanConfig) -> tuple[Dataset, Dataset]:
    ds = clean(ds, rules)
    if len(ds) == 0:
        raise CLIError("no rows left after cleaning")
    ds = expand_date(ds, DATE_COLUMN)
    return time_split(ds, split)


def prepare_inference(ds: Dataset, enc: TabularEncoder) -> Dataset:
    """Normalize strings and expand dates without row filters, then align to the encoder."""
    ds = clean(ds, CleanConfig(z_max=None, min_freq=None, imbalance=None, drop_missing=False))
    ds = expand_date(ds, DATE_COLUMN)
    schema = enc.schema_
    absent = [c for c in schema.names if c not in ds.frame.columns]
    if absent:
        raise SchemaError(f"data lacks columns the model was trained on: {absent}")
    frame = ds.frame[schema.names]
    # unseen or missing categories map to the unknown slot; continuous gaps cannot be scored
    frame = frame.dropna(subset=schema.of_kind("continuous"))
    return Dataset(schema, frame)


def _parse_params(pairs, config_path) -> dict:
    params = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            cfg = json.load(fh)
        params.update(cfg.get("params", cfg))
    for pair in pairs or []:
        if "=" not in pair:
            raise CLIError(f"--param expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            params[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            params[key.strip()] = raw
    return params


def _load_artifact(path):
    path = Path(path)
    if not path.is_file():
        raise CLIError(f"model artifact not found: {path}")
    with open(path, encoding="utf-8") as fh:
        art = json.load(fh)
    if art.get("format") != ARTIFACT_FORMAT:
        raise CLIError(f"{path} is not a model artifact")
    if art.get("version") != ARTIFACT_VERSION:
        raise CLIError(f"unsupported artifact version {art.get('version')}")
    enc = TabularEncoder.from_dict(art["encoder"])
    if enc.schema_hash() != art["schema_hash"]:
        raise CLIError("artifact schema hash does not match its encoder state")
    return art, enc, estimator_from_dict(art["estimator"])


def _score(name, est, X, threshold=None, samples=None):
    """``(outcome, probability of class 1, probability of outcome, spread, pp)``."""
    if name == "bnn":
        pp = est.posterior_predictive(X, samples)
        d = decide(pp, threshold if threshold is not None else est.threshold)
        return d.outcome, pp.median[:, 1], d.probability, d.spread, (pp, d)
    proba = est.predict_proba(X)
    outcome = est.predict(X)
    chosen = proba[np.arange(len(outcome)), outcome]
    return outcome, proba[:, 1], chosen, np.zeros(len(outcome)), None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> None:
    if args.rows < 1:
        raise CLIError("--rows must be >= 1")
    cfg = SyntheticConfig(n_rows=args.rows, positive_rate=args.positive_rate, drift=args.drift,
                          label_noise=not args.separable)
    ds = generate_synthetic(cfg, args.seed)
    with Outputs(args.out) as out:
        write_csv(ds, out.path("data.csv"))
        write_schema(ds.schema, out.path("schema.json"))
    logger.info("wrote %d rows to %s", len(ds), args.out)


def cmd_train(args) -> None:
    name = ALIASES.get(args.model, args.model)
    params = _parse_params(args.param, args.config)
    if args.samples is not None:
        params["n_samples"] = args.samples
    if args.threshold is not None:
        params["threshold"] = args.threshold
    split = SplitSpec(test_fraction=args.test_fraction, oversample=args.oversample, seed=args.seed)
    rules = CleanConfig()
    train, _ = prepare_split(_load(args), split, rules)
    enc = TabularEncoder().fit(train)
    encoded = enc.transform(train)
    if encoded.y is None or len(np.unique(encoded.y)) < 2:
        raise CLIError("training rows must contain both classes")
    if split.oversample:
        encoded = oversample(encoded, split.seed)
    est = _make_estimator(name, enc, params, args.seed)
    t0 = time.perf_counter()
    est.fit(model_view(name, encoded), encoded.y)
    elapsed = time.perf_counter() - t0
    logger.info("trained %s on %d rows in %.1fs", name, len(encoded), elapsed)
    artifact = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "package_version": __version__,
        "model": name,
        "seed": args.seed,
        "split": asdict(split),
        "clean": asdict(rules),
        "date_column": DATE_COLUMN,
        "schema_hash": enc.schema_hash(),
        "encoder": enc.to_dict(),
        "estimator": estimator_to_dict(est),
        "log": _training_log(est),
        "train_rows": len(encoded),
        "train_seconds": elapsed,
    }
    with Outputs(args.out) as out:
        _write_json(out.path(f"model.{name}.json"), artifact)
        _write_json(out.path(f"train_log.{name}.json"), artifact["log"])


def _counts_reports(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        counts = json.load(fh)
    reports = {}
    for model, c in counts.items():
        cm = ConfusionMatrix(tp=int(c["tp"]), tn=int(c["tn"]), fp=int(c["fp"]), fn=int(c["fn"]),
                             abstained=int(c.get("abstained", 0)))
        reports[model] = report_from_confusion(cm, float(c.get("auc", math.nan)))
    return reports


def cmd_evaluate(args) -> None:
    if args.counts:
        reports = _counts_reports(args.counts)
        baseline = None
    else:
        if not args.artifact or not args.data:
            raise CLIError("evaluate needs --artifact and --data (or --counts)")
        ds = _load(args)
        reports, baseline = {}, None
        for path in args.artifact:
            art, enc, est = _load_artifact(path)
            name = art["model"]
            if args.all_rows:
                test = prepare_inference(ds, enc)
            else:
                split = SplitSpec(**art["split"])
                _, test = prepare_split(ds, split, CleanConfig(**art["clean"]))
                test = test.with_frame(test.frame, enc.schema_)
            encoded = enc.transform(test)
            if encoded.y is None:
                raise CLIError("evaluation rows carry no labels")
            outcome, p1, *_ = _score(name, est, model_view(name, encoded), args.threshold,
                                     args.samples)
            reports[name] = evaluate(encoded.y, outcome, p1)
            share = float(np.mean(encoded.y)) if len(encoded.y) else math.nan
            baseline = max(share, 1 - share)
    with Outputs(args.out) as out:
        payload = {m: r.to_dict() for m, r in reports.items()}
        if baseline is not None:
            payload["majority_baseline_accuracy"] = baseline
        _write_json(out.path("metrics.json"), payload)
        names = list(reports)
        rows = [[label] + [_fmt(table_column(reports[m])[i]) for m in names]
                for i, label in enumerate(TABLE_ROWS)]
        rows.append(["Abstention Rate"] + [_fmt(reports[m].confusion.abstention_rate)
                                           for m in names])
        _write_rows(out.path("metrics_table.csv"), ["metric"] + names, rows)
        class_rows = [[m, r["label"], _fmt(r["precision"]), _fmt(r["recall"]), _fmt(r["f1"]),
                       r["support"]] for m in names for r in reports[m].classwise]
        _write_rows(out.path("classwise.csv"),
                    ["model", "label", "precision", "recall", "f1", "support"], class_rows)


def cmd_predict(args) -> None:
    art, enc, est = _load_artifact(args.artifact)
    name = art["model"]
    if args.histograms and name != "bnn":
        raise CLIError("--histograms needs a bnn artifact")
    test = prepare_inference(_load(args), enc)
    encoded = enc.transform(test)
    outcome, _, prob, spread, extra = _score(name, est, model_view(name, encoded),
                                             args.threshold, args.samples)
    ids = encoded.ids
    with Outputs(args.out) as out:
        rows = [[int(i), "undecided" if o == UNDECIDED else int(o), _fmt(float(p)),
                 _fmt(float(s))] for i, o, p, s in zip(ids, outcome, prob, spread)]
        _write_rows(out.path("predictions.csv"),
                    ["instance_id", "outcome", "probability", "spread"], rows)
        if args.histograms:
            pp, d = extra
            hist_rows = []
            for h in histogram_report(pp, args.bins, d):
                for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
                    hist_rows.append([int(ids[h.instance]), h.label, _fmt(float(lo)),
                                      _fmt(float(hi)), int(c), int(h.decided)])
            _write_rows(out.path("histograms.csv"),
                        ["instance_id", "class", "bin_lo", "bin_hi", "count", "decided_flag"],
                        hist_rows)


def cmd_report(args) -> None:
    art, enc, est = _load_artifact(args.artifact)
    name = art["model"]
    if name not in TREE_MODELS:
        raise CLIError(f"feature importance needs a tree model (rf, xgb, dt), not {name!r}")
    # tree models see the X layout: categorical columns, then continuous
    names = list(enc.categorical_) + list(enc.continuous_)
    imp = est.feature_importances_
    order = np.lexsort((np.arange(len(imp)), -imp))
    rows = [[names[j], _fmt(float(imp[j])), rank] for rank, j in enumerate(order, start=1)
            if imp[j] > 0 or args.all_features]
    with Outputs(args.out) as out:
        _write_rows(out.path("importance.csv"), ["feature", "importance", "rank"], rows)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _model_name(value: str) -> str:
    name = ALIASES.get(value, value)
    if name not in MODELS:
        raise argparse.ArgumentTypeError(
            f"unknown model {value!r}; choose from {', '.join(MODELS)} (gbm = xgb)")
    return name


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="propensity", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset and its schema")
    g.add_argument("--rows", type=int, default=10_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--drift", action="store_true", help="shift features of the latest rows")
    g.add_argument("--separable", action="store_true", help="labels without noise")
    g.add_argument("--positive-rate", type=float, default=0.58)
    g.set_defaults(func=cmd_generate)

    def data_args(sp):
        sp.add_argument("--data", help="CSV file")
        sp.add_argument("--schema", help="schema JSON (default: schema.json beside the data)")

    t = sub.add_parser("train", help="fit one model and write its artifact")
    data_args(t)
    t.add_argument("--model", type=_model_name, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--test-fraction", type=float, default=0.2)
    t.add_argument("--oversample", action=argparse.BooleanOptionalAction, default=True)
    t.add_argument("--samples", type=int, help="bnn posterior samples S")
    t.add_argument("--threshold", type=float, help="bnn decision threshold")
    t.add_argument("--config", help="JSON file of hyperparameters")
    t.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="hyperparameter override (repeatable; wins over --config)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score artifacts on the held-out rows")
    data_args(e)
    e.add_argument("--artifact", action="append", help="model artifact (repeatable)")
    e.add_argument("--counts", help="JSON of confusion counts per model instead of artifacts")
    e.add_argument("--all-rows", action="store_true",
                   help="score every row of --data instead of the held-out block")
    e.add_argument("--threshold", type=float)
    e.add_argument("--samples", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("predict", help="write per-instance predictions")
    data_args(r)
    r.add_argument("--artifact", required=True)
    r.add_argument("--threshold", type=float)
    r.add_argument("--samples", type=int)
    r.add_argument("--histograms", action="store_true", help="bnn log-probability histograms")
    r.add_argument("--bins", type=int, default=30)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_predict)

    f = sub.add_parser("report", help="feature importance of a tree model")
    f.add_argument("--artifact", required=True)
    f.add_argument("--all-features", action="store_true", help="include zero-importance rows")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "data", None) is None and args.command in ("train", "predict"):
        print(f"error: {args.command} needs --data", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (CLIError, ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
