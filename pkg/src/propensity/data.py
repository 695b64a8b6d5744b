"""Tabular billing data: loading, cleaning, date expansion, encoding, splitting.

Rows are held in a pandas DataFrame whose index doubles as the instance id,
so ids survive row filtering. Cells are strings (categorical, target),
floats (continuous) or timestamps (date); missing cells are NaN/NaT/None.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

logger = logging.getLogger(__name__)

KINDS = ("categorical", "continuous", "date", "target")
DATE_FORMAT = "%Y-%m-%d"
DATE_PARTS = ("year", "month", "week", "dayofweek", "day")


class SchemaError(ValueError):
    """Raised when data does not match its schema."""


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[tuple[str, str], ...]
    target_positive_label: str
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple((str(n), str(k)) for n, k in self.columns))
        names = [n for n, _ in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        bad = [k for _, k in self.columns if k not in KINDS]
        if bad:
            raise SchemaError(f"unknown column kinds: {bad}")
        if sum(k == "target" for _, k in self.columns) != 1:
            raise SchemaError("schema needs exactly one target column")
        if len(self.columns) < 2:
            raise SchemaError("schema needs at least one non-target column")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    @property
    def target(self) -> str:
        return next(n for n, k in self.columns if k == "target")

    def kind(self, name: str) -> str:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"column {name!r} not in schema")

    def of_kind(self, kind: str) -> list[str]:
        return [n for n, k in self.columns if k == kind]

    def to_dict(self) -> dict:
        out = {
            "columns": [{"name": n, "kind": k} for n, k in self.columns],
            "target_positive_label": self.target_positive_label,
        }
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            cols = tuple((c["name"], c["kind"]) for c in d["columns"])
            return cls(cols, str(d["target_positive_label"]), dict(d.get("meta", {})))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc


def load_schema(path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def write_schema(schema: FeatureSchema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    frame: pd.DataFrame

    def __post_init__(self):
        missing = [c for c in self.schema.names if c not in self.frame.columns]
        if missing:
            raise SchemaError(f"frame lacks schema columns {missing}")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def rows(self) -> list[dict]:
        return self.frame[self.schema.names].to_dict("records")

    def with_frame(self, frame: pd.DataFrame, schema: FeatureSchema | None = None) -> "Dataset":
        schema = schema or self.schema
        return Dataset(schema, frame[schema.names])


def _parse_column(raw: pd.Series, kind: str) -> pd.Series:
    if kind == "continuous":
        values = pd.to_numeric(raw.str.strip(), errors="coerce")
        return values.where(np.isfinite(values))
    if kind == "date":
        return pd.to_datetime(raw.str.strip(), format=DATE_FORMAT, errors="coerce")
    return raw.where(raw.str.strip() != "", None)


def from_records(records: list[dict], schema: FeatureSchema) -> Dataset:
    """Build a dataset from python records, parsing cells per column kind."""
    frame = pd.DataFrame.from_records(records, columns=schema.names)
    return Dataset(schema, _typed_frame(frame.astype(object).where(frame.notna(), ""), schema))


def _typed_frame(raw: pd.DataFrame, schema: FeatureSchema) -> pd.DataFrame:
    out = {}
    for name, kind in schema.columns:
        col = raw[name].astype(str) if kind != "date" else raw[name].map(_date_str)
        out[name] = _parse_column(col, kind)
    return pd.DataFrame(out, index=raw.index)


def _date_str(v) -> str:
    if isinstance(v, (pd.Timestamp,)) or hasattr(v, "strftime"):
        return v.strftime(DATE_FORMAT)
    return str(v)


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read an RFC-4180 CSV with a header row; unparseable cells become missing."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header or any(h.strip() == "" for h in header) or len(set(header)) != len(header):
        raise SchemaError(f"malformed header in {path}")
    absent = [c for c in schema.names if c not in header]
    if absent:
        raise SchemaError(f"CSV header lacks schema columns {absent}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, usecols=schema.names)
    return Dataset(schema, _typed_frame(raw, schema))


def write_csv(ds: Dataset, path) -> None:
    frame = ds.frame.copy()
    for name in ds.schema.of_kind("date"):
        frame[name] = frame[name].dt.strftime(DATE_FORMAT)
    frame.to_csv(path, index=False, lineterminator="\n")


# ---------------------------------------------------------------------------
# cleaning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CleanConfig:
    """Row/column filters applied by :func:`clean`.

    ``imbalance`` drops categorical columns whose most frequent value covers
    at least that share of rows; ``None`` disables a rule.
    """

    z_max: float | None = 4.0
    min_freq: int | None = 5
    imbalance: float | None = 0.99
    drop_missing: bool = True


def _normalize_strings(frame: pd.DataFrame, schema: FeatureSchema) -> pd.DataFrame:
    frame = frame.copy()
    for name in schema.of_kind("categorical") + schema.of_kind("target"):
        col = frame[name]
        mask = col.notna()
        frame.loc[mask, name] = col[mask].astype(str).str.strip().str.lower()
        frame[name] = frame[name].where(frame[name] != "", None)
    return frame


def clean(ds: Dataset, rules: CleanConfig | None = None) -> Dataset:
    """Lowercase/trim strings, then drop missing, outlier and imbalanced data.

    Filters are reapplied until nothing changes, so the result is a fixed
    point: ``clean(clean(ds)) == clean(ds)``.
    """
    rules = rules or CleanConfig()
    schema = ds.schema
    frame = _normalize_strings(ds.frame, schema)
    while True:
        before = (len(frame), len(schema.columns))
        if rules.drop_missing:
            frame = frame.dropna(subset=schema.names)
        if rules.imbalance is not None and len(frame):
            dropped = [
                c for c in schema.of_kind("categorical")
                if frame[c].value_counts(normalize=True, dropna=False).iloc[0] >= rules.imbalance
            ]
            if dropped:
                logger.info("dropping imbalanced columns %s", dropped)
                schema = replace(schema, columns=tuple(col for col in schema.columns
                                                       if col[0] not in dropped))
                frame = frame[schema.names]
        if rules.z_max is not None and len(frame):
            keep = np.ones(len(frame), dtype=bool)
            for c in schema.of_kind("continuous"):
                values = frame[c].to_numpy(dtype=float)
                std = np.nanstd(values)
                if std > 0:
                    z = np.abs(values - np.nanmean(values)) / std
                    keep &= ~(z > rules.z_max)
            frame = frame[keep]
        if rules.min_freq is not None and len(frame):
            keep = np.ones(len(frame), dtype=bool)
            for c in schema.of_kind("categorical"):
                counts = frame[c].map(frame[c].value_counts())
                keep &= ~(counts < rules.min_freq).to_numpy()
            frame = frame[keep]
        if (len(frame), len(schema.columns)) == before:
            break
    return Dataset(schema, frame)


def expand_date(ds: Dataset, column: str) -> Dataset:
    """Replace a date column with year, month, ISO week, day-of-week and day-of-month."""
    if column not in ds.schema.names:
        raise SchemaError(f"column {column!r} not in schema")
    if ds.schema.kind(column) != "date":
        raise SchemaError(f"column {column!r} is not a date column")
    dates = ds.frame[column]
    iso = dates.dt.isocalendar()
    parts = {
        "year": dates.dt.year,
        "month": dates.dt.month,
        "week": iso["week"],
        "dayofweek": dates.dt.dayofweek,
        "day": dates.dt.day,
    }
    frame = ds.frame.drop(columns=[column])
    new_cols = []
    for part in DATE_PARTS:
        name = f"{column}_{part}"
        values = parts[part]
        frame[name] = [None if pd.isna(v) else str(int(v)) for v in values]
        new_cols.append((name, "categorical"))
    columns = []
    for name, kind in ds.schema.columns:
        columns.extend(new_cols if name == column else [(name, kind)])
    schema = replace(ds.schema, columns=tuple(columns))
    return Dataset(schema, frame[schema.names])


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    order_column: str = "issue_date"
    oversample: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")


def split_sizes(n: int, test_fraction: float) -> tuple[int, int]:
    """``(n_train, n_test)`` with ``n_test = ceil(test_fraction * n)``."""
    # round away float noise such as 0.2 * 5 = 1.0000000000000002
    n_test = math.ceil(round(test_fraction * n, 9))
    return n - n_test, n_test


def time_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Hold out the latest-dated rows; equal dates keep their input order."""
    if len(ds) == 0:
        raise ValueError("cannot split an empty dataset")
    if ds.schema.kind(spec.order_column) != "date":
        raise SchemaError(f"order column {spec.order_column!r} is not a date column")
    order = ds.frame[spec.order_column]
    if order.isna().any():
        raise SchemaError(f"order column {spec.order_column!r} has unparseable dates")
    idx = np.argsort(order.to_numpy(dtype="datetime64[ns]"), kind="stable")
    n_train, _ = split_sizes(len(ds), spec.test_fraction)
    frame = ds.frame.iloc[idx]
    return ds.with_frame(frame.iloc[:n_train]), ds.with_frame(frame.iloc[n_train:])


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

@dataclass
class EncodedDataset:
    """Numeric view of a dataset.

    ``cat`` holds category indices (0 = unknown) and ``cont`` standardized
    continuous values; ``y`` holds 0/1 labels or ``None`` when unlabeled.
    """

    cat: np.ndarray
    cont: np.ndarray
    y: np.ndarray | None
    encoder: "TabularEncoder"
    ids: np.ndarray | None = None

    def __len__(self) -> int:
        return self.cat.shape[0]

    @property
    def cardinalities(self) -> list[int]:
        return self.encoder.cardinalities_

    @property
    def X(self) -> np.ndarray:
        """Category indices followed by standardized continuous columns."""
        return np.hstack([self.cat.astype(np.float64), self.cont])

    @property
    def feature_names(self) -> list[str]:
        return self.encoder.categorical_ + self.encoder.continuous_

    def design_matrix(self) -> np.ndarray:
        """One-hot categoricals (unknown slot included) plus standardized continuous."""
        return np.hstack([one_hot(self.cat, self.cardinalities), self.cont])

    def count_matrix(self) -> np.ndarray:
        """One-hot categoricals plus one-hot equal-width bins of the continuous columns."""
        bins = self.encoder.discretize(self.cont)
        widths = [len(e) - 1 for e in self.encoder.bin_edges_]
        return np.hstack([one_hot(self.cat, self.cardinalities), one_hot(bins, widths)])

    def take(self, idx) -> "EncodedDataset":
        idx = np.asarray(idx)
        return EncodedDataset(self.cat[idx], self.cont[idx],
                              None if self.y is None else self.y[idx], self.encoder,
                              None if self.ids is None else self.ids[idx])


def one_hot(indices: np.ndarray, widths: list[int]) -> np.ndarray:
    n = indices.shape[0]
    out = np.zeros((n, int(sum(widths))))
    offset = 0
    for j, w in enumerate(widths):
        out[np.arange(n), offset + indices[:, j]] = 1.0
        offset += w
    return out


class TabularEncoder(TransformerMixin, BaseEstimator):
    """Fit category dictionaries and standardization stats on training rows.

    Categories are sorted lexicographically and numbered from 1; index 0 is
    reserved for values not seen during ``fit``. Continuous columns are
    standardized with the training mean and population standard deviation.
    Date columns are not features and are ignored.

    Parameters
    ----------
    n_bins : int, default=10
        Number of equal-width bins used by :meth:`discretize`.
    """

    def __init__(self, n_bins: int = 10):
        self.n_bins = n_bins

    def fit(self, ds: Dataset, y=None):
        schema = ds.schema
        frame = ds.frame
        self.schema_ = schema
        self.categorical_ = schema.of_kind("categorical")
        self.continuous_ = schema.of_kind("continuous")
        self.categories_ = {
            c: sorted(str(v) for v in frame[c].dropna().unique()) for c in self.categorical_
        }
        self.cardinalities_ = [len(self.categories_[c]) + 1 for c in self.categorical_]
        self.means_, self.stds_, self.bin_edges_ = [], [], []
        self.constant_, self.warnings_ = [], []
        for c in self.continuous_:
            values = frame[c].to_numpy(dtype=float)
            mean = float(np.mean(values)) if len(values) else 0.0
            std = float(np.std(values)) if len(values) else 0.0
            if std == 0:
                self.constant_.append(c)
                msg = f"continuous column {c!r} is constant; encoded as zeros"
                self.warnings_.append(msg)
                logger.warning(msg)
            self.means_.append(mean)
            self.stds_.append(std)
            lo = float(values.min()) if len(values) else 0.0
            hi = float(values.max()) if len(values) else 0.0
            self.bin_edges_.append(np.linspace(lo, hi, self.n_bins + 1).tolist())
        return self

    def _check_schema(self, schema: FeatureSchema) -> None:
        if schema.columns != self.schema_.columns:
            raise SchemaError("dataset schema differs from the schema the encoder was fit on")

    def transform(self, ds: Dataset) -> EncodedDataset:
        check_is_fitted(self, "categories_")
        self._check_schema(ds.schema)
        frame = ds.frame
        n = len(frame)
        cat = np.zeros((n, len(self.categorical_)), dtype=np.int64)
        for j, c in enumerate(self.categorical_):
            lookup = {v: i + 1 for i, v in enumerate(self.categories_[c])}
            cat[:, j] = [lookup.get(str(v), 0) if v is not None else 0 for v in frame[c]]
        cont = np.zeros((n, len(self.continuous_)))
        for j, c in enumerate(self.continuous_):
            if c in self.constant_:
                continue
            cont[:, j] = (frame[c].to_numpy(dtype=float) - self.means_[j]) / self.stds_[j]
        target = frame[self.schema_.target]
        if target.isna().all() and n:
            y = None
        else:
            positive = self.schema_.target_positive_label.strip().lower()
            y = np.array([str(v).strip().lower() == positive for v in target], dtype=np.int64)
        return EncodedDataset(cat, cont, y, self, frame.index.to_numpy())

    def decode(self, column: str, index: int) -> str | None:
        """Category string for ``index`` (``None`` for the unknown slot)."""
        return None if index == 0 else self.categories_[column][index - 1]

    def discretize(self, cont: np.ndarray) -> np.ndarray:
        """Map standardized continuous values to equal-width bin indices."""
        out = np.zeros(cont.shape, dtype=np.int64)
        for j, edges in enumerate(self.bin_edges_):
            raw = cont[:, j] * self.stds_[j] + self.means_[j]
            out[:, j] = np.clip(np.searchsorted(edges[1:-1], raw, side="right"), 0, len(edges) - 2)
        return out

    @property
    def cardinality(self) -> dict[str, int]:
        return dict(zip(self.categorical_, self.cardinalities_))

    def to_dict(self) -> dict:
        check_is_fitted(self, "categories_")
        return {
            "n_bins": self.n_bins,
            "schema": self.schema_.to_dict() | {"meta": {}},
            "categories": self.categories_,
            "means": self.means_,
            "stds": self.stds_,
            "bin_edges": self.bin_edges_,
            "constant": self.constant_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularEncoder":
        enc = cls(n_bins=d["n_bins"])
        enc.schema_ = FeatureSchema.from_dict(d["schema"])
        enc.categorical_ = enc.schema_.of_kind("categorical")
        enc.continuous_ = enc.schema_.of_kind("continuous")
        enc.categories_ = {k: list(v) for k, v in d["categories"].items()}
        enc.cardinalities_ = [len(enc.categories_[c]) + 1 for c in enc.categorical_]
        enc.means_, enc.stds_ = list(d["means"]), list(d["stds"])
        enc.bin_edges_ = [list(e) for e in d["bin_edges"]]
        enc.constant_ = list(d["constant"])
        enc.warnings_ = []
        return enc

    def schema_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def encode(train: Dataset, other: Dataset, n_bins: int = 10) -> tuple[EncodedDataset, EncodedDataset]:
    """Fit a :class:`TabularEncoder` on ``train`` and apply it to both datasets."""
    if train.schema.columns != other.schema.columns:
        raise SchemaError("train and other datasets have different schemas")
    encoder = TabularEncoder(n_bins=n_bins).fit(train)
    return encoder.transform(train), encoder.transform(other)


def oversample(train: EncodedDataset, seed: int = 0) -> EncodedDataset:
    """Duplicate random minority-class rows until both classes are equally frequent."""
    if train.y is None:
        raise ValueError("oversampling needs labels")
    counts = np.bincount(train.y, minlength=2)
    if counts.min() == 0:
        raise ValueError("oversampling needs both classes present")
    if counts[0] == counts[1]:
        return train.take(np.arange(len(train)))
    minority = int(np.argmin(counts))
    pool = np.flatnonzero(train.y == minority)
    rng = np.random.default_rng(seed)
    extra = rng.choice(pool, size=int(counts.max() - counts.min()), replace=True)
    return train.take(np.concatenate([np.arange(len(train)), extra]))


# ---------------------------------------------------------------------------
# synthetic billing data
# ---------------------------------------------------------------------------

AGE_RANGES = ["18-24", "25-34", "35-44", "45-54", "55-64", "65+"]
SEND_METHODS = ["Email", "Post", "SMS"]
REMOTENESS = ["Major City", "Inner Regional", "Outer Regional", "Remote", "Very Remote"]
INCOME_GROUPS = ["Low", "Lower Middle", "Middle", "Upper Middle", "High"]

# name -> (mean, population std) of the base distribution
CONTINUOUS_SPECS = {
    "bill_duration": (91.0, 6.0),
    "account_age": (6.0, 4.2426),
    "median_household_income": (1500.0, 350.0),
    "median_household_size": (2.6, 0.35),
    "persons_per_bedroom": (0.85, 0.12),
    "median_weekly_income": (750.0, 180.0),
    "median_weekly_rent": (330.0, 70.0),
    "median_weekly_mortgage": (420.0, 90.0),
}

GROUND_TRUTH = {
    "continuous": {"median_household_income": 2.5, "account_age": 0.7},
    "age_range": dict(zip(AGE_RANGES, [-0.6, -0.3, 0.0, 0.1, 0.3, 0.5])),
    "send_method": dict(zip(SEND_METHODS, [0.2, -0.2, 0.0])),
    "remoteness": dict(zip(REMOTENESS, [0.1, 0.0, -0.1, -0.3, -0.5])),
}

# drifted rows: (column, shift in base stds)
DRIFT_SHIFTS = {"bill_duration": 4.0, "median_weekly_mortgage": 3.0, "persons_per_bedroom": 3.0}
# drifted rows report the planted income feature squeezed to this share of its spread
DRIFT_INCOME_SQUEEZE = 0.05

SYNTHETIC_SCHEMA_COLUMNS = (
    ("age_range", "categorical"),
    ("issue_date", "date"),
    ("due_date", "date"),
    ("send_method", "categorical"),
    ("remoteness", "categorical"),
    ("income_group", "categorical"),
    *((name, "continuous") for name in CONTINUOUS_SPECS),
    ("paid_on_time", "target"),
)


@dataclass(frozen=True)
class SyntheticConfig:
    """Synthetic generator settings.

    With ``label_noise`` off, labels are a deterministic threshold of the
    ground-truth logit, so the classes are separable.
    """

    n_rows: int = 10_000
    positive_rate: float = 0.58
    drift: bool = False
    label_noise: bool = True
    drift_fraction: float = 0.2
    start: str = "2017-01-01"
    end: str = "2019-12-31"

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("n_rows must be >= 1")
        if not 0 < self.positive_rate < 1:
            raise ValueError("positive_rate must lie in (0, 1)")
        if not 0 < self.drift_fraction < 1:
            raise ValueError("drift_fraction must lie in (0, 1)")
        if pd.Timestamp(self.end) <= pd.Timestamp(self.start):
            raise ValueError("end date must follow start date")


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def _solve_intercept(logit: np.ndarray, rate: float) -> float:
    lo, hi = -50.0, 50.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if _sigmoid(logit + mid).mean() < rate:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def generate_synthetic(config: SyntheticConfig, seed: int = 0) -> Dataset:
    """Draw billing-style rows whose labels follow a known logistic ground truth.

    ``schema.meta`` records the ground-truth coefficients, the fitted
    intercept and, when ``config.drift`` is set, the drift block: rows issued
    in the last ``drift_fraction`` of the date span get shifted continuous
    features while their labels still follow the undrifted values.
    """
    rng = np.random.default_rng(seed)
    n = config.n_rows
    start, end = pd.Timestamp(config.start), pd.Timestamp(config.end)
    span = (end - start).days
    issue = start + pd.to_timedelta(rng.integers(0, span + 1, n), unit="D")
    due = issue + pd.to_timedelta(rng.choice([14, 21, 28], n), unit="D")

    age = rng.choice(AGE_RANGES, n, p=[0.08, 0.18, 0.2, 0.2, 0.17, 0.17])
    send = rng.choice(SEND_METHODS, n, p=[0.5, 0.4, 0.1])
    remote = rng.choice(REMOTENESS, n, p=[0.45, 0.25, 0.18, 0.08, 0.04])
    income_group = rng.choice(INCOME_GROUPS, n)
    cont = {}
    for name, (mean, std) in CONTINUOUS_SPECS.items():
        if name == "account_age":
            cont[name] = rng.gamma(2.0, 3.0, n)
        else:
            cont[name] = rng.normal(mean, std, n)

    logit = np.zeros(n)
    for name, coef in GROUND_TRUTH["continuous"].items():
        mean, std = CONTINUOUS_SPECS[name]
        logit += coef * (cont[name] - mean) / std
    for column, values in (("age_range", age), ("send_method", send), ("remoteness", remote)):
        effects = GROUND_TRUTH[column]
        logit += np.array([effects[v] for v in values])

    if config.label_noise:
        intercept = _solve_intercept(logit, config.positive_rate)
        y = rng.random(n) < _sigmoid(logit + intercept)
    else:
        intercept = -float(np.quantile(logit, 1 - config.positive_rate))
        y = logit + intercept > 0

    meta = {
        "generator": "synthetic-billing-v1",
        "seed": int(seed),
        "ground_truth": {**GROUND_TRUTH, "intercept": intercept},
        "planted_feature": "median_household_income",
    }
    if config.drift:
        cutoff = start + pd.Timedelta(days=math.floor(span * (1 - config.drift_fraction)))
        drifted = np.asarray(issue > cutoff)
        for name, shift in DRIFT_SHIFTS.items():
            cont[name] = np.where(drifted, cont[name] + shift * CONTINUOUS_SPECS[name][1], cont[name])
        mean, std = CONTINUOUS_SPECS["median_household_income"]
        squeezed = mean + DRIFT_INCOME_SQUEEZE * (cont["median_household_income"] - mean)
        cont["median_household_income"] = np.where(drifted, squeezed,
                                                    cont["median_household_income"])
        meta["drift"] = {
            "start": (cutoff + pd.Timedelta(days=1)).strftime(DATE_FORMAT),
            "end": end.strftime(DATE_FORMAT),
            "shift_in_std": DRIFT_SHIFTS,
            "squeezed": {"median_household_income": DRIFT_INCOME_SQUEEZE},
            "n_rows": int(drifted.sum()),
        }

    frame = pd.DataFrame({
        "age_range": age,
        "issue_date": issue,
        "due_date": due,
        "send_method": send,
        "remoteness": remote,
        "income_group": income_group,
        **cont,
        "paid_on_time": np.where(y, "paid", "unpaid"),
    })
    schema = FeatureSchema(SYNTHETIC_SCHEMA_COLUMNS, "paid", meta)
    return Dataset(schema, frame)


def drift_mask(ds: Dataset) -> np.ndarray:
    """Boolean mask of rows inside the schema's drift date range."""
    block = ds.schema.meta.get("drift")
    if not block:
        return np.zeros(len(ds), dtype=bool)
    issue = ds.frame["issue_date"]
    return ((issue >= pd.Timestamp(block["start"])) & (issue <= pd.Timestamp(block["end"]))).to_numpy()
