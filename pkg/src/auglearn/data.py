"""Tabular dataset ingestion with a protected-attribute block.

CSV in, encoded float matrix out: numeric columns are z-scored with
train-split statistics, binary columns map to {0, 1}, categorical columns are
one-hot over the non-reference categories.  Protected columns stay on their
0/1 encoding (never z-scored) so attribute flips remain well defined.  Rows
with missing cells are dropped and counted.  A seeded synthetic generator
provides a controlled testbed where the protected bit leaks into features and
labels.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import FlipTransform

_ROLES = ("feature", "protected", "label")
_ENCODINGS = ("numeric", "binary", "category")


@dataclass
class ColumnSpec:
    name: str
    role: str
    encoding: str = "numeric"
    values: Optional[list] = None  # binary: [negative, positive]; category: ordered, first = reference

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown column role {self.role!r}")
        if self.encoding not in _ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.encoding == "binary" and (self.values is None or len(self.values) != 2):
            raise ValueError(f"binary column {self.name!r} needs exactly two values")
        if self.encoding == "category" and (self.values is None or len(self.values) < 2):
            raise ValueError(f"categorical column {self.name!r} needs >= 2 values")


@dataclass
class DatasetSchema:
    columns: list

    def __post_init__(self):
        labels = [c for c in self.columns if c.role == "label"]
        if len(labels) != 1:
            raise ValueError(f"schema needs exactly one label column, found {len(labels)}")

    @property
    def label(self) -> ColumnSpec:
        return next(c for c in self.columns if c.role == "label")

    def input_columns(self) -> list:
        return [c for c in self.columns if c.role != "label"]

    @staticmethod
    def from_json(path) -> "DatasetSchema":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return DatasetSchema([ColumnSpec(**c) for c in raw["columns"]])


@dataclass
class EncodedColumn:
    """Where one source column landed in the encoded matrix."""

    spec: ColumnSpec
    indices: tuple  # encoded column indices (one for numeric/binary, k-1 for category)


@dataclass
class TabularDataset:
    """Encoded rows with normalization state kept separate from raw values.

    ``raw`` holds the encoded but unscaled matrix; ``features()`` applies the
    current z-scoring vectors, which are recomputed from the train side on
    every split (never from test rows).
    """

    raw: np.ndarray
    y: np.ndarray
    encoded: list  # list[EncodedColumn]
    mu: np.ndarray
    sigma: np.ndarray
    split: str = "all"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.raw.shape[0] != self.y.shape[0]:
            raise ValueError("feature matrix and labels disagree on row count")
        if not np.all(np.isfinite(self.raw)):
            raise ValueError("non-finite entries after ingestion")

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    @property
    def width(self) -> int:
        return self.raw.shape[1]

    def features(self) -> np.ndarray:
        return (self.raw - self.mu) / self.sigma

    def labels(self) -> np.ndarray:
        return self.y

    def column_names(self) -> list:
        names = [""] * self.width
        for col in self.encoded:
            if col.spec.encoding == "category":
                for j, cat in zip(col.indices, col.spec.values[1:]):
                    names[j] = f"{col.spec.name}={cat}"
            else:
                names[col.indices[0]] = col.spec.name
        return names

    def protected_columns(self) -> list:
        return [c for c in self.encoded if c.spec.role == "protected"]

    def decode_row(self, i: int) -> dict:
        """Invert the encoding of row i back to source values (unscaled)."""
        out = {}
        for col in self.encoded:
            spec = col.spec
            if spec.encoding == "numeric":
                out[spec.name] = float(self.raw[i, col.indices[0]])
            elif spec.encoding == "binary":
                out[spec.name] = spec.values[int(round(self.raw[i, col.indices[0]]))]
            else:
                block = self.raw[i, list(col.indices)]
                hot = np.nonzero(np.round(block) == 1)[0]
                out[spec.name] = spec.values[0] if hot.size == 0 else spec.values[1 + hot[0]]
        out[self._label_name()] = int(self.y[i])
        return out

    def _label_name(self) -> str:
        return self.meta.get("label_name", "label")

    def _subset(self, rows: np.ndarray, split: str) -> "TabularDataset":
        return TabularDataset(
            raw=self.raw[rows].copy(),
            y=self.y[rows].copy(),
            encoded=self.encoded,
            mu=self.mu.copy(),
            sigma=self.sigma.copy(),
            split=split,
            meta=dict(self.meta),
        )


def _numeric_mask(encoded: list, width: int) -> np.ndarray:
    mask = np.zeros(width, dtype=bool)
    for col in encoded:
        # z-scoring applies to numeric feature columns only; protected and
        # one-hot/binary columns keep their 0/1 scale so flips stay valid
        if col.spec.encoding == "numeric" and col.spec.role == "feature":
            mask[list(col.indices)] = True
    return mask


def _fit_normalization(ds: TabularDataset, reference_rows: np.ndarray):
    mask = _numeric_mask(ds.encoded, ds.width)
    mu = np.zeros(ds.width)
    sigma = np.ones(ds.width)
    ref = ds.raw[reference_rows][:, mask]
    if ref.shape[0] > 0 and mask.any():
        mu[mask] = ref.mean(axis=0)
        sd = ref.std(axis=0)
        sd[sd == 0] = 1.0
        sigma[mask] = sd
    return mu, sigma


def load_csv(path, schema: DatasetSchema) -> TabularDataset:
    """Parse a headered CSV into an encoded dataset.

    Every schema column must appear in the header (extra file columns are
    ignored and counted in the metadata).  Rows with an empty cell in any
    schema column are dropped; the drop count lands in ``meta``.  Normalizing
    statistics are fitted over all loaded rows, i.e. a standalone load treats
    the whole file as the train split; ``train_test_split`` refits them.
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("no rows: file is empty") from None
        header = [h.strip() for h in header]
        positions = {}
        for spec in schema.columns:
            if spec.name not in header:
                raise ValueError(f"unknown column {spec.name!r}: not in CSV header")
            positions[spec.name] = header.index(spec.name)
        ignored = [h for h in header if h not in positions]
        rows = list(reader)
    if not rows:
        raise ValueError("no rows: data section is empty")

    encoded, width = [], 0
    for spec in schema.input_columns():
        k = len(spec.values) - 1 if spec.encoding == "category" else 1
        encoded.append(EncodedColumn(spec, tuple(range(width, width + k))))
        width += k

    kept, labels, dropped = [], [], 0
    for r, row in enumerate(rows):
        cells = {name: row[pos].strip() if pos < len(row) else "" for name, pos in positions.items()}
        if any(cells[spec.name] == "" for spec in schema.columns):
            dropped += 1
            continue
        vec = np.zeros(width)
        for col in encoded:
            spec, cell = col.spec, cells[col.spec.name]
            if spec.encoding == "numeric":
                try:
                    vec[col.indices[0]] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"unparseable cell {cell!r} for column {spec.name!r} at data row {r}"
                    ) from None
            elif spec.encoding == "binary":
                if cell not in spec.values:
                    raise ValueError(
                        f"unparseable cell {cell!r} for column {spec.name!r} at data row {r}"
                    )
                vec[col.indices[0]] = float(spec.values.index(cell))
            else:
                if cell not in spec.values:
                    raise ValueError(
                        f"unparseable cell {cell!r} for column {spec.name!r} at data row {r}"
                    )
                j = spec.values.index(cell)
                if j > 0:
                    vec[col.indices[j - 1]] = 1.0
        label_cell = cells[schema.label.name]
        try:
            label = int(float(label_cell))
        except ValueError:
            raise ValueError(
                f"unparseable cell {label_cell!r} for column {schema.label.name!r} at data row {r}"
            ) from None
        if label not in (0, 1):
            raise ValueError(f"label outside {{0, 1}} at data row {r}: {label_cell!r}")
        kept.append(vec)
        labels.append(label)
    if not kept:
        raise ValueError("no rows: every row was dropped")

    ds = TabularDataset(
        raw=np.array(kept),
        y=np.array(labels, dtype=int),
        encoded=encoded,
        mu=np.zeros(width),
        sigma=np.ones(width),
        meta={
            "source_rows": len(rows),
            "dropped_rows": dropped,
            "ignored_columns": ignored,
            "label_name": schema.label.name,
        },
    )
    ds.mu, ds.sigma = _fit_normalization(ds, np.arange(ds.n))
    return ds


def train_test_split(dataset: TabularDataset, fraction: float, seed) -> tuple:
    """Seeded shuffle then split; normalization is refit on the train side only."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("train fraction must lie strictly between 0 and 1")
    n_train = int(round(dataset.n * fraction))
    if n_train == 0 or n_train == dataset.n:
        raise ValueError(f"degenerate split: {n_train}/{dataset.n - n_train} rows")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    train = dataset._subset(perm[:n_train], "train")
    test = dataset._subset(perm[n_train:], "test")
    mu, sigma = _fit_normalization(dataset, perm[:n_train])
    train.mu = mu.copy()
    train.sigma = sigma.copy()
    test.mu = mu.copy()
    test.sigma = sigma.copy()
    return train, test


def flip_transforms(dataset: TabularDataset) -> list:
    """One flip per protected binary column, one per non-reference category."""
    flips = []
    for col in dataset.protected_columns():
        spec = col.spec
        if spec.encoding == "category":
            k = len(col.indices)
            for j, cat in enumerate(spec.values[1:]):
                values = tuple(1.0 if t == j else 0.0 for t in range(k))
                flips.append(
                    FlipTransform(
                        name=f"{spec.name}->{cat}",
                        indices=col.indices,
                        mode="assign",
                        values=values,
                    )
                )
        else:
            flips.append(
                FlipTransform(name=f"{spec.name}-flip", indices=col.indices, mode="toggle")
            )
    return flips


def synthesize_biased(n: int, seed, bias_strength: float) -> TabularDataset:
    """Controlled fairness testbed with a single binary protected bit.

    Two noise features carry the legitimate signal, a third feature leaks the
    protected bit, and the label logit includes bias_strength * (2z - 1): at
    strength 0 the protected bit is independent of the label, at large
    strength an unconstrained learner provably picks it up.  Generator
    parameters are recorded in the metadata.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, size=n).astype(float)
    s = 2.0 * z - 1.0
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    x3 = 0.8 * s + 0.6 * rng.normal(size=n)
    logit = 1.2 * x1 + 1.2 * x2 + bias_strength * s
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)

    specs = [
        ColumnSpec("x1", "feature", "numeric"),
        ColumnSpec("x2", "feature", "numeric"),
        ColumnSpec("x3", "feature", "numeric"),
        ColumnSpec("z", "protected", "binary", values=["0", "1"]),
    ]
    encoded = [EncodedColumn(spec, (j,)) for j, spec in enumerate(specs)]
    raw = np.column_stack([x1, x2, x3, z])
    ds = TabularDataset(
        raw=raw,
        y=y,
        encoded=encoded,
        mu=np.zeros(4),
        sigma=np.ones(4),
        meta={
            "generator": "synthesize_biased",
            "n": int(n),
            "bias_strength": float(bias_strength),
            "feature_weights": [1.2, 1.2, 0.0],
            "leak_weight": 0.8,
            "leak_noise": 0.6,
            "label_name": "y",
            "source_rows": int(n),
            "dropped_rows": 0,
        },
    )
    ds.mu, ds.sigma = _fit_normalization(ds, np.arange(n))
    return ds
