"""Schema-driven CSV ingestion, encoding and similar-individual enumeration.

A schema declares every attribute as categorical or continuous and flags the
sensitive ones. Similar individuals share every non-sensitive value and may
differ on sensitive values only, so the sensitive domains have to be finite:
continuous sensitive attributes (age in the Bank data) are cut into groups at
load time and behave as categoricals from then on.
"""

from __future__ import annotations

import bisect
import csv
import functools
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

MISSING_TOKENS = frozenset({"", "?", "NA", "nan"})
DEFAULT_AGE_CUTS = (40.0,)


class DataError(ValueError):
    """Raised when a dataset or schema cannot be used."""


class NotSimilarError(ValueError):
    """Raised when two instances differ on a non-sensitive attribute."""


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "categorical" | "continuous"
    domain: tuple
    sensitive: bool = False
    bins: tuple[float, ...] | None = None
    missing: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        if self.kind == "categorical":
            labels = tuple(str(d) for d in self.domain)
            object.__setattr__(self, "domain", labels)
            if len(set(labels)) < 2 or len(set(labels)) != len(labels):
                raise DataError(f"{self.name}: categorical domain needs >= 2 distinct labels")
            if self.missing is not None and self.missing not in labels:
                raise DataError(f"{self.name}: missing label {self.missing!r} not in domain")
        elif self.kind == "continuous":
            if len(self.domain) != 2:
                raise DataError(f"{self.name}: continuous domain must be [min, max]")
            lo, hi = float(self.domain[0]), float(self.domain[1])
            if not lo < hi:
                raise DataError(f"{self.name}: continuous bounds need min < max")
            object.__setattr__(self, "domain", (lo, hi))
            bins = self.bins
            if bins is None and self.sensitive:
                bins = DEFAULT_AGE_CUTS
            if bins is not None:
                bins = tuple(float(b) for b in bins)
                if any(b <= lo or b >= hi for b in bins) or list(bins) != sorted(set(bins)):
                    raise DataError(f"{self.name}: bin cuts must be increasing and inside ({lo}, {hi})")
            object.__setattr__(self, "bins", bins)
        else:
            raise DataError(f"{self.name}: unknown kind {self.kind!r}")

    @property
    def is_discrete(self) -> bool:
        """True for categoricals and for binned continuous attributes."""
        return self.kind == "categorical" or self.bins is not None

    @property
    def categories(self) -> tuple[str, ...]:
        if self.kind == "categorical":
            return self.domain
        if self.bins is None:
            raise DataError(f"{self.name} is continuous and has no categories")
        cuts = self.bins
        labels = [f"<{_fmt(cuts[0])}"]
        labels += [f"[{_fmt(a)},{_fmt(b)})" for a, b in zip(cuts, cuts[1:])]
        labels.append(f">={_fmt(cuts[-1])}")
        return tuple(labels)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind != "continuous":
            raise DataError(f"{self.name} is categorical and has no bounds")
        return self.domain

    @property
    def width(self) -> int:
        return len(self.categories) if self.is_discrete else 1

    def bin_label(self, x: float) -> str:
        return self.categories[bisect.bisect_right(self.bins, x)]

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "domain": list(self.domain), "sensitive": self.sensitive}
        if self.bins is not None:
            out["bins"] = list(self.bins)
        if self.missing is not None:
            out["missing"] = self.missing
        return out


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureSpec, ...]
    label_name: str
    label_domain: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "label_domain", tuple(str(c) for c in self.label_domain))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.label_name in names:
            raise DataError(f"label {self.label_name!r} is also listed as a feature")
        if len(self.label_domain) < 2 or len(set(self.label_domain)) != len(self.label_domain):
            raise DataError("label domain needs >= 2 distinct classes")
        if self.m < 1 or self.n < 1:
            raise DataError("schema needs at least one sensitive and one non-sensitive feature")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def sensitive_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if f.sensitive)

    @property
    def nonsensitive_indices(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.features) if not f.sensitive)

    @property
    def m(self) -> int:
        return len(self.nonsensitive_indices)

    @property
    def n(self) -> int:
        return len(self.sensitive_indices)

    @property
    def n_classes(self) -> int:
        return len(self.label_domain)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> dict:
        return {
            "features": [f.to_json() for f in self.features],
            "label_name": self.label_name,
            "label_domain": list(self.label_domain),
        }

    @classmethod
    def from_json(cls, obj: dict) -> FeatureSchema:
        try:
            feats = [
                FeatureSpec(
                    name=f["name"],
                    kind=f["kind"],
                    domain=f["domain"],
                    sensitive=bool(f.get("sensitive", False)),
                    bins=f.get("bins"),
                    missing=f.get("missing"),
                )
                for f in obj["features"]
            ]
            return cls(tuple(feats), obj["label_name"], tuple(obj["label_domain"]))
        except KeyError as exc:
            raise DataError(f"schema is missing field {exc}") from None

    def hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_schema(path: str | Path) -> FeatureSchema:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"schema file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return FeatureSchema.from_json(json.load(fh))


@dataclass(frozen=True)
class Instance:
    id: int
    values: tuple
    label: int

    def replace(self, index: int, value) -> Instance:
        vals = list(self.values)
        vals[index] = value
        return Instance(self.id, tuple(vals), self.label)


@dataclass(frozen=True)
class LoadReport:
    accepted: int
    rejected: tuple[tuple[int, str], ...] = ()
    clamped: tuple[tuple[int, str], ...] = ()

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": [{"row": r, "reason": why} for r, why in self.rejected],
            "clamped": [{"row": r, "feature": f} for r, f in self.clamped],
        }


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    instances: tuple[Instance, ...]
    report: LoadReport | None = None

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __getitem__(self, i: int) -> Instance:
        return self.instances[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=np.int64)

    def hash(self) -> str:
        h = hashlib.sha256(self.schema.hash().encode())
        for inst in self.instances:
            h.update(json.dumps([inst.id, list(inst.values), inst.label]).encode())
        return h.hexdigest()


def _parse_value(spec: FeatureSpec, raw: str) -> tuple[object, bool]:
    """Returns (value, clamped). Raises ValueError with a reason on rejection."""
    raw = raw.strip()
    if raw in MISSING_TOKENS:
        if spec.missing is None:
            raise ValueError(f"missing value for {spec.name}")
        return spec.missing, False
    if spec.kind == "categorical":
        if raw not in spec.domain:
            raise ValueError(f"unknown category {raw!r} for {spec.name}")
        return raw, False
    try:
        x = float(raw)
    except ValueError:
        raise ValueError(f"non-numeric value {raw!r} for {spec.name}") from None
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {raw!r} for {spec.name}")
    if spec.bins is not None:
        return spec.bin_label(x), False
    lo, hi = spec.bounds
    if x < lo or x > hi:
        return min(max(x, lo), hi), True
    return x, False


def load_csv(path: str | Path, schema: FeatureSchema) -> Dataset:
    """Read a headered CSV into instances, collecting per-row rejections.

    Rows with an unknown category, unknown label or undeclared missing value
    are skipped and listed in the report under their 1-based data row number.
    Continuous values outside the declared bounds are clamped and listed too.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        wanted = list(schema.names) + [schema.label_name]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [header.index(name) for name in schema.names]
        label_col = header.index(schema.label_name)

        instances, rejected, clamped = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                rejected.append((row_no, f"expected {len(header)} fields, got {len(row)}"))
                continue
            try:
                values = []
                row_clamps = []
                for spec, col in zip(schema.features, cols):
                    val, was_clamped = _parse_value(spec, row[col])
                    values.append(val)
                    if was_clamped:
                        row_clamps.append((row_no, spec.name))
                label_raw = row[label_col].strip()
                if label_raw not in schema.label_domain:
                    raise ValueError(f"unknown label {label_raw!r}")
            except ValueError as exc:
                rejected.append((row_no, str(exc)))
                continue
            clamped.extend(row_clamps)
            instances.append(Instance(len(instances), tuple(values), schema.label_domain.index(label_raw)))

    if rejected and not instances:
        raise DataError(f"{path}: all {len(rejected)} rows rejected; first: row {rejected[0][0]}: {rejected[0][1]}")
    report = LoadReport(len(instances), tuple(rejected), tuple(clamped))
    return Dataset(schema, tuple(instances), report)


@dataclass(frozen=True, eq=False)
class EncodedVector:
    dense: np.ndarray
    group_map: tuple[slice, ...]
    clamped: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.dense)


class Encoder:
    """Precomputed layout of the dense vector for one schema."""

    def __init__(self, schema: FeatureSchema):
        self.schema = schema
        slices, start = [], 0
        for spec in schema.features:
            slices.append(slice(start, start + spec.width))
            start += spec.width
        self.slices = tuple(slices)
        self.dim = start
        self.cat_index = [
            {c: k for k, c in enumerate(spec.categories)} if spec.is_discrete else None
            for spec in schema.features
        ]

    def scale(self, j: int, x: float) -> tuple[float, bool]:
        lo, hi = self.schema.features[j].bounds
        z = (x - lo) / (hi - lo)
        if z < 0.0:
            return 0.0, True
        if z > 1.0:
            return 1.0, True
        return z, False

    def write(self, out: np.ndarray, j: int, value) -> bool:
        """Write feature j's encoding into out (1-d); returns the clamp flag."""
        sl = self.slices[j]
        lookup = self.cat_index[j]
        if lookup is not None:
            out[sl] = 0.0
            try:
                out[sl.start + lookup[value]] = 1.0
            except KeyError:
                raise DataError(f"{self.schema.features[j].name}: {value!r} not in domain") from None
            return False
        z, flag = self.scale(j, float(value))
        out[sl.start] = z
        return flag

    def encode_values(self, values: Sequence) -> tuple[np.ndarray, tuple[int, ...]]:
        out = np.zeros(self.dim)
        flags = tuple(j for j, v in enumerate(values) if self.write(out, j, v))
        return out, flags

    def encode_many(self, instances: Sequence[Instance]) -> np.ndarray:
        out = np.zeros((len(instances), self.dim))
        for r, inst in enumerate(instances):
            row = out[r]
            for j, v in enumerate(inst.values):
                self.write(row, j, v)
        return out

    def decode_values(self, dense: np.ndarray) -> tuple:
        vals = []
        for j, spec in enumerate(self.schema.features):
            block = dense[self.slices[j]]
            if spec.is_discrete:
                vals.append(spec.categories[int(np.argmax(block))])
            else:
                lo, hi = spec.bounds
                vals.append(lo + float(block[0]) * (hi - lo))
        return tuple(vals)


@functools.lru_cache(maxsize=32)
def encoder_for(schema: FeatureSchema) -> Encoder:
    return Encoder(schema)


def encode(instance: Instance, schema: FeatureSchema) -> EncodedVector:
    """One-hot blocks for categoricals, min-max scaling for continuous values.

    Out-of-bounds continuous values are clamped to [0, 1] and their feature
    indices reported in ``clamped``.
    """
    enc = encoder_for(schema)
    dense, flags = enc.encode_values(instance.values)
    dense.setflags(write=False)
    return EncodedVector(dense, enc.slices, flags)


def decode(vector: EncodedVector | np.ndarray, schema: FeatureSchema) -> tuple:
    dense = vector.dense if isinstance(vector, EncodedVector) else vector
    return encoder_for(schema).decode_values(dense)


@dataclass(frozen=True)
class SimilarSet:
    base: Instance
    members: tuple[Instance, ...]
    total: int = field(default=0)  # size of the uncapped product

    def __len__(self) -> int:
        return len(self.members)


def enumerate_similar(
    instance: Instance,
    schema: FeatureSchema,
    cap: int = 64,
    *,
    seed: int = 0,
    include_base: bool = True,
) -> SimilarSet:
    """Enumerate the sensitive-attribute variants of ``instance``.

    Members come in cartesian-product order over the sensitive features. When
    the product exceeds ``cap`` a seeded uniform subsample of ``cap - 1``
    variants is kept alongside the base, still in product order.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    sens = schema.sensitive_indices
    domains = [schema.features[j].categories for j in sens]
    base_key = tuple(instance.values[j] for j in sens)
    combos = list(itertools.product(*domains))
    total = len(combos)
    try:
        base_pos = combos.index(base_key)
    except ValueError:
        raise DataError(f"instance {instance.id} has sensitive values outside the schema domain") from None

    if total > cap:
        others = [k for k in range(total) if k != base_pos]
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(others), size=cap - 1, replace=False)
        chosen = sorted([base_pos] + [others[k] for k in keep])
    else:
        chosen = list(range(total))

    members = []
    for k in chosen:
        if k == base_pos:
            if include_base:
                members.append(instance)
            continue
        vals = list(instance.values)
        for j, v in zip(sens, combos[k]):
            vals[j] = v
        members.append(Instance(instance.id, tuple(vals), instance.label))
    return SimilarSet(instance, tuple(members), total)


def distance_d(a: Instance, b: Instance, schema: FeatureSchema) -> float:
    """Fraction of sensitive attributes on which two similar instances differ."""
    for j in schema.nonsensitive_indices:
        if a.values[j] != b.values[j]:
            raise NotSimilarError(f"instances differ on non-sensitive feature {schema.features[j].name!r}")
    diff = sum(a.values[j] != b.values[j] for j in schema.sensitive_indices)
    return diff / schema.n


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded, label-stratified train/test split.

    The overall test size is round(test_fraction * N); it is shared out across
    classes by largest remainder so the class proportions match.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    labels = dataset.labels
    classes, counts = np.unique(labels, return_counts=True)

    n_test = int(round(test_fraction * n))
    exact = counts * (n_test / n)
    quota = np.floor(exact).astype(int)
    short = n_test - quota.sum()
    if short > 0:
        # largest remainder; ties by class index
        rema = exact - quota
        for k in sorted(range(len(classes)), key=lambda k: (-rema[k], k))[:short]:
            quota[k] += 1
    want = dict(zip(classes.tolist(), quota.tolist()))

    test_idx, train_idx = [], []
    for i in order:
        c = int(labels[i])
        if want[c] > 0:
            test_idx.append(i)
            want[c] -= 1
        else:
            train_idx.append(i)
    inst = dataset.instances
    return (
        Dataset(dataset.schema, tuple(inst[i] for i in train_idx)),
        Dataset(dataset.schema, tuple(inst[i] for i in test_idx)),
    )
