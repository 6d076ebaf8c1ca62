"""Seeded synthetic tabular data that follows a given schema.

Used when the real census/bank/recidivism files are not at hand. Features are
drawn independently (Dirichlet category weights, Beta-shaped continuous
values); labels come from a random teacher network over the encoded row, so
the task is learnable, nonlinear, and mildly dependent on the sensitive
attributes. The teacher's logit scale is calibrated so the Bayes accuracy on
the drawn sample hits ``bayes_accuracy``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fairattack.dataset import FeatureSchema, encoder_for


@dataclass(frozen=True)
class SynthConfig:
    n_rows: int = 45211
    seed: int = 0
    positive_rate: float = 0.24
    bayes_accuracy: float = 0.87
    teacher_hidden: int = 16
    sensitive_strength: float = 0.1
    marginals: dict | None = None  # feature name -> {category: probability}


# census documentation proportions
ADULT_MARGINALS = {
    "race": {"White": 0.854, "Black": 0.096, "Asian-Pac-Islander": 0.031, "Amer-Indian-Eskimo": 0.010, "Other": 0.009},
    "gender": {"Male": 0.668, "Female": 0.332},
}


def _draw_features(schema: FeatureSchema, n: int, rng: np.random.Generator, marginals: dict | None) -> list[list]:
    columns = []
    for spec in schema.features:
        if spec.kind == "categorical":
            k = len(spec.domain)
            p = rng.dirichlet(np.full(k, 0.8))
            if marginals and spec.name in marginals:
                fixed = marginals[spec.name]
                p = np.array([fixed.get(c, 0.0) for c in spec.domain])
                p = p / p.sum()
            idx = rng.choice(k, size=n, p=p)
            columns.append([spec.domain[i] for i in idx])
        else:
            lo, hi = spec.bounds
            a, b = rng.uniform(1.0, 3.0), rng.uniform(1.5, 6.0)
            x = lo + (hi - lo) * rng.beta(a, b, size=n)
            if float(lo).is_integer() and float(hi).is_integer():
                x = np.round(x)
            columns.append(x.tolist())
    return [list(row) for row in zip(*columns)]


def _bayes_accuracy(logits: np.ndarray) -> float:
    p = 1.0 / (1.0 + np.exp(-logits))
    return float(np.maximum(p, 1.0 - p).mean())


def synthesize(schema: FeatureSchema, config: SynthConfig = SynthConfig()) -> tuple[list[list], np.ndarray]:
    """Return (raw feature rows, label indices) drawn under ``schema``."""
    if schema.n_classes != 2:
        raise ValueError("synthetic labels are binary only")
    rng = np.random.default_rng(config.seed)
    rows = _draw_features(schema, config.n_rows, rng, config.marginals)

    enc = encoder_for(schema)
    X = np.zeros((len(rows), enc.dim))
    for r, vals in enumerate(rows):
        for j, v in enumerate(vals):
            spec = schema.features[j]
            enc.write(X[r], j, spec.bin_label(v) if spec.bins is not None else v)

    w1 = rng.normal(0.0, 1.0, size=(enc.dim, config.teacher_hidden))
    w2 = rng.normal(0.0, 1.0, size=config.teacher_hidden)
    lin = rng.normal(0.0, 1.0, size=enc.dim)
    for j in schema.sensitive_indices:
        w1[enc.slices[j]] *= config.sensitive_strength
        lin[enc.slices[j]] *= config.sensitive_strength
    raw = np.tanh(X @ w1 - (X @ w1).mean(axis=0)) @ w2 + X @ lin
    raw = (raw - raw.mean()) / raw.std()

    # calibrate scale for the Bayes accuracy, then the offset for the base rate
    lo, hi = 0.01, 50.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _bayes_accuracy(mid * raw - np.quantile(mid * raw, 1 - config.positive_rate)) < config.bayes_accuracy:
            lo = mid
        else:
            hi = mid
    scale = 0.5 * (lo + hi)
    z = scale * raw
    shift_lo, shift_hi = -50.0, 50.0
    for _ in range(80):
        mid = 0.5 * (shift_lo + shift_hi)
        if (1.0 / (1.0 + np.exp(-(z + mid)))).mean() < config.positive_rate:
            shift_lo = mid
        else:
            shift_hi = mid
    p = 1.0 / (1.0 + np.exp(-(z + 0.5 * (shift_lo + shift_hi))))
    y = (rng.random(len(rows)) < p).astype(np.int64)
    return rows, y


def write_csv(path: str | Path, schema: FeatureSchema, rows: list[list], labels: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(list(schema.names) + [schema.label_name])
        for vals, lab in zip(rows, labels):
            cells = [f"{v:g}" if isinstance(v, float) else v for v in vals]
            out.writerow(cells + [schema.label_domain[int(lab)]])
