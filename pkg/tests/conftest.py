from __future__ import annotations

import numpy as np
import pytest

from fairattack.dataset import Dataset, FeatureSchema, FeatureSpec, Instance, split
from fairattack.model import MlpParams, TrainConfig, train
from fairattack.resources import dataset_schema
from fairattack.synthetic import ADULT_MARGINALS, SynthConfig, synthesize

CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record_criterion():
    def record(k: int, ok: bool, detail: str = "") -> bool:
        prev = CRITERIA.get(k)
        ok = bool(ok) and (prev is None or prev[0])
        CRITERIA[k] = (ok, detail if prev is None else f"{prev[1]}; {detail}")
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


@pytest.fixture(scope="session")
def toy_schema() -> FeatureSchema:
    """Two perturbable features and two sensitive ones (3 x 2 similar set)."""
    return FeatureSchema(
        (
            FeatureSpec("color", "categorical", ("A", "B", "C")),
            FeatureSpec("score", "continuous", (0.0, 100.0)),
            FeatureSpec("group", "categorical", ("p", "q", "r"), sensitive=True),
            FeatureSpec("sex", "categorical", ("F", "M"), sensitive=True),
        ),
        "outcome",
        ("no", "yes"),
    )


def linear_model(W, b=None) -> MlpParams:
    """Single-layer softmax model; W has shape (inputs, 2)."""
    W = np.asarray(W, dtype=float)
    b = np.zeros(W.shape[1]) if b is None else np.asarray(b, dtype=float)
    return MlpParams((W.shape[0], W.shape[1]), (W,), (b,))


def random_instances(schema: FeatureSchema, n: int, rng: np.random.Generator) -> list[Instance]:
    out = []
    for i in range(n):
        vals = []
        for spec in schema.features:
            if spec.kind == "categorical":
                vals.append(spec.domain[int(rng.integers(len(spec.domain)))])
            else:
                lo, hi = spec.bounds
                vals.append(float(rng.uniform(lo, hi)))
        out.append(Instance(i, tuple(vals), int(rng.integers(2))))
    return out


@pytest.fixture(scope="session")
def adult_small():
    """A quick synthetic Adult-schema corpus, split and a briefly trained model."""
    schema = dataset_schema("adult")
    rows, y = synthesize(schema, SynthConfig(n_rows=3000, seed=5, marginals=ADULT_MARGINALS))
    ds = Dataset(schema, tuple(Instance(i, tuple(r), int(l)) for i, (r, l) in enumerate(zip(rows, y))))
    tr, te = split(ds, 0.2, 0)
    params = train(tr, schema, TrainConfig(epochs=5, seed=0)).params
    return schema, tr, te, params


@pytest.fixture(scope="session")
def cli_run(tmp_path_factory):
    """One small synth -> train -> attack -> evaluate -> manipulate pass through the CLI."""
    from fairattack.cli import main

    root = tmp_path_factory.mktemp("cli")
    data = root / "adult.csv"
    steps = [
        ["synth", "--schema", "adult", "--rows", "1500", "--seed", "1", "--out", str(data)],
        ["train", "--schema", "adult", "--data", str(data), "--epochs", "3", "--out", str(root / "model")],
        ["attack", "--schema", "adult", "--data", str(data), "--model", str(root / "model" / "model.json"),
         "--limit", "10", "--out", str(root / "attack")],
        ["evaluate", "--results", str(root / "attack" / "bundles.jsonl"), "--out", str(root / "eval")],
        ["manipulate", "--schema", "adult", "--data", str(data), "--model", str(root / "model" / "model.json"),
         "--results", str(root / "attack" / "bundles.jsonl"), "--budget", "10", "--out", str(root / "manip")],
    ]
    codes = [main(argv) for argv in steps]
    return root, codes
