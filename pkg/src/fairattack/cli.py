"""Command-line entry point: synth, train, attack, evaluate, manipulate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from fairattack.dataset import DataError, FeatureSchema, NotSimilarError, load_csv, load_schema, split
from fairattack.diagnostics import trajectory_svg, write_trajectory_csv
from fairattack.evaluation import RifCheckConfig, aggregate, write_instance_csv
from fairattack.manipulation import Strategy, build_pool, manipulation_table, write_provenance_csv
from fairattack.model import NumericalAbort, TrainConfig, load_checkpoint, save_checkpoint, train
from fairattack.pipeline import ALL_ATTACKS, RunSettings, attack_all, read_bundles, write_bundles
from fairattack.resources import DATASETS, dataset_schema
from fairattack.synthetic import ADULT_MARGINALS, SynthConfig, synthesize, write_csv

log = logging.getLogger("fairattack")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
N_TRAJECTORY_EXAMPLES = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _schema(arg: str) -> FeatureSchema:
    """A schema file path, or the name of a bundled dataset schema."""
    if not Path(arg).exists() and arg in DATASETS:
        return dataset_schema(arg)
    return load_schema(arg)


def _test_split(args, schema: FeatureSchema):
    ds = load_csv(args.data, schema)
    return split(ds, args.test_fraction, args.seed)


def _model(args, schema: FeatureSchema):
    params, schema_hash = load_checkpoint(args.model)
    if schema_hash != schema.hash():
        raise DataError(f"checkpoint {args.model} was trained under a different schema (hash mismatch)")
    return params


def _settings(args) -> RunSettings:
    attacks = ALL_ATTACKS if args.mode == "all" else (args.mode,)
    return RunSettings(max_steps=args.steps, tau_dec=args.tau_dec, seed=args.seed, attacks=attacks)


def cmd_synth(args) -> int:
    schema = _schema(args.schema)
    marginals = ADULT_MARGINALS if args.schema == "adult" else None
    rows, y = synthesize(schema, SynthConfig(n_rows=args.rows, seed=args.seed, marginals=marginals))
    write_csv(args.out, schema, rows, y)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    schema = _schema(args.schema)
    ds = load_csv(args.data, schema)
    train_set, _ = split(ds, args.test_fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "load_report.json", ds.report.to_json())
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    result = train(train_set, schema, cfg)
    save_checkpoint(result.params, out / "model.json", schema.hash())
    with (out / "train_loss.csv").open("w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for e, loss in enumerate(result.loss_log, 1):
            fh.write(f"{e},{loss!r}\n")
    log.info("trained on %d rows; checkpoint at %s", len(train_set), out / "model.json")
    return EXIT_OK


def cmd_attack(args) -> int:
    schema = _schema(args.schema)
    params = _model(args, schema)
    _, test_set = _test_split(args, schema)
    instances = test_set.instances[: args.limit] if args.limit else test_set.instances
    settings = _settings(args)
    out = Path(args.out)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)

    # example trajectories: successful multi-step runs first, failed ones fill the rest
    bundles, succeeded, failed = [], [], []
    for run in attack_all(params, instances, schema, settings, args.workers):
        bundles.append(run.bundle)
        for mode, res in run.results.items():
            if mode in ("tb", "fb", "ff") and res.steps:
                keep = succeeded if res.success else failed
                if len(keep) < N_TRAJECTORY_EXAMPLES:
                    keep.append((run.bundle.id, mode, res))
    for vid, mode, res in (succeeded + failed)[:N_TRAJECTORY_EXAMPLES]:
        stem = traj_dir / f"{vid}_{mode}"
        write_trajectory_csv(stem.with_suffix(".csv"), res, schema.names)
        title = f"{mode.upper()} attack on instance {vid}" + ("" if res.success else " (not realized)")
        stem.with_suffix(".svg").write_text(trajectory_svg(res, settings.tau_dec, title), encoding="utf-8")
    write_bundles(out / "bundles.jsonl", bundles)
    _dump(out / "manifest.json", {
        "mode": args.mode,
        "T": args.steps,
        "tau_dec": args.tau_dec,
        "seed": args.seed,
        "test_fraction": args.test_fraction,
        "n_instances": len(bundles),
        "model_checkpoint_hash": _sha256(Path(args.model)),
        "dataset_hash": test_set.hash(),
        "schema_hash": schema.hash(),
        "metadata": {"timestamp": _timestamp()},
    })
    log.info("attacked %d instances; results in %s", len(bundles), out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    bundles = read_bundles(args.results)
    try:
        report = aggregate(bundles, RifCheckConfig(tau=args.tau))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    report.metadata["timestamp"] = _timestamp()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "report.json", report.to_json())
    write_instance_csv(out / "instances.csv", report)
    report.check_invariants()
    summary = {k: getattr(report, k) for k in ("n", "acc", "fta", "rif_attack", "tbr", "fbr", "ffr", "tfr")}
    print(json.dumps(summary))
    return EXIT_OK


def cmd_manipulate(args) -> int:
    schema = _schema(args.schema)
    params = _model(args, schema)
    _, test_set = _test_split(args, schema)
    bundles = read_bundles(args.results)
    ids = {b.id for b in bundles}
    items = [v for v in test_set.instances if v.id in ids]
    if len(items) != len(bundles):
        raise DataError("attack results do not match the test split")
    if args.budget > len(items):
        raise UsageError(f"--budget {args.budget} exceeds the {len(items)} attacked test items")
    strategies = list(Strategy) if args.strategy == "all" else [Strategy(args.strategy)]
    table, sets = manipulation_table(params, items, build_pool(bundles), schema, strategies, args.budget, args.seed, tau_dec=args.tau_dec)
    table["metadata"] = {"timestamp": _timestamp()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "manipulation.json", table)
    for name, ms in sets.items():
        write_provenance_csv(out / f"provenance_{name}.csv", ms, name)
    for row in table["rows"]:
        print(json.dumps(row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairattack", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *, data=True, model=False, results=False):
        sp.add_argument("--schema", required=True, help=f"schema JSON path or one of {', '.join(DATASETS)}")
        if data:
            sp.add_argument("--data", required=True, help="dataset CSV")
            sp.add_argument("--test-fraction", type=float, default=0.2)
        if model:
            sp.add_argument("--model", required=True, help="checkpoint JSON from `train`")
        if results:
            sp.add_argument("--results", required=True, help="bundles.jsonl from `attack`")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)

    sp = sub.add_parser("synth", help="write a seeded synthetic CSV for a schema")
    common(sp, data=False)
    sp.add_argument("--rows", type=int, default=SynthConfig.n_rows)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train the MLP and write a checkpoint")
    common(sp)
    sp.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("attack", help="run FGSM, ADF and RIFair over the test split")
    common(sp, model=True)
    sp.add_argument("--mode", choices=("tb", "fb", "ff", "fgsm", "adf", "all"), default="all")
    sp.add_argument("--steps", type=int, default=RunSettings.max_steps, help="RIFair step budget T")
    sp.add_argument("--tau-dec", type=float, default=0.5)
    sp.add_argument("--limit", type=int, default=0, help="attack only the first N test instances")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_attack)

    sp = sub.add_parser("evaluate", help="aggregate attack results into a report")
    sp.add_argument("--results", required=True, help="bundles.jsonl from `attack`")
    sp.add_argument("--tau", type=float, default=RifCheckConfig.tau, help="RIF absolute tolerance")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("manipulate", help="replace test items with adversarial instances and re-measure")
    common(sp, model=True, results=True)
    sp.add_argument("--strategy", choices=[s.value for s in Strategy] + ["all"], default="all")
    sp.add_argument("--budget", type=int, required=True)
    sp.add_argument("--tau-dec", type=float, default=0.5)
    sp.set_defaults(func=cmd_manipulate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "steps", 1) < 1:
        print("fairattack: error: --steps must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fairattack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, NotSimilarError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"fairattack: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"fairattack: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
