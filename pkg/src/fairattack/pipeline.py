"""Per-instance attack driver shared by the CLI and the experiment scripts."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from fairattack.attack import (
    AttackConfig,
    AttackMode,
    AttackResult,
    adf_baseline,
    choose_counterpart,
    fgsm_baseline,
    rifair_attack,
)
from fairattack.dataset import FeatureSchema, Instance, encoder_for, enumerate_similar
from fairattack.diagnostics import shared_pid_fraction
from fairattack.evaluation import AttackSummary, InstanceBundle, classify_outcome
from fairattack.model import Classifier, threshold_labels

log = logging.getLogger(__name__)

ALL_ATTACKS = ("fgsm", "adf", "tb", "fb", "ff")


@dataclass(frozen=True)
class RunSettings:
    max_steps: int = 10
    tau_dec: float = 0.5
    grid_points: int = 5
    similar_cap: int = 64
    epsilon: float = 0.1
    seed: int = 0
    attacks: tuple[str, ...] = ALL_ATTACKS

    def attack_config(self, mode: AttackMode) -> AttackConfig:
        return AttackConfig(mode, self.max_steps, self.grid_points, self.tau_dec, self.similar_cap, self.seed)


@dataclass
class InstanceRun:
    bundle: InstanceBundle
    results: dict[str, AttackResult] = field(default_factory=dict)


def summarize(result: AttackResult) -> AttackSummary:
    shared, total = shared_pid_fraction(result.trajectory_v, result.trajectory_vp)
    return AttackSummary(
        success=result.success,
        steps=len(result.steps),
        outcome=result.outcome.value,
        adv_label=result.adv_label,
        v_adv=list(result.v_adv.values),
        vp_adv=list(result.v_prime_adv.values),
        members=[[lab, d] for lab, d in zip(result.similar_labels, result.similar_distances)],
        pid_shared=shared,
        pid_total=total,
    )


def attack_instance(params: Classifier, v: Instance, schema: FeatureSchema, settings: RunSettings = RunSettings()) -> InstanceRun:
    enc = encoder_for(schema)
    sim = enumerate_similar(v, schema, settings.similar_cap, seed=settings.seed)
    probs = params.predict_proba(enc.encode_many(sim.members))
    labels = threshold_labels(probs, settings.tau_dec)
    base_pos = next(k for k, m in enumerate(sim.members) if m.values == v.values)
    vp = choose_counterpart(params, v, schema, settings.similar_cap, settings.seed)

    fgsm = adf = None
    if "fgsm" in settings.attacks:
        r = fgsm_baseline(params, v, schema, settings.epsilon, settings.tau_dec)
        fgsm = {"success": r.success, "label": r.label, "v_adv": list(r.v_adv.values)}
    if "adf" in settings.attacks:
        if vp is None:
            adf = {"success": False, "steps": 0}
        else:
            r = adf_baseline(params, v, sim, schema, settings.max_steps, settings.tau_dec, settings.grid_points)
            adf = {"success": r.success, "steps": r.steps}

    bundle = InstanceBundle(
        id=v.id,
        y=v.label,
        values=list(v.values),
        clean_label=int(labels[base_pos]),
        clean_prob=float(probs[base_pos, 1]),
        clean_similar_labels=[int(l) for l in labels],
        counterpart=None if vp is None else list(vp.values),
        fgsm=fgsm,
        adf=adf,
    )
    run = InstanceRun(bundle)
    for mode in AttackMode:
        if mode.value not in settings.attacks or vp is None:
            continue
        res = rifair_attack(params, v, vp, schema, settings.attack_config(mode))
        run.results[mode.value] = res
        bundle.rifair[mode.value] = summarize(res)
    return run


_WORKER = {}


def _init_worker(params, schema, settings):
    _WORKER.update(params=params, schema=schema, settings=settings)


def _work(v: Instance) -> InstanceRun:
    return attack_instance(_WORKER["params"], v, _WORKER["schema"], _WORKER["settings"])


def attack_all(
    params: Classifier,
    instances: Sequence[Instance],
    schema: FeatureSchema,
    settings: RunSettings = RunSettings(),
    workers: int = 1,
) -> Iterator[InstanceRun]:
    """Yield one run per instance, in input order."""
    if workers <= 1:
        for k, v in enumerate(instances):
            if k and k % 500 == 0:
                log.info("attacked %d/%d instances", k, len(instances))
            yield attack_instance(params, v, schema, settings)
        return
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(params, schema, settings)) as pool:
        yield from pool.map(_work, instances, chunksize=32)


def write_bundles(path: str | Path, bundles: Iterable[InstanceBundle]) -> int:
    n = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for b in bundles:
            fh.write(json.dumps(b.to_json()) + "\n")
            n += 1
    return n


def read_bundles(path: str | Path) -> list[InstanceBundle]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"attack results not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return [InstanceBundle.from_json(json.loads(line)) for line in fh if line.strip()]


def clean_outcomes(params: Classifier, instances: Sequence[Instance], schema: FeatureSchema, cap: int = 64, seed: int = 0, tau_dec: float = 0.5):
    """Outcome class of every instance over its full similar set."""
    enc = encoder_for(schema)
    out = []
    for v in instances:
        sim = enumerate_similar(v, schema, cap, seed=seed)
        labels = threshold_labels(params.predict_proba(enc.encode_many(sim.members)), tau_dec)
        base = next(k for k, m in enumerate(sim.members) if m.values == v.values)
        out.append(classify_outcome(v.label, int(labels[base]), labels.tolist()))
    return out

