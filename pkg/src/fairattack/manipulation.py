"""Test-set manipulation with adversarial replacements.

A test item is swapped for a RIFair adversarial instance of a chosen outcome
class, which moves the reported accuracy and fairness of an unchanged model.
Replacements prefer the perturbed version of the very item being replaced.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from fairattack.dataset import FeatureSchema, Instance
from fairattack.evaluation import MODES, InstanceBundle, OutcomeClass, table_metrics
from fairattack.model import Classifier
from fairattack.pipeline import clean_outcomes

log = logging.getLogger(__name__)

TF, FF, TB, FB = OutcomeClass.TF, OutcomeClass.FF, OutcomeClass.TB, OutcomeClass.FB


class Strategy(str, Enum):
    ACC_UP = "acc_up"
    FAIR_UP = "fair_up"
    BOTH_UP = "both_up"
    ACC_UP_FAIR_DOWN = "acc_up_fair_down"
    ACC_DOWN_FAIR_UP = "acc_down_fair_up"

    @property
    def sources(self) -> tuple[OutcomeClass, ...]:
        """Classes of test items eligible for replacement, in priority order.

        Classes whose replacement moves both reported metrics come first, so a
        small budget still changes every metric the strategy claims to move.
        """
        return _RULES[self][0]

    @property
    def targets(self) -> tuple[OutcomeClass, ...]:
        return _RULES[self][1]

    def direction(self) -> dict[str, int]:
        """+1: metric must not fall, -1: must not rise. Keys are 'acc' and 'fta'."""
        return _DIRECTIONS[self]


_RULES = {
    Strategy.ACC_UP: ((FB, FF), (TF, TB)),
    Strategy.FAIR_UP: ((FB, TB), (TF, FF)),
    Strategy.BOTH_UP: ((FB, TB, FF), (TF,)),
    Strategy.ACC_UP_FAIR_DOWN: ((FF, TF), (TB,)),
    Strategy.ACC_DOWN_FAIR_UP: ((TB, TF), (FF,)),
}

_DIRECTIONS = {
    Strategy.ACC_UP: {"acc": +1},
    Strategy.FAIR_UP: {"fta": +1},
    Strategy.BOTH_UP: {"acc": +1, "fta": +1},
    Strategy.ACC_UP_FAIR_DOWN: {"acc": +1, "fta": -1},
    Strategy.ACC_DOWN_FAIR_UP: {"acc": -1, "fta": +1},
}


@dataclass(frozen=True)
class PoolItem:
    source_id: int
    mode: str
    outcome: OutcomeClass
    instance: Instance


Pool = dict[OutcomeClass, list[PoolItem]]


def build_pool(bundles: Sequence[InstanceBundle]) -> Pool:
    """Adversarial instances from RIFair runs that applied at least one step, by outcome class."""
    pool: Pool = {c: [] for c in OutcomeClass}
    for b in sorted(bundles, key=lambda b: b.id):
        for m in MODES:
            s = b.rifair.get(m)
            if s is None or s.steps == 0:
                continue
            cls = OutcomeClass(s.outcome)
            pool[cls].append(PoolItem(b.id, m, cls, Instance(b.id, tuple(s.v_adv), b.y)))
    return pool


@dataclass
class ManipulatedSet:
    items: list[Instance]
    provenance: list[dict]
    budget_used: int
    warnings: list[str] = field(default_factory=list)

    @property
    def replaced(self) -> list[int]:
        return [k for k, p in enumerate(self.provenance) if p["status"] == "replaced"]


def _original(k: int, inst: Instance, cls: OutcomeClass) -> dict:
    return {"index": k, "id": inst.id, "status": "original", "clean_outcome": cls.value, "mode": None, "source_id": None, "outcome": cls.value}


def manipulate(
    test_set: Sequence[Instance],
    outcomes: Sequence[OutcomeClass],
    pool: Pool,
    strategy: Strategy | str,
    budget: int,
    seed: int = 0,
) -> ManipulatedSet:
    """Replace up to ``budget`` items of the strategy's source classes.

    ``outcomes`` are the clean outcome classes of ``test_set`` under the model.
    Each pool item is used at most once.
    """
    strategy = Strategy(strategy)
    if len(outcomes) != len(test_set):
        raise ValueError("outcomes and test_set differ in length")
    if not 0 <= budget <= len(test_set):
        raise ValueError(f"budget must be in [0, {len(test_set)}], got {budget}")

    items = list(test_set)
    prov = [_original(k, inst, c) for k, (inst, c) in enumerate(zip(test_set, outcomes))]
    order = np.random.default_rng(seed).permutation(len(test_set))

    candidates = [it for t in strategy.targets for it in pool.get(t, [])]
    by_source: dict[int, list[int]] = {}
    for pos, it in enumerate(candidates):
        by_source.setdefault(it.source_id, []).append(pos)
    used = [False] * len(candidates)
    next_free = 0

    warnings: list[str] = []
    budget_used = 0
    for src in strategy.sources:
        for k in order:
            if budget_used == budget:
                break
            if outcomes[k] != src:
                continue
            pick = next((p for p in by_source.get(test_set[k].id, []) if not used[p]), None)
            if pick is None:
                while next_free < len(candidates) and used[next_free]:
                    next_free += 1
                if next_free == len(candidates):
                    warnings.append(f"pool exhausted for targets {[t.value for t in strategy.targets]}")
                    break
                pick = next_free
            used[pick] = True
            it = candidates[pick]
            items[k] = it.instance
            prov[k].update(status="replaced", mode=it.mode, source_id=it.source_id, outcome=it.outcome.value)
            budget_used += 1
        if warnings:
            break
    for w in warnings:
        log.warning("%s: %s", strategy.value, w)
    return ManipulatedSet(items, prov, budget_used, warnings)


def evaluate_manipulated(
    params: Classifier,
    manipulated: ManipulatedSet,
    schema: FeatureSchema,
    cap: int = 64,
    seed: int = 0,
    tau_dec: float = 0.5,
) -> dict[str, float]:
    """Acc, FTA, FBR, FFR, TBR and TFR re-measured on the manipulated items."""
    return table_metrics(clean_outcomes(params, manipulated.items, schema, cap, seed, tau_dec))


def replaced_metrics(params: Classifier, manipulated: ManipulatedSet, schema: FeatureSchema, cap: int = 64, seed: int = 0, tau_dec: float = 0.5) -> dict[str, float]:
    """The same six columns restricted to replaced items."""
    items = [manipulated.items[k] for k in manipulated.replaced]
    return table_metrics(clean_outcomes(params, items, schema, cap, seed, tau_dec))


def check_direction(strategy: Strategy | str, clean: dict, manip: dict, n_replaced: int) -> bool:
    """Strict movement in every declared direction when anything was replaced; identity otherwise.

    A metric already at its bound in the declared direction (1 when it should
    rise, 0 when it should fall) cannot move and must stay where it is.
    """
    strategy = Strategy(strategy)
    for metric, sign in strategy.direction().items():
        diff = sign * (manip[metric] - clean[metric])
        saturated = clean[metric] == (1.0 if sign > 0 else 0.0)
        if (n_replaced == 0 or saturated) and diff != 0:
            return False
        if n_replaced > 0 and not saturated and not diff > 0:
            return False
    return True


def manipulation_table(
    params: Classifier,
    test_set: Sequence[Instance],
    pool: Pool,
    schema: FeatureSchema,
    strategies: Sequence[Strategy | str],
    budget: int,
    seed: int = 0,
    cap: int = 64,
    tau_dec: float = 0.5,
) -> tuple[dict, dict[str, ManipulatedSet]]:
    """Before/after metric rows for each strategy, plus the manipulated sets."""
    outcomes = clean_outcomes(params, test_set, schema, cap, seed, tau_dec)
    clean = table_metrics(outcomes)
    rows = [{"test_set": "clean", "replaced": 0, **clean}]
    sets: dict[str, ManipulatedSet] = {}
    checks = {}
    for s in map(Strategy, strategies):
        ms = manipulate(test_set, outcomes, pool, s, budget, seed)
        after = evaluate_manipulated(params, ms, schema, cap, seed, tau_dec)
        rows.append({"test_set": s.value, "replaced": ms.budget_used, **after})
        checks[s.value] = {
            "direction_ok": check_direction(s, clean, after, ms.budget_used),
            "replaced_fbr": replaced_metrics(params, ms, schema, cap, seed, tau_dec)["fbr"] if ms.budget_used else 0.0,
            "warnings": ms.warnings,
        }
        sets[s.value] = ms
    return {"budget": budget, "seed": seed, "rows": rows, "checks": checks}, sets


PROVENANCE_COLUMNS = ("index", "id", "status", "clean_outcome", "mode", "source_id", "outcome")


def write_provenance_csv(path: str | Path, manipulated: ManipulatedSet, strategy: str) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.DictWriter(fh, fieldnames=("strategy",) + PROVENANCE_COLUMNS)
        out.writeheader()
        for p in manipulated.provenance:
            out.writerow({"strategy": strategy, **{k: "" if p[k] is None else p[k] for k in PROVENANCE_COLUMNS}})
