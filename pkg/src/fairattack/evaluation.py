"""Outcome taxonomy, attack-rate metrics and the empirical RIF check.

An adversarial instance is classified by two bits: whether its own predicted
label matches the ground truth (true/false) and whether every member of its
similar set receives the same label (fair/biased).

Rates use every attacked test instance as denominator. Label disagreement
``D`` is 0/1 and the similarity distance ``d`` is the normalized Hamming
distance over sensitive attributes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

MODES = ("tb", "fb", "ff")


class OutcomeClass(str, Enum):
    TF = "TF"
    FF = "FF"
    TB = "TB"
    FB = "FB"

    @property
    def accurate(self) -> bool:
        return self in (OutcomeClass.TF, OutcomeClass.TB)

    @property
    def fair(self) -> bool:
        return self in (OutcomeClass.TF, OutcomeClass.FF)


def classify_outcome(y: int, pred_label_adv: int, similar_labels: Sequence[int]) -> OutcomeClass:
    if len(similar_labels) == 0:
        raise ValueError("similar_labels is empty")
    fair = all(lab == similar_labels[0] for lab in similar_labels)
    accurate = pred_label_adv == y
    if accurate:
        return OutcomeClass.TF if fair else OutcomeClass.TB
    return OutcomeClass.FF if fair else OutcomeClass.FB


def estimate_k_emp(pairs: Iterable[tuple[float, float]], percentile: float = 0.95) -> float:
    """Nearest-rank percentile of r = D / d over pairs with d > 0."""
    if not 0.0 < percentile < 1.0:
        raise ValueError("percentile must be in (0, 1)")
    ratios = sorted(D / d for D, d in pairs if d > 0)
    if not ratios:
        raise ValueError("no pair with d > 0; K_emp is undefined")
    rank = max(1, math.ceil(percentile * len(ratios) - 1e-9))
    return ratios[rank - 1]


@dataclass(frozen=True)
class RifCheckConfig:
    tau: float = 0.5
    percentile: float = 0.95

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError("percentile must be in (0, 1)")


def check_rif(y: int, adv_pair_records: Iterable[tuple[object, float, float]], k_emp: float, tau: float) -> bool:
    """True iff D <= min(k_emp * d, tau) for every (member, D, d) record.

    The adversarial instance itself appears with d = 0, so its own label must
    match y for the check to pass.
    """
    return all(D <= min(k_emp * d, tau) for _, D, d in adv_pair_records)


@dataclass(frozen=True)
class RifRecord:
    """One adversarial instance's similar set, evaluated against the ground truth."""

    y: int
    adv_label: int
    members: tuple[tuple[int, float], ...]  # (predicted label, d to the adversarial instance)
    k_emp: float
    tau: float
    rif_pass: bool


def make_rif_record(y: int, adv_label: int, members: Sequence[tuple[int, float]], k_emp: float, tau: float) -> RifRecord:
    records = [(None, float(lab != y), d) for lab, d in members]
    return RifRecord(y, adv_label, tuple((int(l), float(d)) for l, d in members), k_emp, tau, check_rif(y, records, k_emp, tau))


def check_theorem_3_1(record: RifRecord) -> bool:
    """For a record flagged as passing, both implied clauses must hold.

    accuracy: the adversarial instance is labeled y;
    fairness: |label(adv) - label(m)| <= k_emp * d(adv, m) for every member m.
    Records not flagged as passing are vacuously fine.
    """
    if not record.rif_pass:
        return True
    if record.adv_label != record.y:
        return False
    return all(abs(record.adv_label - lab) <= record.k_emp * d for lab, d in record.members)


@dataclass
class AttackSummary:
    """Serializable digest of one RIFair run on one instance."""

    success: bool
    steps: int
    outcome: str
    adv_label: int
    v_adv: list
    vp_adv: list
    members: list  # [[label, d], ...] over the similar set of v_adv
    pid_shared: int = 0
    pid_total: int = 0


@dataclass
class InstanceBundle:
    """Everything recorded for one test instance: clean state plus five attacks."""

    id: int
    y: int
    values: list
    clean_label: int
    clean_prob: float
    clean_similar_labels: list
    counterpart: list | None
    fgsm: dict | None
    adf: dict | None
    rifair: dict[str, AttackSummary] = field(default_factory=dict)

    def n_attack(self) -> int:
        return sum(self.rifair[m].success for m in MODES)

    def to_json(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> InstanceBundle:
        obj = dict(obj)
        obj["rifair"] = {k: AttackSummary(**v) for k, v in obj.get("rifair", {}).items()}
        return cls(**obj)


@dataclass
class EvalReport:
    n: int
    acc: float
    fta: float
    ar_attack: float
    if_attack: float
    rif_attack: float
    ar_attack_rifair: float
    if_attack_rifair: float
    tbr: float
    fbr: float
    ffr: float
    tfr: float
    n_attack_hist: list[int]
    k_emp: float
    tau: float
    rif_pass_rate: float
    theorem_3_1_violations: int
    shared_pid_fraction: float | None
    outcome_counts: dict[str, int]
    per_instance: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_json(self, include_instances: bool = False) -> dict:
        out = asdict(self)
        if not include_instances:
            out.pop("per_instance")
        return out

    def check_invariants(self) -> None:
        """Raise AssertionError if any structural identity fails."""
        assert sum(self.n_attack_hist) == self.n, "histogram does not sum to N"
        assert abs(self.tfr * self.n - self.n_attack_hist[0]) < 1e-9, "tfr disagrees with hist[0]"
        # compare counts, not float rates
        rif, tb, fb, ff = (round(r * self.n) for r in (self.rif_attack, self.tbr, self.fbr, self.ffr))
        assert rif >= max(tb, fb, ff), "union lower bound violated"
        assert rif <= tb + fb + ff, "union upper bound violated"
        assert self.theorem_3_1_violations == 0, "RIF-passing instance violates an implied clause"


def _rate(count: int, n: int) -> float:
    return count / n if n else 0.0


def aggregate(bundles: Sequence[InstanceBundle], rif: RifCheckConfig = RifCheckConfig()) -> EvalReport:
    """Fold per-instance bundles into the report; order of bundles does not matter."""
    bundles = sorted(bundles, key=lambda b: b.id)
    n = len(bundles)
    for b in bundles:
        if b.fgsm is None or b.adf is None or any(m not in b.rifair for m in MODES):
            raise ValueError(f"bundle {b.id} is missing an attack result")

    pairs = [
        (float(lab != b.y), d)
        for b in bundles
        for m in MODES
        for lab, d in b.rifair[m].members
        if d > 0
    ]
    k_emp = estimate_k_emp(pairs, rif.percentile) if pairs else 0.0

    hist = [0, 0, 0, 0]
    succ = {m: 0 for m in MODES}
    rif_any = ar_r = if_r = fgsm = adf = clean_ok = clean_fair = passing = 0
    violations = 0
    shared = comparable = 0
    outcome_counts = {c.value: 0 for c in OutcomeClass}
    per_instance = []
    for b in bundles:
        s = {m: b.rifair[m].success for m in MODES}
        k = sum(s.values())
        hist[k] += 1
        for m in MODES:
            succ[m] += s[m]
            if b.rifair[m].steps > 0:
                outcome_counts[b.rifair[m].outcome] += 1
        rif_any += k > 0
        ar_r += s["fb"] or s["ff"]
        if_r += s["tb"] or s["fb"]
        fgsm += bool(b.fgsm["success"])
        adf += bool(b.adf["success"])
        clean_ok += b.clean_label == b.y
        clean_fair += len(set(b.clean_similar_labels)) == 1
        if s["tb"]:
            shared += b.rifair["tb"].pid_shared
            comparable += b.rifair["tb"].pid_total

        inst_pass = True
        for m in MODES:
            summ = b.rifair[m]
            rec = make_rif_record(b.y, summ.adv_label, summ.members, k_emp, rif.tau)
            inst_pass &= rec.rif_pass
            violations += not check_theorem_3_1(rec)
        passing += inst_pass
        per_instance.append({
            "id": b.id,
            "clean_label": b.clean_label,
            "y": b.y,
            "tb": int(s["tb"]),
            "fb": int(s["fb"]),
            "ff": int(s["ff"]),
            "n_attack": k,
            "rif_pass": int(inst_pass),
        })

    return EvalReport(
        n=n,
        acc=_rate(clean_ok, n),
        fta=_rate(clean_fair, n),
        ar_attack=_rate(fgsm, n),
        if_attack=_rate(adf, n),
        rif_attack=_rate(rif_any, n),
        ar_attack_rifair=_rate(ar_r, n),
        if_attack_rifair=_rate(if_r, n),
        tbr=_rate(succ["tb"], n),
        fbr=_rate(succ["fb"], n),
        ffr=_rate(succ["ff"], n),
        tfr=_rate(hist[0], n),
        n_attack_hist=hist,
        k_emp=k_emp,
        tau=rif.tau,
        rif_pass_rate=_rate(passing, n),
        theorem_3_1_violations=violations,
        shared_pid_fraction=(shared / comparable) if comparable else None,
        outcome_counts=outcome_counts,
        per_instance=per_instance,
        metadata={"denominator": "all attacked test instances"},
    )


INSTANCE_COLUMNS = ("id", "clean_label", "y", "tb", "fb", "ff", "n_attack", "rif_pass")


def write_instance_csv(path: str | Path, report: EvalReport) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.DictWriter(fh, fieldnames=INSTANCE_COLUMNS)
        out.writeheader()
        out.writerows(report.per_instance)


def table_metrics(outcomes: Sequence[OutcomeClass]) -> dict[str, float]:
    """ACC, FTA and the four outcome rates over a set of classified items."""
    n = len(outcomes)
    counts: Mapping[OutcomeClass, int] = {c: sum(o == c for o in outcomes) for c in OutcomeClass}
    return {
        "acc": _rate(counts[OutcomeClass.TF] + counts[OutcomeClass.TB], n),
        "fta": _rate(counts[OutcomeClass.TF] + counts[OutcomeClass.FF], n),
        "fbr": _rate(counts[OutcomeClass.FB], n),
        "ffr": _rate(counts[OutcomeClass.FF], n),
        "tbr": _rate(counts[OutcomeClass.TB], n),
        "tfr": _rate(counts[OutcomeClass.TF], n),
    }
