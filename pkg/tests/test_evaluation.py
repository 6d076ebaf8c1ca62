import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairattack.evaluation import (
    AttackSummary,
    InstanceBundle,
    OutcomeClass,
    RifCheckConfig,
    RifRecord,
    aggregate,
    check_rif,
    check_theorem_3_1,
    classify_outcome,
    estimate_k_emp,
    make_rif_record,
    table_metrics,
    write_instance_csv,
)

import oracles


def _summary(y, success, mode):
    if not success:
        return AttackSummary(False, 0, "TF", y, [], [], [[y, 0.0], [y, 1.0]])
    adv = {"tb": y, "fb": 1 - y, "ff": 1 - y}[mode]
    other = {"tb": 1 - y, "fb": y, "ff": 1 - y}[mode]
    outcome = {"tb": "TB", "fb": "FB", "ff": "FF"}[mode]
    return AttackSummary(True, 1, outcome, adv, [], [], [[adv, 0.0], [other, 1.0]])


def _bundle(i, y, tb=False, fb=False, ff=False):
    return InstanceBundle(
        id=i,
        y=y,
        values=[],
        clean_label=y,
        clean_prob=float(y),
        clean_similar_labels=[y, y],
        counterpart=None,
        fgsm={"success": False},
        adf={"success": False},
        rifair={"tb": _summary(y, tb, "tb"), "fb": _summary(y, fb, "fb"), "ff": _summary(y, ff, "ff")},
    )


class TestClassify:
    @pytest.mark.parametrize(
        "y,adv,sim,cls",
        [(0, 0, [0, 0, 0], "TF"), (0, 0, [0, 1, 0], "TB"), (0, 1, [1, 1], "FF"), (1, 0, [0, 1], "FB")],
    )
    def test_examples(self, y, adv, sim, cls):
        assert classify_outcome(y, adv, sim) == OutcomeClass(cls)

    @given(st.integers(0, 1), st.integers(0, 1), st.lists(st.integers(0, 1), min_size=1, max_size=8))
    def test_partition(self, y, adv, sim):
        cls = classify_outcome(y, adv, [adv] + sim)
        assert sum(cls == c for c in OutcomeClass) == 1
        assert cls.accurate == (adv == y) and cls.fair == (len(set([adv] + sim)) == 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            classify_outcome(0, 0, [])


class TestKEmp:
    def test_nearest_rank(self):
        pairs = [(k / 10, 1.0) for k in range(1, 21)]
        assert estimate_k_emp(pairs) == pytest.approx(1.9)

    def test_single(self):
        assert estimate_k_emp([(0.7, 1.0)]) == pytest.approx(0.7)

    def test_zero_distance_excluded(self):
        assert estimate_k_emp([(1.0, 0.0), (0.0, 0.0), (1.0, 2.0)]) == 0.5

    def test_undefined(self):
        with pytest.raises(ValueError):
            estimate_k_emp([(1.0, 0.0)])

    @given(st.lists(st.tuples(st.sampled_from([0.0, 1.0]), st.floats(0.01, 1)), min_size=1, max_size=40), st.randoms())
    def test_matches_oracle_and_order_invariant(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        expected = oracles.nearest_rank([D / d for D, d in pairs], 0.95)
        assert estimate_k_emp(pairs) == estimate_k_emp(shuffled) == expected

    @given(st.lists(st.floats(0, 5), min_size=1, max_size=30), st.floats(0.05, 0.5), st.floats(0.5, 0.99))
    def test_monotone_in_percentile(self, rs, p, q):
        pairs = [(r, 1.0) for r in rs]
        assert estimate_k_emp(pairs, p) <= estimate_k_emp(pairs, q)


class TestRifCheck:
    def test_all_agree(self):
        assert check_rif(1, [(None, 0.0, 0.0), (None, 0.0, 1.0)], 0.0, 0.5)

    def test_bound_exceeded(self):
        assert not check_rif(0, [(None, 0.0, 0.0), (None, 1.0, 0.5)], 1.5, 0.9)

    def test_self_must_be_accurate(self):
        assert not check_rif(0, [(None, 1.0, 0.0)], 10.0, 10.0)

    def test_record(self):
        rec = make_rif_record(1, 1, [(1, 0.0), (0, 1.0)], 1.0, 1.0)
        assert rec.rif_pass and check_theorem_3_1(rec)

    def test_implication_negative_control(self):
        forged = RifRecord(y=0, adv_label=1, members=((1, 0.0),), k_emp=1.0, tau=0.5, rif_pass=True)
        assert not check_theorem_3_1(forged)
        forged = RifRecord(y=0, adv_label=0, members=((0, 0.0), (1, 0.2)), k_emp=1.0, tau=0.5, rif_pass=True)
        assert not check_theorem_3_1(forged)

    @given(
        st.integers(0, 1),
        st.integers(0, 1),
        st.lists(st.tuples(st.integers(0, 1), st.sampled_from([0.5, 1.0])), max_size=6),
        st.floats(0, 3),
        st.floats(0.01, 2),
    )
    def test_implication_holds_for_any_checked_record(self, y, adv, others, k, tau):
        rec = make_rif_record(y, adv, [(adv, 0.0)] + others, k, tau)
        assert check_theorem_3_1(rec)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RifCheckConfig(tau=0.0)


class TestAggregate:
    def test_all_fail(self):
        rep = aggregate([_bundle(i, i % 2) for i in range(6)])
        assert rep.rif_attack == 0 and rep.tfr == 1 and rep.n_attack_hist == [6, 0, 0, 0]
        rep.check_invariants()

    def test_all_succeed(self):
        rep = aggregate([_bundle(i, i % 2, True, True, True) for i in range(5)])
        assert rep.n_attack_hist == [0, 0, 0, 5] and rep.rif_attack == 1
        assert rep.ar_attack_rifair == 1 and rep.if_attack_rifair == 1
        rep.check_invariants()

    def test_mixed_rates(self):
        bundles = [_bundle(0, 0, tb=True), _bundle(1, 1, ff=True), _bundle(2, 0, fb=True, ff=True), _bundle(3, 1)]
        rep = aggregate(bundles)
        assert (rep.tbr, rep.fbr, rep.ffr, rep.tfr) == (0.25, 0.25, 0.5, 0.25)
        assert rep.rif_attack == 0.75 and rep.ar_attack_rifair == 0.5 and rep.if_attack_rifair == 0.5
        assert rep.n_attack_hist == [1, 2, 1, 0]
        assert rep.outcome_counts == {"TF": 0, "FF": 2, "TB": 1, "FB": 1}
        rep.check_invariants()

    def test_order_independent(self):
        rng = random.Random(0)
        bundles = [_bundle(i, rng.randint(0, 1), *(rng.random() < 0.4 for _ in range(3))) for i in range(40)]
        a = aggregate(bundles).to_json(include_instances=True)
        rng.shuffle(bundles)
        b = aggregate(bundles).to_json(include_instances=True)
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_missing_attack_rejected(self):
        b = _bundle(0, 0)
        del b.rifair["ff"]
        with pytest.raises(ValueError):
            aggregate([b])

    def test_bundle_round_trip(self):
        b = _bundle(3, 1, tb=True)
        assert InstanceBundle.from_json(json.loads(json.dumps(b.to_json()))) == b

    def test_instance_csv(self, tmp_path):
        rep = aggregate([_bundle(i, 0, tb=i == 1) for i in range(3)])
        write_instance_csv(tmp_path / "i.csv", rep)
        lines = (tmp_path / "i.csv").read_text().splitlines()
        assert lines[0] == "id,clean_label,y,tb,fb,ff,n_attack,rif_pass" and len(lines) == 4


def test_table_metrics():
    m = table_metrics([OutcomeClass.TF, OutcomeClass.TB, OutcomeClass.FF, OutcomeClass.TF])
    assert m == {"acc": 0.75, "fta": 0.75, "fbr": 0.0, "ffr": 0.25, "tbr": 0.25, "tfr": 0.5}
