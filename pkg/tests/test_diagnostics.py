import csv
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairattack.attack import AttackConfig, choose_counterpart, rifair_attack
from fairattack.dataset import encoder_for
from fairattack.diagnostics import (
    TRAJECTORY_COLUMNS,
    TrajectoryStep,
    check_flip_theorems,
    compute_pii_pid,
    flip_margin,
    shared_pid_fraction,
    trajectory_svg,
    verify_decomposition,
    write_trajectory_csv,
)
from fairattack.model import MlpParams

from conftest import random_instances


def _path(fs, norms=None):
    norms = norms or [1.0] * (len(fs) - 1)
    return [TrajectoryStep.measure(a, b, n) for a, b, n in zip(fs, fs[1:], norms)]


class TestPiiPid:
    def test_no_change(self):
        assert compute_pii_pid(0.5, 0.5, 3.0) == (0.0, None)

    def test_decrease(self):
        pii, pid = compute_pii_pid(0.8, 0.3, 1.0)
        assert pii == pytest.approx(0.5) and pid == -1

    def test_case_study_numbers(self):
        pii, pid = compute_pii_pid(0.1216, 0.4188, 2.0)
        assert pii == pytest.approx(0.1486) and pid == 1

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            compute_pii_pid(0.1, 0.2, 0.0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-3, 10))
    def test_single_step_identity(self, a, b, n):
        step = TrajectoryStep.measure(a, b, n)
        assert abs((b - a) - step.impact) <= 1e-12


class TestDecomposition:
    def test_empty(self):
        assert verify_decomposition([], 0.4, 0.4) == (True, 0.0)

    def test_telescopes(self):
        fs = [0.1, 0.35, 0.2, 0.2, 0.7]
        ok, res = verify_decomposition(_path(fs, [1.0, 0.25, 2.0, 1.0]), fs[0], fs[-1])
        assert ok and res < 1e-12

    def test_tampered_step_detected(self):
        fs = [0.1, 0.35, 0.7]
        path = _path(fs)
        path[1] = replace(path[1], pii=path[1].pii + 1e-3)
        ok, res = verify_decomposition(path, fs[0], fs[-1])
        assert not ok and res == pytest.approx(1e-3)

    def test_broken_chain_raises(self):
        path = _path([0.1, 0.3]) + _path([0.31, 0.5])
        with pytest.raises(ValueError, match="step 1"):
            verify_decomposition(path, 0.1, 0.5)

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.data())
    def test_random_paths(self, fs, data):
        norms = data.draw(st.lists(st.floats(0.01, 5), min_size=len(fs) - 1, max_size=len(fs) - 1))
        ok, _ = verify_decomposition(_path(fs, norms), fs[0], fs[-1])
        assert ok


class TestFlip:
    @pytest.mark.parametrize("f,m", [(0.3, 0.2), (0.5, 0.0), (0.9, -0.4)])
    def test_margin(self, f, m):
        assert flip_margin(f, 0.5) == pytest.approx(m)

    def test_crossing_confirmed(self):
        assert check_flip_theorems(_path([0.3, 0.55]), 0.3)

    def test_within_tolerance(self):
        assert check_flip_theorems(_path([0.3, 0.4]), 0.3)

    def test_from_above(self):
        assert check_flip_theorems(_path([0.5, 0.49, 0.8, 0.2]), 0.5)

    def test_inconsistent_label_detected(self):
        # a step that claims to land above tau while the impacts say otherwise
        bad = [TrajectoryStep(0.3, 0.6, 1.0, 0.1, 1)]
        assert not check_flip_theorems(bad, 0.3)

    def test_landing_on_threshold_after_rounding(self):
        # summed impacts round to just below the margin; the realized label is 1
        assert check_flip_theorems(_path([0.75, 0.24854494126530252, 0.5]), 0.75)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=10))
    def test_any_realized_path_passes(self, fs):
        assert check_flip_theorems(_path(fs), fs[0])


class TestSharedPid:
    def test_counts(self):
        a = _path([0.1, 0.2, 0.2, 0.1])
        b = _path([0.5, 0.6, 0.7, 0.8])
        assert shared_pid_fraction(a, b) == (1, 2)


@pytest.fixture(scope="module")
def some_result(toy_schema):
    params = MlpParams.init((encoder_for(toy_schema).dim, 8, 2), seed=2)
    rng = np.random.default_rng(0)
    for v in random_instances(toy_schema, 50, rng):
        res = rifair_attack(params, v, choose_counterpart(params, v, toy_schema), toy_schema, AttackConfig("ff", max_steps=4))
        if res.steps:
            return res
    pytest.fail("no multi-step trajectory in 50 tries")


class TestExports:
    def test_recorded_trajectory_telescopes(self, some_result):
        for traj, f0 in ((some_result.trajectory_v, some_result.f_initial_v), (some_result.trajectory_vp, some_result.f_initial_vp)):
            ok, res = verify_decomposition(traj, f0, traj[-1].f_after)
            assert ok and res < 1e-9
            assert check_flip_theorems(traj, f0)

    def test_csv(self, tmp_path, some_result, toy_schema):
        path = tmp_path / "t.csv"
        write_trajectory_csv(path, some_result, [f.name for f in toy_schema.features])
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == TRAJECTORY_COLUMNS
        assert len(rows) == 2 + len(some_result.steps)
        assert float(rows[-1][5]) == some_result.trajectory_v[-1].f_after

    def test_svg(self, some_result):
        doc = trajectory_svg(some_result)
        assert doc.startswith("<svg") and "tau = 0.5" in doc
