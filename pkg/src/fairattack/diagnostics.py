"""Per-step perturbation impact (PII) and direction (PID) along attack paths.

For a step that moves the positive-class probability from ``f_before`` to
``f_after`` under a perturbation of size ``delta_norm``::

    pii = |f_after - f_before| / delta_norm
    pid = sign(f_after - f_before)      (None when the probability is unchanged)

PII is measured step-wise on the realized intermediate states, so the signed
impacts ``pii * delta_norm * pid`` telescope exactly to the total change.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from fairattack import svg

IDENTITY_ATOL = 1e-12
TELESCOPE_TOL = 1e-9


@dataclass(frozen=True)
class TrajectoryStep:
    f_before: float
    f_after: float
    delta_norm: float
    pii: float
    pid: int | None

    @classmethod
    def measure(cls, f_before: float, f_after: float, delta_norm: float) -> TrajectoryStep:
        pii, pid = compute_pii_pid(f_before, f_after, delta_norm)
        return cls(float(f_before), float(f_after), float(delta_norm), pii, pid)

    @property
    def impact(self) -> float:
        """Signed contribution pii * ||delta|| * pid; zero when pid is undefined."""
        if self.pid is None:
            return 0.0
        return self.pii * self.delta_norm * self.pid


def compute_pii_pid(f_before: float, f_after: float, delta_norm: float) -> tuple[float, int | None]:
    if not delta_norm > 0:
        raise ValueError(f"delta_norm must be positive, got {delta_norm}")
    change = f_after - f_before
    if change == 0:
        return 0.0, None
    return abs(change) / delta_norm, 1 if change > 0 else -1


def _check_chain(trajectory: Sequence[TrajectoryStep], f_initial: float) -> None:
    prev = f_initial
    for k, step in enumerate(trajectory):
        if step.f_before != prev:
            raise ValueError(f"trajectory broken at step {k}: f_before {step.f_before!r} != previous {prev!r}")
        prev = step.f_after


def verify_decomposition(
    trajectory: Sequence[TrajectoryStep], f_initial: float, f_final: float, tol: float = TELESCOPE_TOL
) -> tuple[bool, float]:
    """Check f_final == f_initial + sum of signed step impacts; returns (ok, residual)."""
    _check_chain(trajectory, f_initial)
    total = f_initial + sum(step.impact for step in trajectory)
    residual = abs(f_final - total)
    return residual < tol, residual


def flip_margin(f_v: float, tau_dec: float = 0.5) -> float:
    """Signed cumulative impact needed to reach the decision threshold."""
    return tau_dec - f_v


def check_flip_theorems(trajectory: Sequence[TrajectoryStep], f_initial: float, tau_dec: float = 0.5) -> bool:
    """Check that label flips along a path happen exactly when the margin is crossed.

    For every prefix with cumulative signed impact S and margin m = tau - f0:
    starting below tau the label flips iff S >= m; starting at or above tau
    it flips iff S < m. Prefixes that keep the label and move toward the
    threshold must stay inside the tolerance: S < m from below, |S| <= |m|
    from above (a point exactly at tau keeps label 1). Prefixes whose summed
    impact lands within IDENTITY_ATOL of the margin sit on the threshold up to
    rounding, so either label is accepted there.
    """
    _check_chain(trajectory, f_initial)
    margin = flip_margin(f_initial, tau_dec)
    start_label = f_initial >= tau_dec
    cum = 0.0
    for step in trajectory:
        cum += step.impact
        flipped = (step.f_after >= tau_dec) != start_label
        predicted = cum >= margin if not start_label else cum < margin
        on_edge = abs(cum - margin) <= IDENTITY_ATOL
        if flipped != predicted and not on_edge:
            return False
        if not flipped and not on_edge:
            toward = cum > 0 if not start_label else cum < 0
            if toward:
                inside = abs(cum) < abs(margin) if not start_label else abs(cum) <= abs(margin)
                if not inside:
                    return False
    return True


def shared_pid_fraction(traj_v: Sequence[TrajectoryStep], traj_vp: Sequence[TrajectoryStep]) -> tuple[int, int]:
    """Count steps where both instances moved in the same direction: (shared, comparable)."""
    shared = total = 0
    for a, b in zip(traj_v, traj_vp):
        if a.pid is None or b.pid is None:
            continue
        total += 1
        shared += a.pid == b.pid
    return shared, total


TRAJECTORY_COLUMNS = ("step", "feature", "old", "new", "delta_norm", "f_v", "f_v'", "pii_v", "pid_v", "pii_v'", "pid_v'")


def write_trajectory_csv(path: str | Path, result, feature_names: Sequence[str]) -> None:
    """Export one attack result's paired trajectory, one row per step (step 0 = start)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh)
        out.writerow(TRAJECTORY_COLUMNS)
        out.writerow([0, "", "", "", "", repr(result.f_initial_v), repr(result.f_initial_vp), "", "", "", ""])
        for pert, tv, tvp in zip(result.steps, result.trajectory_v, result.trajectory_vp):
            out.writerow([
                pert.step_index,
                feature_names[pert.feature_index],
                pert.old_value,
                pert.new_value,
                repr(pert.delta_norm),
                repr(tv.f_after),
                repr(tvp.f_after),
                repr(tv.pii),
                "" if tv.pid is None else tv.pid,
                repr(tvp.pii),
                "" if tvp.pid is None else tvp.pid,
            ])


def trajectory_svg(result, tau_dec: float = 0.5, title: str = "") -> str:
    f_v = [result.f_initial_v] + [s.f_after for s in result.trajectory_v]
    f_vp = [result.f_initial_vp] + [s.f_after for s in result.trajectory_vp]
    return svg.line_chart(
        {"f(v)": f_v, "f(v')": f_vp},
        hline=tau_dec,
        hline_label=f"tau = {tau_dec:g}",
        title=title or f"{result.mode.name} trajectory",
        xlabel="perturbation step",
        ylabel="positive-class probability",
        y_range=(0.0, 1.0),
    )
