"""Paired greedy attacks on similar individuals, plus FGSM- and ADF-style baselines.

The paired attack (RIFair) takes an individual ``v`` and a similar
counterpart ``v'`` and, for at most ``max_steps`` rounds:

1. sums the input gradients of l(f(v), L_v) and l(f(v'), L_v');
2. picks the non-sensitive feature with the largest gradient magnitude;
3. tries every realistic replacement value for that feature in both
   instances at once and keeps the one minimizing the joint loss;
4. writes the value into both instances.

The loss targets (L_v, L_v') select the outcome being forced: true-biased
(y, y_diff), false-biased (y_diff, y) or false-fair (y_diff, y_diff). The
search stops as soon as the pair shows that mode's label pattern, or when no
candidate strictly lowers the joint loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from fairattack.dataset import (
    FeatureSchema,
    Instance,
    SimilarSet,
    distance_d,
    encoder_for,
    enumerate_similar,
)
from fairattack.diagnostics import TrajectoryStep
from fairattack.evaluation import OutcomeClass, classify_outcome
from fairattack.model import PROB_CLIP, Classifier, Prediction, cross_entropy, threshold_labels


class AttackMode(str, Enum):
    TB = "tb"
    FB = "fb"
    FF = "ff"

    def targets(self, y: int, y_diff: int) -> tuple[int, int]:
        """Loss targets (L_v, L_v') for this mode."""
        if self is AttackMode.TB:
            return y, y_diff
        if self is AttackMode.FB:
            return y_diff, y
        return y_diff, y_diff

    def realized(self, label_v: int, label_vp: int, y: int, y_diff: int) -> bool:
        return (label_v, label_vp) == self.targets(y, y_diff)

    @property
    def outcome(self) -> OutcomeClass:
        return OutcomeClass(self.name)


class _NoImprovement:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_IMPROVEMENT"

    def __bool__(self) -> bool:
        return False


NO_IMPROVEMENT = _NoImprovement()


@dataclass(frozen=True)
class PerturbationStep:
    step_index: int
    feature_index: int
    old_value: object
    new_value: object
    delta_norm: float


@dataclass(frozen=True)
class AttackConfig:
    mode: AttackMode = AttackMode.TB
    max_steps: int = 10
    grid_points: int = 5
    tau_dec: float = 0.5
    similar_cap: int = 64
    seed: int = 0
    y_diff: int | None = None  # None: the other binary class
    on_stall: str = "stop"  # "next_feature": fall through the gradient ranking instead of stopping

    def __post_init__(self):
        object.__setattr__(self, "mode", AttackMode(self.mode))
        if self.on_stall not in ("next_feature", "stop"):
            raise ValueError(f"unknown on_stall policy {self.on_stall!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass(frozen=True, eq=False)
class AttackResult:
    mode: AttackMode
    y: int
    y_diff: int
    v: Instance
    v_prime: Instance
    v_adv: Instance
    v_prime_adv: Instance
    steps: tuple[PerturbationStep, ...]
    success: bool
    f_initial_v: float
    f_initial_vp: float
    trajectory_v: tuple[TrajectoryStep, ...]
    trajectory_vp: tuple[TrajectoryStep, ...]
    losses: tuple[float, ...]  # joint loss at start and after every accepted step
    outcome: OutcomeClass
    adv_label: int
    similar_labels: tuple[int, ...] = field(default=())
    similar_distances: tuple[float, ...] = field(default=())
    stop_reason: str = ""

    @property
    def f_final_v(self) -> float:
        return self.trajectory_v[-1].f_after if self.trajectory_v else self.f_initial_v

    @property
    def f_final_vp(self) -> float:
        return self.trajectory_vp[-1].f_after if self.trajectory_vp else self.f_initial_vp


def _ce_rows(probs: np.ndarray, targets) -> np.ndarray:
    rows = np.arange(len(probs))
    return -np.log(np.maximum(probs[rows, targets], PROB_CLIP))


def joint_loss(mode: AttackMode, pred_v: Prediction, pred_vp: Prediction, y: int, y_diff: int) -> float:
    """Sum of clipped cross-entropies toward the mode's targets."""
    if y_diff == y:
        raise ValueError("y_diff must differ from y")
    lv, lvp = AttackMode(mode).targets(y, y_diff)
    return cross_entropy(pred_v.probs, lv) + cross_entropy(pred_vp.probs, lvp)


def select_feature(grad_v: np.ndarray, grad_vp: np.ndarray, schema: FeatureSchema, group_map: Sequence[slice]) -> int:
    """Non-sensitive feature whose dense slice holds the largest |grad_v + grad_vp|.

    Ties go to the lowest feature index.
    """
    if grad_v.shape != grad_vp.shape:
        raise ValueError("gradients differ in shape")
    candidates = schema.nonsensitive_indices
    if not candidates:
        raise ValueError("schema has no non-sensitive features")
    g = np.abs(grad_v + grad_vp)
    best, best_score = candidates[0], -math.inf
    for j in candidates:
        score = float(g[group_map[j]].max())
        if score > best_score:
            best, best_score = j, score
    return best


def rank_features(grad_v: np.ndarray, grad_vp: np.ndarray, schema: FeatureSchema, group_map: Sequence[slice]) -> list[int]:
    """Non-sensitive features by descending score; the head is ``select_feature``'s choice."""
    g = np.abs(grad_v + grad_vp)
    scores = [(-float(g[group_map[j]].max()), j) for j in schema.nonsensitive_indices]
    return [j for _, j in sorted(scores)]


def candidate_values(schema: FeatureSchema, feature: int, current, grid_points: int = 5) -> list:
    """Realistic replacements: other categories, or grid points plus grid neighbors of the current value."""
    spec = schema.features[feature]
    if spec.is_discrete:
        return [c for c in spec.categories if c != current]
    lo, hi = spec.bounds
    step = (hi - lo) / (grid_points - 1)
    pts = set(np.linspace(lo, hi, grid_points).tolist())
    cur = float(current)
    for nb in (cur - step, cur + step):
        pts.add(min(max(nb, lo), hi))
    tol = 1e-12 * (hi - lo)
    return sorted(p for p in pts if abs(p - cur) > tol)


def delta_norm(schema: FeatureSchema, feature: int, old, new) -> float:
    """1 for a categorical change; |new - old| / (max - min) for a continuous one."""
    spec = schema.features[feature]
    if spec.is_discrete:
        return 1.0
    lo, hi = spec.bounds
    return abs(float(new) - float(old)) / (hi - lo)


def _candidate_block(schema: FeatureSchema, feature: int, x: np.ndarray, cands: Sequence) -> np.ndarray:
    enc = encoder_for(schema)
    X = np.tile(x, (len(cands), 1))
    sl = enc.slices[feature]
    spec = schema.features[feature]
    if spec.is_discrete:
        X[:, sl] = 0.0
        lookup = enc.cat_index[feature]
        X[np.arange(len(cands)), [sl.start + lookup[c] for c in cands]] = 1.0
    else:
        lo, hi = spec.bounds
        X[:, sl.start] = np.clip((np.asarray(cands, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return X


def _pair_state(params: Classifier, x_v: np.ndarray, x_vp: np.ndarray) -> np.ndarray:
    return params.predict_proba(np.stack([x_v, x_vp]))


def _best_replacement(params, schema, x_v, x_vp, feature, current, targets, cur_loss, grid_points):
    cands = candidate_values(schema, feature, current, grid_points)
    if not cands:
        raise ValueError(f"feature {schema.features[feature].name!r} has no replacement candidates")
    Xv = _candidate_block(schema, feature, x_v, cands)
    Xvp = _candidate_block(schema, feature, x_vp, cands)
    P = params.predict_proba(np.vstack([Xv, Xvp]))
    k = len(cands)
    losses = _ce_rows(P[:k], targets[0]) + _ce_rows(P[k:], targets[1])
    best = int(np.argmin(losses))
    if not losses[best] < cur_loss:
        return NO_IMPROVEMENT, None, None
    return cands[best], Xv[best], Xvp[best]


def select_replacement(
    params: Classifier,
    v: Instance,
    v_prime: Instance,
    feature: int,
    mode: AttackMode,
    y: int,
    y_diff: int,
    schema: FeatureSchema,
    grid_points: int = 5,
):
    """Candidate value minimizing the joint loss when written into both instances.

    Returns ``NO_IMPROVEMENT`` when no candidate strictly lowers the loss.
    """
    if schema.features[feature].sensitive:
        raise ValueError("sensitive features are never perturbed")
    enc = encoder_for(schema)
    x_v, _ = enc.encode_values(v.values)
    x_vp, _ = enc.encode_values(v_prime.values)
    targets = AttackMode(mode).targets(y, y_diff)
    P = _pair_state(params, x_v, x_vp)
    cur = float(_ce_rows(P[:1], targets[0])[0] + _ce_rows(P[1:], targets[1])[0])
    value, _, _ = _best_replacement(params, schema, x_v, x_vp, feature, v.values[feature], targets, cur, grid_points)
    return value


def _similar_outcome(params, v_adv: Instance, y: int, schema: FeatureSchema, cap: int, seed: int, tau_dec: float):
    sim = enumerate_similar(v_adv, schema, cap, seed=seed)
    X = encoder_for(schema).encode_many(sim.members)
    labels = threshold_labels(params.predict_proba(X), tau_dec)
    d = tuple(distance_d(v_adv, m, schema) for m in sim.members)
    adv_pos = next(k for k, dist in enumerate(d) if dist == 0)
    adv_label = int(labels[adv_pos])
    return classify_outcome(y, adv_label, labels.tolist()), adv_label, tuple(int(l) for l in labels), d


def rifair_attack(
    params: Classifier,
    v: Instance,
    v_prime: Instance,
    schema: FeatureSchema,
    config: AttackConfig = AttackConfig(),
) -> AttackResult:
    """Greedy paired perturbation forcing the outcome named by ``config.mode``."""
    if distance_d(v, v_prime, schema) == 0:
        raise ValueError("counterpart must differ from v on a sensitive attribute")
    y = v.label
    y_diff = (1 - y) if config.y_diff is None else config.y_diff
    if y_diff == y:
        raise ValueError("y_diff must differ from y")
    mode, tau = config.mode, config.tau_dec
    targets = mode.targets(y, y_diff)
    enc = encoder_for(schema)
    x_v, _ = enc.encode_values(v.values)
    x_vp, _ = enc.encode_values(v_prime.values)
    vals_v, vals_vp = list(v.values), list(v_prime.values)

    P = _pair_state(params, x_v, x_vp)
    f0_v, f0_vp = float(P[0, 1]), float(P[1, 1])
    cur_loss = float(_ce_rows(P, list(targets)).sum())
    losses = [cur_loss]
    steps, traj_v, traj_vp = [], [], []

    def done(P) -> bool:
        lab = threshold_labels(P, tau)
        return mode.realized(int(lab[0]), int(lab[1]), y, y_diff)

    success = done(P)
    stop = "realized" if success else "max_steps"
    t = 0
    while not success and t < config.max_steps:
        G = params.loss_input_gradient(np.stack([x_v, x_vp]), np.array(targets))
        ranked = rank_features(G[0], G[1], schema, enc.slices)
        if config.on_stall == "stop":
            ranked = ranked[:1]
        for j in ranked:
            old = vals_v[j]
            new, nx_v, nx_vp = _best_replacement(params, schema, x_v, x_vp, j, old, targets, cur_loss, config.grid_points)
            if new is not NO_IMPROVEMENT:
                break
        if new is NO_IMPROVEMENT:
            stop = "no_improvement"
            break
        P_new = _pair_state(params, nx_v, nx_vp)
        new_loss = float(_ce_rows(P_new, list(targets)).sum())
        if not new_loss < cur_loss:
            # improvement lost to rounding between batch shapes
            stop = "no_improvement"
            break
        norm = delta_norm(schema, j, old, new)
        t += 1
        steps.append(PerturbationStep(t, j, old, new, norm))
        traj_v.append(TrajectoryStep.measure(float(P[0, 1]), float(P_new[0, 1]), norm))
        traj_vp.append(TrajectoryStep.measure(float(P[1, 1]), float(P_new[1, 1]), norm))
        x_v, x_vp, P, cur_loss = nx_v, nx_vp, P_new, new_loss
        vals_v[j] = new
        vals_vp[j] = new
        losses.append(cur_loss)
        success = done(P)
        if success:
            stop = "realized"

    v_adv = Instance(v.id, tuple(vals_v), v.label)
    vp_adv = Instance(v_prime.id, tuple(vals_vp), v_prime.label)
    outcome, adv_label, sim_labels, sim_d = _similar_outcome(params, v_adv, y, schema, config.similar_cap, config.seed, tau)
    return AttackResult(
        mode=mode,
        y=y,
        y_diff=y_diff,
        v=v,
        v_prime=v_prime,
        v_adv=v_adv,
        v_prime_adv=vp_adv,
        steps=tuple(steps),
        success=success,
        f_initial_v=f0_v,
        f_initial_vp=f0_vp,
        trajectory_v=tuple(traj_v),
        trajectory_vp=tuple(traj_vp),
        losses=tuple(losses),
        outcome=outcome,
        adv_label=adv_label,
        similar_labels=sim_labels,
        similar_distances=sim_d,
        stop_reason=stop,
    )


def choose_counterpart(params: Classifier, v: Instance, schema: FeatureSchema, cap: int = 64, seed: int = 0) -> Instance | None:
    """Similar individual with the largest clean probability gap from v (first on ties)."""
    sim = enumerate_similar(v, schema, cap, seed=seed, include_base=False)
    if not sim.members:
        return None
    enc = encoder_for(schema)
    f_v = params.predict_proba(enc.encode_values(v.values)[0])[0, 1]
    f_m = params.predict_proba(enc.encode_many(sim.members))[:, 1]
    return sim.members[int(np.argmax(np.abs(f_m - f_v)))]


@dataclass(frozen=True)
class FgsmResult:
    v_adv: Instance
    label: int
    success: bool  # adversarial label differs from ground truth


def fgsm_baseline(params: Classifier, v: Instance, schema: FeatureSchema, epsilon: float = 0.1, tau_dec: float = 0.5) -> FgsmResult:
    """One signed-gradient step on the loss toward y, non-sensitive features only.

    Continuous features move by epsilon in normalized units and are clamped to
    their bounds. A categorical switches to the category with the largest
    positive gradient when that beats the current category's gradient.
    """
    enc = encoder_for(schema)
    x, _ = enc.encode_values(v.values)
    g = params.loss_input_gradient(x, v.label)[0]
    vals = list(v.values)
    if epsilon > 0:
        for j in schema.nonsensitive_indices:
            spec, sl = schema.features[j], enc.slices[j]
            if spec.is_discrete:
                block = g[sl]
                cur = enc.cat_index[j][vals[j]]
                k = int(np.argmax(block))
                if block[k] > 0 and block[k] > block[cur]:
                    vals[j] = spec.categories[k]
            else:
                z = float(np.clip(x[sl.start] + epsilon * np.sign(g[sl.start]), 0.0, 1.0))
                if z != x[sl.start]:
                    lo, hi = spec.bounds
                    vals[j] = lo + z * (hi - lo)
    v_adv = Instance(v.id, tuple(vals), v.label)
    label = int(threshold_labels(params.predict_proba(enc.encode_values(vals)[0]), tau_dec)[0])
    return FgsmResult(v_adv, label, label != v.label)


@dataclass(frozen=True)
class AdfResult:
    v_adv: Instance
    v_prime_adv: Instance
    success: bool
    steps: int


def adf_baseline(
    params: Classifier,
    v: Instance,
    similar_set: SimilarSet,
    schema: FeatureSchema,
    max_steps: int = 10,
    tau_dec: float = 0.5,
    grid_points: int = 5,
) -> AdfResult:
    """Global-phase discrimination search in the style of ADF.

    Takes the most divergent similar individual, then repeatedly perturbs the
    non-sensitive feature whose input gradients agree in sign for both
    instances with the largest magnitude, choosing the value that widens
    |f(v) - f(v')| the most. Succeeds once the two predicted labels differ.
    """
    others = [m for m in similar_set.members if m.values != v.values]
    if not others:
        raise ValueError("similar set has no member other than v")
    enc = encoder_for(schema)
    x_v, _ = enc.encode_values(v.values)
    f_v = params.predict_proba(x_v)[0, 1]
    f_m = params.predict_proba(enc.encode_many(others))[:, 1]
    vp = others[int(np.argmax(np.abs(f_m - f_v)))]
    x_vp, _ = enc.encode_values(vp.values)
    vals_v, vals_vp = list(v.values), list(vp.values)

    t = 0
    while True:
        P = _pair_state(params, x_v, x_vp)
        lab = threshold_labels(P, tau_dec)
        if lab[0] != lab[1]:
            return AdfResult(Instance(v.id, tuple(vals_v), v.label), Instance(vp.id, tuple(vals_vp), vp.label), True, t)
        if t >= max_steps:
            break
        G = params.loss_input_gradient(np.stack([x_v, x_vp]), lab)
        agree = (np.sign(G[0]) == np.sign(G[1])) & (G[0] != 0)
        score = np.where(agree, np.abs(G[0] + G[1]), -1.0)
        best_j, best_s = None, 0.0
        for j in schema.nonsensitive_indices:
            s = float(score[enc.slices[j]].max())
            if s > best_s:
                best_j, best_s = j, s
        if best_j is None:
            break
        cands = candidate_values(schema, best_j, vals_v[best_j], grid_points)
        Xv = _candidate_block(schema, best_j, x_v, cands)
        Xvp = _candidate_block(schema, best_j, x_vp, cands)
        Pc = params.predict_proba(np.vstack([Xv, Xvp]))
        gaps = np.abs(Pc[: len(cands), 1] - Pc[len(cands) :, 1])
        k = int(np.argmax(gaps))
        if not gaps[k] > abs(P[0, 1] - P[1, 1]):
            break
        x_v, x_vp = Xv[k], Xvp[k]
        vals_v[best_j] = vals_vp[best_j] = cands[k]
        t += 1
    return AdfResult(Instance(v.id, tuple(vals_v), v.label), Instance(vp.id, tuple(vals_vp), vp.label), False, t)

