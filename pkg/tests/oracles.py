"""Independent reference implementations used as test oracles.

Nothing here imports the package's forward pass, gradient, candidate
generation or attack code. Weights are read from plain lists and
evaluated with explicit loops.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

CLIP = 1e-12


def forward_positive(weights, biases, x) -> list[float]:
    """Class probabilities of a ReLU MLP with softmax output, one input vector."""
    h = [float(t) for t in x]
    for layer, (W, b) in enumerate(zip(weights, biases)):
        W = np.asarray(W, dtype=float).tolist()
        out = []
        for j in range(len(b)):
            z = float(b[j]) + math.fsum(h[i] * W[i][j] for i in range(len(h)))
            out.append(z)
        h = out if layer == len(weights) - 1 else [max(z, 0.0) for z in out]
    top = max(h)
    e = [math.exp(z - top) for z in h]
    s = math.fsum(e)
    return [t / s for t in e]


def ce(probs, target) -> float:
    return -math.log(max(probs[target], CLIP))


def fd_gradient(weights, biases, x, target, h=1e-5) -> np.ndarray:
    """Central differences of the cross-entropy w.r.t. each input coordinate."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (ce(forward_positive(weights, biases, xp), target) - ce(forward_positive(weights, biases, xm), target)) / (2 * h)
    return g


def kink_distance(weights, biases, x) -> float:
    """Smallest |pre-activation| over the hidden units."""
    h = [float(t) for t in x]
    best = math.inf
    for W, b in zip(weights[:-1], biases[:-1]):
        W = np.asarray(W, dtype=float)
        z = [float(b[j]) + sum(h[i] * W[i, j] for i in range(len(h))) for j in range(len(b))]
        best = min(best, min(abs(t) for t in z))
        h = [max(t, 0.0) for t in z]
    return best


def encode_row(features, values) -> list[float]:
    """One-hot categoricals, min-max scaled continuous, in feature order.

    ``features`` is a list of dicts: {"kind", "domain"} with domain a list of
    categories or a (lo, hi) pair.
    """
    out = []
    for f, v in zip(features, values):
        if f["kind"] == "categorical":
            out.extend(1.0 if c == v else 0.0 for c in f["domain"])
        else:
            lo, hi = f["domain"]
            out.append(min(max((float(v) - lo) / (hi - lo), 0.0), 1.0))
    return out


def candidates(feature, current, grid_points) -> list:
    if feature["kind"] == "categorical":
        return [c for c in feature["domain"] if c != current]
    lo, hi = feature["domain"]
    step = (hi - lo) / (grid_points - 1)
    pts = {lo + k * step for k in range(grid_points)}
    pts.add(min(max(float(current) - step, lo), hi))
    pts.add(min(max(float(current) + step, lo), hi))
    return sorted(p for p in pts if abs(p - float(current)) > 1e-12 * (hi - lo))


def label(probs, tau=0.5) -> int:
    return int(probs[1] >= tau)


TARGETS = {"tb": lambda y, yd: (y, yd), "fb": lambda y, yd: (yd, y), "ff": lambda y, yd: (yd, yd)}


def reachable_successes(weights, biases, features, perturbable, v, vp, y, mode, max_steps, grid_points, tau=0.5):
    """Every non-sensitive state reachable in <= max_steps paired edits whose pair shows the mode's pattern.

    States are keyed by the tuple of perturbable-feature values.
    """
    y_diff = 1 - y
    want = TARGETS[mode](y, y_diff)
    hits = set()
    frontier = {tuple(v[j] for j in perturbable)}
    seen = set(frontier)

    def check(state):
        a, b = list(v), list(vp)
        for j, val in zip(perturbable, state):
            a[j] = b[j] = val
        pa = forward_positive(weights, biases, encode_row(features, a))
        pb = forward_positive(weights, biases, encode_row(features, b))
        return (label(pa, tau), label(pb, tau)) == want

    for s in frontier:
        if check(s):
            hits.add(s)
    for _ in range(max_steps):
        nxt = set()
        for s in frontier:
            for pos, j in enumerate(perturbable):
                for c in candidates(features[j], s[pos], grid_points):
                    t = s[:pos] + (c,) + s[pos + 1:]
                    if t not in seen:
                        seen.add(t)
                        nxt.add(t)
        for s in nxt:
            if check(s):
                hits.add(s)
        frontier = nxt
    return hits


def brute_states(perturbable, features, start, max_steps, grid_points):
    """States at the end of every explicit edit sequence of length <= max_steps (with repeats)."""
    out = [tuple(start)]
    for depth in range(1, max_steps + 1):
        for seq in itertools.product(range(len(perturbable)), repeat=depth):
            states = [tuple(start)]
            for pos in seq:
                new = []
                for s in states:
                    for c in candidates(features[perturbable[pos]], s[pos], grid_points):
                        new.append(s[:pos] + (c,) + s[pos + 1:])
                states = new
            out.extend(states)
    return out


def nearest_rank(values, p) -> float:
    v = sorted(values)
    k = math.ceil(p * len(v) - 1e-9)
    return v[max(k, 1) - 1]
