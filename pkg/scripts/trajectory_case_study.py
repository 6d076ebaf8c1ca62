"""Find a realized multi-step RIFair attack and print its PII/PID trajectory.

Writes the paired trajectory as CSV and SVG and prints the step table with
the decomposition residual and the flip margin.
"""

import argparse
from pathlib import Path

from fairattack.attack import AttackConfig, choose_counterpart, rifair_attack
from fairattack.dataset import Dataset, Instance, split
from fairattack.diagnostics import flip_margin, trajectory_svg, verify_decomposition, write_trajectory_csv
from fairattack.model import TrainConfig, train
from fairattack.resources import dataset_schema
from fairattack.synthetic import ADULT_MARGINALS, SynthConfig, synthesize


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("tb", "fb", "ff"), default="tb")
    ap.add_argument("--rows", type=int, default=10_000)
    ap.add_argument("--min-steps", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/case_study")
    args = ap.parse_args()

    schema = dataset_schema("adult")
    rows, y = synthesize(schema, SynthConfig(n_rows=args.rows, seed=args.seed, marginals=ADULT_MARGINALS))
    ds = Dataset(schema, tuple(Instance(i, tuple(r), int(l)) for i, (r, l) in enumerate(zip(rows, y))))
    train_set, test_set = split(ds, 0.2, args.seed)
    params = train(train_set, schema, TrainConfig(seed=args.seed)).params

    for v in test_set.instances:
        vp = choose_counterpart(params, v, schema)
        res = rifair_attack(params, v, vp, schema, AttackConfig(args.mode))
        if res.success and len(res.steps) >= args.min_steps:
            break
    else:
        raise SystemExit(f"no realized {args.mode} attack with >= {args.min_steps} steps")

    print(f"instance {v.id}, y={v.label}, mode {args.mode}, {len(res.steps)} steps")
    print(f"v  sensitive: {[v.values[j] for j in schema.sensitive_indices]}  f0={res.f_initial_v:.4f}  margin {flip_margin(res.f_initial_v):+.4f}")
    print(f"v' sensitive: {[vp.values[j] for j in schema.sensitive_indices]}  f0={res.f_initial_vp:.4f}  margin {flip_margin(res.f_initial_vp):+.4f}")
    print(f"{'step':>4} {'feature':<16}{'old -> new':<36}{'f(v)':>8}{'pii':>8}{'pid':>5}{'f(vp)':>8}{'pii':>8}{'pid':>5}")
    for p, a, b in zip(res.steps, res.trajectory_v, res.trajectory_vp):
        change = f"{p.old_value} -> {p.new_value}"
        print(f"{p.step_index:>4} {schema.names[p.feature_index]:<16}{change:<36}{a.f_after:>8.4f}{a.pii:>8.4f}{a.pid or 0:>5}"
              f"{b.f_after:>8.4f}{b.pii:>8.4f}{b.pid or 0:>5}")
    for tag, traj, f0 in (("v", res.trajectory_v, res.f_initial_v), ("v'", res.trajectory_vp, res.f_initial_vp)):
        _, resid = verify_decomposition(traj, f0, traj[-1].f_after)
        print(f"decomposition residual for {tag}: {resid:.1e}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / f"{v.id}_{args.mode}.csv", res, schema.names)
    (out / f"{v.id}_{args.mode}.svg").write_text(trajectory_svg(res, title=f"{args.mode.upper()} attack on instance {v.id}"))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
