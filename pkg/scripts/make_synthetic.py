"""Write seeded synthetic CSVs for the bundled dataset schemas."""

import argparse
from pathlib import Path

from fairattack.resources import DATASETS, dataset_schema
from fairattack.synthetic import ADULT_MARGINALS, SynthConfig, synthesize, write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--datasets", nargs="+", choices=DATASETS, default=list(DATASETS))
    ap.add_argument("--rows", type=int, default=SynthConfig.n_rows)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sensitive-strength", type=float, default=SynthConfig.sensitive_strength)
    args = ap.parse_args()

    out = Path(args.out_dir)
    for name in args.datasets:
        schema = dataset_schema(name)
        cfg = SynthConfig(
            n_rows=args.rows,
            seed=args.seed,
            sensitive_strength=args.sensitive_strength,
            marginals=ADULT_MARGINALS if name == "adult" else None,
        )
        rows, y = synthesize(schema, cfg)
        write_csv(out / f"{name}.csv", schema, rows, y)
        print(f"{name}: {len(rows)} rows, positive rate {y.mean():.3f} -> {out / f'{name}.csv'}")


if __name__ == "__main__":
    main()
